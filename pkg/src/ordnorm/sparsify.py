"""Sparse position sets and weight sparsification."""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from .model import ValidationError, check_weights, to_fraction


def _ceil(q: Fraction) -> int:
    return -((-q.numerator) // q.denominator)


@dataclass(frozen=True)
class PositionSet:
    """The positions ``min(ceil((1+delta)^s), n)`` for ``s = 0, 1, ...``."""

    n: int
    delta: Fraction
    positions: tuple[int, ...]

    def next(self, l: int) -> int:
        """Smallest position above ``l``; ``n + 1`` past the end, ``1`` for ``l = 0``."""
        for p in self.positions:
            if p > l:
                return p
        return self.n + 1

    def prev(self, l: int) -> int:
        """Largest position strictly below ``l`` (0 if none)."""
        best = 0
        for p in self.positions:
            if p < l:
                best = p
        return best

    def __iter__(self):
        return iter(self.positions)

    def __len__(self):
        return len(self.positions)

    def __contains__(self, l):
        return l in self.positions


def position_set(n: int, delta) -> PositionSet:
    n = int(n)
    delta = to_fraction(delta)
    if n < 1:
        raise ValidationError(f"n must be >= 1, got {n}")
    if delta <= 0:
        raise ValidationError(f"delta must be positive, got {delta}")
    base = 1 + delta
    pos = []
    power = Fraction(1)
    while True:
        val = min(_ceil(power), n)
        if not pos or val != pos[-1]:
            pos.append(val)
        if val == n:
            break
        power *= base
    return PositionSet(n, delta, tuple(pos))


def sparsify_weights(w: Sequence, P: PositionSet) -> tuple[Fraction, ...]:
    """Keep ``w`` on the positions and copy ``w[next(l)]`` into the gap after ``l``."""
    w = check_weights(w)
    if len(w) != P.n:
        raise ValidationError(f"weight length {len(w)} does not match n={P.n}")
    tw = list(w)
    pos = P.positions
    for a, b in zip(pos, pos[1:]):
        # 1-based gap a < i < b takes w_b
        for i in range(a + 1, b):
            tw[i - 1] = w[b - 1]
    return tuple(tw)


def weight_steps(tw: Sequence, P: PositionSet) -> dict[int, Fraction]:
    """``tw[l] - tw[next(l)]`` for every position ``l`` (with ``tw[n+1] = 0``)."""
    out = {}
    for l in P.positions:
        nx = P.next(l)
        out[l] = tw[l - 1] - (tw[nx - 1] if nx <= P.n else 0)
    return out
