"""Proxy costs built from per-position thresholds, and the threshold grid."""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Iterator, Sequence

from .model import ValidationError, frac_vector, to_fraction
from .sparsify import PositionSet, weight_steps


@dataclass(frozen=True)
class ThresholdVector:
    """Thresholds ``t[l]`` for the positions of ``P``; ``t[0] = inf``, ``t[n+1] = 0``."""

    P: PositionSet
    values: tuple[Fraction, ...]

    def __init__(self, P: PositionSet, values):
        values = frac_vector(values)
        if len(values) != len(P.positions):
            raise ValidationError(f"expected {len(P.positions)} thresholds, got {len(values)}")
        for a in values:
            if a < 0:
                raise ValidationError("thresholds must be nonnegative")
        object.__setattr__(self, "P", P)
        object.__setattr__(self, "values", values)

    def __getitem__(self, l: int) -> Fraction:
        if l > self.P.n:
            return Fraction(0)
        return self.values[self.P.positions.index(l)]

    def items(self):
        return zip(self.P.positions, self.values)

    def scaled(self, c) -> "ThresholdVector":
        c = to_fraction(c)
        return ThresholdVector(self.P, [c * a for a in self.values])

    def floored(self, floor) -> "ThresholdVector":
        floor = to_fraction(floor)
        return ThresholdVector(self.P, [max(a, floor) for a in self.values])

    def as_dict(self) -> dict[int, Fraction]:
        return dict(self.items())


def is_valid(t: ThresholdVector) -> bool:
    return all(a >= b for a, b in zip(t.values, t.values[1:]))


def _require_valid(t):
    if not is_valid(t):
        raise ValidationError("threshold vector must be non-increasing along the positions")


def h_scalar(rho, a) -> Fraction:
    d = to_fraction(a) - to_fraction(rho)
    return d if d > 0 else Fraction(0)


def _steps(tw, P):
    if len(tw) != P.n:
        raise ValidationError(f"weights have length {len(tw)}, positions expect {P.n}")
    return weight_steps(tw, P)


def h_multi(tw: Sequence, t: ThresholdVector, a) -> Fraction:
    """Weighted sum of hinge terms ``(a - t_l)^+`` with weight steps as coefficients."""
    _require_valid(t)
    tw = frac_vector(tw)
    a = to_fraction(a)
    steps = _steps(tw, t.P)
    total = Fraction(0)
    for l, tl in t.items():
        if a > tl:
            total += steps[l] * (a - tl)
    return total


def h_table(tw: Sequence, t: ThresholdVector, values) -> dict:
    """``h_multi`` at each distinct value, sharing the weight-step computation."""
    _require_valid(t)
    steps = _steps(frac_vector(tw), t.P)
    terms = [(steps[l], tl) for l, tl in t.items() if steps[l]]
    out = {}
    for a in set(values):
        total = Fraction(0)
        for s, tl in terms:
            if a > tl:
                total += s * (a - tl)
        out[a] = total
    return out


def h_multi_bands(tw: Sequence, t: ThresholdVector, a) -> Fraction:
    """Same value as :func:`h_multi`, summed band by band between consecutive thresholds."""
    _require_valid(t)
    tw = frac_vector(tw)
    a = to_fraction(a)
    P = t.P
    if len(tw) != P.n:
        raise ValidationError(f"weights have length {len(tw)}, positions expect {P.n}")
    total = Fraction(0)
    for l in (0,) + P.positions:
        nx = P.next(l)
        w_next = tw[nx - 1] if nx <= P.n else Fraction(0)
        upper = a if l == 0 else min(a, t[l])
        lower = t[nx]
        if upper > lower:
            total += w_next * (upper - lower)
    return total


def threshold_constant(tw: Sequence, t: ThresholdVector) -> Fraction:
    """The part of the proxy cost that does not depend on the cost vector."""
    steps = _steps(frac_vector(tw), t.P)
    return sum((steps[l] * l * tl for l, tl in t.items()), Fraction(0))


def prox(tw: Sequence, t: ThresholdVector, v: Sequence) -> Fraction:
    _require_valid(t)
    tw = frac_vector(tw)
    return threshold_constant(tw, t) + sum((h_multi(tw, t, a) for a in frac_vector(v)), Fraction(0))


# --- threshold enumeration ---------------------------------------------------


def _max_exponent(base: Fraction, eps: Fraction, n: int) -> int:
    # largest j with t1 / base^j >= eps * t1 / (n * base)
    limit = n * base / eps
    j, power = 0, Fraction(1)
    while power * base <= limit:
        power *= base
        j += 1
    return j


def _nondecreasing(length: int, lo: int, hi: int) -> Iterator[tuple[int, ...]]:
    if length == 0:
        yield ()
        return
    for first in range(lo, hi + 1):
        for rest in _nondecreasing(length - 1, first, hi):
            yield (first,) + rest


def iter_thresholds(
    P: PositionSet,
    S: Iterable,
    eps,
    n: int,
    geometric_base,
    floor_zeros: bool = False,
) -> Iterator[ThresholdVector]:
    """Yield the threshold grid in a fixed order without duplicates.

    For each first threshold ``t1`` in ``S`` and each cut-off position, the
    thresholds up to the cut-off are ``t1 / base^j`` with ``j`` non-decreasing
    and bounded so that ``t_l >= eps*t1/(n*base)``; beyond the cut-off they
    are zero, or ``eps*t1/n`` under ``floor_zeros`` (which also lifts every
    entry to at least that floor).
    """
    eps = to_fraction(eps)
    base = to_fraction(geometric_base)
    if eps <= 0:
        raise ValidationError("eps must be positive")
    if base <= 1:
        raise ValidationError("geometric base must exceed 1")
    S = sorted(set(to_fraction(s) for s in S))
    if not S:
        raise ValidationError("candidate set for the first threshold is empty")
    J = _max_exponent(base, eps, n)
    k = len(P.positions)
    seen = set()

    def emit(vals):
        key = tuple(vals)
        if key not in seen:
            seen.add(key)
            return ThresholdVector(P, key)
        return None

    zero = emit([Fraction(0)] * k)
    if zero is not None:
        yield zero
    powers = [base ** j for j in range(J + 1)]
    for t1 in S:
        if t1 <= 0:
            continue
        tail = eps * t1 / n if floor_zeros else Fraction(0)
        for cut in range(1, k + 1):
            for js in _nondecreasing(cut - 1, 0, J):
                vals = [t1] + [t1 / powers[j] for j in js] + [tail] * (k - cut)
                if floor_zeros:
                    vals = [max(v, tail) for v in vals]
                tv = emit(vals)
                if tv is not None:
                    yield tv


def enumerate_thresholds(P, S, eps, n, geometric_base, floor_zeros: bool = False) -> list[ThresholdVector]:
    return list(iter_thresholds(P, S, eps, n, geometric_base, floor_zeros))


def enumeration_bound(P: PositionSet, S_size: int, eps, n: int, geometric_base) -> int:
    """Upper bound on the grid size: per ``t1`` and cut-off, at most ``(2e)^max(N, k)`` sequences."""
    import math

    J = _max_exponent(to_fraction(geometric_base), to_fraction(eps), n)
    k = len(P.positions)
    per = math.ceil((2 * math.e) ** max(J + 1, k))
    return S_size * k * per + 1


def cover_target(P: PositionSet, o: Sequence, t1, eps, n: int, geometric_base) -> ThresholdVector:
    """The grid point that sandwiches the sorted target ``o`` (used to check coverage)."""
    eps = to_fraction(eps)
    base = to_fraction(geometric_base)
    t1 = to_fraction(t1)
    o = sorted(frac_vector(o), reverse=True)
    vals = []
    for l in P.positions:
        ol = o[l - 1]
        if o[0] == 0 or ol < eps * o[0] / n:
            vals.append(Fraction(0))
            continue
        tl = t1
        while l > 1 and tl / base >= ol:
            tl /= base
        vals.append(tl)
    return ThresholdVector(P, vals)
