"""Problem instances, cost vectors and monotone symmetric norms.

Everything numeric is stored as ``fractions.Fraction`` so the rounding
inequalities downstream can be checked exactly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from decimal import Decimal, InvalidOperation
from fractions import Fraction
from typing import Iterable, Sequence


class ValidationError(ValueError):
    """Raised when input data violates a documented invariant."""


def to_fraction(x) -> Fraction:
    """Coerce ints, Fractions, numeric strings ("3", "1/2", "0.25") or floats."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, bool):
        raise ValidationError(f"not a number: {x!r}")
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, float):
        if not math.isfinite(x):
            raise ValidationError(f"non-finite number: {x!r}")
        # repr round-trips, so 0.1 becomes 1/10 instead of its binary expansion
        return Fraction(repr(x))
    if isinstance(x, str):
        s = x.strip()
        try:
            if "/" in s:
                a, b = s.split("/")
                return Fraction(int(a), int(b))
            return Fraction(Decimal(s))
        except (ValueError, ZeroDivisionError, InvalidOperation) as exc:
            raise ValidationError(f"cannot parse number {x!r}") from exc
    try:
        # numpy scalars, mpq and friends
        if hasattr(x, "numerator") and hasattr(x, "denominator"):
            return Fraction(int(x.numerator), int(x.denominator))
        return to_fraction(float(x))
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"not a number: {x!r}") from exc


def frac_vector(v: Iterable) -> tuple[Fraction, ...]:
    return tuple(to_fraction(a) for a in v)


def _check_nonneg(v, what):
    for a in v:
        if a < 0:
            raise ValidationError(f"{what} must be nonnegative, got {a}")


@dataclass(frozen=True)
class LoadBalInstance:
    """Unrelated machines: ``p[i][j]`` is the time of job ``j`` on machine ``i``."""

    p: tuple[tuple[Fraction, ...], ...]

    def __init__(self, p):
        rows = tuple(frac_vector(r) for r in p)
        if not rows or not rows[0]:
            raise ValidationError("need at least one machine and one job")
        n = len(rows[0])
        for r in rows:
            if len(r) != n:
                raise ValidationError("ragged processing-time matrix")
            _check_nonneg(r, "processing time")
            for a in r:
                if a.denominator != 1:
                    raise ValidationError(f"processing times must be integers, got {a}")
        object.__setattr__(self, "p", rows)

    @property
    def m(self) -> int:
        return len(self.p)

    @property
    def n(self) -> int:
        return len(self.p[0])


@dataclass(frozen=True)
class ClusterInstance:
    """A finite metric on ``n`` points (clients = facilities) and a budget ``k``."""

    c: tuple[tuple[Fraction, ...], ...]
    k: int

    def __init__(self, c, k: int, check_metric: bool = True):
        rows = tuple(frac_vector(r) for r in c)
        n = len(rows)
        if n == 0:
            raise ValidationError("empty metric")
        for r in rows:
            if len(r) != n:
                raise ValidationError("distance matrix must be square")
            _check_nonneg(r, "distance")
        k = int(k)
        if not 1 <= k <= n:
            raise ValidationError(f"k must lie in [1, {n}], got {k}")
        if check_metric:
            for i in range(n):
                if rows[i][i] != 0:
                    raise ValidationError(f"c[{i}][{i}] must be 0")
                for j in range(i):
                    if rows[i][j] != rows[j][i]:
                        raise ValidationError(f"asymmetric distance at ({i}, {j})")
            for i in range(n):
                for j in range(n):
                    cij = rows[i][j]
                    for l in range(n):
                        if cij > rows[i][l] + rows[l][j]:
                            raise ValidationError(
                                f"triangle inequality fails: c[{i}][{j}] > c[{i}][{l}] + c[{l}][{j}]"
                            )
        object.__setattr__(self, "c", rows)
        object.__setattr__(self, "k", k)

    @property
    def n(self) -> int:
        return len(self.c)


def check_weights(w) -> tuple[Fraction, ...]:
    """Validate a non-increasing nonnegative weight vector."""
    w = frac_vector(w)
    if not w:
        raise ValidationError("empty weight vector")
    _check_nonneg(w, "weight")
    for a, b in zip(w, w[1:]):
        if b > a:
            raise ValidationError("weights must be non-increasing")
    return w


def check_assignment(inst: LoadBalInstance, sigma: Sequence[int]) -> tuple[int, ...]:
    sigma = tuple(int(s) for s in sigma)
    if len(sigma) != inst.n:
        raise ValidationError(f"assignment has length {len(sigma)}, expected {inst.n}")
    for s in sigma:
        if not 0 <= s < inst.m:
            raise ValidationError(f"machine index {s} out of range")
    return sigma


def sorted_desc(v: Sequence) -> list:
    return sorted(v, reverse=True)


def topl_cost(l: int, v: Sequence) -> Fraction:
    """Sum of the ``l`` largest entries of ``v``."""
    v = frac_vector(v)
    if not 1 <= l <= len(v):
        raise ValidationError(f"l={l} out of range for a vector of length {len(v)}")
    return sum(sorted_desc(v)[:l], Fraction(0))


def ordered_cost(w: Sequence, v: Sequence) -> Fraction:
    """Inner product of ``w`` with ``v`` sorted in non-increasing order."""
    w = frac_vector(w)
    v = frac_vector(v)
    if len(w) != len(v):
        raise ValidationError(f"length mismatch: {len(w)} weights vs {len(v)} costs")
    return sum((a * b for a, b in zip(w, sorted_desc(v))), Fraction(0))


# --- norms ---------------------------------------------------------------


@dataclass(frozen=True)
class Lp:
    p: Fraction | None  # None means infinity
    kappa: int = 1

    def __init__(self, p):
        if p is None or (isinstance(p, str) and p.strip().lower() in ("inf", "infinity")):
            object.__setattr__(self, "p", None)
        else:
            p = to_fraction(p)
            if p < 1:
                raise ValidationError(f"p must be >= 1, got {p}")
            object.__setattr__(self, "p", p)
        object.__setattr__(self, "kappa", 1)

    def describe(self) -> str:
        return "lp inf" if self.p is None else f"lp {self.p}"


@dataclass(frozen=True)
class TopL:
    l: int
    kappa: int = 1

    def __init__(self, l: int):
        l = int(l)
        if l < 1:
            raise ValidationError(f"l must be >= 1, got {l}")
        object.__setattr__(self, "l", l)
        object.__setattr__(self, "kappa", 1)

    def describe(self) -> str:
        return f"topl {self.l}"


@dataclass(frozen=True)
class Ordered:
    w: tuple[Fraction, ...]
    kappa: int = 1

    def __init__(self, w):
        object.__setattr__(self, "w", check_weights(w))
        object.__setattr__(self, "kappa", 1)

    def describe(self) -> str:
        return "ordered [" + ",".join(str(a) for a in self.w) + "]"


@dataclass(frozen=True)
class MaxOrdered:
    ws: tuple[tuple[Fraction, ...], ...]
    kappa: int = 1

    def __init__(self, ws):
        ws = tuple(check_weights(w) for w in ws)
        if not ws:
            raise ValidationError("max-of-ordered norm needs at least one weight vector")
        if len({len(w) for w in ws}) != 1:
            raise ValidationError("all weight vectors must share a dimension")
        object.__setattr__(self, "ws", ws)
        object.__setattr__(self, "kappa", 1)

    def describe(self) -> str:
        return "maxord " + " ".join("[" + ",".join(str(a) for a in w) + "]" for w in self.ws)


NormSpec = Lp | TopL | Ordered | MaxOrdered


def norm_dimension(f) -> int | None:
    if isinstance(f, Ordered):
        return len(f.w)
    if isinstance(f, MaxOrdered):
        return len(f.ws[0])
    return None


def norm_eval(f, v: Sequence):
    """Value of the norm ``f`` at ``v``.

    Exact (a Fraction) for every family except ``Lp`` with ``p`` not in
    ``{1, inf}``, which is computed in floating point.
    """
    v = frac_vector(v)
    dim = norm_dimension(f)
    if dim is not None and dim != len(v):
        raise ValidationError(f"norm has dimension {dim}, vector has length {len(v)}")
    if isinstance(f, Lp):
        if f.p is None:
            return max((abs(a) for a in v), default=Fraction(0))
        if f.p == 1:
            return sum((abs(a) for a in v), Fraction(0))
        p = float(f.p)
        top = max((abs(float(a)) for a in v), default=0.0)
        if top == 0.0:
            return 0.0
        # scale first to keep large powers finite
        return top * math.fsum((abs(float(a)) / top) ** p for a in v) ** (1.0 / p)
    if isinstance(f, TopL):
        if f.l > len(v):
            raise ValidationError(f"Top-{f.l} needs dimension >= {f.l}")
        return topl_cost(f.l, [abs(a) for a in v])
    if isinstance(f, Ordered):
        return ordered_cost(f.w, [abs(a) for a in v])
    if isinstance(f, MaxOrdered):
        av = [abs(a) for a in v]
        return max(ordered_cost(w, av) for w in f.ws)
    raise ValidationError(f"unsupported norm {f!r}")


# --- induced cost vectors ---------------------------------------------------


def load_vector(inst: LoadBalInstance, sigma: Sequence[int]) -> tuple[Fraction, ...]:
    sigma = check_assignment(inst, sigma)
    loads = [Fraction(0)] * inst.m
    for j, i in enumerate(sigma):
        loads[i] += inst.p[i][j]
    return tuple(loads)


def assign_cost_vector(inst: ClusterInstance, F: Iterable[int]) -> tuple[Fraction, ...]:
    """Distance of every client to its nearest open facility."""
    F = sorted(set(int(i) for i in F))
    if not F:
        raise ValidationError("need at least one open facility")
    if len(F) > inst.k:
        raise ValidationError(f"{len(F)} facilities exceed the budget k={inst.k}")
    for i in F:
        if not 0 <= i < inst.n:
            raise ValidationError(f"facility index {i} out of range")
    return tuple(min(inst.c[i][j] for i in F) for j in range(inst.n))


def nearest_facility(inst: ClusterInstance, F: Iterable[int]) -> tuple[int, ...]:
    """Lowest-index nearest open facility for every client."""
    F = sorted(set(F))
    return tuple(min(F, key=lambda i: (inst.c[i][j], i)) for j in range(inst.n))
