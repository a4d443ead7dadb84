"""Ball-optimisation oracles and the reduction from min-norm to min-max ordered."""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from .lpround import LinearProgram, solve_lp
from .model import (
    ClusterInstance,
    LoadBalInstance,
    Lp,
    MaxOrdered,
    Ordered,
    TopL,
    ValidationError,
    frac_vector,
    norm_eval,
    to_fraction,
)
from .proxy import _max_exponent, _nondecreasing
from .sparsify import position_set

FLOAT_BAND_TOL = 1e-9


@dataclass(frozen=True)
class Bounds:
    """``lb <= OPT <= ub`` and ``high`` bounds the largest optimal coordinate."""

    high: Fraction
    lb: Fraction
    ub: Fraction

    def __post_init__(self):
        if not (0 < self.lb <= self.ub):
            raise ValidationError("bounds need 0 < lb <= ub")
        if self.high < 1:
            raise ValidationError("high must be at least 1")


# --- ball oracles ------------------------------------------------------------------


def _sorted_ball_lp(c_sorted, ws) -> LinearProgram:
    n = len(c_sorted)
    lp = LinearProgram.empty(n)
    for i in range(n):
        lp.c[i] = -c_sorted[i]
    for i in range(n - 1):
        lp.add_ge({i: 1, i + 1: -1}, 0)
    for w in ws:
        lp.add_le({i: w[i] for i in range(n) if w[i]}, 1)
    return lp


def ball_opt_lp(f, c):
    """Ball optimum via the LP over sorted points; only for Ordered, TopL and MaxOrdered."""
    c = frac_vector(c)
    n = len(c)
    if isinstance(f, TopL):
        ws = [[Fraction(1) if i < f.l else Fraction(0) for i in range(n)]]
    elif isinstance(f, Ordered):
        ws = [f.w]
    elif isinstance(f, MaxOrdered):
        ws = list(f.ws)
    else:
        raise ValidationError("LP oracle only covers ordered families")
    order = sorted(range(n), key=lambda i: (-c[i], i))
    cs = [c[i] for i in order]
    sol = solve_lp(_sorted_ball_lp(cs, ws), "exact")
    point = [Fraction(0)] * n
    for pos, i in enumerate(order):
        point[i] = sol.x[pos]
    return -sol.objective, tuple(point)


def _block_oracle(prefix_w, c):
    # optimum over sorted points is at a uniform block 1_[s] / W_s
    n = len(c)
    order = sorted(range(n), key=lambda i: (-c[i], i))
    best, best_s, acc = None, None, Fraction(0)
    for s in range(1, n + 1):
        acc += c[order[s - 1]]
        if prefix_w[s - 1] == 0:
            if acc > 0:
                raise ValidationError("norm is degenerate on the support of c")
            continue
        val = acc / prefix_w[s - 1]
        if best is None or val > best:
            best, best_s = val, s
    point = [Fraction(0)] * n
    if best is None:
        return Fraction(0), tuple(point)
    for pos in range(best_s):
        point[order[pos]] = 1 / prefix_w[best_s - 1]
    return best, tuple(point)


def ball_opt(f, c):
    """Maximise ``c . x`` over ``x >= 0`` with ``f(x) <= 1``; returns ``(value, point)``.

    Exact for the ordered families; ``Lp`` with ``1 < p < inf`` uses floats.
    """
    c = frac_vector(c)
    for a in c:
        if a < 0:
            raise ValidationError("ball oracle needs a nonnegative objective")
    n = len(c)
    if isinstance(f, Lp):
        if f.p is None:
            return sum(c, Fraction(0)), tuple(Fraction(1) for _ in c)
        if f.p == 1:
            i = min(range(n), key=lambda i: (-c[i], i))
            return c[i], tuple(Fraction(int(k == i)) for k in range(n))
        p = float(f.p)
        q = p / (p - 1)
        cf = [float(a) for a in c]
        top = max(cf, default=0.0)
        if top == 0.0:
            return 0.0, tuple(0.0 for _ in c)
        val = top * math.fsum((a / top) ** q for a in cf) ** (1 / q)
        point = tuple((a / val) ** (q - 1) for a in cf)
        return val, point
    if isinstance(f, TopL):
        return _block_oracle([Fraction(min(s, f.l)) for s in range(1, n + 1)], c)
    if isinstance(f, Ordered):
        if len(f.w) != n:
            raise ValidationError(f"norm has dimension {len(f.w)}, objective has {n}")
        pw, acc = [], Fraction(0)
        for a in f.w:
            acc += a
            pw.append(acc)
        return _block_oracle(pw, c)
    if isinstance(f, MaxOrdered):
        return ball_opt_lp(f, c)
    raise ValidationError(f"unsupported norm {f!r}")


# --- weight collection ---------------------------------------------------------------


def _prefix(w):
    out, acc = [], Fraction(0)
    for a in w:
        acc += a
        out.append(acc)
    return tuple(out)


def prune_dominated(ws: Sequence) -> list:
    """Drop weights whose prefix sums are everywhere at most another's.

    For sorted ``v``, ``obj(w; v) = sum_s W_s (v_s - v_{s+1})`` with ``W`` the
    prefix sums, so a dominated weight never attains the maximum alone.
    """
    items = sorted({tuple(w) for w in ws}, key=lambda w: (_prefix(w)[::-1], w), reverse=True)
    kept, kept_pre = [], []
    for w in items:
        pw = _prefix(w)
        if any(all(a <= b for a, b in zip(pw, kp)) for kp in kept_pre):
            continue
        kept.append(w)
        kept_pre.append(pw)
    return sorted(kept)


@dataclass
class WeightCollection:
    weights: list
    sentinel: tuple
    candidates: int
    oracle_calls: int

    def all(self):
        return list(self.weights) + [self.sentinel]


def _expand(P, u):
    n = P.n
    w = [Fraction(0)] * n
    pos = P.positions
    for idx, l in enumerate(pos):
        nxt = pos[idx + 1] if idx + 1 < len(pos) else n + 1
        w[l - 1] = u[idx]
        # gap after l takes the next position's value
        if idx + 1 < len(pos):
            for i in range(l + 1, nxt):
                w[i - 1] = u[idx + 1]
    return tuple(w)


def weight_collection_bound(n: int, eps, bounds: Bounds) -> int:
    """Number of candidates the enumeration can produce (an upper bound on the oracle calls)."""
    eps = to_fraction(eps)
    P = position_set(n, eps)
    base = 1 + eps
    J = _max_exponent(base, eps, n)
    k = len(P.positions)
    shapes = sum(math.comb(J + c - 1, c - 1) for c in range(1, k + 1))
    lo = bounds.lb / (n * bounds.high)
    hi = bounds.ub * base
    scales = math.floor(math.log(float(hi / lo)) / math.log(float(base))) + 2
    return shapes * scales


def build_weight_collection(f, eps, bounds: Bounds, n: int, prune: bool = True) -> WeightCollection:
    """Enumerate sparsified power-of-(1+eps) weights and keep those near the unit sphere of the dual.

    A candidate survives when the ball optimum of ``f`` in its direction lies
    in ``[(1-eps)/kappa, 1+eps]``.  Weights are enumerated as a shape (first
    entry 1) times a scale, so the oracle runs once per shape.
    """
    eps = to_fraction(eps)
    if not 0 < eps <= Fraction(1, 2):
        raise ValidationError("eps must lie in (0, 1/2]")
    P = position_set(n, eps)
    base = 1 + eps
    J = _max_exponent(base, eps, n)
    k = len(P.positions)
    kappa = getattr(f, "kappa", 1)
    lo_band = (1 - eps) / kappa
    hi_band = 1 + eps
    u_lo = bounds.lb / (n * bounds.high)
    u_hi = bounds.ub * base
    # exponents s with base^s in [u_lo, u_hi)
    s = 0
    while base ** s < u_lo:
        s += 1
    while base ** (s - 1) >= u_lo:
        s -= 1
    scales = []
    while base ** s < u_hi:
        scales.append(base ** s)
        s += 1
    kept = []
    calls = candidates = 0
    powers = [base ** j for j in range(J + 1)]
    for cut in range(1, k + 1):
        for js in _nondecreasing(cut - 1, 0, J):
            shape = [Fraction(1)] + [1 / powers[j] for j in js] + [Fraction(0)] * (k - cut)
            w1 = _expand(P, shape)
            calls += 1
            val, _ = ball_opt(f, w1)
            exact = isinstance(val, Fraction)
            for sc in scales:
                candidates += 1
                b = sc * val if exact else float(sc) * val
                if exact:
                    ok = lo_band <= b <= hi_band
                else:
                    ok = float(lo_band) - FLOAT_BAND_TOL <= b <= float(hi_band) + FLOAT_BAND_TOL
                if ok:
                    kept.append(tuple(sc * a for a in w1))
    if prune:
        kept = prune_dominated(kept)
    else:
        kept = sorted(set(kept))
    sentinel = tuple(u_lo for _ in range(n))
    return WeightCollection(kept, sentinel, candidates, calls)


# --- problem bounds and the reduction ---------------------------------------------------


def _unit(n):
    return [Fraction(1)] + [Fraction(0)] * (n - 1)


def _norm_scalar(f, n, a):
    val = norm_eval(f, [to_fraction(a)] + [Fraction(0)] * (n - 1))
    return val if isinstance(val, Fraction) else to_fraction(val)


def lb_bounds(inst: LoadBalInstance, f) -> Bounds:
    m = inst.m
    mins = [min(inst.p[i][j] for i in range(m)) for j in range(inst.n)]
    return Bounds(
        high=sum(mins, Fraction(0)),
        lb=_norm_scalar(f, m, 1),
        ub=sum((_norm_scalar(f, m, a) for a in mins), Fraction(0)),
    )


def _distance_scale(inst: ClusterInstance) -> Fraction:
    nz = [a for row in inst.c for a in row if a > 0]
    return min(nz)


def cluster_bounds(inst: ClusterInstance, f) -> Bounds:
    """Bounds after scaling so the smallest nonzero distance is 1."""
    n = inst.n
    s = _distance_scale(inst)
    maxes = [max(inst.c[i][j] for i in range(n)) / s for j in range(n)]
    return Bounds(
        high=sum(maxes, Fraction(0)),
        lb=_norm_scalar(f, n, 1),
        ub=sum((_norm_scalar(f, n, a) for a in maxes), Fraction(0)),
    )


def lb_is_zero(inst: LoadBalInstance) -> bool:
    return all(any(inst.p[i][j] == 0 for i in range(inst.m)) for j in range(inst.n))


def cluster_is_zero(inst: ClusterInstance) -> bool:
    # zero-distance classes of a metric are equivalence classes
    reps = []
    for j in range(inst.n):
        if not any(inst.c[r][j] == 0 for r in reps):
            reps.append(j)
    return len(reps) <= inst.k


@dataclass
class MinNormResult:
    solution: tuple
    value: object
    collection: WeightCollection | None
    guarantee: Fraction
    diagnostics: dict


def minnorm_reduce_and_solve(problem: str, inst, f, eps=Fraction(1, 4)) -> MinNormResult:
    """Min-norm load balancing (``problem='lb'``) or clustering (``'km'``) through min-max ordered."""
    eps = to_fraction(eps)
    from . import cluster, loadbal

    kappa = getattr(f, "kappa", 1)
    if problem == "lb":
        dim = inst.m
        if lb_is_zero(inst):
            sig = loadbal._min_assignment(inst)
            return MinNormResult(sig, Fraction(0), None, Fraction(1), {"zero_instance": True})
        bounds = lb_bounds(inst, f)
    elif problem == "km":
        dim = inst.n
        if cluster_is_zero(inst):
            F = cluster.zero_cost_facilities(inst)
            return MinNormResult(F, Fraction(0), None, Fraction(1), {"zero_instance": True})
        bounds = cluster_bounds(inst, f)
    else:
        raise ValidationError(f"unknown problem {problem!r}")
    from .model import norm_dimension

    nd = norm_dimension(f)
    if nd is not None and nd != dim:
        raise ValidationError(f"norm has dimension {nd}, problem needs {dim}")
    coll = build_weight_collection(f, eps, bounds, dim)
    ws = coll.all()
    if problem == "lb":
        res = loadbal.solve_minmax_ordered_lb(inst, ws, delta=eps)
        v = norm_eval(f, loadbal.load_vector(inst, res.sigma))
        minmax_factor = 38 * (1 + eps)
        sol = res.sigma
    else:
        res = cluster.solve_minmax_ordered_km(inst, ws, eps=eps)
        v = norm_eval(f, cluster.assign_cost_vector(inst, res.facilities))
        minmax_factor = cluster.minmax_factor(eps)
        sol = res.facilities
    diag = dict(res.diagnostics)
    diag.update({"weights": len(ws), "candidates": coll.candidates, "oracle_calls": coll.oracle_calls})
    return MinNormResult(sol, v, coll, minmax_factor * kappa * (1 + 3 * eps), diag)
