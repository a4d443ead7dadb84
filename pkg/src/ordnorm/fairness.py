"""Multi-budgeted ordered optimization and instance-optimal simultaneous optimization.

Both problems reuse the min-max LPs and the weight-oblivious roundings: a
budget vector is met by any LP-feasible threshold guess up to a constant,
and the best simultaneous factor is approximated by budgeting every sparse
Top-l norm at ``A`` times a guessed estimate of its optimum.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from . import cluster, loadbal
from .lpround import InfeasibleLP, polish, solve_lp, solve_lp_float
from .model import (
    ClusterInstance,
    LoadBalInstance,
    ValidationError,
    assign_cost_vector,
    check_weights,
    load_vector,
    ordered_cost,
    to_fraction,
    topl_cost,
)
from .proxy import h_table, iter_thresholds, threshold_constant
from .sparsify import position_set, sparsify_weights

INF = math.inf


@dataclass(frozen=True)
class BudgetSpec:
    weights: tuple
    budgets: tuple  # Fraction, or math.inf for "no budget"

    def __init__(self, weights, budgets):
        ws = tuple(check_weights(w) for w in weights)
        if len(ws) != len(budgets):
            raise ValidationError(f"{len(ws)} weight vectors but {len(budgets)} budgets")
        bs = []
        for b in budgets:
            if b is None or (isinstance(b, float) and math.isinf(b)) or b == "inf":
                bs.append(INF)
                continue
            b = to_fraction(b)
            if b < 0:
                raise ValidationError("budgets must be nonnegative")
            bs.append(b)
        object.__setattr__(self, "weights", ws)
        object.__setattr__(self, "budgets", tuple(bs))


# --- per-problem plumbing --------------------------------------------------------------


class _LbAdapter:
    kind = "lb"

    def __init__(self, inst: LoadBalInstance):
        self.inst = inst
        self.dim = inst.m
        self.P = position_set(inst.m, 1)
        self.row_factor = Fraction(3)
        self.rho = 38 * 2

    def is_zero(self):
        return loadbal._high(self.inst) == 0

    def any_solution(self):
        return loadbal._min_assignment(self.inst)

    def guesses(self):
        two = Fraction(2)
        return list(iter_thresholds(self.P, loadbal._powers(two, 1, loadbal._high(self.inst)), 1, self.inst.m, two))

    def lp(self, tws, t, budgets=None):
        # rows read ``const + LP <= 3 B``
        return loadbal.build_minmax_lb_lp(self.inst, tws, t, budgets)

    def lower(self, tw, t):
        return threshold_constant(tw, t)

    def extra(self, tw, t):
        return 4 * sum((tw[l - 1] * tl for l, tl in t.items()), Fraction(0))

    def round(self, t, x):
        sol = loadbal.OlbSolution.from_vector(self.inst, t, x)
        sigma, _ = loadbal.oblivious_round_lb(sol)
        return sigma

    def costs(self, sol):
        return load_vector(self.inst, sol)


class _KmAdapter:
    kind = "km"

    def __init__(self, inst: ClusterInstance, eps=Fraction(1, 2)):
        self.inst = inst
        self.dim = inst.n
        self.eps = to_fraction(eps)
        self.P = position_set(inst.n, 1)
        self.row_factor = 1 + 3 * self.eps
        self.rho = cluster.minmax_factor(self.eps)

    def is_zero(self):
        try:
            cluster.zero_cost_facilities(self.inst)
            return True
        except ValidationError:
            return False

    def any_solution(self):
        return tuple(range(self.inst.k))

    def guesses(self):
        S = cluster._distance_values(self.inst)
        gs = iter_thresholds(self.P, S, self.eps, self.inst.n, 1 + self.eps, floor_zeros=True)
        return [t for t in gs if all(a > 0 for a in t.values)]

    def lp(self, tws, t, budgets=None):
        if budgets is not None:
            budgets = [self.row_factor * b for b in budgets]
        return cluster.build_minmax_km_lp(self.inst, tws, t, budgets)

    def lower(self, tw, t):
        """Proxy constant plus the cost every client pays at least (all but ``k`` pay their nearest other point)."""
        if not hasattr(self, "_u"):
            self._u = _nn_lower(self.inst)
        tab = h_table(tw, t, self._u)
        return threshold_constant(tw, t) + sum((tab[a] for a in self._u), Fraction(0))

    def extra(self, tw, t):
        P = t.P
        return 40 * sum((tw[l - 1] * P.next(l) * tl for l, tl in t.items()), Fraction(0))

    def round(self, t, x):
        sol = cluster.OclSolution.from_vector(self.inst, t, x)
        return cluster.oblivious_round_cluster(sol).facilities

    def costs(self, sol):
        return assign_cost_vector(self.inst, sol)


def _nn_lower(inst):
    n, k = inst.n, inst.k
    nn = [min((inst.c[i][j] for i in range(n) if i != j), default=Fraction(0)) for j in range(n)]
    for j in sorted(range(n), key=lambda j: (-nn[j], j))[:k]:
        nn[j] = Fraction(0)
    return nn


def _adapter(problem, inst, eps=Fraction(1, 2)):
    if problem == "lb":
        if not isinstance(inst, LoadBalInstance):
            raise ValidationError("problem 'lb' needs a LoadBalInstance")
        return _LbAdapter(inst)
    if problem == "km":
        if not isinstance(inst, ClusterInstance):
            raise ValidationError("problem 'km' needs a ClusterInstance")
        return _KmAdapter(inst, eps)
    raise ValidationError(f"unknown problem {problem!r}")


def _exact_point(lp):
    xf = solve_lp_float(lp)
    x = polish(lp, xf)
    if x is None:
        x = list(solve_lp(lp, "exact").x)
    return x


# --- multi-budget --------------------------------------------------------------------


@dataclass
class BudgetResult:
    solution: tuple
    costs: tuple
    violation: Fraction | None
    diagnostics: dict = field(default_factory=dict)


def solve_multibudget(problem: str, inst, spec: BudgetSpec, eps=Fraction(1, 2)) -> BudgetResult | None:
    """A solution with ``obj(w_r) <= rho * B_r`` for every ``r``, or None.

    None certifies that no solution meets all budgets exactly: every
    threshold guess leaves the budgeted LP infeasible.  Among the feasible
    guesses the one with the smallest threshold term relative to its budget
    is rounded, which is what the constant ``rho`` is proved for.
    """
    ad = _adapter(problem, inst, eps)
    if any(len(w) != ad.dim for w in spec.weights):
        raise ValidationError(f"weights must have length {ad.dim}")
    rows = [r for r, b in enumerate(spec.budgets) if b != INF]

    def finish(sol, extra):
        v = ad.costs(sol)
        viol = None
        for r in rows:
            val = ordered_cost(spec.weights[r], v)
            b = spec.budgets[r]
            ratio = (Fraction(0) if val == 0 else None) if b == 0 else val / b
            if ratio is None:
                viol = None
                break
            viol = ratio if viol is None else max(viol, ratio)
        d = {"rho": ad.rho}
        d.update(extra)
        return BudgetResult(tuple(sol), v, viol, d)

    if not rows:
        return finish(ad.any_solution(), {"unconstrained": True})
    tws = [sparsify_weights(spec.weights[r], ad.P) for r in rows]
    B = [spec.budgets[r] for r in rows]
    if ad.is_zero():
        return finish(ad.any_solution() if problem == "lb" else cluster.zero_cost_facilities(inst), {"zero_instance": True})
    guesses = ad.guesses()
    scored = []
    for g, t in enumerate(guesses):
        if any(ad.lower(tw, t) > ad.row_factor * b for tw, b in zip(tws, B)):
            continue
        score = Fraction(0)
        for tw, b in zip(tws, B):
            e = ad.extra(tw, t)
            sc = e / b if b else (Fraction(0) if e == 0 else None)
            if sc is None:
                score = None
                break
            score = max(score, sc)
        if score is not None:
            scored.append((score, g, t))
    # the first LP-feasible guess in score order is the one the constant is proved for
    scored.sort(key=lambda a: (a[0], a[1]))
    for score, g, t in scored:
        lp = ad.lp(tws, t, B)
        try:
            x = _exact_point(lp)
        except InfeasibleLP:
            continue
        sol = ad.round(t, x)
        return finish(sol, {"guess": g, "threshold_score": score})
    return None


# --- simultaneous ----------------------------------------------------------------------


def _topl_weight(l, d):
    return tuple(Fraction(1) if i < l else Fraction(0) for i in range(d))


def _best_first_min(guesses, lower, value, stop_below=None):
    """Smallest ``value`` over ``guesses`` given lower bounds; None values are skipped."""
    order = sorted(range(len(guesses)), key=lambda g: (lower[g], g))
    best, arg = None, None
    for g in order:
        if best is not None and lower[g] >= best:
            break
        v = value(guesses[g])
        if v is not None and (best is None or v < best):
            best, arg = v, g
            if stop_below is not None and best <= stop_below:
                break
    return best, arg


def _minmax_value(ad, tws, t):
    try:
        xf = solve_lp_float(ad.lp(tws, t))
    except InfeasibleLP:
        return None
    return float(xf[-1])


def topl_lower_bounds(ad, ls, guesses) -> dict:
    """Certified ``LB_l <= OPT_l`` for each Top-l optimum.

    Clustering: the l-th largest optimal cost is a distance, so the minimum
    over distances ``t`` of ``l t + LP((c - t)^+)`` is a lower bound.
    Load balancing: the best proxy LP over all guesses divided by the row
    factor.
    """
    if ad.kind == "km":
        return _km_topl_lower(ad.inst, ls)
    out = {}
    for l in ls:
        tw = sparsify_weights(_topl_weight(l, ad.dim), ad.P)
        lower = [float(ad.lower(tw, t)) for t in guesses]
        val, _ = _best_first_min(guesses, lower, lambda t: _minmax_value(ad, [tw], t))
        lb = Fraction(max(val, 0.0)) / ad.row_factor if val is not None else Fraction(0)
        # float LP values are only trusted to 1e-9 relative
        out[l] = lb * (1 - Fraction(1, 10 ** 8))
    return out


def _km_topl_lower(inst, ls):
    import numpy as np

    n = inst.n
    scr = cluster.KMedianScreen(n, inst.k)
    cflat = np.array([float(inst.c[i][j]) for i in range(n) for j in range(n)])
    ts = [0.0] + [float(a) for a in cluster._distance_values(inst)]
    vals = {t: scr.value(np.maximum(cflat - t, 0.0))[0] for t in ts}
    out = {}
    for l in ls:
        best = min(l * t + vals[t] for t in ts)
        out[l] = Fraction(max(best, 0.0)) * (1 - Fraction(1, 10 ** 8))
    return out


def _powers_between(base, lo, hi):
    """Powers ``base^j`` (j may be negative) covering ``[lo, hi]``."""
    if lo <= 0:
        raise ValidationError("lower end must be positive")
    j = 0
    p = Fraction(1)
    while p > lo:
        p /= base
        j -= 1
    while p * base <= lo:
        p *= base
        j += 1
    out = []
    while p <= hi * base:
        out.append(p)
        p *= base
    return out


@dataclass
class SimultaneousResult:
    solution: tuple
    costs: tuple
    A: Fraction
    estimates: dict
    lower_bounds: dict
    certified_factor: Fraction | None
    diagnostics: dict = field(default_factory=dict)


def solve_simultaneous(problem: str, inst, eps=Fraction(1, 2), candidates: int = 3, max_estimates: int = 400) -> SimultaneousResult:
    """Approximate the best simultaneous factor over all monotone symmetric norms.

    Estimates of the Top-l optima (l in the sparse position set) are guessed
    as non-decreasing powers of ``1+eps`` anchored at an estimate of the
    Top-1 optimum; for each estimate the smallest feasible ``A`` on the
    ``(1+eps)`` grid in ``[1, d]`` comes from the min-max LP with weights
    ``Top-l / (row_factor * e_l)``.  ``certified_factor`` bounds
    ``max_l Top-l(v) / OPT_l`` over every ``l``.
    """
    eps = to_fraction(eps)
    if not 0 < eps <= 1:
        raise ValidationError("eps must lie in (0, 1]")
    ad = _adapter(problem, inst, eps)
    d = ad.dim
    base = 1 + eps
    Pl = position_set(d, eps).positions
    if ad.is_zero() or d == 1:
        sol = ad.any_solution() if problem == "lb" or d == 1 else cluster.zero_cost_facilities(inst)
        if problem == "lb" and d == 1:
            sol = tuple(0 for _ in range(inst.n))
        v = ad.costs(sol)
        return SimultaneousResult(tuple(sol), v, Fraction(1), {}, {}, Fraction(1), {"trivial": True, "rho": ad.rho})
    guesses = ad.guesses()
    LB = topl_lower_bounds(ad, Pl, guesses)
    heur = ad.costs(_heuristic(ad))
    UB = {l: topl_cost(l, heur) for l in Pl}
    if LB[1] <= 0:
        LB = {l: max(LB[l], Fraction(0)) for l in Pl}
    anchors = _powers_between(base, max(LB[1], UB[1] / (4 * ad.row_factor * d)), UB[1]) if UB[1] > 0 else []
    tws_cache = {l: sparsify_weights(_topl_weight(l, d), ad.P) for l in Pl}

    def ratio_to_lb(e):
        return max((e[l] / LB[l] for l in Pl if LB[l] > 0), default=Fraction(1))

    ests = []
    for a in anchors:
        for e in _estimate_vectors(Pl, a, base, LB, UB):
            ests.append(e)
    ests.sort(key=lambda e: (ratio_to_lb(e), tuple(e[l] for l in Pl)))
    ests = ests[:max_estimates]
    scored = []
    kth = None
    for e in ests:
        floor = ratio_to_lb(e)
        if kth is not None and floor >= kth:
            break
        scaled = [tuple(w / (ad.row_factor * e[l]) for w in tws_cache[l]) for l in Pl]
        lower = [max(float(ad.lower(tw, t)) for tw in scaled) for t in guesses]
        val, g = _best_first_min(guesses, lower, lambda t: _minmax_value(ad, scaled, t), stop_below=1.0)
        if val is None:
            continue
        A = Fraction(1)
        while A < val * (1 - 1e-12) and A <= d:
            A *= base
        if A > d * base:
            continue
        scored.append((A * floor, A, e))
        scored.sort(key=lambda s: (s[0], s[1], tuple(s[2][l] for l in Pl)))
        if len(scored) >= candidates:
            kth = scored[candidates - 1][0]
    best = None
    for key, A, e in scored[:candidates]:
        spec = BudgetSpec([_topl_weight(l, d) for l in Pl], [A * e[l] for l in Pl])
        res = solve_multibudget(problem, inst, spec, eps)
        bumps = 0
        while res is None and bumps < 3:
            A *= base
            bumps += 1
            spec = BudgetSpec([_topl_weight(l, d) for l in Pl], [A * e[l] for l in Pl])
            res = solve_multibudget(problem, inst, spec, eps)
        if res is None:
            continue
        measured = max((topl_cost(l, res.costs) / LB[l] for l in Pl if LB[l] > 0), default=None)
        cand = (measured if measured is not None else Fraction(0), A, e, res)
        if best is None or (cand[0], cand[1]) < (best[0], best[1]):
            best = cand
    if best is None:
        sol = _heuristic(ad)
        v = ad.costs(sol)
        return SimultaneousResult(tuple(sol), v, Fraction(d), {}, LB, None, {"fallback": True, "rho": ad.rho})
    measured, A, e, res = best
    cert = measured * base if all(LB[l] > 0 for l in Pl) else None
    return SimultaneousResult(
        res.solution,
        res.costs,
        A,
        dict(e),
        LB,
        cert,
        {"estimates_scored": len(scored), "estimates_total": len(ests), "rho": ad.rho},
    )


def _heuristic(ad):
    if ad.kind == "lb":
        return loadbal.greedy_assignment(ad.inst, lambda v: max(v))
    inst = ad.inst
    return cluster.local_search(inst, lambda F: max(assign_cost_vector(inst, F)))


def _estimate_vectors(Pl, anchor, base, LB, UB):
    """Non-decreasing ``anchor * base^j_l`` with ``LB_l <= e_l <= base * UB_l`` and ``e_l <= l * base * anchor``."""
    out = []

    def rec(i, j, cur):
        if i == len(Pl):
            out.append(dict(cur))
            return
        l = Pl[i]
        jj = j
        while True:
            val = anchor * base ** jj
            if val > base * UB[l] or val > l * base * anchor:
                break
            if val >= LB[l]:
                cur[l] = val
                rec(i + 1, jj, cur)
                del cur[l]
            jj += 1

    rec(0, 0, {})
    return out
