"""Ordered k-clustering (clients = facilities) under ordered objectives.

Contains the strengthened LP with radius-coverage rows, the weight-oblivious
rounding through consolidation, pairing and iterative rounding, the
Lagrangian primal-dual with both bi-point rounders, and the top-level solvers.
"""
from __future__ import annotations

import heapq
import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .lpround import (
    ArrayLP,
    InfeasibleLP,
    IterRoundSystem,
    LinearProgram,
    RoundingTrace,
    SolverError,
    iterative_round,
    polish,
    solve_lp,
    solve_lp_float,
)
from .model import (
    ClusterInstance,
    ValidationError,
    assign_cost_vector,
    check_weights,
    frac_vector,
    nearest_facility,
    ordered_cost,
    to_fraction,
)
from .parallel import pmap
from .proxy import ThresholdVector, h_multi, h_table, is_valid, iter_thresholds, threshold_constant
from .sparsify import PositionSet, position_set, sparsify_weights, weight_steps


def minmax_factor(eps) -> Fraction:
    """Guarantee of the min-max clustering solver: ``2 (204 + 692 eps)``.

    The floor ``eps t1 / n`` on the thresholds costs ``eps`` in the proxy
    bound ``(1 + 3 eps)`` and ``4 eps`` in the threshold term ``(4 + 14 eps)``;
    the outer 2 is the weight sparsification with ``delta = 1``.
    """
    eps = to_fraction(eps)
    return 2 * (44 * (1 + 3 * eps) + 40 * (4 + 14 * eps))


# --- small helpers ------------------------------------------------------------------


def zero_cost_facilities(inst: ClusterInstance) -> tuple[int, ...]:
    """One representative per zero-distance class (lowest index)."""
    reps = []
    for j in range(inst.n):
        if not any(inst.c[r][j] == 0 for r in reps):
            reps.append(j)
    if len(reps) > inst.k:
        raise ValidationError("instance has no zero-cost solution")
    return tuple(reps)


def cost_of(inst: ClusterInstance, w, F) -> Fraction:
    return ordered_cost(w, assign_cost_vector(inst, F))


def gonzalez_radius(inst: ClusterInstance) -> Fraction:
    """Farthest-first radius with ``k`` centres; at most twice the best k-center radius."""
    centres = [0]
    d = list(inst.c[0])
    while len(centres) < inst.k:
        j = max(range(inst.n), key=lambda a: (d[a], -a))
        centres.append(j)
        d = [min(d[a], inst.c[j][a]) for a in range(inst.n)]
    return max(d)


def local_search(inst: ClusterInstance, objective, start=None) -> tuple[int, ...]:
    """Single-swap local search on facility sets of size ``k``."""
    n, k = inst.n, inst.k
    F = list(start) if start is not None else list(range(k))
    cur = objective(F)
    improved = True
    while improved:
        improved = False
        for a in range(len(F)):
            for i in range(n):
                if i in F:
                    continue
                G = sorted(F[:a] + [i] + F[a + 1:])
                val = objective(G)
                if val < cur:
                    F, cur, improved = G, val, True
                    break
            if improved:
                break
    return tuple(sorted(F))


# --- LP -------------------------------------------------------------------------------


@dataclass(frozen=True)
class OclLayout:
    n: int

    def x(self, i, j):
        return i * self.n + j

    def y(self, i):
        return self.n * self.n + i

    @property
    def size(self):
        return self.n * self.n + self.n


_COVER_CACHE: dict = {}


def coverage_rows(inst: ClusterInstance, t: ThresholdVector) -> list[frozenset]:
    key = (id(inst), t.P.positions, t.values)
    hit = _COVER_CACHE.get(key)
    if hit is not None and hit[0] is inst:
        return hit[1]
    rows = _coverage_rows(inst, t)
    if len(_COVER_CACHE) > 50000:
        _COVER_CACHE.clear()
    _COVER_CACHE[key] = (inst, rows)
    return rows


def _coverage_rows(inst: ClusterInstance, t: ThresholdVector) -> list[frozenset]:
    """Facility sets that must be fractionally open, one (the smallest radius) per client.

    For client ``j`` and radius ``r`` the row is required when more than ``l``
    clients lie within ``r - t_l`` of ``j`` for some position ``l``; larger
    radii give weaker rows, so only the first triggering radius is kept.
    """
    n = inst.n
    rows = set()
    for j in range(n):
        radii = sorted(set(inst.c[i][j] for i in range(n)))
        dists = sorted(inst.c[j])
        for r in radii:
            hit = False
            for l, tl in t.items():
                cnt = sum(1 for a in dists if a <= r - tl)
                if cnt > l:
                    hit = True
                    break
            if hit:
                rows.add(frozenset(i for i in range(n) if inst.c[i][j] <= r))
                break
    return sorted(rows, key=lambda s: sorted(s))


def _kmedian_rows(lp: LinearProgram, inst: ClusterInstance, L: OclLayout, with_y_cap=True):
    n = inst.n
    for j in range(n):
        lp.add_ge({L.x(i, j): 1 for i in range(n)}, 1)
    for i in range(n):
        for j in range(n):
            lp.add_le({L.x(i, j): 1, L.y(i): -1}, 0)
    lp.add_le({L.y(i): 1 for i in range(n)}, inst.k)
    if with_y_cap:
        for i in range(n):
            lp.upper[L.y(i)] = Fraction(1)


def h_matrix(inst: ClusterInstance, tw, t: ThresholdVector):
    tab = h_table(tw, t, (a for row in inst.c for a in row))
    return [[tab[inst.c[i][j]] for j in range(inst.n)] for i in range(inst.n)]


def build_kmedian_lp(inst: ClusterInstance, tw, t: ThresholdVector) -> LinearProgram:
    """The plain k-median relaxation with proxy costs (no coverage rows)."""
    L = OclLayout(inst.n)
    lp = LinearProgram.empty(L.size)
    H = h_matrix(inst, tw, t)
    for i in range(inst.n):
        for j in range(inst.n):
            if H[i][j]:
                lp.c[L.x(i, j)] = H[i][j]
    _kmedian_rows(lp, inst, L)
    return lp


def build_ocl_lp(inst: ClusterInstance, tw, t: ThresholdVector) -> LinearProgram:
    """k-median relaxation with proxy costs plus the radius-coverage rows."""
    if not is_valid(t):
        raise ValidationError("threshold vector must be non-increasing")
    tw = check_weights(tw)
    lp = build_kmedian_lp(inst, tw, t)
    L = OclLayout(inst.n)
    for S in coverage_rows(inst, t):
        lp.add_ge({L.y(i): 1 for i in S}, 1)
    return lp


def build_minmax_km_lp(inst: ClusterInstance, tws, t: ThresholdVector, budgets=None) -> LinearProgram:
    """Shared ``(x, y)`` with a proxy row per weight; ``lambda`` is the last column.

    With ``budgets`` the rows use right-hand sides ``budget_r`` and the
    objective is zero (a feasibility LP).
    """
    if not is_valid(t):
        raise ValidationError("threshold vector must be non-increasing")
    tws = [check_weights(w) for w in tws]
    L = OclLayout(inst.n)
    lp = LinearProgram.empty(L.size)
    _kmedian_rows(lp, inst, L)
    for S in coverage_rows(inst, t):
        lp.add_ge({L.y(i): 1 for i in S}, 1)
    if budgets is None:
        lam = lp.add_var(cost=1, name="lambda")
    for r, tw in enumerate(tws):
        H = h_matrix(inst, tw, t)
        row = {L.x(i, j): H[i][j] for i in range(inst.n) for j in range(inst.n) if H[i][j]}
        const = threshold_constant(tw, t)
        if budgets is None:
            row[lam] = -1
            lp.add_le(row, -const)
        else:
            lp.add_le(row, to_fraction(budgets[r]) - const)
    return lp


@dataclass
class OclSolution:
    inst: ClusterInstance
    t: ThresholdVector
    y: tuple
    x: list

    @classmethod
    def from_y(cls, inst, t, y) -> "OclSolution":
        return cls(inst, t, tuple(frac_vector(y)), greedy_x(inst, y))

    @classmethod
    def from_vector(cls, inst, t, vec) -> "OclSolution":
        L = OclLayout(inst.n)
        return cls.from_y(inst, t, [vec[L.y(i)] for i in range(inst.n)])

    def center_cost(self, j) -> Fraction:
        return sum((self.inst.c[i][j] * self.x[i][j] for i in range(self.inst.n)), Fraction(0))

    def lp_client(self, nw, j, scale=1) -> Fraction:
        t = self.t.scaled(scale) if scale != 1 else self.t
        return sum(
            (h_multi(nw, t, self.inst.c[i][j]) * self.x[i][j] for i in range(self.inst.n) if self.x[i][j]),
            Fraction(0),
        )

    def lp_value(self, nw) -> Fraction:
        return sum((self.lp_client(nw, j) for j in range(self.inst.n)), Fraction(0))


def greedy_x(inst: ClusterInstance, y) -> list:
    """Serve each client from its nearest facilities first, up to one unit."""
    y = frac_vector(y)
    n = inst.n
    x = [[Fraction(0)] * n for _ in range(n)]
    for j in range(n):
        need = Fraction(1)
        for i in sorted(range(n), key=lambda i: (inst.c[i][j], i)):
            if need <= 0:
                break
            put = min(y[i], need)
            if put > 0:
                x[i][j] = put
                need -= put
        if need > 0:
            raise ValidationError("y opens less than one unit in total")
    return x


def ocl_feasible(inst, t, y) -> bool:
    y = frac_vector(y)
    if any(a < 0 or a > 1 for a in y) or sum(y) > inst.k or sum(y) < 1:
        return False
    return all(sum(y[i] for i in S) >= 1 for S in coverage_rows(inst, t))


# --- weight-oblivious rounding ---------------------------------------------------------


@dataclass
class ConsolidatedInstance:
    D: list
    ctr: list
    F: dict
    ybar: dict
    nbr: dict
    a: dict
    N: dict
    d: dict


def consolidate(sol: OclSolution) -> ConsolidatedInstance:
    inst = sol.inst
    n = inst.n
    Cbar = [sol.center_cost(j) for j in range(n)]
    S = set(range(n))
    D, ctr = [], [None] * n
    while S:
        j = min(S, key=lambda a: (Cbar[a], a))
        D.append(j)
        for k in sorted(S):
            if inst.c[j][k] <= 4 * max(Cbar[j], Cbar[k]):
                S.discard(k)
                ctr[k] = j
    Fs = {j: [] for j in D}
    for i in range(n):
        j = min(D, key=lambda a: (inst.c[i][a], a))
        Fs[j].append(i)
    ybar = {j: min(Fraction(1), sum((sol.y[i] for i in Fs[j]), Fraction(0))) for j in D}
    nbr, a = {}, {}
    for j in D:
        others = [k for k in D if k != j]
        if ybar[j] < 1 and others:
            nbr[j] = min(others, key=lambda k: (inst.c[j][k], k))
        else:
            nbr[j] = j
        a[j] = inst.c[j][nbr[j]]
    N = {j: [k for k in range(n) if ctr[k] == j and inst.c[j][k] <= Fraction(3, 10) * a[j]] for j in D}
    d = {j: len(N[j]) for j in D}
    return ConsolidatedInstance(D, ctr, Fs, ybar, nbr, a, N, d)


def pair_clusters(cons: ConsolidatedInstance) -> list[tuple]:
    S = set(cons.D)
    out = []
    while S:
        j = min(S, key=lambda a: (cons.a[a], 0 if cons.ybar[a] == 1 else 1, a))
        C = {j, cons.nbr[j]}
        out.append(tuple(sorted(C)))
        for k in sorted(S):
            if {k, cons.nbr[k]} & C:
                S.discard(k)
    return out


def band_q(cons: ConsolidatedInstance, t: ThresholdVector) -> dict:
    """Fractional band assignment ``qbar[j][b]`` (band 0 = above ``10 t_1``)."""
    P = t.P
    bands = (0,) + P.positions
    tv = {l: t[l] for l in P.positions}

    def tt(l):
        return None if l == 0 else (tv[l] if l <= P.n else Fraction(0))

    out = {}
    for j in cons.D:
        aj = cons.a[j]
        mass = 1 - cons.ybar[j]
        q = [Fraction(0)] * len(bands)
        if mass == 0 or aj == 0:
            out[j] = q
            continue
        big = [l for l in P.positions if aj > 20 * tv[l]]
        denom = aj if not big else aj - 10 * tv[big[0]]
        for b, l in enumerate(bands):
            if l != 0 and aj > 20 * tv[l]:
                continue
            hi = aj if l == 0 else min(aj, 10 * tv[l])
            nx = P.next(l)
            lo = 10 * (tv[nx] if nx <= P.n else Fraction(0))
            if hi > lo:
                q[b] = mass * (hi - lo) / denom
        out[j] = q
    return out


def cluster_round_system(cons, pairs, qbar, t, k):
    P = t.P
    nb = len(P.positions) + 1
    keys = [(j, b) for j in cons.D for b in range(nb)]
    idx = {key: a for a, key in enumerate(keys)}
    c = [cons.d[j] * cons.a[j] if b == 0 else Fraction(0) for (j, b) in keys]
    A1 = [{idx[(j, b)]: 1 for b in range(nb)} for j in cons.D]
    b1 = [1] * len(cons.D)
    for C in pairs:
        A1.append({idx[(j, b)]: 1 for j in C for b in range(nb)})
        b1.append(1)
    A2, b2 = [], []
    if len(cons.D) - k > 0:
        A2.append({a: 1 for a in range(len(keys))})
        b2.append(len(cons.D) - k)
    B, d = [], []
    for b in range(1, nb):
        B.append({idx[(j, b)]: cons.d[j] * cons.a[j] for j in cons.D if cons.d[j] * cons.a[j]})
        d.append(sum((cons.d[j] * cons.a[j] * qbar[j][b] for j in cons.D), Fraction(0)))
    sys = IterRoundSystem(c=c, A1=A1, b1=b1, A2=A2, b2=b2, B=B, d=d, k=1)
    vec = [qbar[j][b] for (j, b) in keys]
    return sys, vec, keys


@dataclass
class ClusterRounding:
    facilities: tuple
    consolidated: ConsolidatedInstance
    pairs: list
    qbar: dict
    qtilde: tuple


def oblivious_round_cluster(sol: OclSolution, trace: RoundingTrace | None = None) -> ClusterRounding:
    """Round ``y`` to at most ``k`` open facilities, independently of the weights.

    Every threshold must be positive (zero entries are lifted to ``eps t1/n``
    by the caller's grid).
    """
    t = sol.t
    if any(a <= 0 for a in t.values):
        raise ValidationError("thresholds must be positive (apply the eps*t1/n floor)")
    cons = consolidate(sol)
    pairs = pair_clusters(cons)
    qbar = band_q(cons, t)
    sys, vec, keys = cluster_round_system(cons, pairs, qbar, t, sol.inst.k)
    qt = iterative_round(sys, vec, trace)
    used = {j: 0 for j in cons.D}
    for (j, b), v in zip(keys, qt):
        used[j] += v
    F = tuple(sorted(j for j in cons.D if used[j] == 0))
    return ClusterRounding(F, cons, pairs, qbar, qt)


def oblivious_cluster_sides(sol: OclSolution, F, nw) -> tuple[Fraction, Fraction]:
    """Both sides of the clustering oblivious guarantee (constants 44 and 40)."""
    nw = frac_vector(nw)
    costs = assign_cost_vector(sol.inst, F)
    t44 = sol.t.scaled(44)
    lhs = sum((h_multi(nw, t44, a) for a in costs), Fraction(0))
    P = sol.t.P
    extra = sum((nw[l - 1] * P.next(l) * tl for l, tl in sol.t.items()), Fraction(0))
    return lhs, 44 * sol.lp_value(nw) + 40 * extra


# --- primal-dual ---------------------------------------------------------------------


@dataclass
class DualState:
    alpha: list
    H: list
    lam: Fraction
    tight: list  # (time, facility) in order of tightening
    F: tuple

    def beta(self, i, j) -> Fraction:
        d = self.alpha[j] - self.H[i][j]
        return d if d > 0 else Fraction(0)

    def pay(self, i) -> set:
        return {j for j in range(len(self.alpha)) if self.alpha[j] > self.H[i][j]}


def primal_dual_phase(inst: ClusterInstance, tw, t: ThresholdVector, lam, H=None) -> tuple[tuple, DualState]:
    """Dual ascent with facility cost ``lam`` followed by pruning.

    Events are processed at exact rational times; at equal times facilities
    go tight before clients freeze, lowest index first.
    """
    lam = to_fraction(lam)
    if lam < 0:
        raise ValidationError("lambda must be nonnegative")
    n = inst.n
    if H is None:
        H = h_matrix(inst, tw, t)
    alpha = [Fraction(0)] * n
    active = set(range(n))
    inT = [False] * n
    tight = []
    tau = Fraction(0)

    def pay(i):
        s = Fraction(0)
        for j in range(n):
            a = tau if j in active else alpha[j]
            if a > H[i][j]:
                s += a - H[i][j]
        return s

    while active:
        changed = True
        while changed:
            changed = False
            for i in range(n):
                if not inT[i] and pay(i) >= lam:
                    inT[i] = True
                    tight.append((tau, i))
                    for j in sorted(active):
                        if H[i][j] <= tau:
                            alpha[j] = tau
                            active.discard(j)
                    changed = True
                    break
        for j in sorted(active):
            if any(inT[i] and H[i][j] <= tau for i in range(n)):
                alpha[j] = tau
                active.discard(j)
        if not active:
            break
        nxt = None
        for j in active:
            for i in range(n):
                if H[i][j] > tau and (nxt is None or H[i][j] < nxt):
                    nxt = H[i][j]
        for i in range(n):
            if inT[i]:
                continue
            rate = sum(1 for j in active if H[i][j] <= tau)
            if rate:
                cand = tau + (lam - pay(i)) / rate
                if nxt is None or cand < nxt:
                    nxt = cand
        if nxt is None:
            raise SolverError("dual ascent stalled")
        tau = nxt
    F = []
    paid = set()
    for _, i in tight:
        pi = {j for j in range(n) if alpha[j] > H[i][j]}
        if not (pi & paid):
            F.append(i)
            paid |= pi
    state = DualState(alpha, H, lam, tight, tuple(sorted(F)))
    return state.F, state


@dataclass
class LmpAudit:
    part_i: bool
    part_ii: bool
    dual_feasible: bool

    @property
    def ok(self):
        return self.part_i and self.part_ii and self.dual_feasible


def lmp_audit(inst: ClusterInstance, tw, t: ThresholdVector, state: DualState) -> LmpAudit:
    n = inst.n
    F = state.F
    t3 = t.scaled(3)
    near = nearest_facility(inst, F)
    payF = set()
    for i in F:
        payF |= state.pay(i)
    lhs = 3 * state.lam * len(F)
    for j in range(n):
        i = near[j]
        if j in payF:
            lhs += 3 * state.H[i][j]
        else:
            lhs += h_multi(tw, t3, inst.c[i][j])
    part_i = lhs <= 3 * sum(state.alpha, Fraction(0))
    part_ii = True
    pays = {i: state.pay(i) for i in F}
    for j in range(n):
        ok = any(
            h_multi(tw, t3, inst.c[i][j]) <= 3 * state.alpha[j]
            and all(state.alpha[j] >= state.alpha[k] for k in pays[i])
            for i in F
        )
        if not ok:
            part_ii = False
            break
    feas = all(sum((state.beta(i, j) for j in range(n)), Fraction(0)) <= state.lam for i in range(n))
    return LmpAudit(part_i, part_ii, feas)


@dataclass
class BiPoint:
    lam1: Fraction
    lam2: Fraction
    F1: tuple
    F2: tuple
    s1: DualState
    s2: DualState


def _search_lambda(inst, tw, t, min_gap, H, audits):
    n, k = inst.n, inst.k
    maxh = max(max(r) for r in H)
    lo, hi = Fraction(0), n * (maxh + 1)
    F_lo, s_lo = primal_dual_phase(inst, tw, t, lo, H)
    audits.append(lmp_audit(inst, tw, t, s_lo))
    if len(F_lo) == k:
        return ("exact", F_lo, s_lo)
    F_hi, s_hi = primal_dual_phase(inst, tw, t, hi, H)
    audits.append(lmp_audit(inst, tw, t, s_hi))
    if len(F_hi) == k:
        return ("exact", F_hi, s_hi)
    if len(F_hi) > k:
        raise SolverError("upper lambda still opens more than k facilities")
    iters = 0
    while hi - lo > min_gap:
        mid = (lo + hi) / 2
        F, s = primal_dual_phase(inst, tw, t, mid, H)
        audits.append(lmp_audit(inst, tw, t, s))
        iters += 1
        if len(F) == k:
            return ("exact", F, s)
        if len(F) > k:
            lo, F_lo, s_lo = mid, F, s
        else:
            hi, F_hi, s_hi = mid, F, s
    return ("bipoint", BiPoint(lo, hi, F_lo, F_hi, s_lo, s_hi))


def _solve_box_lp(nz, coef_theta, coef_z, const, budget):
    """min const + coef_theta*theta + sum coef_z[i] z_i, sum z <= budget, box [0,1]; exact vertex."""
    keys = sorted(coef_z)
    lp = LinearProgram.empty(1 + len(keys))
    lp.c[0] = coef_theta
    for a, i in enumerate(keys):
        lp.c[1 + a] = coef_z[i]
    for a in range(1 + len(keys)):
        lp.upper[a] = Fraction(1)
    if keys:
        lp.add_le({1 + a: 1 for a in range(len(keys))}, budget)
    sol = solve_lp(lp, "exact")
    if any(v.denominator != 1 for v in sol.x):
        raise SolverError("rounding LP returned a fractional vertex")
    theta = int(sol.x[0])
    Z = [i for a, i in enumerate(keys) if sol.x[1 + a] == 1]
    return theta, Z, const + sol.objective


def _nearest_in(inst, S, target):
    return min(S, key=lambda i: (inst.c[i][target], i))


def round_bipoint_nine(inst, tw, t, bp: BiPoint) -> tuple:
    """Jain-Vazirani style bi-point rounding with the derandomising LP."""
    k = inst.k
    k1, k2 = len(bp.F1), len(bp.F2)
    a = Fraction(k - k2, k1 - k2)
    if 1 - a >= Fraction(1, 2):
        return bp.F2
    t3 = t.scaled(3)
    i1 = nearest_facility(inst, bp.F1)
    i2 = nearest_facility(inst, bp.F2)
    d1 = [h_multi(tw, t3, inst.c[i1[j]][j]) for j in range(inst.n)]
    d2 = [h_multi(tw, t3, inst.c[i2[j]][j]) for j in range(inst.n)]
    sig = {i: _nearest_in(inst, bp.F1, i) for i in bp.F2}
    Fbar = sorted(set(sig.values()))
    for i in bp.F1:
        if len(Fbar) >= k2:
            break
        if i not in Fbar:
            Fbar.append(i)
    Fbar = sorted(Fbar)
    rest = [i for i in bp.F1 if i not in Fbar]
    const, ct = Fraction(0), Fraction(0)
    cz = {i: Fraction(0) for i in rest}
    for j in range(inst.n):
        if i1[j] in Fbar:
            const += d2[j]
            ct += d1[j] - d2[j]
        else:
            const += 2 * d2[j] + d1[j]
            cz[i1[j]] += d1[j] - (2 * d2[j] + d1[j])
    theta, Z, _ = _solve_box_lp(None, ct, cz, const, k - k2)
    opened = set(Fbar if theta == 1 else bp.F2) | set(Z)
    return tuple(sorted(opened))


@dataclass
class FiveCertificate:
    gap_ok: bool
    witness_ok: bool

    @property
    def fires(self):
        return self.gap_ok and self.witness_ok


def strong_lmp_witness(inst, tw, t, bp: BiPoint, slack) -> bool:
    """Every client has ``i`` in F2 and ``i'`` in F1 with the two proxy-distance bounds."""
    alpha = [max(a, b) for a, b in zip(bp.s1.alpha, bp.s2.alpha)]
    t3, t2 = t.scaled(3), t.scaled(2)
    for j in range(inst.n):
        ok = False
        for i in bp.F2:
            if h_multi(tw, t3, inst.c[i][j]) > 3 * alpha[j]:
                continue
            if any(h_multi(tw, t2, inst.c[i][i2]) <= 2 * alpha[j] + slack for i2 in bp.F1):
                ok = True
                break
        if not ok:
            return False
    return True


def round_bipoint_five(inst, tw, t, bp: BiPoint) -> tuple:
    """Augment the first solution with non-conflicting facilities, then solve the case LP."""
    k = inst.k
    n = inst.n
    pay1 = {i: bp.s1.pay(i) for i in range(n)}
    pay2 = {i: bp.s2.pay(i) for i in range(n)}
    F1p = list(bp.F1)
    covered = set()
    for i in F1p:
        covered |= pay1[i]
    for i in bp.F2:
        if i in F1p:
            continue
        if not (pay1[i] & covered):
            F1p.append(i)
            covered |= pay1[i]
    F1p = sorted(F1p)
    k2 = len(bp.F2)
    i1 = nearest_facility(inst, F1p)
    i2 = nearest_facility(inst, bp.F2)
    sig = {i: _nearest_in(inst, F1p, i) for i in bp.F2}
    Fbar = sorted(set(sig.values()))
    for i in F1p:
        if len(Fbar) >= k2:
            break
        if i not in Fbar:
            Fbar.append(i)
    Fbar = sorted(Fbar)
    rest = [i for i in F1p if i not in Fbar]
    P1 = set()
    for i in F1p:
        P1 |= pay1[i]
    P2 = set()
    for i in bp.F2:
        P2 |= pay2[i]
    alpha = [max(a, b) for a, b in zip(bp.s1.alpha, bp.s2.alpha)]
    t3 = t.scaled(3)
    const, ct = Fraction(0), Fraction(0)
    cz = {i: Fraction(0) for i in rest}
    for j in range(n):
        h1 = h_multi(tw, t, inst.c[i1[j]][j])
        h2 = h_multi(tw, t, inst.c[i2[j]][j])
        five = 5 * alpha[j]
        inb = i1[j] in Fbar
        if j in P1 and j in P2:
            if inb:
                const += h2
                ct += h1 - h2
            else:
                const += h1 + 2 * h2
                cz[i1[j]] -= 2 * h2
        elif j in P2:
            const += h2
            ct += five - h2
        elif j not in P1:
            h23 = h_multi(tw, t3, inst.c[i2[j]][j])
            const += h23
            ct += five - h23
        elif inb:
            const += five
            ct += h1 - five
        else:
            const += five
            cz[i1[j]] += h1 - five
    theta, Z, _ = _solve_box_lp(None, ct, cz, const, k - k2)
    opened = set(Fbar if theta == 1 else bp.F2) | set(Z)
    return tuple(sorted(opened))


def default_min_gap(n: int, eps, lb) -> Fraction:
    eps, lb = to_fraction(eps), to_fraction(lb)
    if n <= 20:
        return eps * lb / (n * n * 2 ** n)
    return eps * lb / n ** 4


@dataclass
class GuessOutcome:
    candidates: list  # (label, facilities)
    certificate: bool
    audits: list
    kind: str


def primal_dual_guess(inst, w, tw, t, eps, lb, min_gap=None) -> GuessOutcome:
    """Lagrangian search for one threshold guess; returns every rounded candidate."""
    H = h_matrix(inst, tw, t)
    gap = default_min_gap(inst.n, eps, lb) if min_gap is None else to_fraction(min_gap)
    audits = []
    res = _search_lambda(inst, tw, t, gap, H, audits)
    if res[0] == "exact":
        return GuessOutcome([("exact", res[1])], True, audits, "exact")
    bp = res[1]
    F9 = round_bipoint_nine(inst, tw, t, bp)
    F5 = round_bipoint_five(inst, tw, t, bp)
    bound_gap = eps * lb / (inst.n ** 2 * 2 ** inst.n)
    slack = 2 * eps * lb / inst.n ** 2
    cert = FiveCertificate(bp.lam2 - bp.lam1 <= bound_gap, strong_lmp_witness(inst, tw, t, bp, slack))
    return GuessOutcome([("nine", F9), ("five", F5)], cert.fires, audits, "bipoint")


# --- guess selection ------------------------------------------------------------------


def _float_thresholds(ts):
    return np.array([[float(a) for a in t.values] for t in ts]) if ts else np.zeros((0, 0))


def _h_float(steps, T, a):
    """``h`` for every guess (rows of ``T``) at every cost in ``a``; returns guesses x costs."""
    diff = a[None, None, :] - T[:, :, None]
    return np.einsum("l,gla->ga", steps, np.maximum(diff, 0.0))


def _nn_lower_costs(inst):
    """Nearest-other distances with the ``k`` largest set to zero: each client pays at least its entry."""
    n, k = inst.n, inst.k
    nn = [min((inst.c[i][j] for i in range(n) if i != j), default=Fraction(0)) for j in range(n)]
    order = sorted(range(n), key=lambda j: (-nn[j], j))
    for j in order[:k]:
        nn[j] = Fraction(0)
    return np.array([float(a) for a in nn])


def best_first(guesses, lower, evaluate, keep, slack=1e-9):
    """The ``keep`` guesses with the smallest ``evaluate`` value, in that order.

    ``lower[g]`` must lower-bound ``evaluate(g)``; guesses are evaluated in
    increasing order of the bound and the scan stops once the bound exceeds
    the current ``keep``-th best value.
    """
    order = sorted(range(len(guesses)), key=lambda g: (lower[g], g))
    found = []
    evaluated = 0
    for g in order:
        if len(found) >= keep and lower[g] > found[-1][0] * (1 + slack) + slack:
            break
        val = evaluate(guesses[g])
        evaluated += 1
        if val is None:
            continue
        found.append((val, g))
        found.sort()
        found = found[:keep]
    return [(v, guesses[g]) for v, g in found], evaluated


class KMedianScreen:
    """Float k-median LP over many cost matrices sharing one constraint matrix."""

    def __init__(self, n: int, k: int):
        from scipy.sparse import lil_matrix

        nx = n * n
        A = lil_matrix((n + nx + 1, nx + n))
        for j in range(n):
            for i in range(n):
                A[j, i * n + j] = 1
        for i in range(n):
            for j in range(n):
                r = n + i * n + j
                A[r, i * n + j] = 1
                A[r, nx + i] = -1
        A[n + nx, nx:] = 1
        lo = np.r_[np.ones(n), np.full(nx + 1, -np.inf)]
        hi = np.r_[np.full(n, np.inf), np.zeros(nx), [k]]
        self.n, self.k = n, k
        self.lp = ArrayLP(A, lo, hi, np.zeros(nx + n), np.r_[np.full(nx, np.inf), np.ones(n)])

    def value(self, hflat):
        """LP value and the (clipped) duals of the assignment rows."""
        obj, _, dual = self.lp.solve(np.r_[hflat, np.zeros(self.n)])
        return obj, np.maximum(dual[: self.n], 0.0)

    def lagrangian(self, Hs, v):
        """Lower bound on the LP value of every cost matrix in ``Hs`` from assignment multipliers ``v``."""
        G = Hs.shape[0]
        gain = np.minimum(Hs.reshape(G, self.n, self.n) - v[None, None, :], 0.0).sum(axis=2)
        part = np.sort(gain, axis=1)[:, : self.k].sum(axis=1)
        return v.sum() + part


def screen_kmedian(n, k, Hs, consts, lower, keep, slack=1e-9):
    """The ``keep`` guesses with the smallest ``const + LP``, best first.

    Guesses are solved in increasing order of a lower bound; after every
    solve the Lagrangian bound from its optimal duals tightens the bounds of
    the rest, and the scan ends once no bound can beat the ``keep``-th value.
    """
    scr = KMedianScreen(n, k)
    bound = np.array(lower, dtype=float)
    active = np.arange(len(bound))
    found = []
    solved = 0
    while len(active):
        a = active[np.lexsort((active, bound[active]))[0]]
        if len(found) >= keep and bound[a] > found[-1][0] * (1 + slack) + slack:
            break
        val, v = scr.value(Hs[a])
        solved += 1
        found.append((consts[a] + val, int(a)))
        found.sort()
        found = found[:keep]
        active = active[active != a]
        if len(active):
            bound[active] = np.maximum(bound[active], consts[active] + scr.lagrangian(Hs[active], v))
            if len(found) >= keep:
                active = active[bound[active] <= found[-1][0] * (1 + slack) + slack]
    return found, solved


def _lp_float_value(lp):
    xf = solve_lp_float(lp)
    return float(sum(float(c) * xf[j] for j, c in enumerate(lp.c) if c)), xf


# --- top-level solvers -----------------------------------------------------------------


@dataclass
class ClusterResult:
    facilities: tuple
    value: Fraction
    diagnostics: dict = field(default_factory=dict)


def _zero_or_trivial(inst, objective):
    if inst.k >= inst.n:
        F = tuple(range(inst.n))[: inst.k]
        return ClusterResult(F, objective(F), {"trivial": "k >= n"})
    try:
        F = zero_cost_facilities(inst)
    except ValidationError:
        return None
    return ClusterResult(F, objective(F), {"zero_instance": True})


def _distance_values(inst):
    return sorted({a for row in inst.c for a in row if a > 0})


def _pd_worker(args):
    return primal_dual_guess(*args)


def solve_ordered_km(
    inst: ClusterInstance, w, eps=Fraction(1, 2), candidates: int = 2, min_gap=None, jobs: int = 1
) -> ClusterResult:
    """Ordered k-median by the Lagrangian primal-dual and bi-point rounding.

    Guesses (exact largest distance, then powers of 1+eps below it) are
    ranked by the proxy constant plus the k-median LP value, which is the
    quantity the rounding guarantee is stated in; the ``candidates`` best
    are rounded and the cheapest facility set is returned.
    """
    w = check_weights(w)
    if len(w) != inst.n:
        raise ValidationError(f"need {inst.n} weights, got {len(w)}")
    eps = to_fraction(eps)
    if not 0 < eps <= 1:
        raise ValidationError("eps must lie in (0, 1]")

    def objective(F):
        return cost_of(inst, w, F)

    triv = _zero_or_trivial(inst, objective)
    if triv is not None:
        return triv
    if w[0] == 0:
        F = tuple(range(inst.k))
        return ClusterResult(F, Fraction(0), {"zero_weights": True})
    P = position_set(inst.n, eps)
    tw = sparsify_weights(w, P)
    heur = local_search(inst, objective)
    ub = objective(heur)
    radius = gonzalez_radius(inst)
    lb = w[0] * radius / 2
    S = [a for a in _distance_values(inst) if radius / 2 <= a <= ub / w[0]]
    guesses = list(iter_thresholds(P, S, eps, inst.n, 1 + eps))
    steps = np.array([float(s) for s in weight_steps(tw, P).values()])
    T = _float_thresholds(guesses)
    consts = (T * steps[None, :] * np.array(P.positions, dtype=float)[None, :]).sum(axis=1)
    lower = consts + _h_float(steps, T, _nn_lower_costs(inst)).sum(axis=1)
    limit = float((1 + 2 * eps) * ub) * (1 + 1e-9)
    keep = np.nonzero(lower <= limit)[0]
    cflat = np.array([float(inst.c[i][j]) for i in range(inst.n) for j in range(inst.n)])
    Hs = _h_float(steps, T[keep], cflat)
    order, n_eval = screen_kmedian(inst.n, inst.k, Hs, consts[keep], lower[keep], candidates)
    ranked = [(val, guesses[keep[g]]) for val, g in order]
    best = None
    audits = []
    certificate = None
    outs = pmap(_pd_worker, [(inst, w, tw, t, eps, lb, min_gap) for _, t in ranked], jobs)
    for rank, ((val, t), out) in enumerate(zip(ranked, outs)):
        audits.extend(out.audits)
        if rank == 0:
            certificate = out.certificate
            top_kind = out.kind
        for label, F in out.candidates:
            cand = ClusterResult(F, objective(F), {"path": label, "guess_rank": rank})
            if best is None or (cand.value, cand.facilities) < (best.value, best.facilities):
                best = cand
    best.diagnostics.update(
        {
            "guesses_total": len(guesses),
            "guesses_after_bound": len(keep),
            "lps_solved": n_eval,
            "certificate_5": certificate,
            "top_guess_kind": top_kind,
            "lmp_runs": len(audits),
            "lmp_failures": sum(1 for a in audits if not a.ok),
            "certified_bound": 5 * (1 + eps) * (1 + 2 * eps) if certificate else 9 * (1 + eps) * (1 + 2 * eps),
            "lower_bound_used": lb,
        }
    )
    best.diagnostics["_audits"] = audits
    return best


def _exact_minmax_point(lp):
    xf = solve_lp_float(lp)
    x = polish(lp, xf)
    if x is None:
        x = list(solve_lp(lp, "exact").x)
    return x


def _minmax_setup(inst, ws, eps):
    ws = [check_weights(w) for w in ws]
    if not ws:
        raise ValidationError("need at least one weight vector")
    for w in ws:
        if len(w) != inst.n:
            raise ValidationError(f"weights must have length {inst.n}")
    eps = to_fraction(eps)
    if not 0 < eps <= 1:
        raise ValidationError("eps must lie in (0, 1]")
    P = position_set(inst.n, 1)
    tws = [sparsify_weights(w, P) for w in ws]
    return ws, eps, P, tws


def _minmax_lower(inst, tws, P, T, eps):
    """Per guess: a lower bound on ``44 lambda + 40 max_r sum tw_l next(l) t_l``."""
    u = _nn_lower_costs(inst)
    pos = np.array(P.positions, dtype=float)
    nxt = np.array([P.next(l) for l in P.positions], dtype=float)
    lam_lb = np.zeros(len(T))
    extra = np.zeros(len(T))
    for tw in tws:
        steps = np.array([float(s) for s in weight_steps(tw, P).values()])
        at = np.array([float(tw[l - 1]) for l in P.positions])
        c = (T * steps[None, :] * pos[None, :]).sum(axis=1) + _h_float(steps, T, u).sum(axis=1)
        lam_lb = np.maximum(lam_lb, c)
        extra = np.maximum(extra, (T * at[None, :] * nxt[None, :]).sum(axis=1))
    return 44 * lam_lb + 40 * extra, extra


def solve_minmax_ordered_km(inst: ClusterInstance, ws: Sequence, eps=Fraction(1, 2), candidates: int = 2) -> ClusterResult:
    """Min-max ordered k-median through the min-lambda LP and oblivious rounding."""
    ws, eps, P, tws = _minmax_setup(inst, ws, eps)

    def objective(F):
        v = assign_cost_vector(inst, F)
        return max(ordered_cost(w, v) for w in ws)

    triv = _zero_or_trivial(inst, objective)
    if triv is not None:
        return triv
    S = _distance_values(inst)
    guesses = list(iter_thresholds(P, S, eps, inst.n, 1 + eps, floor_zeros=True))
    guesses = [t for t in guesses if all(a > 0 for a in t.values)]
    T = _float_thresholds(guesses)
    lower, extra = _minmax_lower(inst, tws, P, T, eps)
    emap = {id(t): float(e) for t, e in zip(guesses, extra)}

    def evaluate(t):
        try:
            val, xf = _lp_float_value(build_minmax_km_lp(inst, tws, t))
        except InfeasibleLP:
            return None
        return 44 * val + 40 * emap[id(t)]

    ranked, n_eval = best_first(guesses, [float(a) for a in lower], evaluate, candidates)
    best = None
    for rank, (key, t) in enumerate(ranked):
        lp = build_minmax_km_lp(inst, tws, t)
        x = _exact_minmax_point(lp)
        sol = OclSolution.from_vector(inst, t, x)
        rnd = oblivious_round_cluster(sol)
        cand = ClusterResult(rnd.facilities, objective(rnd.facilities), {"guess_rank": rank, "rank_key": key})
        if best is None or (cand.value, cand.facilities) < (best.value, best.facilities):
            best = cand
    best.diagnostics.update(
        {"guesses_total": len(guesses), "lps_solved": n_eval, "certified_bound": minmax_factor(eps)}
    )
    return best


def solve_minnorm_cluster(inst: ClusterInstance, f, eps=Fraction(1, 4)):
    """Min-norm clustering for a monotone symmetric norm through a min-max ordered instance."""
    from .normreduce import minnorm_reduce_and_solve

    return minnorm_reduce_and_solve("km", inst, f, eps)
