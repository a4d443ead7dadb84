"""Load balancing on unrelated machines under ordered objectives.

LP relaxations with per-threshold load splits, the Shmoys-Tardos style
matching rounding (deterministic and sampled), the weight-oblivious
iterative rounding, and the top-level solvers.
"""
from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from functools import reduce
from typing import Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import maximum_bipartite_matching

from .lpround import (
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
    LoadBalInstance,
    ValidationError,
    check_weights,
    frac_vector,
    load_vector,
    ordered_cost,
    to_fraction,
    topl_cost,
)
from .parallel import pmap
from .proxy import (
    ThresholdVector,
    h_multi,
    is_valid,
    iter_thresholds,
    threshold_constant,
)
from .sparsify import PositionSet, position_set, sparsify_weights, weight_steps


# --- LP layouts ------------------------------------------------------------------


@dataclass(frozen=True)
class OlbLayout:
    m: int
    n: int
    K: int  # number of positions

    def x(self, i, j):
        return i * self.n + j

    def y(self, i, j, k):
        return self.m * self.n * (1 + 2 * k) + i * self.n + j

    def z(self, i, j, k):
        return self.m * self.n * (2 + 2 * k) + i * self.n + j

    @property
    def size(self):
        return self.m * self.n * (1 + 2 * self.K)


def _olb_rows(lp: LinearProgram, inst: LoadBalInstance, t: ThresholdVector, L: OlbLayout):
    m, n, K = L.m, L.n, L.K
    tv = list(t.values) + [Fraction(0)]
    for j in range(n):
        lp.add_eq({L.x(i, j): 1 for i in range(m)}, 1)
    for k in range(K):
        for i in range(m):
            for j in range(n):
                lp.add_eq({L.x(i, j): 1, L.z(i, j, k): -1, L.y(i, j, k): -1}, 0)
    for k in range(K - 1):
        for i in range(m):
            for j in range(n):
                lp.add_le({L.z(i, j, k + 1): 1, L.z(i, j, k): -1}, 0)
    for k in range(K):
        for i in range(m):
            row = {L.z(i, j, k): inst.p[i][j] for j in range(n)}
            if k + 1 < K:
                for j in range(n):
                    row[L.z(i, j, k + 1)] = row.get(L.z(i, j, k + 1), 0) - inst.p[i][j]
            lp.add_le(row, tv[k] - tv[k + 1])
    for k in range(K):
        for i in range(m):
            for j in range(n):
                p = inst.p[i][j]
                if p > tv[k]:
                    lp.add_ge({L.y(i, j, k): p, L.x(i, j): -(p - tv[k])}, 0)


def _olb_objective(inst, tw, t, L):
    steps = weight_steps(tw, t.P)
    c = {}
    for k, l in enumerate(t.P.positions):
        if steps[l]:
            for i in range(L.m):
                for j in range(L.n):
                    if inst.p[i][j]:
                        c[L.y(i, j, k)] = steps[l] * inst.p[i][j]
    return c


def build_olb_lp(inst: LoadBalInstance, tw, t: ThresholdVector) -> LinearProgram:
    """The ordered load-balancing relaxation for thresholds ``t``.

    Variables: ``x`` (assignment), and per position ``y`` (part of the job
    above the threshold) and ``z`` (part below).  Use :class:`OlbLayout` for
    the column indices.
    """
    if not is_valid(t):
        raise ValidationError("threshold vector must be non-increasing")
    tw = check_weights(tw)
    if t.P.n != inst.m or len(tw) != inst.m:
        raise ValidationError("positions and weights must be indexed by machines")
    L = OlbLayout(inst.m, inst.n, len(t.P.positions))
    lp = LinearProgram.empty(L.size)
    for j, a in _olb_objective(inst, tw, t, L).items():
        lp.c[j] = a
    _olb_rows(lp, inst, t, L)
    return lp


def build_topl_lp(inst: LoadBalInstance, l: int, t) -> LinearProgram:
    """The Top-l relaxation with one threshold: minimise the load above ``t``."""
    t = to_fraction(t)
    if t < 0:
        raise ValidationError("threshold must be nonnegative")
    if not 1 <= l <= inst.m:
        raise ValidationError(f"l must lie in [1, {inst.m}]")
    m, n = inst.m, inst.n
    L = OlbLayout(m, n, 1)
    lp = LinearProgram.empty(L.size)
    for i in range(m):
        for j in range(n):
            lp.c[L.y(i, j, 0)] = inst.p[i][j]
    for j in range(n):
        lp.add_eq({L.x(i, j): 1 for i in range(m)}, 1)
    for i in range(m):
        for j in range(n):
            lp.add_eq({L.x(i, j): 1, L.z(i, j, 0): -1, L.y(i, j, 0): -1}, 0)
    for i in range(m):
        lp.add_le({L.z(i, j, 0): inst.p[i][j] for j in range(n)}, t)
    for i in range(m):
        for j in range(n):
            p = inst.p[i][j]
            if p > t:
                lp.add_ge({L.y(i, j, 0): p, L.x(i, j): -(p - t)}, 0)
    return lp


def build_minmax_lb_lp(inst: LoadBalInstance, tws: Sequence, t: ThresholdVector, budgets=None) -> LinearProgram:
    """Min-max relaxation: one shared ``(x, y, z)`` and a row per weight vector.

    Row ``r`` bounds the proxy constant plus the LP objective for ``tws[r]`` by
    ``lambda`` (the last column).  With ``budgets`` given the rows instead use
    the fixed right-hand sides ``3 * B_r`` and the objective is zero.
    """
    if not is_valid(t):
        raise ValidationError("threshold vector must be non-increasing")
    tws = [check_weights(w) for w in tws]
    if not tws:
        raise ValidationError("need at least one weight vector")
    L = OlbLayout(inst.m, inst.n, len(t.P.positions))
    lp = LinearProgram.empty(L.size)
    _olb_rows(lp, inst, t, L)
    if budgets is None:
        lam = lp.add_var(cost=1, name="lambda")
    for r, tw in enumerate(tws):
        row = dict(_olb_objective(inst, tw, t, L))
        const = threshold_constant(tw, t)
        if budgets is None:
            row[lam] = -1
            lp.add_le(row, -const)
        else:
            lp.add_le(row, 3 * to_fraction(budgets[r]) - const)
    return lp


# --- fractional solutions -----------------------------------------------------------


@dataclass
class OlbSolution:
    """Fractional ``x[i][j]``, ``y[i][j][k]``, ``z[i][j][k]`` for the positions of ``t``."""

    inst: LoadBalInstance
    t: ThresholdVector
    x: list
    y: list
    z: list

    @classmethod
    def from_vector(cls, inst, t, vec) -> "OlbSolution":
        L = OlbLayout(inst.m, inst.n, len(t.P.positions))
        x = [[vec[L.x(i, j)] for j in range(inst.n)] for i in range(inst.m)]
        y = [[[vec[L.y(i, j, k)] for k in range(L.K)] for j in range(inst.n)] for i in range(inst.m)]
        z = [[[vec[L.z(i, j, k)] for k in range(L.K)] for j in range(inst.n)] for i in range(inst.m)]
        return cls(inst, t, x, y, z)

    def to_vector(self) -> list:
        inst, K = self.inst, len(self.t.P.positions)
        L = OlbLayout(inst.m, inst.n, K)
        vec = [Fraction(0)] * L.size
        for i in range(inst.m):
            for j in range(inst.n):
                vec[L.x(i, j)] = self.x[i][j]
                for k in range(K):
                    vec[L.y(i, j, k)] = self.y[i][j][k]
                    vec[L.z(i, j, k)] = self.z[i][j][k]
        return vec

    def bands(self) -> list:
        """``q[i][j][b]`` for band ``b`` (0 = above the first threshold, b = k+1 for position k)."""
        K = len(self.t.P.positions)
        out = []
        for i in range(self.inst.m):
            row = []
            for j in range(self.inst.n):
                zs = [self.x[i][j]] + list(self.z[i][j]) + [Fraction(0)]
                row.append([zs[b] - zs[b + 1] for b in range(K + 1)])
            out.append(row)
        return out


def canonical_point(inst: LoadBalInstance, t: ThresholdVector, sigma) -> OlbSolution:
    """Feasible point built from an integral assignment: ``z = min(1, t/load)``."""
    loads = load_vector(inst, sigma)
    K = len(t.P.positions)
    x = [[Fraction(0)] * inst.n for _ in range(inst.m)]
    y = [[[Fraction(0)] * K for _ in range(inst.n)] for _ in range(inst.m)]
    z = [[[Fraction(0)] * K for _ in range(inst.n)] for _ in range(inst.m)]
    for j, i in enumerate(sigma):
        x[i][j] = Fraction(1)
        for k, tl in enumerate(t.values):
            zz = Fraction(1) if loads[i] <= tl else tl / loads[i]
            z[i][j][k] = zz
            y[i][j][k] = 1 - zz
    return OlbSolution(inst, t, x, y, z)


def olb_value(sol: OlbSolution, nw) -> Fraction:
    """LP objective ``sum (nw_l - nw_next) p y^(l)`` for any sparsified weights."""
    steps = weight_steps(frac_vector(nw), sol.t.P)
    total = Fraction(0)
    for k, l in enumerate(sol.t.P.positions):
        if steps[l]:
            for i in range(sol.inst.m):
                for j in range(sol.inst.n):
                    total += steps[l] * sol.inst.p[i][j] * sol.y[i][j][k]
    return total


def olb_value_bands(sol: OlbSolution, nw, q=None) -> Fraction:
    """Same objective written over bands: ``sum nw_next(b) p q^(b)``."""
    nw = frac_vector(nw)
    P = sol.t.P
    q = sol.bands() if q is None else q
    total = Fraction(0)
    for b, l in enumerate((0,) + P.positions):
        nx = P.next(l)
        wn = nw[nx - 1] if nx <= P.n else Fraction(0)
        if wn:
            for i in range(sol.inst.m):
                for j in range(sol.inst.n):
                    total += wn * sol.inst.p[i][j] * q[i][j][b]
    return total


def filter_q(sol: OlbSolution) -> list:
    """Drop bands where the job is too large for the threshold and rescale the rest.

    For machine ``i`` and job ``j`` with ``p > 2 t_l`` at some position, bands
    ``l`` with ``p > 2 t_l`` are zeroed and the others scaled by
    ``x / y^(lbar)`` (``lbar`` the first such position; 0/0 = 0).
    """
    inst, t = sol.inst, sol.t
    q = sol.bands()
    K = len(t.P.positions)
    out = []
    for i in range(inst.m):
        row = []
        for j in range(inst.n):
            p = inst.p[i][j]
            qb = q[i][j]
            big = [p > 2 * tl for tl in t.values]
            if not any(big):
                row.append(list(qb))
                continue
            kbar = big.index(True)
            ybar = sol.y[i][j][kbar]
            scale = Fraction(0) if ybar == 0 else sol.x[i][j] / ybar
            new = [Fraction(0)] * (K + 1)
            for b in range(K + 1):
                # band b >= 1 sits at position b-1; band 0 is never too big
                if b >= 1 and big[b - 1]:
                    continue
                new[b] = qb[b] * scale
            row.append(new)
        out.append(row)
    return out


def _is_power_of_two(q: Fraction) -> bool:
    if q == 0:
        return True
    a, b = q.numerator, q.denominator
    return (a & (a - 1) == 0 and b == 1) or (a == 1 and b & (b - 1) == 0)


def oblivious_system(sol: OlbSolution, qhat) -> tuple[IterRoundSystem, list]:
    inst, t = sol.inst, sol.t
    K = len(t.P.positions)
    qbar = sol.bands()
    keys = [(i, j, b) for i in range(inst.m) for j in range(inst.n) for b in range(K + 1)]
    idx = {key: a for a, key in enumerate(keys)}
    c = [inst.p[i][j] if b == 0 else Fraction(0) for (i, j, b) in keys]
    jobs = [{idx[(i, j, b)]: 1 for i in range(inst.m) for b in range(K + 1)} for j in range(inst.n)]
    tv = list(t.values) + [Fraction(0)]
    B, d = [], []
    for k in range(K):
        for i in range(inst.m):
            B.append({idx[(i, j, k + 1)]: inst.p[i][j] for j in range(inst.n) if inst.p[i][j]})
            d.append(2 * (tv[k] - tv[k + 1]))
    for k in range(K):
        B.append({idx[(i, j, k + 1)]: inst.p[i][j] for i in range(inst.m) for j in range(inst.n) if inst.p[i][j]})
        d.append(2 * sum((inst.p[i][j] * qbar[i][j][k + 1] for i in range(inst.m) for j in range(inst.n)), Fraction(0)))
    sys = IterRoundSystem(c=c, A1=jobs, b1=[1] * inst.n, A2=jobs, b2=[1] * inst.n, B=B, d=d, k=2)
    vec = [qhat[i][j][b] for (i, j, b) in keys]
    return sys, vec


def oblivious_round_lb(sol: OlbSolution, trace: RoundingTrace | None = None) -> tuple[tuple, tuple]:
    """Weight-oblivious rounding of a feasible fractional solution.

    The thresholds must all be powers of two or zero.  The returned assignment
    satisfies the oblivious inequality for every sparsified weight vector.
    """
    if not all(_is_power_of_two(a) for a in sol.t.values):
        raise ValidationError("thresholds must be powers of 2 or 0")
    qhat = filter_q(sol)
    sys, vec = oblivious_system(sol, qhat)
    qt = iterative_round(sys, vec, trace)
    K = len(sol.t.P.positions)
    sigma = [None] * sol.inst.n
    a = 0
    for i in range(sol.inst.m):
        for j in range(sol.inst.n):
            for b in range(K + 1):
                if qt[a]:
                    sigma[j] = i
                a += 1
    return tuple(sigma), qt


def band_loads(inst, sol: OlbSolution, qt) -> list:
    """Per machine and band, the load the rounded point puts in that band."""
    K = len(sol.t.P.positions)
    out = [[Fraction(0)] * (K + 1) for _ in range(inst.m)]
    a = 0
    for i in range(inst.m):
        for j in range(inst.n):
            for b in range(K + 1):
                if qt[a]:
                    out[i][b] += inst.p[i][j]
                a += 1
    return out


def oblivious_sides(sol: OlbSolution, sigma, nw) -> tuple[Fraction, Fraction]:
    """Both sides of the oblivious guarantee: sum of ``h_{10t}`` versus ``2 LP + 4 sum nw_l t_l``."""
    nw = frac_vector(nw)
    loads = load_vector(sol.inst, sigma)
    t10 = sol.t.scaled(10)
    lhs = sum((h_multi(nw, t10, a) for a in loads), Fraction(0))
    rhs = 2 * olb_value(sol, nw) + 4 * sum((nw[l - 1] * tl for l, tl in sol.t.items()), Fraction(0))
    return lhs, rhs


# --- matching-based rounding --------------------------------------------------------


def snap_fractional_assignment(xf, m: int, n: int, tol: float = 1e-9) -> list:
    """Rational ``x[i][j]`` with exact unit column sums from a float solution."""
    x = [[Fraction(0)] * n for _ in range(m)]
    for j in range(n):
        col = [max(float(xf[i][j]), 0.0) for i in range(m)]
        vals = [Fraction(v).limit_denominator(10**6) if v > tol else Fraction(0) for v in col]
        s = sum(vals)
        if s == 0:
            raise SolverError("job carries no assignment mass")
        vals = [v / s for v in vals]
        for i in range(m):
            x[i][j] = vals[i]
    return x


@dataclass
class CopyGraph:
    """Machine copies filled in non-increasing ``p`` order; ``mass[(i, r, j)]`` is the flow."""

    copies: list  # (machine, copy index)
    mass: dict

    def edges(self):
        return sorted(self.mass)


def build_copy_graph(x, inst: LoadBalInstance) -> CopyGraph:
    copies = []
    mass = {}
    for i in range(inst.m):
        total = sum(x[i], Fraction(0))
        ni = math.ceil(total)
        if ni == 0:
            continue
        for r in range(ni):
            copies.append((i, r))
        order = sorted(range(inst.n), key=lambda j: (-inst.p[i][j], j))
        r, room = 0, Fraction(1)
        for j in order:
            left = x[i][j]
            while left > 0:
                put = min(left, room)
                mass[(i, r, j)] = mass.get((i, r, j), Fraction(0)) + put
                left -= put
                room -= put
                if room == 0 and r + 1 < ni:
                    r, room = r + 1, Fraction(1)
                elif room == 0:
                    room = Fraction(0)
                    if left > 0:
                        raise SolverError("copy graph overflow")
    return CopyGraph(copies, mass)


def _integer_costs(costs):
    den = reduce(lambda a, b: a * b // math.gcd(a, b), (c.denominator for c in costs), 1)
    return [int(c * den) for c in costs]


def min_cost_job_matching(graph: CopyGraph, inst: LoadBalInstance, edge_cost) -> tuple[int, ...]:
    """Cheapest matching that covers every job along copy-graph edges.

    ``edge_cost(i, r, j)`` gives the rational cost; costs are scaled to
    integers so the float assignment solver works on exact values.
    """
    cols = {c: a for a, c in enumerate(graph.copies)}
    keys = graph.edges()
    costs = [edge_cost(i, r, j) for (i, r, j) in keys]
    ints = _integer_costs(costs) if costs else []
    big = (sum(ints) + 1) * (inst.n + 1)
    if big > 2**52:
        raise SolverError("matching costs too large for exact float scaling")
    C = np.full((inst.n, len(graph.copies)), float(big))
    for (i, r, j), cst in zip(keys, ints):
        C[j, cols[(i, r)]] = float(cst)
    rows, colsel = linear_sum_assignment(C)
    sigma = [None] * inst.n
    for j, a in zip(rows, colsel):
        if C[j, a] >= big:
            raise SolverError("no job-covering matching on the copy graph")
        sigma[j] = graph.copies[a][0]
    return tuple(sigma)


def gap_round_deterministic(x, t, inst: LoadBalInstance, tw=None) -> tuple[int, ...]:
    """Derandomised copy-graph rounding.

    ``t`` is a single threshold (edge cost ``(p - t)^+`` on first copies) or,
    with ``tw`` given, a :class:`ThresholdVector` (edge cost ``h_multi``).
    """
    x = [list(frac_vector(r)) for r in x]
    for j in range(inst.n):
        if sum(x[i][j] for i in range(inst.m)) != 1:
            raise ValidationError(f"job {j} is not fully assigned")
    graph = build_copy_graph(x, inst)
    if tw is None:
        t = to_fraction(t)

        def cost(i, r, j):
            p = inst.p[i][j]
            return p - t if (r == 0 and p > t) else Fraction(0)
    else:
        tw = frac_vector(tw)

        def cost(i, r, j):
            return h_multi(tw, t, inst.p[i][j]) if r == 0 else Fraction(0)

    return min_cost_job_matching(graph, inst, cost)


def birkhoff_decomposition(graph: CopyGraph, n_jobs: int):
    """Decompose the copy-graph flow into weighted job-covering matchings.

    The flow is padded to a doubly stochastic square matrix (dummy jobs fill
    the copies' spare capacity) and peeled with perfect matchings on its
    support.  Returns ``[(weight, {job: copy index})]``.
    """
    nc = len(graph.copies)
    cols = {c: a for a, c in enumerate(graph.copies)}
    M = [[Fraction(0)] * nc for _ in range(nc)]
    for (i, r, j), v in graph.mass.items():
        M[j][cols[(i, r)]] += v
    spare = [1 - sum(M[j][a] for j in range(n_jobs)) for a in range(nc)]
    row, room = n_jobs, Fraction(1)
    for a in range(nc):
        left = spare[a]
        while left > 0:
            put = min(left, room)
            M[row][a] += put
            left -= put
            room -= put
            if room == 0:
                row, room = row + 1, Fraction(1)
    out = []
    remaining = Fraction(1)
    while remaining > 0:
        support = csr_matrix(np.array([[1 if M[r][a] > 0 else 0 for a in range(nc)] for r in range(nc)]))
        match = maximum_bipartite_matching(support, perm_type="column")
        if (match < 0).any():
            raise SolverError("flow is not doubly stochastic")
        wgt = min(M[r][match[r]] for r in range(nc))
        for r in range(nc):
            M[r][match[r]] -= wgt
        out.append((wgt, {j: int(match[j]) for j in range(n_jobs)}))
        remaining -= wgt
    return out


def gap_round_randomized(x, inst: LoadBalInstance, seed: int = 0) -> tuple[int, ...]:
    """Sample a matching from the Birkhoff-von Neumann decomposition of the copy-graph flow."""
    x = [list(frac_vector(r)) for r in x]
    graph = build_copy_graph(x, inst)
    parts = birkhoff_decomposition(graph, inst.n)
    rng = random.Random(seed)
    u = Fraction(rng.getrandbits(53), 2**53)
    acc = Fraction(0)
    chosen = parts[-1][1]
    for wgt, match in parts:
        acc += wgt
        if u < acc:
            chosen = match
            break
    return tuple(graph.copies[chosen[j]][0] for j in range(inst.n))


# --- heuristics used only for bounds and pruning ------------------------------------


def greedy_assignment(inst: LoadBalInstance, objective) -> tuple[int, ...]:
    """Jobs in decreasing order of their smallest time, each to the machine that
    keeps ``objective(loads)`` lowest, then single-job moves while they help."""
    order = sorted(range(inst.n), key=lambda j: (-min(inst.p[i][j] for i in range(inst.m)), j))
    loads = [Fraction(0)] * inst.m
    sigma = [0] * inst.n
    for j in order:
        best = None
        for i in range(inst.m):
            loads[i] += inst.p[i][j]
            val = objective(loads)
            loads[i] -= inst.p[i][j]
            if best is None or val < best[0]:
                best = (val, i)
        sigma[j] = best[1]
        loads[best[1]] += inst.p[best[1]][j]
    cur = objective(loads)
    improved = True
    rounds = 0
    while improved and rounds < 4 * inst.n:
        improved = False
        rounds += 1
        for j in range(inst.n):
            a = sigma[j]
            for i in range(inst.m):
                if i == a:
                    continue
                loads[a] -= inst.p[a][j]
                loads[i] += inst.p[i][j]
                val = objective(loads)
                if val < cur:
                    cur, sigma[j], a = val, i, i
                    improved = True
                else:
                    loads[i] -= inst.p[i][j]
                    loads[a] += inst.p[a][j]
    return tuple(sigma)


def _high(inst):
    return sum((min(inst.p[i][j] for i in range(inst.m)) for j in range(inst.n)), Fraction(0))


def _min_assignment(inst):
    return tuple(min(range(inst.m), key=lambda i: (inst.p[i][j], i)) for j in range(inst.n))


def _powers(base: Fraction, lo, hi):
    """Powers ``base^s`` (s >= 0) from the first one >= lo up to the first one >= hi."""
    out = []
    v = Fraction(1)
    while v < lo:
        v *= base
    while True:
        out.append(v)
        if v >= hi:
            break
        v *= base
    return out


@dataclass
class SolveResult:
    sigma: tuple
    value: Fraction
    diagnostics: dict = field(default_factory=dict)


def _better(a, b):
    """Lower value wins, ties broken lexicographically on the solution."""
    if b is None:
        return True
    return (a.value, a.sigma) < (b.value, b.sigma)


# --- Top-l ----------------------------------------------------------------------


def _float_xy(xf, inst):
    L = OlbLayout(inst.m, inst.n, 1)
    return [[xf[L.x(i, j)] for j in range(inst.n)] for i in range(inst.m)]


def solve_topl_lb(inst: LoadBalInstance, l: int, candidates: int = 4) -> SolveResult:
    """Top-l load balancing: minimise ``l t + LP_t`` over integer ``t``, then round.

    ``LP_t`` is non-increasing in ``t``, so ``l a + LP_b`` lower-bounds the
    objective on ``[a, b]`` and a branch-and-bound over integer thresholds finds
    the exact minimiser.  The best ``candidates`` thresholds are rounded and
    the cheapest assignment is returned.
    """
    if not 1 <= l <= inst.m:
        raise ValidationError(f"l must lie in [1, {inst.m}]")

    def cost(sig):
        return topl_cost(l, load_vector(inst, sig))

    if _high(inst) == 0:
        sig = _min_assignment(inst)
        return SolveResult(sig, cost(sig), {"zero_instance": True})
    heur = greedy_assignment(inst, lambda v: topl_cost(l, v))
    ub = cost(heur)
    evals = {}

    def g(t):
        if t not in evals:
            xf = solve_lp_float(build_topl_lp(inst, l, t))
            lp_val = float(sum(inst.p[i][j] * xf[OlbLayout(inst.m, inst.n, 1).y(i, j, 0)]
                               for i in range(inst.m) for j in range(inst.n)))
            evals[t] = (l * t + lp_val, lp_val, xf)
        return evals[t][0]

    hi = int(min(_high(inst), ub / l))
    g(0)
    g(hi)
    best = min(g(0), g(hi))
    stack = [(0, hi)]
    while stack:
        a, b = stack.pop()
        if b - a <= 1:
            continue
        lower = l * a + evals[b][1]
        if lower >= best - 1e-9:
            continue
        mid = (a + b) // 2
        best = min(best, g(mid))
        stack.append((mid, b))
        stack.append((a, mid))
    ranked = sorted(evals, key=lambda t: (evals[t][0], t))[:candidates]
    result = None
    for t in ranked:
        x = snap_fractional_assignment(_float_xy(evals[t][2], inst), inst.m, inst.n)
        sig = gap_round_deterministic(x, t, inst)
        cand = SolveResult(sig, cost(sig), {})
        if _better(cand, result):
            result = cand
    tstar = ranked[0]
    result.diagnostics = {
        "threshold": Fraction(tstar),
        "proxy_lp_value": evals[tstar][0],
        "thresholds_evaluated": len(evals),
        "certified_bound": 2,
    }
    return result


# --- single ordered objective ----------------------------------------------------


def _ordered_setup(inst, w, eps):
    w = check_weights(w)
    if len(w) != inst.m:
        raise ValidationError(f"need {inst.m} weights, got {len(w)}")
    eps = to_fraction(eps)
    P = position_set(inst.m, eps)
    tw = sparsify_weights(w, P)
    return w, eps, P, tw


def _t1_range(inst, ub_over_w1):
    high = _high(inst)
    lo = max(max(min(inst.p[i][j] for i in range(inst.m)) for j in range(inst.n)), high / inst.m)
    hi = min(high, ub_over_w1)
    return lo, hi


def _round_ordered_guess(args):
    inst, tw, t = args
    lp = build_olb_lp(inst, tw, t)
    xf = solve_lp_float(lp)
    L = OlbLayout(inst.m, inst.n, len(t.P.positions))
    x = snap_fractional_assignment([[xf[L.x(i, j)] for j in range(inst.n)] for i in range(inst.m)], inst.m, inst.n)
    return gap_round_deterministic(x, t, inst, tw=tw)


def solve_ordered_lb(inst: LoadBalInstance, w, eps=Fraction(1, 2), jobs: int = 1) -> SolveResult:
    """Ordered load balancing via threshold guesses, the ordered LP and matching rounding.

    Every guess that survives the safe pruning (its proxy constant alone
    exceeds ``(1+2 eps)`` times the heuristic bound) is solved and rounded;
    the cheapest rounded assignment wins.  ``jobs`` spreads the guesses over
    worker processes.
    """
    w, eps, P, tw = _ordered_setup(inst, w, eps)

    def cost(sig):
        return ordered_cost(w, load_vector(inst, sig))

    if _high(inst) == 0:
        sig = _min_assignment(inst)
        return SolveResult(sig, cost(sig), {"zero_instance": True})
    # the heuristic only bounds the search; it is never returned
    ub = cost(greedy_assignment(inst, lambda v: ordered_cost(w, v)))
    base = 1 + eps
    lo, hi = _t1_range(inst, ub / w[0] if w[0] > 0 else _high(inst))
    S = _powers(base, lo, hi)
    kept, pruned = [], 0
    for t in iter_thresholds(P, S, eps, inst.m, base):
        if threshold_constant(tw, t) > (1 + 2 * eps) * ub:
            pruned += 1
        else:
            kept.append(t)
    best = None
    for sig in pmap(_round_ordered_guess, [(inst, tw, t) for t in kept], jobs):
        cand = SolveResult(sig, cost(sig), {})
        if _better(cand, best):
            best = cand
    best.diagnostics = {
        "guesses_solved": len(kept),
        "guesses_pruned": pruned,
        "certified_bound": 2 * (1 + eps) * (1 + 2 * eps),
    }
    return best


# --- min-max ordered --------------------------------------------------------------


def _minmax_lp_solution(inst, tws, t, exact):
    lp = build_minmax_lb_lp(inst, tws, t)
    xf = solve_lp_float(lp)
    if not exact:
        return lp, xf, None
    x = polish(lp, xf)
    if x is None:
        x = list(solve_lp(lp, "exact").x)
    return lp, xf, x


def minmax_rank_key(lam, tws, t):
    """Upper bound on every max-r proxy after rounding: ``10 lam + 4 max_r sum tw_l t_l``."""
    extra = max(sum(float(tw[l - 1] * tl) for l, tl in t.items()) for tw in tws)
    return 10 * lam + 4 * extra


def solve_minmax_ordered_lb(inst: LoadBalInstance, ws: Sequence, delta=Fraction(1), candidates: int = 3) -> SolveResult:
    """Min-max ordered load balancing.

    All guesses (powers of two) are solved in floating point; the ones with
    the smallest post-rounding bound are re-solved exactly and rounded
    obliviously.
    """
    ws = [check_weights(w) for w in ws]
    if not ws:
        raise ValidationError("need at least one weight vector")
    for w in ws:
        if len(w) != inst.m:
            raise ValidationError(f"weights must have length {inst.m}")
    delta = to_fraction(delta)
    P = position_set(inst.m, delta)
    tws = [sparsify_weights(w, P) for w in ws]

    def cost(sig):
        v = load_vector(inst, sig)
        return max(ordered_cost(w, v) for w in ws)

    if _high(inst) == 0:
        sig = _min_assignment(inst)
        return SolveResult(sig, cost(sig), {"zero_instance": True})
    two = Fraction(2)
    S = _powers(two, 1, _high(inst))
    scored = []
    best_key = math.inf
    for t in iter_thresholds(P, S, 1, inst.m, two):
        consts = [threshold_constant(tw, t) for tw in tws]
        floor_key = minmax_rank_key(float(max(consts)), tws, t)
        if floor_key > best_key * (1 + 1e-9) and len(scored) >= candidates:
            continue
        lp = build_minmax_lb_lp(inst, tws, t)
        try:
            xf = solve_lp_float(lp)
        except InfeasibleLP:
            continue
        lam = float(xf[-1])
        key = minmax_rank_key(lam, tws, t)
        scored.append((key, t.values, t))
        scored.sort(key=lambda s: (s[0], s[1]))
        best_key = scored[min(candidates, len(scored)) - 1][0]
    best = None
    for key, _, t in scored[:candidates]:
        lp, xf, x = _minmax_lp_solution(inst, tws, t, exact=True)
        sol = OlbSolution.from_vector(inst, t, x)
        sig, _ = oblivious_round_lb(sol)
        cand = SolveResult(sig, cost(sig), {})
        if _better(cand, best):
            best = cand
            best.diagnostics = {"lambda": x[-1], "threshold": t.values, "rank_key": key}
    best.diagnostics.update({"guesses_solved": len(scored), "certified_bound": 38 * (1 + delta)})
    return best


def solve_minnorm_lb(inst: LoadBalInstance, f, eps=Fraction(1, 4)):
    """Min-norm load balancing for a monotone symmetric norm through a min-max ordered instance."""
    from .normreduce import minnorm_reduce_and_solve

    return minnorm_reduce_and_solve("lb", inst, f, eps)
