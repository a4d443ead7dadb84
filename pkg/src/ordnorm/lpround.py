"""Dense LPs, an exact simplex, and iterative rounding with budget rows.

The exact solver is a two-phase tableau simplex over ``gmpy2.mpq``.  A
floating point path goes through HiGHS (scipy) and can be polished back to
an exact vertex by solving the tight system in rationals.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np
from gmpy2 import mpq
from scipy.optimize import linprog

from .model import ValidationError, frac_vector, to_fraction

FEAS_TOL = 1e-9
OBJ_TOL = 1e-9
INT_TOL = 1e-7


class InfeasibleLP(Exception):
    """The LP has no feasible point."""


class SolverError(RuntimeError):
    """Internal failure: unbounded LP, numerical trouble, broken invariant."""


def _frac(x) -> Fraction:
    return Fraction(int(x.numerator), int(x.denominator))


@dataclass
class LinearProgram:
    """``min c.x`` subject to ``eq``, ``le`` and ``ge`` rows and ``0 <= x <= upper``.

    Rows are stored as ``(coefficients, rhs)`` with sparse ``{col: coef}`` dicts;
    ``upper[j]`` is ``None`` (no bound) or a rational (in practice 1).
    """

    n: int
    c: list = field(default_factory=list)
    eq: list = field(default_factory=list)
    le: list = field(default_factory=list)
    ge: list = field(default_factory=list)
    upper: list = field(default_factory=list)
    names: list = field(default_factory=list)

    @classmethod
    def empty(cls, n: int = 0) -> "LinearProgram":
        return cls(n=n, c=[Fraction(0)] * n, upper=[None] * n, names=[None] * n)

    def add_var(self, cost=0, upper=None, name=None) -> int:
        self.c.append(to_fraction(cost))
        self.upper.append(None if upper is None else to_fraction(upper))
        self.names.append(name)
        self.n += 1
        return self.n - 1

    def _row(self, coefs) -> dict:
        out = {}
        items = coefs.items() if isinstance(coefs, dict) else enumerate(coefs)
        for j, a in items:
            a = to_fraction(a)
            if a != 0:
                if not 0 <= j < self.n:
                    raise ValidationError(f"column {j} out of range")
                out[j] = out.get(j, Fraction(0)) + a
        return {j: a for j, a in out.items() if a != 0}

    def add_eq(self, coefs, rhs):
        self.eq.append((self._row(coefs), to_fraction(rhs)))
        return len(self.eq) - 1

    def add_le(self, coefs, rhs):
        self.le.append((self._row(coefs), to_fraction(rhs)))
        return len(self.le) - 1

    def add_ge(self, coefs, rhs):
        self.ge.append((self._row(coefs), to_fraction(rhs)))
        return len(self.ge) - 1

    def objective(self, x) -> Fraction:
        return sum((self.c[j] * x[j] for j in range(self.n) if self.c[j]), Fraction(0))

    def residuals(self, x):
        """Yield ``(kind, index, slack)``; slack < 0 means violated."""
        for i, (row, b) in enumerate(self.eq):
            s = b - sum(a * x[j] for j, a in row.items())
            yield "eq", i, -abs(s)
        for i, (row, b) in enumerate(self.le):
            yield "le", i, b - sum(a * x[j] for j, a in row.items())
        for i, (row, b) in enumerate(self.ge):
            yield "ge", i, sum(a * x[j] for j, a in row.items()) - b
        for j in range(self.n):
            yield "lb", j, x[j]
            if self.upper[j] is not None:
                yield "ub", j, self.upper[j] - x[j]

    def is_feasible(self, x, tol=0) -> bool:
        return all(s >= -tol for _, _, s in self.residuals(x))


@dataclass
class BasicSolution:
    x: tuple
    objective: object
    tight: list  # maximal independent tight constraints, as (kind, index)
    exact: bool = True

    def rank_certificate(self) -> tuple[int, int]:
        support = sum(1 for a in self.x if a != 0)
        return support, len(self.tight)


# --- exact two-phase simplex ----------------------------------------------------


def _simplex_exact(lp: LinearProgram):
    """Return optimal x (list of mpq) or raise InfeasibleLP / SolverError."""
    rows = []  # (dict coefs, rhs, sense)
    for row, b in lp.eq:
        rows.append((row, b, "="))
    for row, b in lp.le:
        rows.append((row, b, "<"))
    for row, b in lp.ge:
        rows.append((row, b, ">"))
    for j, u in enumerate(lp.upper):
        if u is not None:
            rows.append(({j: Fraction(1)}, u, "<"))
    n = lp.n
    m = len(rows)
    # column layout: structural | slack/surplus | artificial | rhs
    slack_of = {}
    art_of = {}
    ncol = n
    norm = []
    for r, (row, b, sense) in enumerate(rows):
        sign = -1 if b < 0 else 1
        if sign < 0:
            sense = {"<": ">", ">": "<", "=": "="}[sense]
        norm.append((row, b, sense, sign))
        if sense in "<>":
            slack_of[r] = ncol
            ncol += 1
    for r, (row, b, sense, sign) in enumerate(norm):
        if sense in ">=":
            art_of[r] = ncol
            ncol += 1
    width = ncol + 1
    zero = mpq(0)
    T = []
    basis = []
    for r, (row, b, sense, sign) in enumerate(norm):
        line = [zero] * width
        for j, a in row.items():
            line[j] = mpq(sign * a)
        if sense == "<":
            line[slack_of[r]] = mpq(1)
            basis.append(slack_of[r])
        elif sense == ">":
            line[slack_of[r]] = mpq(-1)
        if r in art_of:
            line[art_of[r]] = mpq(1)
            basis.append(art_of[r])
        line[-1] = mpq(sign * b)
        T.append(line)
    art_cols = set(art_of.values())

    def pivot(r, col):
        prow = T[r]
        p = prow[col]
        if p != 1:
            inv = 1 / p
            prow = [v * inv for v in prow]
            T[r] = prow
        nz = [j for j, v in enumerate(prow) if v]
        for i in range(len(T)):
            if i == r:
                continue
            line = T[i]
            a = line[col]
            if a:
                for j in nz:
                    line[j] -= a * prow[j]
        basis[r] = col

    def run(cost, allowed):
        # reduced cost row, kept in sync by recomputation per iteration (small LPs)
        bland = False
        degenerate_streak = 0
        for _ in range(100000):
            cb = [cost[b] for b in basis]
            best_col, best_rc = None, zero
            for j in allowed:
                if j in basis_set:
                    continue
                rc = cost[j]
                for i, line in enumerate(T):
                    a = line[j]
                    if a and cb[i]:
                        rc -= cb[i] * a
                if rc < 0:
                    if bland:
                        best_col = j
                        break
                    if best_col is None or rc < best_rc:
                        best_col, best_rc = j, rc
            if best_col is None:
                return
            col = best_col
            best_r, best_ratio = None, None
            for i, line in enumerate(T):
                a = line[col]
                if a > 0:
                    ratio = line[-1] / a
                    if (
                        best_r is None
                        or ratio < best_ratio
                        or (ratio == best_ratio and basis[i] < basis[best_r])
                    ):
                        best_r, best_ratio = i, ratio
            if best_r is None:
                raise SolverError("LP is unbounded")
            if best_ratio == 0:
                degenerate_streak += 1
                if degenerate_streak > 50:
                    bland = True
            else:
                degenerate_streak = 0
            basis_set.discard(basis[best_r])
            pivot(best_r, col)
            basis_set.add(col)
        raise SolverError("simplex iteration limit reached")

    basis_set = set(basis)
    if art_cols:
        cost1 = [zero] * ncol
        for a in art_cols:
            cost1[a] = mpq(1)
        run(cost1, range(ncol))
        if sum((T[i][-1] for i, b in enumerate(basis) if b in art_cols), zero) > 0:
            raise InfeasibleLP("LP is infeasible")
        # drive remaining (zero-level) artificials out of the basis
        r = 0
        while r < len(T):
            if basis[r] in art_cols:
                col = next((j for j in range(ncol) if j not in art_cols and T[r][j] != 0), None)
                if col is None:
                    basis_set.discard(basis[r])
                    del T[r]
                    del basis[r]
                    continue
                basis_set.discard(basis[r])
                pivot(r, col)
                basis_set.add(col)
            r += 1
    cost2 = [zero] * ncol
    for j in range(n):
        cost2[j] = mpq(lp.c[j])
    allowed = [j for j in range(ncol) if j not in art_cols]
    run(cost2, allowed)
    x = [zero] * n
    for i, b in enumerate(basis):
        if b < n:
            x[b] = T[i][-1]
    return x


# --- helpers shared by the exact and float paths --------------------------------


def _dense_rows(lp: LinearProgram, x, tol):
    """Tight constraint rows (as dicts) at ``x`` including active upper bounds."""
    out = []
    for kind, i, s in lp.residuals(x):
        if kind == "lb":
            continue
        if (kind == "eq") or abs(s) <= tol:
            if kind == "eq":
                out.append((kind, i, lp.eq[i][0], lp.eq[i][1]))
            elif kind == "le":
                out.append((kind, i, lp.le[i][0], lp.le[i][1]))
            elif kind == "ge":
                out.append((kind, i, lp.ge[i][0], lp.ge[i][1]))
            else:
                out.append((kind, i, {i: Fraction(1)}, lp.upper[i]))
    return out


def independent_rows(rows, cols):
    """Greedy maximal linearly independent subset of ``rows`` restricted to ``cols``.

    ``rows`` are ``(tag, coef_dict)``; returns the chosen tags (exact elimination).
    """
    pivots = []  # list of (pivot col, reduced row dict)
    chosen = []
    colset = set(cols)
    for tag, row in rows:
        vec = {j: mpq(a) for j, a in row.items() if j in colset and a != 0}
        for pc, prow in pivots:
            a = vec.get(pc)
            if a:
                for j, v in prow.items():
                    nv = vec.get(j, 0) - a * v
                    if nv:
                        vec[j] = nv
                    else:
                        vec.pop(j, None)
        if vec:
            pc = min(vec)
            inv = 1 / vec[pc]
            pivots.append((pc, {j: v * inv for j, v in vec.items()}))
            chosen.append(tag)
    return chosen


def _certificate(lp: LinearProgram, x, tol=0):
    support = [j for j in range(lp.n) if x[j] != 0]
    rows = [((k, i), row) for k, i, row, _ in _dense_rows(lp, x, tol)]
    return independent_rows(rows, support)


def _solve_square(rows, cols):
    """Solve the (possibly overdetermined, consistent) system exactly; None if not unique."""
    idx = {c: k for k, c in enumerate(cols)}
    ncols = len(cols)
    M = []
    for row, b in rows:
        line = [mpq(0)] * (ncols + 1)
        for j, a in row.items():
            if j in idx:
                line[idx[j]] = mpq(a)
        line[-1] = mpq(b)
        M.append(line)
    r = 0
    where = [-1] * ncols
    for col in range(ncols):
        piv = next((i for i in range(r, len(M)) if M[i][col] != 0), None)
        if piv is None:
            continue
        M[r], M[piv] = M[piv], M[r]
        inv = 1 / M[r][col]
        M[r] = [v * inv for v in M[r]]
        for i in range(len(M)):
            if i != r and M[i][col] != 0:
                a = M[i][col]
                M[i] = [u - a * v for u, v in zip(M[i], M[r])]
        where[col] = r
        r += 1
    if r < ncols:
        return None
    for i in range(r, len(M)):
        if M[i][-1] != 0:
            return None
    return [M[where[c]][-1] for c in range(ncols)]


def _to_arrays(lp: LinearProgram):
    n = lp.n
    c = np.array([float(a) for a in lp.c], dtype=float)

    def mat(rows, sign=1.0):
        if not rows:
            return None, None
        A = np.zeros((len(rows), n))
        b = np.zeros(len(rows))
        for i, (row, rhs) in enumerate(rows):
            for j, a in row.items():
                A[i, j] = sign * float(a)
            b[i] = sign * float(rhs)
        return A, b

    A_ub_parts, b_ub_parts = [], []
    A, b = mat(lp.le)
    if A is not None:
        A_ub_parts.append(A)
        b_ub_parts.append(b)
    A, b = mat(lp.ge, -1.0)
    if A is not None:
        A_ub_parts.append(A)
        b_ub_parts.append(b)
    A_ub = np.vstack(A_ub_parts) if A_ub_parts else None
    b_ub = np.concatenate(b_ub_parts) if b_ub_parts else None
    A_eq, b_eq = mat(lp.eq)
    bounds = [(0.0, None if u is None else float(u)) for u in lp.upper]
    return c, A_ub, b_ub, A_eq, b_eq, bounds


def solve_lp_float(lp: LinearProgram) -> np.ndarray:
    """HiGHS dual simplex; returns a vertex as a float array."""
    if lp.n == 0:
        return np.zeros(0)
    c, A_ub, b_ub, A_eq, b_eq, bounds = _to_arrays(lp)
    res = linprog(c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq, bounds=bounds, method="highs-ds")
    if res.status == 2:
        raise InfeasibleLP("LP is infeasible")
    if res.status != 0:
        raise SolverError(f"HiGHS failed: {res.message}")
    return np.asarray(res.x, dtype=float)


def polish(lp: LinearProgram, xf, tol: float = 1e-7):
    """Recover the exact vertex behind a float solution, or None if that fails."""
    n = lp.n
    support = [j for j in range(n) if xf[j] > tol]
    fixed = {}
    for j in support:
        if lp.upper[j] is not None and abs(xf[j] - float(lp.upper[j])) <= tol:
            fixed[j] = lp.upper[j]
    free = [j for j in support if j not in fixed]
    xfl = [0.0 if j not in support else float(xf[j]) for j in range(n)]
    rows = []
    for kind, i, row, b in _dense_rows(lp, xfl, 1e-6):
        if kind == "ub":
            continue
        rhs = b - sum((a * fixed[j] for j, a in row.items() if j in fixed), Fraction(0))
        rows.append(({j: a for j, a in row.items() if j not in fixed}, rhs))
    sol = _solve_square(rows, free) if free else []
    if sol is None:
        return None
    x = [Fraction(0)] * n
    for j, v in fixed.items():
        x[j] = v
    for j, v in zip(free, sol):
        x[j] = _frac(v)
    if not lp.is_feasible(x):
        return None
    return x


def solve_lp(lp: LinearProgram, method: str = "exact") -> BasicSolution:
    """Optimal vertex of ``lp``.

    ``method`` is ``"exact"`` (rational simplex), ``"float"`` (HiGHS, float
    values) or ``"auto"`` (HiGHS, then exact polishing with an exact-simplex
    fallback).
    """
    if method == "float":
        xf = solve_lp_float(lp)
        if not lp.is_feasible([Fraction(float(v)) for v in xf], tol=1e-6):
            raise SolverError("float solution violates constraints beyond tolerance")
        tight = []
        return BasicSolution(tuple(float(v) for v in xf), float(np.dot([float(a) for a in lp.c], xf)), tight, exact=False)
    if method == "auto":
        xf = solve_lp_float(lp)
        x = polish(lp, xf)
        if x is not None:
            return BasicSolution(tuple(x), lp.objective(x), _certificate(lp, x), exact=True)
    elif method != "exact":
        raise ValidationError(f"unknown LP method {method!r}")
    xq = _simplex_exact(lp)
    x = [_frac(v) for v in xq]
    return BasicSolution(tuple(x), lp.objective(x), _certificate(lp, x), exact=True)


def vertex_check(lp: LinearProgram, x) -> bool:
    """True iff the tight constraints at ``x`` have rank equal to the support size."""
    support = [j for j in range(lp.n) if x[j] != 0]
    return len(_certificate(lp, x)) == len(support)


# --- iterative rounding -----------------------------------------------------------


def is_laminar(sets) -> bool:
    sets = [frozenset(s) for s in sets]
    for a in range(len(sets)):
        for b in range(a + 1, len(sets)):
            A, B = sets[a], sets[b]
            if A & B and not (A <= B or B <= A):
                return False
    return True


@dataclass
class IterRoundSystem:
    """``min c.q`` over ``A1 q <= b1``, ``A2 q >= b2``, ``B q <= d``, ``q >= 0``.

    ``A1``/``A2`` rows are 0/1 dicts whose supports together form a laminar
    family; every variable appears (with positive coefficient) in at most
    ``k`` rows of ``B``.
    """

    c: list
    A1: list
    b1: list
    A2: list
    b2: list
    B: list
    d: list
    k: int

    def __post_init__(self):
        self.c = list(frac_vector(self.c))
        n = len(self.c)
        for c in self.c:
            if c < 0:
                raise ValidationError("objective must be nonnegative")
        self.A1 = [self._row(r, n, binary=True) for r in self.A1]
        self.A2 = [self._row(r, n, binary=True) for r in self.A2]
        self.B = [self._row(r, n) for r in self.B]
        self.b1 = list(frac_vector(self.b1))
        self.b2 = list(frac_vector(self.b2))
        self.d = list(frac_vector(self.d))
        if len(self.b1) != len(self.A1) or len(self.b2) != len(self.A2) or len(self.d) != len(self.B):
            raise ValidationError("row/rhs count mismatch")
        for b in self.b1 + self.b2:
            if b.denominator != 1:
                raise ValidationError("laminar right-hand sides must be integers")
        for row in self.B:
            for a in row.values():
                if a < 0:
                    raise ValidationError("budget rows must be nonnegative")
        if not is_laminar([set(r) for r in self.A1 + self.A2]):
            raise ValidationError("A1/A2 row supports are not laminar")
        counts = [0] * n
        for row in self.B:
            for j in row:
                counts[j] += 1
        if counts and max(counts) > self.k:
            raise ValidationError(f"a variable lies in {max(counts)} budget rows, more than k={self.k}")

    @staticmethod
    def _row(r, n, binary=False):
        items = r.items() if isinstance(r, dict) else enumerate(r)
        out = {}
        for j, a in items:
            a = to_fraction(a)
            if a == 0:
                continue
            if not 0 <= j < n:
                raise ValidationError(f"column {j} out of range")
            if binary and a != 1:
                raise ValidationError("laminar rows must be 0/1")
            out[j] = a
        return out

    @property
    def n(self) -> int:
        return len(self.c)

    def laminar_ok(self, q) -> bool:
        return all(sum(q[j] for j in r) <= b for r, b in zip(self.A1, self.b1)) and all(
            sum(q[j] for j in r) >= b for r, b in zip(self.A2, self.b2)
        )

    def budget_values(self, q):
        return [sum((a * q[j] for j, a in r.items()), Fraction(0)) for r in self.B]


@dataclass
class RoundingTrace:
    iterations: int = 0
    dropped: list = field(default_factory=list)
    vertex_ok: list = field(default_factory=list)


def _ir_lp(sys: IterRoundSystem, cols, active):
    lp = LinearProgram.empty(len(cols))
    pos = {j: k for k, j in enumerate(cols)}
    for k, j in enumerate(cols):
        lp.c[k] = sys.c[j]

    def restrict(row):
        return {pos[j]: a for j, a in row.items() if j in pos}

    for r, b in zip(sys.A1, sys.b1):
        lp.add_le(restrict(r), b)
    for r, b in zip(sys.A2, sys.b2):
        lp.add_ge(restrict(r), b)
    budget_index = {}
    for i in active:
        budget_index[i] = lp.add_le(restrict(sys.B[i]), sys.d[i])
    return lp, budget_index


def iterative_round(sys: IterRoundSystem, qhat: Sequence, trace: RoundingTrace | None = None) -> tuple[int, ...]:
    """Round a feasible fractional point to a 0/1 vector.

    Repeatedly moves to an optimal vertex on the current support and, while
    that vertex is fractional, drops the lowest-index tight budget row whose
    fractional deficit ``sum(1 - q_j)`` over its positive entries is at most
    ``k``.
    """
    qhat = list(frac_vector(qhat))
    if len(qhat) != sys.n:
        raise ValidationError("point has wrong dimension")
    if any(a < 0 for a in qhat):
        raise ValidationError("point must be nonnegative")
    if not sys.laminar_ok(qhat):
        raise ValidationError("point violates the laminar rows")
    if any(v > d for v, d in zip(sys.budget_values(qhat), sys.d)):
        raise ValidationError("point violates a budget row")
    trace = trace if trace is not None else RoundingTrace()
    cols = [j for j in range(sys.n) if qhat[j] > 0]
    active = list(range(len(sys.B)))
    for _ in range(len(sys.B) + 2):
        trace.iterations += 1
        lp, bidx = _ir_lp(sys, cols, active)
        sol = solve_lp(lp, "exact")
        trace.vertex_ok.append(vertex_check(lp, sol.x))
        q = {j: sol.x[k] for k, j in enumerate(cols)}
        if all(v.denominator == 1 for v in q.values()):
            out = [0] * sys.n
            for j, v in q.items():
                out[j] = int(v)
            return tuple(out)
        drop = None
        for i in active:
            row = sys.B[i]
            load = sum((a * q.get(j, 0) for j, a in row.items()), Fraction(0))
            if load != sys.d[i]:
                continue
            deficit = sum((1 - q[j] for j in row if q.get(j, 0) > 0), Fraction(0))
            if deficit <= sys.k:
                drop = i
                break
        if drop is None:
            raise SolverError("fractional vertex without a droppable budget row")
        active.remove(drop)
        trace.dropped.append(drop)
        cols = [j for j in cols if q[j] > 0]
    raise SolverError("iterative rounding did not terminate")


# --- warm-started float LPs --------------------------------------------------------


class ArrayLP:
    """A float LP ``min c.x, row_lo <= A x <= row_hi, col_lo <= x <= col_hi`` kept in HiGHS.

    Used for screening many LPs that share a constraint matrix: only the
    costs change between solves, so each re-solve starts from the last basis.
    """

    def __init__(self, A, row_lo, row_hi, col_lo, col_hi, cost=None):
        import highspy
        from scipy.sparse import csc_matrix

        A = csc_matrix(A)
        self._hs = highspy
        self.h = highspy.Highs()
        self.h.setOptionValue("output_flag", False)
        inf = highspy.kHighsInf
        lp = highspy.HighsLp()
        lp.num_col_, lp.num_row_ = A.shape[1], A.shape[0]
        fix = lambda a: np.clip(a, -inf, inf)
        lp.col_cost_ = np.zeros(A.shape[1]) if cost is None else np.asarray(cost, float)
        lp.col_lower_ = fix(np.asarray(col_lo, float))
        lp.col_upper_ = fix(np.asarray(col_hi, float))
        lp.row_lower_ = fix(np.asarray(row_lo, float))
        lp.row_upper_ = fix(np.asarray(row_hi, float))
        lp.a_matrix_.format_ = highspy.MatrixFormat.kColwise
        lp.a_matrix_.start_ = A.indptr
        lp.a_matrix_.index_ = A.indices
        lp.a_matrix_.value_ = A.data
        lp.a_matrix_.num_col_, lp.a_matrix_.num_row_ = A.shape[1], A.shape[0]
        self.h.passModel(lp)
        self.ncol = A.shape[1]
        self._idx = np.arange(self.ncol, dtype=np.int32)

    def solve(self, cost=None):
        """Returns ``(objective, x, row_duals)``; raises InfeasibleLP when infeasible."""
        if cost is not None:
            self.h.changeColsCost(self.ncol, self._idx, np.asarray(cost, float))
        self.h.run()
        st = self.h.getModelStatus()
        if st == self._hs.HighsModelStatus.kInfeasible:
            raise InfeasibleLP("LP is infeasible")
        if st != self._hs.HighsModelStatus.kOptimal:
            raise SolverError(f"HiGHS status {st}")
        sol = self.h.getSolution()
        return (
            self.h.getInfo().objective_function_value,
            np.array(sol.col_value),
            np.array(sol.row_dual),
        )
