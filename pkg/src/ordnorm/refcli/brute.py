"""Exhaustive exact solvers used as oracles for the approximation audits."""
from __future__ import annotations

import itertools
import math
from fractions import Fraction

from ..model import (
    ClusterInstance,
    LoadBalInstance,
    MaxOrdered,
    Lp,
    Ordered,
    TopL,
    ValidationError,
    assign_cost_vector,
    load_vector,
    norm_eval,
    ordered_cost,
    topl_cost,
)

GUARD = 10 ** 7


class SizeGuardError(RuntimeError):
    """The search space is larger than the brute-force guard."""


def objective_fn(objective):
    """Turn a norm spec, a weight vector or a list of weight vectors into ``v -> value``.

    A list of weight vectors means their maximum (min-max objective).
    """
    if isinstance(objective, (Lp, TopL, Ordered, MaxOrdered)):
        return lambda v: norm_eval(objective, v)
    if callable(objective):
        return objective
    obj = list(objective)
    if obj and isinstance(obj[0], (list, tuple)):
        ws = [tuple(w) for w in obj]
        return lambda v: max(ordered_cost(w, v) for w in ws)
    return lambda v: ordered_cost(obj, v)


def lb_space(inst: LoadBalInstance) -> int:
    return inst.m ** inst.n


def km_space(inst: ClusterInstance) -> int:
    return math.comb(inst.n, inst.k)


def _guard(size):
    if size > GUARD:
        raise SizeGuardError(f"search space {size} exceeds the guard {GUARD}")


def all_assignments(inst: LoadBalInstance):
    _guard(lb_space(inst))
    return itertools.product(range(inst.m), repeat=inst.n)


def all_facility_sets(inst: ClusterInstance):
    _guard(km_space(inst))
    return itertools.combinations(range(inst.n), inst.k)


def brute_force_lb(inst: LoadBalInstance, objective):
    """Optimal value and the lexicographically first optimal assignment."""
    f = objective_fn(objective)
    best = None
    for sig in all_assignments(inst):
        val = f(load_vector(inst, sig))
        if best is None or val < best[0]:
            best = (val, sig)
    return best


def brute_force_km(inst: ClusterInstance, objective):
    """Optimal value and the lexicographically first optimal facility set."""
    f = objective_fn(objective)
    best = None
    for F in all_facility_sets(inst):
        val = f(assign_cost_vector(inst, F))
        if best is None or val < best[0]:
            best = (val, F)
    return best


def cost_vectors(problem: str, inst):
    if problem == "lb":
        return [load_vector(inst, s) for s in all_assignments(inst)]
    if problem == "km":
        return [assign_cost_vector(inst, F) for F in all_facility_sets(inst)]
    raise ValidationError(f"unknown problem {problem!r}")


def simultaneous_optimum(problem: str, inst):
    """``({l: OPT_l}, alpha*)``: every Top-l optimum and the best simultaneous factor."""
    vs = cost_vectors(problem, inst)
    d = len(vs[0])
    opt = {l: min(topl_cost(l, v) for v in vs) for l in range(1, d + 1)}

    def factor(v):
        out = Fraction(1)
        for l in range(1, d + 1):
            top = topl_cost(l, v)
            if opt[l] == 0:
                if top > 0:
                    return None
                continue
            out = max(out, top / opt[l])
        return out

    facs = [a for a in (factor(v) for v in vs) if a is not None]
    return opt, min(facs)
