import math
import random
from fractions import Fraction

import pytest

import _gen
from ordnorm import cluster
from ordnorm.fairness import BudgetSpec, solve_multibudget, solve_simultaneous
from ordnorm.model import ClusterInstance, LoadBalInstance, ValidationError, ordered_cost, topl_cost
from ordnorm.refcli.brute import brute_force_km, brute_force_lb, simultaneous_optimum

LB = LoadBalInstance([[2, 3, 1, 4], [3, 1, 2, 2], [1, 2, 3, 1]])
WS = [(1, 0, 0), (1, 1, 1)]


def test_budget_spec_parsing():
    spec = BudgetSpec(WS, [math.inf, "inf"])
    assert spec.budgets == (math.inf, math.inf)
    with pytest.raises(ValidationError):
        BudgetSpec(WS, [1])
    with pytest.raises(ValidationError):
        BudgetSpec(WS, [1, -1])
    with pytest.raises(ValidationError):
        BudgetSpec([(1, 2, 0)], [1])


def test_unbounded_budgets_give_a_solution():
    r = solve_multibudget("lb", LB, BudgetSpec(WS, [math.inf, None]))
    assert r is not None and len(r.solution) == LB.n
    assert r.violation is None


def test_zero_budgets_are_infeasible():
    # every job has positive size on every machine
    assert solve_multibudget("lb", LB, BudgetSpec(WS, [0, 0])) is None


def test_budgets_at_the_optima_lb():
    bs = [brute_force_lb(LB, w)[0] for w in WS]
    r = solve_multibudget("lb", LB, BudgetSpec(WS, bs))
    assert r is not None
    assert r.violation <= r.diagnostics["rho"]
    for w, b in zip(WS, bs):
        assert ordered_cost(w, r.costs) <= r.diagnostics["rho"] * b


def test_budgets_at_the_optima_km():
    rng = random.Random(10)
    for _ in range(3):
        inst = _gen.metric_instance(rng, n_min=5, n_max=5)
        inst = ClusterInstance(inst.c, 2)
        ws = [_gen.weights(rng, 5), (1,) * 5]
        bs = [brute_force_km(inst, w)[0] for w in ws]
        r = solve_multibudget("km", inst, BudgetSpec(ws, bs))
        assert r is not None
        assert r.diagnostics["rho"] == cluster.minmax_factor(Fraction(1, 2))
        for w, b in zip(ws, bs):
            assert ordered_cost(w, r.costs) <= r.diagnostics["rho"] * b


def test_simultaneous_identical_machines():
    inst = LoadBalInstance([[2] * 4] * 2)
    opt, alpha = simultaneous_optimum("lb", inst)
    assert alpha == 1
    r = solve_simultaneous("lb", inst)
    for l, lb in r.lower_bounds.items():
        assert 0 < lb <= opt[l]
    actual = max(topl_cost(l, r.costs) / opt[l] for l in opt)
    assert actual <= r.certified_factor


def test_simultaneous_random_lb():
    rng = random.Random(12)
    for _ in range(3):
        inst = _gen.lb_instance(rng, m_min=2, m_max=3, n_min=3, n_max=5)
        opt, alpha = simultaneous_optimum("lb", inst)
        r = solve_simultaneous("lb", inst)
        if any(v == 0 for v in opt.values()):
            continue
        actual = max(topl_cost(l, r.costs) / opt[l] for l in opt)
        assert alpha <= actual
        if r.certified_factor is not None:
            assert actual <= r.certified_factor


def test_simultaneous_single_machine():
    r = solve_simultaneous("lb", LoadBalInstance([[2, 3, 4]]))
    assert r.costs == (9,) and r.certified_factor == 1 and r.diagnostics["trivial"]


def test_simultaneous_eps_range():
    with pytest.raises(ValidationError):
        solve_simultaneous("lb", LB, eps=Fraction(3, 2))
