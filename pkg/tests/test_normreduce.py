import math
import random
from fractions import Fraction

import pytest

import _gen
from ordnorm.model import (
    ClusterInstance,
    LoadBalInstance,
    Lp,
    MaxOrdered,
    Ordered,
    TopL,
    ValidationError,
    norm_eval,
    ordered_cost,
)
from ordnorm.normreduce import (
    Bounds,
    ball_opt,
    ball_opt_lp,
    build_weight_collection,
    cluster_is_zero,
    lb_is_zero,
    minnorm_reduce_and_solve,
    prune_dominated,
    weight_collection_bound,
)

HALF = Fraction(1, 2)


def test_ball_lp_norms():
    val, x = ball_opt(Lp(2), [3, 4])
    assert math.isclose(val, 5.0)
    assert math.isclose(x[0], 0.6) and math.isclose(x[1], 0.8)
    assert ball_opt(Lp(1), [3, 4, 1])[0] == 4
    assert ball_opt(Lp(None), [3, 4, 1])[0] == 8


def test_ball_top1_is_box():
    # Top-1 ball is the unit box, so the optimum is the plain sum
    val, x = ball_opt(TopL(1), [2, 5, 1])
    assert val == 8 and x == (1, 1, 1)


def test_ball_ordered_own_weights():
    # the weight vector is its own dual point: w.x <= f(x) with equality on the top block
    w = (3, 2, 1, 1)
    val, _ = ball_opt(Ordered(w), w)
    assert val == 1


def test_ball_oracle_matches_lp():
    rng = random.Random(8)
    for _ in range(60):
        n = rng.randint(1, 6)
        c = _gen.cost_vector(rng, n)
        for f in (TopL(rng.randint(1, n)), Ordered(_gen.rational_weights(rng, n)), MaxOrdered([_gen.weights(rng, n), _gen.weights(rng, n)])):
            val, x = ball_opt(f, c)
            assert val == ball_opt_lp(f, c)[0]
            assert norm_eval(f, x) <= 1
            assert sum(a * b for a, b in zip(c, x)) == val


def test_ball_rejects_negative_objective():
    with pytest.raises(ValidationError):
        ball_opt(Lp(1), [1, -1])


def test_prune_dominated():
    ws = [(2, 0, 0), (1, 1, 0), (1, 0, 0), (2, 1, 0)]
    assert prune_dominated(ws) == [(2, 1, 0)]
    assert prune_dominated([(2, 0), (1, 1)]) == [(2, 0)]
    assert prune_dominated([(2, 0, 0), (1, 1, 1)]) == [(1, 1, 1), (2, 0, 0)]


NORMS = [Lp(1), Lp(None), Lp(2), TopL(2), Ordered([3, 2, 1, 1]), MaxOrdered([[2, 0, 0, 0], [1, 1, 1, 1]])]


@pytest.mark.parametrize("f", NORMS, ids=lambda f: f.describe())
def test_weight_collection_sandwich(f):
    rng = random.Random(9)
    eps = HALF
    unit = norm_eval(f, [1, 0, 0, 0])
    b = Bounds(high=Fraction(20), lb=Fraction(unit) if isinstance(unit, Fraction) else Fraction(1), ub=Fraction(80))
    W = build_weight_collection(f, eps, b, 4)
    assert W.candidates <= weight_collection_bound(4, eps, b)
    assert len(W.weights) <= W.candidates
    for _ in range(200):
        v = [Fraction(rng.randint(0, 20)) for _ in range(4)]
        if max(v) == 0:
            continue
        fv = norm_eval(f, v)
        best = max(ordered_cost(w, v) for w in W.all())
        if isinstance(fv, float):
            assert float(best) <= (1 + eps) * fv * (1 + 1e-12)
            assert fv <= float((1 + 3 * eps) * best) * (1 + 1e-12)
        else:
            assert best <= (1 + eps) * fv
            assert fv <= (1 + 3 * eps) * best


def test_weight_collection_eps_range():
    b = Bounds(high=Fraction(1), lb=Fraction(1), ub=Fraction(2))
    with pytest.raises(ValidationError):
        build_weight_collection(Lp(1), Fraction(3, 4), b, 3)
    with pytest.raises(ValidationError):
        Bounds(high=Fraction(1), lb=Fraction(2), ub=Fraction(1))


def test_zero_instances():
    assert lb_is_zero(LoadBalInstance([[0, 3], [2, 0]]))
    assert not lb_is_zero(LoadBalInstance([[1, 3], [2, 0]]))
    zc = ClusterInstance([[0, 0, 5], [0, 0, 5], [5, 5, 0]], 2)
    assert cluster_is_zero(zc)
    r = minnorm_reduce_and_solve("km", zc, Lp(2))
    assert r.value == 0 and r.diagnostics["zero_instance"]


def test_reduction_lb_guarantee():
    inst = LoadBalInstance([[2, 3, 1, 4], [3, 1, 2, 2]])
    from ordnorm.refcli.brute import brute_force_lb

    for f in (Lp(1), Lp(None), TopL(1), Ordered([2, 1])):
        r = minnorm_reduce_and_solve("lb", inst, f, eps=HALF)
        opt, _ = brute_force_lb(inst, f)
        assert r.value <= r.guarantee * opt
        assert r.diagnostics["weights"] == len(r.collection.all())


def test_reduction_dimension_check():
    inst = LoadBalInstance([[2, 3], [3, 1]])
    with pytest.raises(ValidationError):
        minnorm_reduce_and_solve("lb", inst, Ordered([1, 1, 1]))
    with pytest.raises(ValidationError):
        minnorm_reduce_and_solve("xx", inst, Lp(1))
