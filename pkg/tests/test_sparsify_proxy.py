import math
import random
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from ordnorm.model import ValidationError, ordered_cost, sorted_desc
from ordnorm.proxy import (
    ThresholdVector,
    cover_target,
    enumeration_bound,
    enumerate_thresholds,
    h_multi,
    h_multi_bands,
    h_scalar,
    is_valid,
    prox,
    threshold_constant,
)
from ordnorm.sparsify import position_set, sparsify_weights, weight_steps


def test_position_sets():
    assert position_set(8, 1).positions == (1, 2, 4, 8)
    assert position_set(1, Fraction(1, 3)).positions == (1,)
    assert position_set(10, Fraction(1, 2)).positions == (1, 2, 3, 4, 6, 8, 10)
    P = position_set(10, Fraction(1, 2))
    assert P.next(4) == 6 and P.next(10) == 11 and P.next(0) == 1
    with pytest.raises(ValidationError):
        position_set(5, 0)


def test_sparsify_examples():
    assert sparsify_weights([5, 4, 3, 2], position_set(4, 1)) == (5, 4, 2, 2)
    assert sparsify_weights([2] * 7, position_set(7, 1)) == (2,) * 7
    got = sparsify_weights([9, 7, 6, 5, 3, 2, 2, 1], position_set(8, 1))
    assert got == (9, 7, 5, 5, 1, 1, 1, 1)


def test_h_scalar_examples():
    assert h_scalar(3, 5) == 2
    assert h_scalar(3, 2) == 0
    assert h_scalar(0, Fraction(7, 2)) == Fraction(7, 2)


def test_h_multi_example():
    P = position_set(2, 1)
    t = ThresholdVector(P, [4, 1])
    assert h_multi([3, 1], t, 5) == 6
    assert h_multi([3, 1], t, 1) == 0


def test_h_forms_agree():
    rng = random.Random(5)
    for _ in range(300):
        n = rng.randint(1, 12)
        P = position_set(n, rng.choice([1, Fraction(1, 2)]))
        tw = sparsify_weights(sorted((Fraction(rng.randint(0, 9)) for _ in range(n)), reverse=True), P)
        t = ThresholdVector(P, sorted((Fraction(rng.randint(0, 20), 2) for _ in P.positions), reverse=True))
        a = Fraction(rng.randint(0, 30), 3)
        assert h_multi(tw, t, a) == h_multi_bands(tw, t, a)


def test_prox_single_position_is_top_l_proxy():
    P = position_set(1, 1)
    t = ThresholdVector(P, [3])
    v = [5, 1]
    # with n = 1 only one coordinate; build n = 2 by hand instead
    P2 = position_set(2, 5)  # positions {1, 2}
    assert P2.positions == (1, 2)
    tw = (1, 1)
    t2 = ThresholdVector(P2, [3, 3])
    # steps: position 1 -> 0, position 2 -> 1: the Top-2 proxy 2*3 + sum (v - 3)^+
    assert prox(tw, t2, v) == 2 * 3 + 2
    assert prox((1,), t, [5]) == 3 + 2


def test_prox_zero_weights():
    P = position_set(4, 1)
    t = ThresholdVector(P, [5, 3, 1])
    assert prox((0, 0, 0, 0), t, [9, 2, 7, 1]) == 0


def test_prox_upper_bounds_ordered_cost():
    rng = random.Random(6)
    for _ in range(200):
        n = rng.randint(1, 10)
        P = position_set(n, 1)
        tw = sparsify_weights(sorted((Fraction(rng.randint(0, 9)) for _ in range(n)), reverse=True), P)
        v = [Fraction(rng.randint(0, 20)) for _ in range(n)]
        o = sorted_desc(v)
        exact = ThresholdVector(P, [o[l - 1] for l in P.positions])
        assert prox(tw, exact, v) == ordered_cost(tw, v)
        t = ThresholdVector(P, sorted((Fraction(rng.randint(0, 20)) for _ in P.positions), reverse=True))
        assert prox(tw, t, v) >= ordered_cost(tw, v)


def test_threshold_validity():
    P = position_set(2, 1)
    assert is_valid(ThresholdVector(P, [4, 1]))
    assert not is_valid(ThresholdVector(P, [1, 4]))
    assert is_valid(ThresholdVector(P, [2, 2]))
    with pytest.raises(ValidationError):
        h_multi([1, 1], ThresholdVector(P, [1, 4]), 3)


def test_enumeration_single_position():
    P = position_set(1, 1)
    got = enumerate_thresholds(P, [4], Fraction(1, 2), 1, Fraction(3, 2))
    assert [t.values for t in got] == [(0,), (4,)]


def test_enumeration_size_bound():
    for n in (4, 8, 16):
        P = position_set(n, 1)
        S = [1, 2, 3, 5, 8]
        got = enumerate_thresholds(P, S, Fraction(1, 2), n, Fraction(3, 2))
        assert len(got) <= enumeration_bound(P, len(S), Fraction(1, 2), n, Fraction(3, 2))
        assert all(is_valid(t) for t in got)
        assert len({t.values for t in got}) == len(got)


def test_enumeration_covers_planted_target():
    rng = random.Random(7)
    eps = Fraction(1, 2)
    base = 1 + eps
    for _ in range(40):
        n = rng.randint(1, 8)
        P = position_set(n, 1)
        o = sorted((Fraction(rng.randint(0, 30)) for _ in range(n)), reverse=True)
        if o[0] == 0:
            continue
        # the grid needs a first threshold in [o_1, (1+eps) o_1]
        t1 = o[0] * Fraction(rng.randint(4, 6), 4)
        grid = {t.values for t in enumerate_thresholds(P, [t1], eps, n, base)}
        target = cover_target(P, o, t1, eps, n, base)
        assert target.values in grid
        for l, tl in target.items():
            ol = o[l - 1]
            if ol >= eps * o[0] / n:
                assert ol <= tl <= base * ol
            else:
                assert tl == 0


@settings(max_examples=60)
@given(
    st.integers(1, 12),
    st.sampled_from([Fraction(1), Fraction(1, 2), Fraction(1, 4)]),
    st.data(),
)
def test_sparsified_weights_properties(n, delta, data):
    w = sorted(data.draw(st.lists(st.fractions(0, 20), min_size=n, max_size=n)), reverse=True)
    P = position_set(n, delta)
    tw = sparsify_weights(w, P)
    assert all(a >= b for a, b in zip(tw, tw[1:]))
    assert all(tw[l - 1] == w[l - 1] for l in P.positions)
    assert all(x <= y for x, y in zip(tw, w))
    steps = weight_steps(tw, P)
    assert all(s >= 0 for s in steps.values())
    assert sum(steps.values()) == tw[0]
    assert len(P.positions) <= 1 + math.ceil(math.log(n) / math.log(1 + float(delta))) + 1


def test_threshold_constant():
    P = position_set(4, 1)
    t = ThresholdVector(P, [6, 4, 2])
    tw = (5, 3, 1, 1)
    # steps: 1 -> 2, 2 -> 2, 4 -> 1
    assert threshold_constant(tw, t) == 2 * 1 * 6 + 2 * 2 * 4 + 1 * 4 * 2
