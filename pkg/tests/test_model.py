import itertools
import random
from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from ordnorm.model import (
    ClusterInstance,
    LoadBalInstance,
    Lp,
    MaxOrdered,
    Ordered,
    TopL,
    ValidationError,
    assign_cost_vector,
    check_weights,
    load_vector,
    norm_eval,
    ordered_cost,
    to_fraction,
    topl_cost,
)


def test_topl_examples():
    assert topl_cost(2, [4, 1, 3]) == 7
    assert topl_cost(1, [0, 0, 0]) == 0
    assert topl_cost(3, [5, 2, 9, 1]) == 16


def test_topl_matches_subset_max():
    rng = random.Random(1)
    for _ in range(50):
        v = [rng.randint(0, 9) for _ in range(rng.randint(1, 6))]
        l = rng.randint(1, len(v))
        best = max(sum(c) for c in itertools.combinations(v, l))
        assert topl_cost(l, v) == best


def test_topl_index_out_of_range():
    with pytest.raises(ValidationError):
        topl_cost(4, [1, 2, 3])


def test_ordered_examples():
    assert ordered_cost([3, 2, 1], [1, 5, 2]) == 20
    v = [Fraction(3, 2), 4, 0, 7]
    assert ordered_cost([1, 1, 1, 1], v) == sum(v)
    assert ordered_cost([1, 1, 0, 0], [5, 2, 9, 1]) == 14 == topl_cost(2, [5, 2, 9, 1])


def test_ordered_length_mismatch():
    with pytest.raises(ValidationError):
        ordered_cost([1, 1], [1, 2, 3])


def test_weights_must_be_non_increasing():
    with pytest.raises(ValidationError):
        check_weights([1, 2])
    with pytest.raises(ValidationError):
        check_weights([1, -1])


def test_norm_examples():
    assert norm_eval(Lp(2), [3, 4]) == 5
    assert norm_eval(MaxOrdered([[1, 0], [1, 1]]), [2, 3]) == 5
    assert norm_eval(Lp(None), [2, 7, 3]) == 7
    assert norm_eval(Lp(1), [2, 7, 3]) == 12
    assert norm_eval(TopL(2), [2, 7, 3]) == 10
    assert norm_eval(Ordered([2, 1, 0]), [2, 7, 3]) == 17


def test_load_vector_examples():
    inst = LoadBalInstance([[2, 3], [9, 9]])
    assert load_vector(inst, [0, 0]) == (5, 0)
    rng = random.Random(2)
    inst = LoadBalInstance([[rng.randint(0, 9) for _ in range(5)] for _ in range(3)])
    sig = [rng.randrange(3) for _ in range(5)]
    naive = [0, 0, 0]
    for j, i in enumerate(sig):
        naive[i] += inst.p[i][j]
    assert list(load_vector(inst, sig)) == naive


def test_assignment_cost_examples():
    line = [[abs(a - b) for b in range(4)] for a in range(4)]
    inst = ClusterInstance(line, 1)
    assert assign_cost_vector(inst, [1]) == (1, 0, 1, 2)
    assert assign_cost_vector(ClusterInstance(line, 4), range(4)) == (0, 0, 0, 0)
    assert assign_cost_vector(ClusterInstance([[0]], 1), [0]) == (0,)
    with pytest.raises(ValidationError):
        assign_cost_vector(inst, [])


def test_instance_validation():
    with pytest.raises(ValidationError):
        ClusterInstance([[0, 1, 5], [1, 0, 1], [5, 1, 0]], 1)  # 5 > 1 + 1
    with pytest.raises(ValidationError):
        ClusterInstance([[0, 1], [2, 0]], 1)
    with pytest.raises(ValidationError):
        LoadBalInstance([[1, 2], [3]])
    with pytest.raises(ValidationError):
        LoadBalInstance([[-1]])


@given(st.lists(st.fractions(min_value=0, max_value=50), min_size=1, max_size=8))
def test_ordered_is_top_l_sum(v):
    n = len(v)
    # sum of Top-l over all l equals the ordered cost with weights n, n-1, ..., 1
    w = list(range(n, 0, -1))
    assert ordered_cost(w, v) == sum(topl_cost(l, v) for l in range(1, n + 1))


@given(st.sampled_from(["3", "3/4", "0.25", "-2", "1e-3"]))
def test_to_fraction_strings(s):
    q = to_fraction(s)
    assert isinstance(q, Fraction)
    assert q == Fraction(s)
