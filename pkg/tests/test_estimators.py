from fractions import Fraction

import pytest
from sklearn.base import clone

from ordnorm.estimators import OrderedKMedian, OrderedLoadBalancer, SimultaneousSolver
from ordnorm.model import LoadBalInstance, Lp, load_vector, ordered_cost
from ordnorm.refcli.brute import brute_force_lb

P = [[2, 3, 1, 4], [3, 1, 2, 2]]
D = [[0, 1, 5, 6], [1, 0, 4, 5], [5, 4, 0, 1], [6, 5, 1, 0]]


def test_params_and_clone():
    est = OrderedLoadBalancer(weights=(2, 1), eps=Fraction(1, 4))
    assert est.get_params()["eps"] == Fraction(1, 4)
    est.set_params(weights=1)
    assert clone(est).weights == 1
    assert OrderedKMedian(n_clusters=2).get_params()["n_clusters"] == 2


def test_load_balancer_objectives():
    for weights in (1, (2, 1), [(1, 0), (1, 1)]):
        est = OrderedLoadBalancer(weights=weights).fit(P)
        assert len(est.assignment_) == 4
        assert est.loads_ == load_vector(LoadBalInstance(P), est.assignment_)
        assert est.score() == -est.value_
    est = OrderedLoadBalancer(norm=Lp(None)).fit(P)
    opt, _ = brute_force_lb(LoadBalInstance(P), Lp(None))
    assert est.value_ <= est.diagnostics_["certified_bound"] * opt


def test_kmedian_fit_predict():
    est = OrderedKMedian(n_clusters=2, weights=(1, 1, 1, 1)).fit(D)
    assert sorted(est.facilities_)[0] in (0, 1) and sorted(est.facilities_)[1] in (2, 3)
    labels = est.predict()
    assert labels[0] == labels[1] != labels[2] == labels[3]
    assert est.value_ == ordered_cost((1, 1, 1, 1), est.costs_)


def test_kmedian_needs_objective():
    with pytest.raises(ValueError):
        OrderedKMedian(n_clusters=2).fit(D)


def test_simultaneous_solver():
    est = SimultaneousSolver(problem="km", n_clusters=2).fit(D)
    assert len(est.solution_) == 2
    assert est.certified_factor_ is None or est.certified_factor_ >= 1
