"""Estimator-style wrappers so the solvers compose with ``get_params``/``set_params`` tooling.

``fit`` takes the instance matrix itself: processing times (machines x jobs)
for load balancing, a precomputed distance matrix for clustering.
"""
from __future__ import annotations

from fractions import Fraction

from sklearn.base import BaseEstimator

from . import cluster, fairness, loadbal
from .model import (
    ClusterInstance,
    LoadBalInstance,
    assign_cost_vector,
    load_vector,
    nearest_facility,
    norm_eval,
    ordered_cost,
    topl_cost,
)


def _objective(weights, norm, dim):
    if norm is not None:
        return "norm", norm, lambda v: norm_eval(norm, v)
    if weights is None:
        raise ValueError("give either weights or norm")
    if isinstance(weights, int):
        l = weights
        return "topl", l, lambda v: topl_cost(l, v)
    ws = list(weights)
    if ws and isinstance(ws[0], (list, tuple)):
        return "minmax", ws, lambda v: max(ordered_cost(w, v) for w in ws)
    return "ordered", ws, lambda v: ordered_cost(ws, v)


class OrderedLoadBalancer(BaseEstimator):
    """Assign jobs to machines under an ordered, min-max ordered or norm objective.

    ``weights`` may be an int ``l`` (Top-l), one weight vector, or a list of
    weight vectors (their maximum).  ``norm`` overrides ``weights``.
    """

    def __init__(self, weights=None, norm=None, eps=Fraction(1, 2), delta=Fraction(1), jobs=1):
        self.weights = weights
        self.norm = norm
        self.eps = eps
        self.delta = delta
        self.jobs = jobs

    def fit(self, X, y=None):
        inst = X if isinstance(X, LoadBalInstance) else LoadBalInstance(X)
        kind, payload, f = _objective(self.weights, self.norm, inst.m)
        if kind == "topl":
            r = loadbal.solve_topl_lb(inst, payload)
            sol, diag = r.sigma, r.diagnostics
        elif kind == "ordered":
            r = loadbal.solve_ordered_lb(inst, payload, eps=self.eps, jobs=self.jobs)
            sol, diag = r.sigma, r.diagnostics
        elif kind == "minmax":
            r = loadbal.solve_minmax_ordered_lb(inst, payload, delta=self.delta)
            sol, diag = r.sigma, r.diagnostics
        else:
            r = loadbal.solve_minnorm_lb(inst, payload, eps=self.eps)
            sol, diag = r.solution, dict(r.diagnostics, certified_bound=r.guarantee)
        self.assignment_ = tuple(sol)
        self.loads_ = load_vector(inst, sol)
        self.value_ = f(self.loads_)
        self.diagnostics_ = diag
        return self

    def score(self, X=None, y=None):
        """Negated objective value, so larger is better."""
        return -self.value_


class OrderedKMedian(BaseEstimator):
    """Open ``n_clusters`` facilities among the points of a distance matrix.

    Same objective conventions as :class:`OrderedLoadBalancer`.
    """

    def __init__(self, n_clusters=1, weights=None, norm=None, eps=Fraction(1, 2), jobs=1):
        self.n_clusters = n_clusters
        self.weights = weights
        self.norm = norm
        self.eps = eps
        self.jobs = jobs

    def fit(self, X, y=None):
        inst = X if isinstance(X, ClusterInstance) else ClusterInstance(X, self.n_clusters)
        kind, payload, f = _objective(self.weights, self.norm, inst.n)
        if kind == "topl":
            w = tuple(Fraction(int(i < payload)) for i in range(inst.n))
            r = cluster.solve_ordered_km(inst, w, eps=self.eps, jobs=self.jobs)
            F, diag = r.facilities, r.diagnostics
        elif kind == "ordered":
            r = cluster.solve_ordered_km(inst, payload, eps=self.eps, jobs=self.jobs)
            F, diag = r.facilities, r.diagnostics
        elif kind == "minmax":
            r = cluster.solve_minmax_ordered_km(inst, payload, eps=self.eps)
            F, diag = r.facilities, r.diagnostics
        else:
            r = cluster.solve_minnorm_cluster(inst, payload, eps=self.eps)
            F, diag = r.solution, dict(r.diagnostics, certified_bound=r.guarantee)
        self.facilities_ = tuple(F)
        self.labels_ = nearest_facility(inst, F)
        self.costs_ = assign_cost_vector(inst, F)
        self.value_ = f(self.costs_)
        self.diagnostics_ = diag
        return self

    def predict(self, X=None):
        """Facility serving each point of the fitted matrix."""
        return self.labels_

    def score(self, X=None, y=None):
        return -self.value_


class SimultaneousSolver(BaseEstimator):
    """One solution that is good for every Top-l objective at once."""

    def __init__(self, problem="lb", n_clusters=None, eps=Fraction(1, 2)):
        self.problem = problem
        self.n_clusters = n_clusters
        self.eps = eps

    def fit(self, X, y=None):
        if self.problem == "lb":
            inst = X if isinstance(X, LoadBalInstance) else LoadBalInstance(X)
        else:
            inst = X if isinstance(X, ClusterInstance) else ClusterInstance(X, self.n_clusters)
        r = fairness.solve_simultaneous(self.problem, inst, eps=self.eps)
        self.solution_ = tuple(r.solution)
        self.costs_ = r.costs
        self.certified_factor_ = r.certified_factor
        self.lower_bounds_ = r.lower_bounds
        self.diagnostics_ = r.diagnostics
        return self
