"""Command-line front end: ``ordnorm lb|km INSTANCE <objective> [options]``.

Exit codes: 0 success, 2 parse or validation error (including usage),
3 budgets that no solution can meet, 4 oracle refused by the size guard.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from dataclasses import dataclass, field
from fractions import Fraction

from .. import cluster, fairness, loadbal
from ..model import (
    ValidationError,
    assign_cost_vector,
    load_vector,
    norm_eval,
    ordered_cost,
    to_fraction,
    topl_cost,
)
from . import brute
from .formats import fmt_num, parse_budgets, parse_instance, parse_norm, parse_weights

EXIT_OK, EXIT_INPUT, EXIT_BUDGET, EXIT_GUARD = 0, 2, 3, 4


@dataclass
class RunReport:
    problem: str
    objective: str
    status: str
    solution: tuple | None = None
    costs: tuple | None = None
    value: object = None
    certified_bound: object = None
    diagnostics: dict = field(default_factory=dict)
    oracle: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)
    wall_time: float = 0.0


def _num_out(x, as_float):
    if isinstance(x, Fraction):
        return repr(float(x)) if as_float else fmt_num(x)
    if isinstance(x, bool) or x is None:
        return x
    if isinstance(x, int):
        return x
    if isinstance(x, float):
        return repr(x) if math.isfinite(x) else str(x)
    return x


def _plain(x, as_float):
    """JSON-ready copy; rationals become ``"a/b"`` strings (or floats under ``--float``)."""
    if isinstance(x, dict):
        return {str(k): _plain(v, as_float) for k, v in x.items() if not str(k).startswith("_")}
    if isinstance(x, (list, tuple)):
        return [_plain(v, as_float) for v in x]
    if isinstance(x, (Fraction, int, float, bool)) or x is None:
        out = _num_out(x, as_float)
        return float(out) if as_float and isinstance(x, Fraction) else out
    if hasattr(x, "numerator"):
        return _plain(to_fraction(x), as_float)
    return str(x)


def _text(x, as_float):
    if isinstance(x, (list, tuple)):
        return " ".join(_text(v, as_float) for v in x)
    v = _num_out(x, as_float)
    return str(v)


def render(report: RunReport, as_float: bool = False) -> str:
    """Key-value lines followed by a JSON block; wall time is left out so reruns are byte-identical."""
    lines = [
        f"problem: {report.problem}",
        f"objective: {report.objective}",
        f"status: {report.status}",
    ]
    if report.solution is not None:
        lines.append(f"solution: {_text(report.solution, as_float)}")
        lines.append(f"cost_vector: {_text(report.costs, as_float)}")
        lines.append(f"value: {_text(report.value, as_float)}")
    if report.certified_bound is not None:
        lines.append(f"certified_bound: {_text(report.certified_bound, as_float)}")
    for k in sorted(report.oracle):
        lines.append(f"oracle.{k}: {_text(report.oracle[k], as_float)}")
    for k in sorted(report.params):
        lines.append(f"param.{k}: {_text(report.params[k], as_float)}")
    for k in sorted(report.diagnostics):
        if k.startswith("_"):
            continue
        v = report.diagnostics[k]
        if isinstance(v, (dict, list, tuple)) and not all(isinstance(a, (int, Fraction)) for a in v):
            continue
        lines.append(f"diag.{k}: {_text(v, as_float)}")
    block = {
        "problem": report.problem,
        "objective": report.objective,
        "status": report.status,
        "solution": _plain(report.solution, as_float),
        "cost_vector": _plain(report.costs, as_float),
        "value": _plain(report.value, as_float),
        "certified_bound": _plain(report.certified_bound, as_float),
        "oracle": _plain(report.oracle, as_float),
        "params": _plain(report.params, as_float),
        "diagnostics": _plain(report.diagnostics, as_float),
    }
    lines.append("--- json")
    lines.append(json.dumps(block, sort_keys=True))
    return "\n".join(lines) + "\n"


# --- objectives ---------------------------------------------------------------


@dataclass
class Objective:
    kind: str
    label: str
    payload: object
    value: object  # cost vector -> value

    def __call__(self, v):
        return self.value(v)


def _make_objective(args, dim):
    if args.topl is not None:
        l = args.topl
        if not 1 <= l <= dim:
            raise ValidationError(f"--topl must lie in [1, {dim}]")
        return Objective("topl", f"topl {l}", l, lambda v: topl_cost(l, v))
    if args.ordered is not None:
        w = parse_weights(_read(args.ordered), dim)
        return Objective("ordered", "ordered " + ",".join(fmt_num(a) for a in w), w, lambda v: ordered_cost(w, v))
    if args.minmax is not None:
        ws = [parse_weights(_read(p), dim) for p in args.minmax]
        return Objective(
            "minmax",
            "minmax " + " ".join("[" + ",".join(fmt_num(a) for a in w) + "]" for w in ws),
            ws,
            lambda v: max(ordered_cost(w, v) for w in ws),
        )
    if args.norm is not None:
        spec = _read(args.norm) if os.path.isfile(args.norm) else args.norm
        f = parse_norm(spec, os.path.dirname(args.norm) if os.path.isfile(args.norm) else ".", _read)
        return Objective("norm", f.describe(), f, lambda v: norm_eval(f, v))
    if args.budget is not None:
        ws, bs = parse_budgets(_read(args.budget), dim)
        label = "budget " + " ".join(
            ("inf" if b == math.inf else fmt_num(b)) + ":[" + ",".join(fmt_num(a) for a in w) + "]" for w, b in zip(ws, bs)
        )
        return Objective("budget", label, (ws, bs), lambda v: tuple(ordered_cost(w, v) for w in ws))
    if args.simul:
        return Objective("simul", "simultaneous", None, lambda v: tuple(topl_cost(l, v) for l in range(1, len(v) + 1)))
    raise ValidationError("no objective given")


def _read(path):
    try:
        with open(path) as fh:
            return fh.read()
    except OSError as exc:
        raise ValidationError(f"cannot read {path}: {exc.strerror}") from exc


# --- solving ------------------------------------------------------------------


def _costs(problem, inst, sol):
    return load_vector(inst, sol) if problem == "lb" else assign_cost_vector(inst, sol)


def _solve(problem, inst, obj: Objective, args):
    """Returns ``(status, solution, certified_bound, diagnostics)``."""
    eps, delta, jobs = args.eps, args.delta, args.jobs
    if obj.kind == "topl":
        if problem == "lb":
            r = loadbal.solve_topl_lb(inst, obj.payload)
            return "ok", r.sigma, r.diagnostics.get("certified_bound"), r.diagnostics
        w = tuple(Fraction(1) if i < obj.payload else Fraction(0) for i in range(inst.n))
        r = cluster.solve_ordered_km(inst, w, eps=eps, jobs=jobs)
        return "ok", r.facilities, r.diagnostics.get("certified_bound"), r.diagnostics
    if obj.kind == "ordered":
        if problem == "lb":
            r = loadbal.solve_ordered_lb(inst, obj.payload, eps=eps, jobs=jobs)
            return "ok", r.sigma, r.diagnostics.get("certified_bound"), r.diagnostics
        r = cluster.solve_ordered_km(inst, obj.payload, eps=eps, jobs=jobs)
        return "ok", r.facilities, r.diagnostics.get("certified_bound"), r.diagnostics
    if obj.kind == "minmax":
        if problem == "lb":
            r = loadbal.solve_minmax_ordered_lb(inst, obj.payload, delta=delta)
            return "ok", r.sigma, r.diagnostics.get("certified_bound"), r.diagnostics
        r = cluster.solve_minmax_ordered_km(inst, obj.payload, eps=eps)
        return "ok", r.facilities, r.diagnostics.get("certified_bound"), r.diagnostics
    if obj.kind == "norm":
        if problem == "lb":
            r = loadbal.solve_minnorm_lb(inst, obj.payload, eps=eps)
        else:
            r = cluster.solve_minnorm_cluster(inst, obj.payload, eps=eps)
        return "ok", r.solution, r.guarantee, r.diagnostics
    if obj.kind == "budget":
        ws, bs = obj.payload
        r = fairness.solve_multibudget(problem, inst, fairness.BudgetSpec(ws, bs), eps=eps)
        if r is None:
            return "no solution", None, None, {}
        d = dict(r.diagnostics)
        d["violation"] = r.violation
        return "ok", r.solution, r.diagnostics.get("rho"), d
    r = fairness.solve_simultaneous(problem, inst, eps=eps)
    d = dict(r.diagnostics)
    d.update({"A": r.A, "certified_factor": r.certified_factor})
    d["lower_bounds"] = [r.lower_bounds[l] for l in sorted(r.lower_bounds)]
    rho = d.get("rho")
    bound = rho * (1 + to_fraction(eps)) ** 2 if rho is not None else None
    return "ok", r.solution, bound, d


def _oracle(problem, inst, obj: Objective, value):
    if obj.kind == "budget":
        return {}
    if obj.kind == "simul":
        opt, astar = brute.simultaneous_optimum(problem, inst)
        ratio = max((a / opt[l + 1] for l, a in enumerate(value) if opt[l + 1] > 0), default=Fraction(1))
        return {"alpha_star": astar, "topl_optima": [opt[l] for l in sorted(opt)], "ratio": ratio}
    fn = brute.brute_force_lb if problem == "lb" else brute.brute_force_km
    best, sol = fn(inst, obj.value)
    if best == 0:
        ratio = 1 if value == 0 else math.inf
    else:
        ratio = value / best
        if isinstance(ratio, float):
            ratio = float(ratio)
    return {"value": best, "solution": tuple(sol), "ratio": ratio}


def run(args):
    t0 = time.perf_counter()
    inst = parse_instance(_read(args.instance), args.problem)
    dim = inst.m if args.problem == "lb" else inst.n
    obj = _make_objective(args, dim)
    if args.oracle:
        size = brute.lb_space(inst) if args.problem == "lb" else brute.km_space(inst)
        if size > brute.GUARD:
            raise brute.SizeGuardError(f"oracle search space {size} exceeds the guard {brute.GUARD}")
    status, sol, bound, diag = _solve(args.problem, inst, obj, args)
    params = {"eps": args.eps, "delta": args.delta, "seed": args.seed, "jobs": args.jobs}
    rep = RunReport(args.problem, obj.label, status, certified_bound=bound, diagnostics=diag, params=params)
    if sol is not None:
        rep.solution = tuple(sol)
        rep.costs = _costs(args.problem, inst, sol)
        rep.value = obj(rep.costs)
        if args.oracle:
            rep.oracle = _oracle(args.problem, inst, obj, rep.value)
        check_report(rep, inst, obj)
    rep.wall_time = time.perf_counter() - t0
    return (EXIT_OK if status == "ok" else EXIT_BUDGET), rep, obj


def check_report(rep: RunReport, inst, obj=None):
    """The reported cost vector and value must match a recomputation from the solution."""
    costs = _costs(rep.problem, inst, rep.solution)
    if costs != tuple(rep.costs):
        raise RuntimeError("reported cost vector does not match the solution")
    if obj is not None and obj(costs) != rep.value:
        raise RuntimeError("reported value does not match the solution")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ordnorm", description="Ordered and min-norm load balancing and k-clustering.")
    p.add_argument("problem", choices=["lb", "km"], help="load balancing or k-clustering")
    p.add_argument("instance", help="instance file")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--topl", type=int, metavar="L", help="Top-L objective")
    g.add_argument("--ordered", metavar="FILE", help="ordered objective with weights from FILE")
    g.add_argument("--minmax", nargs="+", metavar="FILE", help="maximum of several ordered objectives")
    g.add_argument("--norm", metavar="SPEC", help="norm DSL string or a file holding it")
    g.add_argument("--budget", metavar="FILE", help="multi-budget file: budget then weights per line")
    g.add_argument("--simul", action="store_true", help="approximate the best simultaneous factor")
    p.add_argument("--eps", type=_frac_arg, default=Fraction(1, 2))
    p.add_argument("--delta", type=_frac_arg, default=Fraction(1))
    p.add_argument("--seed", type=int, default=0, help="recorded in the report; the solvers are deterministic")
    num = p.add_mutually_exclusive_group()
    num.add_argument("--exact-rational", dest="as_float", action="store_false", help="print rationals as a/b (default)")
    num.add_argument("--float", dest="as_float", action="store_true", help="print numbers as floats")
    p.set_defaults(as_float=False)
    p.add_argument("--oracle", action="store_true", help="also brute-force the optimum and report the ratio")
    p.add_argument("--jobs", type=int, default=1, help="worker processes for guess-parallel stages")
    p.add_argument("--timing", action="store_true", help="print the wall time to stderr")
    return p


def _frac_arg(s):
    try:
        q = to_fraction(s)
    except ValidationError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc
    if q <= 0:
        raise argparse.ArgumentTypeError("must be positive")
    return q


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.jobs < 1:
        parser.error("--jobs must be at least 1")
    try:
        code, rep, obj = run(args)
    except brute.SizeGuardError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_GUARD
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    sys.stdout.write(render(rep, args.as_float))
    if args.timing:
        print(f"wall_time: {rep.wall_time:.3f}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
