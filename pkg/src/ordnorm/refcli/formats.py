"""Plain-text formats for instances, weights, budgets and norms.

Numbers are exact rationals written as integers, decimals or ``a/b``.  Blank
lines and ``#`` comments are ignored everywhere.
"""
from __future__ import annotations

import math
import os
from fractions import Fraction

from ..model import (
    ClusterInstance,
    LoadBalInstance,
    Lp,
    MaxOrdered,
    Ordered,
    TopL,
    ValidationError,
    check_weights,
    to_fraction,
)


class ParseError(ValidationError):
    def __init__(self, msg, line=None):
        self.line = line
        super().__init__(f"line {line}: {msg}" if line is not None else msg)


def _lines(text):
    for no, raw in enumerate(text.splitlines(), 1):
        s = raw.split("#", 1)[0].strip()
        if s:
            yield no, s.split()


def _num(tok, no):
    try:
        return to_fraction(tok)
    except ValidationError as exc:
        raise ParseError(f"bad number {tok!r}", no) from exc


def _int(tok, no):
    try:
        return int(tok)
    except ValueError as exc:
        raise ParseError(f"expected an integer, got {tok!r}", no) from exc


def fmt_num(q) -> str:
    q = Fraction(q)
    return str(q.numerator) if q.denominator == 1 else f"{q.numerator}/{q.denominator}"


def _matrix(text, what):
    rows = list(_lines(text))
    if not rows:
        raise ParseError(f"empty {what} file", 1)
    no, head = rows[0]
    if len(head) != 2:
        raise ParseError("header must have two integers", no)
    a, b = _int(head[0], no), _int(head[1], no)
    return a, b, rows[1:], no


def parse_lb_instance(text: str) -> LoadBalInstance:
    """Header ``m n`` then ``m`` rows of ``n`` processing times."""
    m, n, rows, hno = _matrix(text, "instance")
    if len(rows) != m:
        raise ParseError(f"expected {m} rows, found {len(rows)}", rows[-1][0] if rows else hno)
    p = []
    for no, toks in rows:
        if len(toks) != n:
            raise ParseError(f"expected {n} entries, found {len(toks)}", no)
        p.append([_num(t, no) for t in toks])
    return LoadBalInstance(p)


def format_lb_instance(inst: LoadBalInstance) -> str:
    out = [f"{inst.m} {inst.n}"]
    out += [" ".join(fmt_num(a) for a in row) for row in inst.p]
    return "\n".join(out) + "\n"


def parse_cluster_instance(text: str) -> ClusterInstance:
    """Header ``n k`` then the full symmetric ``n x n`` distance matrix."""
    n, k, rows, hno = _matrix(text, "instance")
    if len(rows) != n:
        raise ParseError(f"expected {n} rows, found {len(rows)}", rows[-1][0] if rows else hno)
    c = []
    for no, toks in rows:
        if len(toks) != n:
            raise ParseError(f"expected {n} entries, found {len(toks)}", no)
        c.append([_num(t, no) for t in toks])
    return ClusterInstance(c, k)


def format_cluster_instance(inst: ClusterInstance) -> str:
    out = [f"{inst.n} {inst.k}"]
    out += [" ".join(fmt_num(a) for a in row) for row in inst.c]
    return "\n".join(out) + "\n"


def parse_instance(text: str, problem: str):
    if problem == "lb":
        return parse_lb_instance(text)
    if problem == "km":
        return parse_cluster_instance(text)
    raise ValidationError(f"unknown problem {problem!r}")


def format_instance(inst) -> str:
    if isinstance(inst, LoadBalInstance):
        return format_lb_instance(inst)
    return format_cluster_instance(inst)


def parse_weights(text: str, dim: int | None = None) -> tuple:
    """One number per line, non-increasing; ``dim`` checks the count."""
    w = []
    for no, toks in _lines(text):
        if len(toks) != 1:
            raise ParseError("expected one number per line", no)
        val = _num(toks[0], no)
        if val < 0:
            raise ParseError("weights must be nonnegative", no)
        if w and val > w[-1]:
            raise ParseError("weights must be non-increasing", no)
        w.append(val)
    if not w:
        raise ParseError("empty weight file", 1)
    if dim is not None and len(w) != dim:
        raise ParseError(f"expected {dim} weights, found {len(w)}")
    return check_weights(w)


def format_weights(w) -> str:
    return "".join(fmt_num(a) + "\n" for a in w)


def parse_budgets(text: str, dim: int | None = None):
    """One line per budgeted weight vector: the budget (or ``inf``) then the weights."""
    ws, bs = [], []
    for no, toks in _lines(text):
        if len(toks) < 2:
            raise ParseError("expected a budget followed by weights", no)
        b = math.inf if toks[0].lower() == "inf" else _num(toks[0], no)
        if b != math.inf and b < 0:
            raise ParseError("budgets must be nonnegative", no)
        w = [_num(t, no) for t in toks[1:]]
        if dim is not None and len(w) != dim:
            raise ParseError(f"expected {dim} weights, found {len(w)}", no)
        if any(a < c for a, c in zip(w, w[1:])) or any(a < 0 for a in w):
            raise ParseError("weights must be nonnegative and non-increasing", no)
        ws.append(tuple(w))
        bs.append(b)
    if not ws:
        raise ParseError("empty budget file", 1)
    return ws, bs


def format_budgets(ws, bs) -> str:
    out = []
    for w, b in zip(ws, bs):
        head = "inf" if b == math.inf else fmt_num(b)
        out.append(" ".join([head] + [fmt_num(a) for a in w]))
    return "\n".join(out) + "\n"


def parse_norm(text: str, base_dir: str = ".", read=None):
    """``lp <p|inf>``, ``topl <L>``, ``ordered <path>`` or ``maxord <path> [<path>...]``."""
    read = read or (lambda p: open(p).read())
    rows = list(_lines(text))
    if len(rows) != 1:
        raise ParseError("a norm spec is a single line", rows[1][0] if len(rows) > 1 else 1)
    no, toks = rows[0]
    kind, args = toks[0].lower(), toks[1:]
    if kind == "lp":
        if len(args) != 1:
            raise ParseError("usage: lp <p|inf>", no)
        if args[0].lower() in ("inf", "infinity"):
            return Lp(None)
        return Lp(_num(args[0], no))
    if kind == "topl":
        if len(args) != 1:
            raise ParseError("usage: topl <L>", no)
        return TopL(_int(args[0], no))
    if kind in ("ordered", "maxord"):
        if not args or (kind == "ordered" and len(args) != 1):
            raise ParseError(f"usage: {kind} <path>{' [<path>...]' if kind == 'maxord' else ''}", no)
        ws = [parse_weights(read(os.path.join(base_dir, a))) for a in args]
        return Ordered(ws[0]) if kind == "ordered" else MaxOrdered(ws)
    raise ParseError(f"unknown norm {kind!r}", no)


def format_norm(f, paths=None) -> str:
    """Inverse of :func:`parse_norm`; ordered families need the weight file ``paths``."""
    if isinstance(f, Lp):
        return "lp inf\n" if f.p is None else f"lp {fmt_num(f.p)}\n"
    if isinstance(f, TopL):
        return f"topl {f.l}\n"
    if paths is None:
        raise ValidationError("ordered norms are written with their weight file paths")
    if isinstance(f, Ordered):
        return f"ordered {paths[0]}\n"
    return "maxord " + " ".join(paths) + "\n"
