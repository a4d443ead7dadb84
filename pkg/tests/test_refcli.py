import io
import json
import math
from contextlib import redirect_stderr, redirect_stdout
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from ordnorm.model import ClusterInstance, LoadBalInstance, Lp, MaxOrdered, Ordered, TopL
from ordnorm.refcli import brute
from ordnorm.refcli.cli import main
from ordnorm.refcli.formats import (
    ParseError,
    format_budgets,
    format_instance,
    format_norm,
    format_weights,
    parse_budgets,
    parse_cluster_instance,
    parse_lb_instance,
    parse_norm,
    parse_weights,
)

nums = st.fractions(min_value=0, max_value=50, max_denominator=7)


@settings(max_examples=50)
@given(st.integers(1, 4), st.integers(1, 5), st.data())
def test_lb_instance_round_trip(m, n, data):
    p = [[data.draw(st.integers(0, 50)) for _ in range(n)] for _ in range(m)]
    inst = LoadBalInstance(p)
    assert parse_lb_instance(format_instance(inst)).p == inst.p


@settings(max_examples=50)
@given(st.lists(st.tuples(st.integers(0, 9), st.integers(0, 9)), min_size=1, max_size=5), st.data())
def test_cluster_instance_round_trip(pts, data):
    c = [[abs(a - x) + abs(b - y) for x, y in pts] for a, b in pts]
    k = data.draw(st.integers(1, len(pts)))
    inst = ClusterInstance(c, k)
    back = parse_cluster_instance(format_instance(inst))
    assert back.c == inst.c and back.k == k


@settings(max_examples=50)
@given(st.lists(nums, min_size=1, max_size=6))
def test_weights_round_trip(w):
    w = sorted(w, reverse=True)
    assert list(parse_weights(format_weights(w))) == w


@settings(max_examples=30)
@given(st.lists(st.tuples(st.one_of(st.just(math.inf), nums), st.lists(nums, min_size=3, max_size=3)), min_size=1, max_size=4))
def test_budgets_round_trip(rows):
    ws = [tuple(sorted(w, reverse=True)) for _, w in rows]
    bs = [b for b, _ in rows]
    assert parse_budgets(format_budgets(ws, bs)) == (ws, bs)


def test_norm_round_trip(tmp_path):
    (tmp_path / "a.txt").write_text("3\n1\n")
    (tmp_path / "b.txt").write_text("2\n2\n")
    for f in (Lp(None), Lp(Fraction(5, 2)), TopL(3)):
        assert parse_norm(format_norm(f)) == f
    o = Ordered([3, 1])
    assert parse_norm(format_norm(o, ["a.txt"]), str(tmp_path)) == o
    mo = MaxOrdered([[3, 1], [2, 2]])
    assert parse_norm(format_norm(mo, ["a.txt", "b.txt"]), str(tmp_path)) == mo


def test_small_instance_parse():
    inst = parse_lb_instance("2 2\n1 2\n3 4")
    assert inst.p == ((1, 2), (3, 4))
    assert parse_lb_instance("# comment\n1 2\n6/2 4  # tail\n").p == ((3, 4),)
    assert parse_cluster_instance("2 1\n0 1/2\n0.5 0\n").c[0][1] == Fraction(1, 2)
    assert parse_norm("lp inf") == Lp(None)


@pytest.mark.parametrize(
    "text, line",
    [
        ("2 2\n1 2\n3\n", 3),
        ("2 2\n1 2\n3 x\n", 3),
        ("2\n1 2\n", 1),
        ("2 2\n1 2\n", 2),
    ],
)
def test_instance_errors_carry_lines(text, line):
    with pytest.raises(ParseError) as exc:
        parse_lb_instance(text)
    assert exc.value.line == line
    assert str(exc.value).startswith(f"line {line}:")


def test_weight_errors():
    with pytest.raises(ParseError) as exc:
        parse_weights("1\n2\n")
    assert exc.value.line == 2
    with pytest.raises(ParseError):
        parse_weights("1\n-1\n")
    with pytest.raises(ParseError):
        parse_weights("2\n1\n", dim=3)
    with pytest.raises(ParseError):
        parse_budgets("5 1 2\n")
    with pytest.raises(ParseError):
        parse_norm("lp 2\nlp 3\n")
    with pytest.raises(ParseError):
        parse_norm("spectral 2")


def test_brute_examples():
    inst = LoadBalInstance([[3, 1], [1, 3]])
    assert brute.brute_force_lb(inst, (1, 0)) == (1, (1, 0))
    km = ClusterInstance([[0, 1, 5], [1, 0, 4], [5, 4, 0]], 2)
    val, F = brute.brute_force_km(km, (1, 1, 1))
    assert val == 1 and F == (0, 2)
    assert brute.brute_force_km(km, Lp(None))[0] == 1
    assert brute.brute_force_km(km, [(1, 0, 0), (1, 1, 1)])[0] == 1


def test_brute_guard():
    big = LoadBalInstance([[1] * 15] * 3)
    with pytest.raises(brute.SizeGuardError):
        brute.brute_force_lb(big, (1, 0, 0))


def _cli(argv):
    out, err = io.StringIO(), io.StringIO()
    with redirect_stdout(out), redirect_stderr(err):
        code = main(argv)
    return code, out.getvalue(), err.getvalue()


@pytest.fixture
def files(tmp_path):
    (tmp_path / "lb.txt").write_text("2 3\n2 3 1\n3 1 2\n")
    (tmp_path / "km.txt").write_text("3 1\n0 1 5\n1 0 4\n5 4 0\n")
    (tmp_path / "w.txt").write_text("2\n1\n")
    (tmp_path / "zero.txt").write_text("0 2 1\n0 1 1\n")
    (tmp_path / "big.txt").write_text("3 15\n" + "1 " * 15 + "\n" + "1 " * 15 + "\n" + "1 " * 15 + "\n")
    return tmp_path


def test_cli_ok_report(files):
    code, out, err = _cli(["lb", str(files / "lb.txt"), "--ordered", str(files / "w.txt"), "--oracle", "--timing"])
    assert code == 0
    text, js = out.split("--- json\n")
    assert "status: ok" in text and "cost_vector:" in text
    rep = json.loads(js)
    assert rep["status"] == "ok" and rep["oracle"]["value"] == "7"
    assert "wall_time" in err


def test_cli_float_mode(files):
    code, out, _ = _cli(["km", str(files / "km.txt"), "--norm", "lp 2", "--float"])
    assert code == 0 and "/" not in out.split("--- json")[0].split("objective:")[0]


def test_cli_input_errors(files):
    assert _cli(["lb", str(files / "missing.txt"), "--topl", "1"])[0] == 2
    assert _cli(["lb", str(files / "lb.txt"), "--topl", "5"])[0] == 2
    code, _, err = _cli(["lb", str(files / "km.txt"), "--topl", "1"])
    assert code == 2 and "line" in err


def test_cli_budget_infeasible(files):
    (files / "b.txt").write_text("0 1 1\n")
    code, out, _ = _cli(["lb", str(files / "lb.txt"), "--budget", str(files / "b.txt")])
    assert code == 3 and "status: no solution" in out


def test_cli_guard(files):
    code, _, err = _cli(["lb", str(files / "big.txt"), "--topl", "1", "--oracle"])
    assert code == 4 and "guard" in err


def test_cli_simul_oracle(files):
    code, out, _ = _cli(["lb", str(files / "lb.txt"), "--simul", "--oracle"])
    assert code == 0
    rep = json.loads(out.split("--- json\n")[1])
    assert Fraction(rep["oracle"]["alpha_star"]) <= Fraction(rep["oracle"]["ratio"])


def test_cli_deterministic(files):
    argv = ["km", str(files / "km.txt"), "--topl", "2", "--seed", "7"]
    assert _cli(argv)[1] == _cli(argv)[1]
