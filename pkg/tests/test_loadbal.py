import itertools
import random
from collections import Counter
from fractions import Fraction

import pytest

import _gen
from ordnorm import loadbal as L
from ordnorm.lpround import solve_lp
from ordnorm.model import LoadBalInstance, Lp, TopL, ValidationError, load_vector, norm_eval, ordered_cost, topl_cost
from ordnorm.proxy import ThresholdVector, h_multi, iter_thresholds, threshold_constant
from ordnorm.refcli.brute import brute_force_lb
from ordnorm.sparsify import position_set, sparsify_weights

HALF = Fraction(1, 2)


def _greedy_l1(inst):
    return sum(min(inst.p[i][j] for i in range(inst.m)) for j in range(inst.n))


def test_topl_lp_single_job():
    inst = LoadBalInstance([[5]])
    sol = solve_lp(L.build_topl_lp(inst, 1, 2))
    lay = L.OlbLayout(1, 1, 1)
    assert sol.objective == 3
    assert sol.x[lay.x(0, 0)] == 1
    assert sol.x[lay.z(0, 0, 0)] == Fraction(2, 5)
    assert sol.x[lay.y(0, 0, 0)] == Fraction(3, 5)


def test_topl_lp_zero_above_makespan():
    inst = LoadBalInstance([[3, 4], [5, 1]])
    assert solve_lp(L.build_topl_lp(inst, 1, 4)).objective == 0


def test_topl_lp_lower_bounds_assignments():
    rng = random.Random(1)
    for _ in range(20):
        inst = LoadBalInstance([[rng.randint(0, 9) for _ in range(2)] for _ in range(2)])
        t = rng.randint(0, 9)
        best = min(sum(max(0, a - t) for a in load_vector(inst, s)) for s in itertools.product(range(2), repeat=2))
        assert solve_lp(L.build_topl_lp(inst, 1, t)).objective <= best


def _power2_grid(m):
    P = position_set(m, 1)
    return P, list(iter_thresholds(P, [1, 2, 4, 8, 16, 32], 1, m, 2))


def test_olb_lp_canonical_point_value():
    rng = random.Random(2)
    for _ in range(15):
        inst = _gen.lb_instance(rng, m_min=2, n_min=2)
        P, grid = _power2_grid(inst.m)
        tw = sparsify_weights(_gen.weights(rng, inst.m), P)
        t = rng.choice(grid)
        _, sig = brute_force_lb(inst, tw)
        pt = L.canonical_point(inst, t, sig)
        lp = L.build_olb_lp(inst, tw, t)
        vec = pt.to_vector()
        assert lp.is_feasible(vec)
        assert lp.objective(vec) == sum(h_multi(tw, t, a) for a in load_vector(inst, sig))
        assert solve_lp(lp).objective <= lp.objective(vec)


def test_olb_lp_zero_weights():
    inst = LoadBalInstance([[3, 4], [5, 1]])
    P, grid = _power2_grid(2)
    assert solve_lp(L.build_olb_lp(inst, (0, 0), grid[-1])).objective == 0


def test_topl_lp_is_olb_with_one_position():
    inst = LoadBalInstance([[3, 7, 2]])
    P = position_set(1, 1)
    t = ThresholdVector(P, [4])
    assert solve_lp(L.build_olb_lp(inst, (1,), t)).objective == solve_lp(L.build_topl_lp(inst, 1, 4)).objective


def test_minmax_lp_single_and_duplicate_weights():
    rng = random.Random(3)
    for _ in range(8):
        inst = _gen.lb_instance(rng, m_min=2, n_min=2, n_max=4)
        P, grid = _power2_grid(inst.m)
        tw = sparsify_weights(_gen.weights(rng, inst.m), P)
        t = rng.choice(grid)
        one = solve_lp(L.build_minmax_lb_lp(inst, [tw], t)).objective
        two = solve_lp(L.build_minmax_lb_lp(inst, [tw, tw], t)).objective
        olb = solve_lp(L.build_olb_lp(inst, tw, t)).objective
        assert one == two == olb + threshold_constant(tw, t)


def test_minmax_lp_bounded_by_three_times_optimum():
    rng = random.Random(4)
    for _ in range(6):
        inst = LoadBalInstance([[rng.randint(1, 9) for _ in range(3)] for _ in range(2)])
        P, grid = _power2_grid(2)
        ws = [sparsify_weights(_gen.weights(rng, 2), P) for _ in range(2)]
        opt, _ = brute_force_lb(inst, ws)
        lam = min(solve_lp(L.build_minmax_lb_lp(inst, ws, t)).objective for t in grid)
        assert lam <= 3 * opt


def test_filter_q_leaves_small_jobs_alone():
    inst = LoadBalInstance([[1, 2], [2, 1]])
    P = position_set(2, 1)
    t = ThresholdVector(P, [2, 1])
    sol = L.OlbSolution.from_vector(inst, t, solve_lp(L.build_olb_lp(inst, (2, 1), t)).x)
    assert L.filter_q(sol) == sol.bands()


def test_filter_q_rescales_oversized_job():
    # one machine, two jobs; the big job is above twice the smallest threshold
    inst = LoadBalInstance([[8, 1]])
    P = position_set(1, 1)
    t = ThresholdVector(P, [2])
    x = [[Fraction(1), Fraction(1)]]
    y = [[[Fraction(3, 4)], [Fraction(0)]]]
    z = [[[Fraction(1, 4)], [Fraction(1)]]]
    sol = L.OlbSolution(inst, t, x, y, z)
    q = L.filter_q(sol)
    assert q[0][0][1] == 0
    assert q[0][0][0] <= 2 * sol.bands()[0][0][0]
    assert q[0][1] == sol.bands()[0][1]


def test_oblivious_round_integral_point():
    inst = LoadBalInstance([[3, 1, 4], [1, 5, 9]])
    P, grid = _power2_grid(2)
    sig = (1, 0, 0)
    for t in grid[1:8]:
        sigma, _ = L.oblivious_round_lb(L.canonical_point(inst, t, sig))
        assert sigma == sig


def test_oblivious_round_one_output_for_all_weights():
    rng = random.Random(5)
    inst = LoadBalInstance([[rng.randint(1, 9) for _ in range(4)] for _ in range(2)])
    P, grid = _power2_grid(2)
    ws = [sparsify_weights(_gen.weights(rng, 2), P) for _ in range(2)]
    t = grid[len(grid) // 2]
    sol = L.OlbSolution.from_vector(inst, t, solve_lp(L.build_minmax_lb_lp(inst, ws, t)).x)
    sigma, qt = L.oblivious_round_lb(sol)
    for _ in range(20):
        nw = sparsify_weights(_gen.rational_weights(rng, 2), P)
        lhs, rhs = L.oblivious_sides(sol, sigma, nw)
        assert lhs <= rhs
    # per-band caps: the load a machine carries in the bands at or below position k stays within 10 t_k
    bands = L.band_loads(inst, sol, qt)
    for i in range(inst.m):
        for k, tl in enumerate(t.values):
            assert sum(bands[i][k + 1 :]) <= 10 * tl


def test_oblivious_round_rejects_non_power_thresholds():
    inst = LoadBalInstance([[3]])
    t = ThresholdVector(position_set(1, 1), [3])
    with pytest.raises(ValidationError):
        L.oblivious_round_lb(L.canonical_point(inst, t, (0,)))


def test_gap_round_integral_and_half_split():
    inst = LoadBalInstance([[3, 1], [1, 5]])
    assert L.gap_round_deterministic([[1, 0], [0, 1]], 2, inst) == (0, 1)
    twin = LoadBalInstance([[4], [4]])
    sig = L.gap_round_deterministic([[HALF], [HALF]], 1, twin)
    assert sig in ((0,), (1,))
    # witness: each side holds half the job, 3/4 of it above t, so the LP pays 2 * 4 * (1/2 * 3/4) = 3
    witness = 2 * 4 * HALF * Fraction(3, 4)
    assert max(0, load_vector(twin, sig)[sig[0]] - 2) == 2 <= 2 * witness


def test_birkhoff_two_by_two():
    inst = LoadBalInstance([[1, 1], [1, 1]])
    x = [[HALF, HALF], [HALF, HALF]]
    parts = L.birkhoff_decomposition(L.build_copy_graph(x, inst), 2)
    assert sorted(w for w, _ in parts) == [HALF, HALF]
    assert L.gap_round_randomized([[1, 0], [0, 1]], inst, seed=3) == (0, 1)


def test_randomized_rounding_marginals():
    inst = LoadBalInstance([[2, 3, 1], [1, 1, 4], [5, 2, 2]])
    x = [[Fraction(1, 2), Fraction(1, 4), 0], [Fraction(1, 2), Fraction(1, 4), Fraction(1, 3)], [0, Fraction(1, 2), Fraction(2, 3)]]
    N = 3000
    counts = Counter()
    for s in range(N):
        for j, i in enumerate(L.gap_round_randomized(x, inst, seed=s)):
            counts[(i, j)] += 1
    for i in range(3):
        for j in range(3):
            p = float(x[i][j])
            sd = (p * (1 - p) / N) ** 0.5
            assert counts[(i, j)] / N <= p + 3 * sd + 1e-9


def test_topl_special_cases():
    rng = random.Random(6)
    for _ in range(10):
        inst = _gen.lb_instance(rng, m_min=2)
        r = L.solve_topl_lb(inst, inst.m)
        assert topl_cost(inst.m, load_vector(inst, r.sigma)) <= 2 * _greedy_l1(inst)
    inst = LoadBalInstance([[rng.randint(0, 9) for _ in range(6)] for _ in range(3)])
    r = L.solve_topl_lb(inst, 1)
    opt, _ = brute_force_lb(inst, lambda v: topl_cost(1, v))
    assert max(load_vector(inst, r.sigma)) <= 2 * opt


def test_ordered_lb_cases():
    rng = random.Random(7)
    for _ in range(6):
        inst = LoadBalInstance([[rng.randint(0, 9) for _ in range(5)] for _ in range(3)])
        r = L.solve_ordered_lb(inst, (1, 1, 1), eps=HALF)
        assert sum(load_vector(inst, r.sigma)) <= Fraction(5, 2) * _greedy_l1(inst)
        w = _gen.weights(rng, 3)
        r = L.solve_ordered_lb(inst, w, eps=HALF)
        opt, _ = brute_force_lb(inst, w)
        assert ordered_cost(w, load_vector(inst, r.sigma)) <= Fraction(5, 2) * opt
        r1 = L.solve_ordered_lb(inst, (1, 0, 0), eps=HALF)
        opt1, _ = brute_force_lb(inst, (1, 0, 0))
        assert max(load_vector(inst, r1.sigma)) <= Fraction(5, 2) * opt1


def test_minmax_lb_cases():
    rng = random.Random(8)
    for _ in range(4):
        inst = LoadBalInstance([[rng.randint(1, 9) for _ in range(5)] for _ in range(3)])
        w = _gen.weights(rng, 3)
        one = L.solve_minmax_ordered_lb(inst, [w], delta=1)
        dup = L.solve_minmax_ordered_lb(inst, [w, w], delta=1)
        assert one.value == dup.value
        opt, _ = brute_force_lb(inst, w)
        assert one.value <= 76 * opt
        ws = [w, _gen.weights(rng, 3)]
        r = L.solve_minmax_ordered_lb(inst, ws, delta=1)
        opt, _ = brute_force_lb(inst, ws)
        assert r.value == max(ordered_cost(x, load_vector(inst, r.sigma)) for x in ws)
        assert r.value <= 76 * opt


def test_minnorm_lb_cases():
    inst = LoadBalInstance([[3, 5, 2], [4, 1, 6]])
    eps = Fraction(1, 4)
    r = L.solve_minnorm_lb(inst, Lp(None), eps=eps)
    opt, _ = brute_force_lb(inst, Lp(None))
    assert max(load_vector(inst, r.solution)) <= 38 * (1 + 5 * eps) * opt
    r = L.solve_minnorm_lb(inst, Lp(1), eps=eps)
    assert sum(load_vector(inst, r.solution)) <= r.guarantee * _greedy_l1(inst)
    r = L.solve_minnorm_lb(inst, TopL(2), eps=eps)
    direct = L.solve_topl_lb(inst, 2)
    assert norm_eval(TopL(2), load_vector(inst, r.solution)) <= r.guarantee * direct.value


def test_zero_instance():
    inst = LoadBalInstance([[0, 0], [3, 0]])
    assert load_vector(inst, L.solve_ordered_lb(inst, (2, 1)).sigma) == (0, 0)
    assert load_vector(inst, L.solve_topl_lb(inst, 1).sigma) == (0, 0)
