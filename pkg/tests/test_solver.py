import time

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings, strategies as st

from dmo_ramp import (
    BidSegment,
    HourProblem,
    MicrogridBid,
    enumerate_hour,
    feasibility_check,
    inner_fill,
    solve_horizon,
    solve_hour_bnb,
    verify_milp_constraints,
)
from dmo_ramp.solver import CombinationCapExceeded, HourSolution, horizon_objective

from conftest import brute_force, random_problem, table_i_bids
from milp_oracle import solve_literal


def one_mg(segments, demand, floor=None, fixed=0.0, eps=1e-3):
    bid = MicrogridBid(0, (fixed,), tuple(BidSegment(*s) for s in segments))
    return HourProblem(fixed + demand, [bid], floor, eps)


# inner_fill


def test_inner_fill_single_box():
    p = one_mg([(10, 5, 2)], 5)
    fill = inner_fill([1], 5, p)
    assert fill.segment_awards == ((5.0,),)
    assert fill.objective == pytest.approx(50)


def grid_search_two_segments(prices, caps, demand, eps, step=1e-3):
    # DX1 on a grid, DX2 absorbs the rest
    best = -np.inf
    for x1 in np.arange(eps, caps[0] + step / 2, step):
        x2 = demand - x1
        if eps - 1e-12 <= x2 <= caps[1] + 1e-12:
            best = max(best, prices[0] * x1 + prices[1] * x2)
    return best


def test_inner_fill_two_segments_against_grid():
    p = HourProblem(6, [MicrogridBid(0, (0.0,), (BidSegment(60, 5, 1),)),
                        MicrogridBid(1, (0.0,), (BidSegment(40, 5, 1),))], None, 1e-3)
    fill = inner_fill([1, 1], 6, p)
    assert fill.segment_awards == ((5.0,), (pytest.approx(1.0),))
    assert fill.objective == pytest.approx(340)
    assert fill.objective == pytest.approx(grid_search_two_segments((60, 40), (5, 5), 6, 1e-3), abs=1e-9)


def test_inner_fill_infeasible_window():
    p = one_mg([(10, 5, 2), (5, 5, 1)], 0.0015)
    assert inner_fill([2], 0.0015, p) is None  # needs 2 * eps
    assert inner_fill([1], 6, p) is None  # above selected capacity
    assert inner_fill([0], 0, p).objective == 0


# enumeration oracle


def test_enumerate_trivial_and_infeasible_floor():
    sol = enumerate_hour(one_mg([(10, 5, 2)], 5))
    assert sol.feasible and sol.prefix == (1,) and sol.objective == pytest.approx(50)
    bad = enumerate_hour(one_mg([(10, 5, 2)], 5, floor=3))
    assert not bad.feasible
    assert bad.max_total_ramp == 2
    assert bad.reason == "ramp floor unreachable"


def test_enumerate_table_i_frozen():
    # 40 MW responsive, floor 12.5; worked by hand:
    # 5*(76.5+71.5+69.5+64.5+58.4+57.2) + 4*(62.8+62.4) + 50.5*1.998 + (45.2+40.5)*0.001
    p = HourProblem(55.0, table_i_bids(fixed=3.0), 12.5)
    sol = enumerate_hour(p)
    assert sol.prefix == (3, 2, 1, 2, 3)
    assert sol.objective == pytest.approx(2589.7847, abs=1e-9)
    assert sol.total_ramp == 12.5
    assert solve_literal(p) == pytest.approx(2589.7847, abs=1e-6)


def test_enumerate_cap():
    p = HourProblem(10.0, table_i_bids(), None)
    with pytest.raises(CombinationCapExceeded):
        enumerate_hour(p, cap=100)


def test_numba_and_numpy_paths_agree():
    rng = np.random.default_rng(3)
    for _ in range(60):
        p = random_problem(rng)
        a = enumerate_hour(p, use_numba=True)
        b = enumerate_hour(p, use_numba=False)
        assert a.feasible == b.feasible
        if a.feasible:
            assert a.prefix == b.prefix
            assert a.objective == b.objective
        else:
            assert a.max_total_ramp == b.max_total_ramp and a.demand_window == b.demand_window


def test_enumerate_matches_itertools_brute_force():
    rng = np.random.default_rng(5)
    for _ in range(80):
        p = random_problem(rng)
        ref = brute_force(p)
        sol = enumerate_hour(p)
        assert sol.feasible == (ref is not None)
        if ref is not None:
            assert sol.objective == pytest.approx(ref[0], rel=1e-12)


def test_enumerate_matches_literal_milp():
    rng = np.random.default_rng(9)
    for _ in range(40):
        p = random_problem(rng, max_mg=4, max_seg=3)
        ref = solve_literal(p)
        sol = enumerate_hour(p)
        assert sol.feasible == (ref is not None)
        if ref is not None:
            assert sol.objective == pytest.approx(ref, rel=1e-7, abs=1e-6)


# branch and bound


def test_bnb_cross_check_200():
    rng = np.random.default_rng(2024)
    t0 = time.perf_counter()
    for _ in range(200):
        p = random_problem(rng)
        a, b = enumerate_hour(p), solve_hour_bnb(p)
        assert a.feasible == b.feasible
        if a.feasible:
            assert b.objective == pytest.approx(a.objective, rel=1e-9)
            assert b.prefix == a.prefix
            assert verify_milp_constraints(p, b) == []
    assert time.perf_counter() - t0 < 60


def test_bnb_root_solves_dominant_instance():
    # no floor, every segment filled in merit order: root relaxation is integral
    p = HourProblem(12.0, table_i_bids(fixed=0.0)[:2], None)
    sol = solve_hour_bnb(p)
    assert sol.nodes == 1
    assert sol.objective == enumerate_hour(p).objective


def test_bnb_tie_break_prefers_lexicographically_smallest():
    a = MicrogridBid(0, (0.0,), (BidSegment(50, 5, 1),))
    b = MicrogridBid(1, (0.0,), (BidSegment(50, 5, 1),))
    p = HourProblem(3.0, [a, b], None)
    assert enumerate_hour(p).prefix == (0, 1)
    assert solve_hour_bnb(p).prefix == (0, 1)


def test_bnb_infeasible_diagnostics():
    # both segments would reach the floor, but 0.0015 MW cannot cover 2 * eps
    p = one_mg([(10, 5, 2), (5, 5, 3)], 0.0015, floor=2.5)
    assert feasibility_check(p).ok
    sol = solve_hour_bnb(p)
    assert not sol.feasible
    assert sol.max_total_ramp == 2
    assert sol.demand_window[0] == pytest.approx(0.002)
    assert sol.demand_window[1] == 10


# horizon


def test_horizon_independence_and_infeasible_hour():
    p = HourProblem(55.0, table_i_bids(fixed=3.0), 12.5)
    sols = solve_horizon([p] * 24)
    assert all(s.prefix == sols[0].prefix for s in sols)
    assert horizon_objective(sols) == pytest.approx(24 * sols[0].objective)
    bad = HourProblem(55.0, table_i_bids(fixed=3.0), 16.0)
    mixed = solve_horizon([p] * 23 + [bad])
    assert sum(s.feasible for s in mixed) == 23
    assert mixed[-1].reason == "ramp floor unreachable"


# verifier


def hand_solution(prefix_flags, dx, rr_sel, fixed=0.0):
    d_r = tuple(sum(x) for x in dx)
    return HourSolution(
        prefix=(sum(prefix_flags[0]),),
        segment_awards=dx,
        selection=prefix_flags,
        selected_ramp=rr_sel,
        total_ramp=sum(rr_sel),
        microgrid_awards=tuple(r + fixed for r in d_r),
        responsive_awards=d_r,
        objective=0.0,
    )


def test_verifier_catches_non_prefix_selection():
    p = one_mg([(10, 5, 2), (5, 5, 3)], 3.0)
    sol = hand_solution(((False, True),), ((0.0, 3.0),), (3.0,))
    assert any(v.startswith("sequential selection") for v in verify_milp_constraints(p, sol))


def test_verifier_catches_unpaired_ramp():
    p = one_mg([(10, 5, 2), (5, 5, 3)], 3.0)
    sol = hand_solution(((True, False),), ((3.0, 0.0),), (3.0,))
    assert any(v.startswith("ramp pairing") for v in verify_milp_constraints(p, sol))
    ok = hand_solution(((True, False),), ((3.0, 0.0),), (2.0,))
    assert verify_milp_constraints(p, ok) == []
    ghost = hand_solution(((False, False),), ((0.0, 0.0),), (2.0,))
    p0 = one_mg([(10, 5, 2), (5, 5, 3)], 0.0)
    assert any(v.startswith("zero ramp") for v in verify_milp_constraints(p0, ghost))


def test_verifier_catches_balance_and_bounds():
    p = one_mg([(10, 5, 2), (5, 5, 3)], 3.0, floor=2.5)
    sol = hand_solution(((True, True),), ((6.0, 0.0),), (3.0,))
    found = {v.split(":")[0] for v in verify_milp_constraints(p, sol)}
    assert {"segment upper bound", "segment lower bound", "award balance"} <= found
    low = hand_solution(((True, False),), ((3.0, 0.0),), (2.0,))
    assert any(v.startswith("ramp floor") for v in verify_milp_constraints(p, low))


# pre-screen


def test_feasibility_check():
    bids = table_i_bids(fixed=3.0)
    assert feasibility_check(HourProblem(10.0, bids, None)).issues == ("fixed load exceeds award",)
    r = feasibility_check(HourProblem(55.0, bids, 12.5))
    assert r.ok and r.ramp_upper_bound == 15
    assert feasibility_check(HourProblem(55.0, bids, 15.5)).issues == ("ramp floor unreachable",)
    assert "responsive demand exceeds total bid capacity" in feasibility_check(
        HourProblem(100.0, bids, None)).issues


def test_problem_validation():
    bids = table_i_bids()
    with pytest.raises(ValueError):
        HourProblem(10.0, bids, None, epsilon=0)
    with pytest.raises(ValueError):
        HourProblem(10.0, bids, None, big_m=3.5)
    assert HourProblem(10.0, bids, None).big_m == 4.5


# properties

seeds = st.integers(0, 2**32 - 1)


@settings(max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(seeds)
def test_emitted_solutions_verify_and_conserve(seed):
    p = random_problem(np.random.default_rng(seed))
    sol = solve_hour_bnb(p)
    if sol.feasible:
        assert verify_milp_constraints(p, sol) == []
        assert abs(sum(sol.microgrid_awards) - p.awarded_demand) <= 1e-9


@settings(max_examples=40, deadline=None)
@given(seeds)
def test_floor_zero_matches_no_floor_and_objective_monotone(seed):
    p = random_problem(np.random.default_rng(seed), floor=False)
    base = solve_hour_bnb(p)
    zero = solve_hour_bnb(HourProblem(p.awarded_demand, p.bids, 0.0))
    assert zero.objective == base.objective
    top = sum(b.max_ramp for b in p.bids)
    prev = base.objective
    for frac in (0.25, 0.5, 0.75, 1.0):
        sol = solve_hour_bnb(HourProblem(p.awarded_demand, p.bids, frac * top))
        if not sol.feasible:
            prev = -np.inf
            continue
        assert sol.objective <= prev + 1e-9
        prev = sol.objective


@settings(max_examples=40, deadline=None)
@given(seeds)
def test_selected_ramp_is_marginal_ramp(seed):
    from dmo_ramp import marginal_ramp_at

    rng = np.random.default_rng(seed)
    p = random_problem(rng)
    free = HourProblem(p.awarded_demand, p.bids, None)
    # without a floor the marginal segment always carries the fill
    sol = enumerate_hour(free)
    for bid, d_r, rr in zip(p.bids, sol.responsive_awards, sol.selected_ramp):
        assert marginal_ramp_at(bid, d_r) == rr
    # with a floor a segment may be held at eps to claim its ramp; the
    # pairing still matches whenever the lower segments are full
    sol = enumerate_hour(p)
    if sol.feasible:
        for bid, k, d_r, rr in zip(p.bids, sol.prefix, sol.responsive_awards, sol.selected_ramp):
            below = sum(s.max_quantity for s in bid.segments[:k - 1]) if k else 0.0
            assert rr == (bid.segments[k - 1].ramp_rate if k else 0.0)
            if d_r > below + 1e-9:
                assert marginal_ramp_at(bid, d_r) == rr
