import itertools
from importlib.resources import files

import numpy as np
import pytest

from dmo_ramp import BidSegment, HourProblem, MicrogridBid, build_bid_from_fleet, inner_fill, table_i_fleets
from dmo_ramp.scenario import table_i_scenario

SHIPPED = files("dmo_ramp") / "data" / "tableI_case2.json"


def table_i_bids(fixed=0.0, horizon=1):
    fleets = table_i_fleets()
    return [build_bid_from_fleet(units, [fixed] * horizon, m, name)
            for m, (name, units) in enumerate(fleets.items())]


def random_problem(rng, max_mg=5, max_seg=4, floor=True):
    """Random hour in the cross-check ranges: prices [10, 80], caps [1, 5],
    ramps [0.5, 3.5]; demand inside total capacity."""
    bids = []
    for m in range(int(rng.integers(1, max_mg + 1))):
        J = int(rng.integers(1, max_seg + 1))
        prices = np.sort(rng.uniform(10, 80, J))[::-1]
        segs = tuple(BidSegment(float(p), float(rng.uniform(1, 5)), float(rng.uniform(0.5, 3.5)))
                     for p in prices)
        bids.append(MicrogridBid(m, (float(rng.uniform(0, 3)),), segs))
    total = sum(b.total_capacity for b in bids)
    R = float(rng.uniform(0, total))
    fixed = sum(b.fixed_load[0] for b in bids)
    delta = float(rng.uniform(0, sum(b.max_ramp for b in bids))) if floor else None
    return HourProblem(fixed + R, bids, delta)


def brute_force(problem):
    """Plain itertools scan of every prefix vector, no kernels involved.
    Returns (objective, prefix) or None."""
    R = problem.responsive_demand
    best = None
    for prefix in itertools.product(*[range(b.n_segments + 1) for b in problem.bids]):
        ramp = sum(b.segments[k - 1].ramp_rate if k else 0.0 for b, k in zip(problem.bids, prefix))
        if problem.ramp_floor is not None and ramp < problem.ramp_floor - 1e-9:
            continue
        fill = inner_fill(prefix, R, problem)
        if fill is None:
            continue
        if best is None or fill.objective > best[0]:
            best = (fill.objective, prefix)
    return best


@pytest.fixture(scope="session")
def tablei_scenario():
    return table_i_scenario()


ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {key}: {detail}")
