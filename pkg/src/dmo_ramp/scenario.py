"""Case studies: market-only scheduling vs. scheduling with a ramp floor."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .aggregation import total_fixed_load
from .bids import MicrogridBid, build_bid_from_fleet, marginal_ramp_at, table_i_fleets
from .solver import (
    DEFAULT_EPSILON,
    HourProblem,
    HourSolution,
    Infeasible,
    solve_horizon,
)

DEFAULT_SEED = 2017
TABLE_I_FLOOR = 12.5


@dataclass(frozen=True)
class Scenario:
    horizon: int
    microgrids: tuple[MicrogridBid, ...]
    award: tuple[float, ...]
    ramp_floor: tuple[float, ...]
    epsilon: float = DEFAULT_EPSILON
    big_m: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "microgrids", tuple(self.microgrids))
        object.__setattr__(self, "award", tuple(float(x) for x in self.award))
        floor = self.ramp_floor
        if np.ndim(floor) == 0:
            floor = (float(floor),) * self.horizon
        object.__setattr__(self, "ramp_floor", tuple(float(x) for x in floor))
        if not self.microgrids:
            raise ValueError("scenario needs at least one microgrid")
        for name, seq in (("award", self.award), ("ramp_floor", self.ramp_floor)):
            if len(seq) != self.horizon:
                raise ValueError(f"{name} has length {len(seq)}, expected horizon {self.horizon}")
        for mg in self.microgrids:
            if mg.horizon != self.horizon:
                raise ValueError(f"{mg.name}.fixed_load has length {mg.horizon}, expected {self.horizon}")
        if any(x < 0 for x in self.ramp_floor):
            raise ValueError("ramp_floor must be non-negative")
        short = [t + 1 for t, (d, f) in enumerate(zip(self.award, self.fixed_total)) if d < f - 1e-9]
        if short:
            raise ValueError(f"award below total fixed load at hours {short}")

    @property
    def fixed_total(self) -> np.ndarray:
        return total_fixed_load(self.microgrids)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(mg.name for mg in self.microgrids)

    def hour_problem(self, t: int, with_ramp_floor: bool) -> HourProblem:
        return HourProblem(
            awarded_demand=self.award[t],
            bids=self.microgrids,
            ramp_floor=self.ramp_floor[t] if with_ramp_floor else None,
            epsilon=self.epsilon,
            big_m=self.big_m,
            hour=t,
        )


@dataclass(frozen=True)
class CaseReport:
    case_label: str
    names: tuple[str, ...]
    award: tuple[float, ...]
    ramp_floor: tuple[float, ...] | None
    hourly_objective: tuple[float, ...]  # nan on infeasible hours
    hourly_total_ramp: tuple[float, ...]
    awards: tuple[tuple[float, ...], ...]  # [hour][microgrid] PD^M
    infeasible_hours: tuple[tuple[int, Infeasible], ...]
    results: tuple[HourSolution | Infeasible, ...] = field(repr=False, compare=False)
    problems: tuple[HourProblem, ...] = field(repr=False, compare=False)

    @property
    def objective_total(self) -> float:
        return float(sum(x for x in self.hourly_objective if not math.isnan(x)))

    @property
    def min_total_ramp(self) -> float:
        vals = [x for x in self.hourly_total_ramp if not math.isnan(x)]
        return min(vals) if vals else math.nan

    @property
    def all_infeasible(self) -> bool:
        return len(self.infeasible_hours) == len(self.award)


def run_case(scenario: Scenario, with_ramp_floor: bool, method: str = "bnb",
             label: str | None = None) -> CaseReport:
    problems = [scenario.hour_problem(t, with_ramp_floor) for t in range(scenario.horizon)]
    results = solve_horizon(problems, method)
    nan_row = (math.nan,) * len(scenario.microgrids)
    return CaseReport(
        case_label=label or ("case2" if with_ramp_floor else "case1"),
        names=scenario.names,
        award=scenario.award,
        ramp_floor=scenario.ramp_floor if with_ramp_floor else None,
        hourly_objective=tuple(r.objective if r.feasible else math.nan for r in results),
        hourly_total_ramp=tuple(r.total_ramp if r.feasible else math.nan for r in results),
        awards=tuple(r.microgrid_awards if r.feasible else nan_row for r in results),
        infeasible_hours=tuple((t, r) for t, r in enumerate(results) if not r.feasible),
        results=tuple(results),
        problems=tuple(problems),
    )


@dataclass(frozen=True)
class CaseComparison:
    case1: CaseReport | None
    case2: CaseReport | None
    ramp_floor: tuple[float, ...]
    award_residual: tuple[float, ...]  # per hour: max |sum PD - D| over the cases present
    awards_conserved: bool
    objective_delta: float | None  # case1 - case2
    relative_gap: float | None
    award_diff: tuple[tuple[float, ...], ...] | None  # case2 - case1, [hour][microgrid]


def compare_cases(case1: CaseReport | None, case2: CaseReport | None,
                  tol: float = 1e-9) -> CaseComparison:
    """Side-by-side view of the two cases. Either may be None for a
    single-case run; the deltas are then None.

    Hours infeasible in either case are left out of the award checks.
    """
    present = [c for c in (case1, case2) if c is not None]
    if not present:
        raise ValueError("nothing to compare")
    ref = present[0]
    for c in present[1:]:
        if c.names != ref.names or c.award != ref.award:
            raise ValueError("case reports come from different scenarios")
    horizon = len(ref.award)
    floor = next((c.ramp_floor for c in present if c.ramp_floor is not None), (0.0,) * horizon)
    residual = []
    for t in range(horizon):
        r = 0.0
        for c in present:
            if not math.isnan(c.hourly_objective[t]):
                r = max(r, abs(math.fsum(c.awards[t]) - ref.award[t]))
        residual.append(r)
    delta = gap = diff = None
    if case1 is not None and case2 is not None:
        delta = case1.objective_total - case2.objective_total
        gap = delta / case1.objective_total if case1.objective_total else 0.0
        diff = tuple(
            tuple(b - a for a, b in zip(case1.awards[t], case2.awards[t])) for t in range(horizon)
        )
    return CaseComparison(
        case1=case1,
        case2=case2,
        ramp_floor=tuple(floor),
        award_residual=tuple(residual),
        awards_conserved=max(residual) <= tol,
        objective_delta=delta,
        relative_gap=gap,
        award_diff=diff,
    )


def offered_ramp(scenario: Scenario, awards: Sequence[Sequence[float]]) -> np.ndarray:
    """Hourly total ramp implied by per-microgrid awards, via each bid's
    marginal segment."""
    out = np.zeros(scenario.horizon)
    for t in range(scenario.horizon):
        out[t] = sum(
            marginal_ramp_at(mg, awards[t][m] - mg.fixed_load[t])
            for m, mg in enumerate(scenario.microgrids)
        )
    return out


def _daily_shape(horizon: int) -> np.ndarray:
    # trough around 04:00, peak around 16:00
    t = np.arange(horizon)
    return 0.5 - 0.5 * np.cos(2 * np.pi * (t - 4) / 24)


def synthetic_profiles(capacities: Sequence[float], horizon: int = 24, seed: int = DEFAULT_SEED,
                       headroom: tuple[float, float] = (0.2, 0.6)):
    """Stand-in hourly load data for a fleet of microgrids.

    Fixed loads follow a daily curve at 25-45% of each microgrid's bid
    capacity with small noise. The award adds a responsive part between
    ``headroom[0]`` and ``headroom[1]`` of the total bid capacity, following
    the same curve. Values are rounded to 1 kW so they serialise exactly.

    Returns ``(fixed_loads, award)``: a list of per-microgrid tuples and a tuple.
    """
    rng = np.random.default_rng(seed)
    shape = _daily_shape(horizon)
    caps = np.asarray(capacities, dtype=float)
    fixed = []
    for cap in caps:
        level = rng.uniform(0.25, 0.45) * cap
        noise = rng.normal(0.0, 0.03, horizon)
        prof = level * (0.8 + 0.2 * shape + noise)
        fixed.append(np.round(np.clip(prof, 0.0, None), 3))
    lo, hi = headroom
    frac = np.clip(lo + (hi - lo) * (shape + rng.normal(0.0, 0.05, horizon)), lo, hi)
    responsive = np.round(frac * caps.sum(), 3)
    award = np.round(np.sum(fixed, axis=0) + responsive, 3)
    return [tuple(float(x) for x in f) for f in fixed], tuple(float(x) for x in award)


def table_i_scenario(seed: int = DEFAULT_SEED, ramp_floor: float = TABLE_I_FLOOR,
                     horizon: int = 24, epsilon: float = DEFAULT_EPSILON) -> Scenario:
    """Five Table I microgrids with synthetic hourly profiles."""
    fleets = table_i_fleets()
    caps = [sum(u.capacity for u in units) for units in fleets.values()]
    fixed, award = synthetic_profiles(caps, horizon, seed)
    bids = [
        build_bid_from_fleet(units, fixed[m], m, name)
        for m, (name, units) in enumerate(fleets.items())
    ]
    return Scenario(horizon, tuple(bids), award, ramp_floor, epsilon)


def with_profiles(scenario: Scenario, seed: int) -> Scenario:
    """Same fleet, synthetic profiles regenerated from ``seed``."""
    caps = [mg.total_capacity for mg in scenario.microgrids]
    fixed, award = synthetic_profiles(caps, scenario.horizon, seed)
    bids = [MicrogridBid(mg.id, fixed[m], mg.segments, mg.name) for m, mg in enumerate(scenario.microgrids)]
    return Scenario(scenario.horizon, tuple(bids), award, scenario.ramp_floor, scenario.epsilon, scenario.big_m)


def with_floor(scenario: Scenario, ramp_floor) -> Scenario:
    return Scenario(scenario.horizon, scenario.microgrids, scenario.award, ramp_floor,
                    scenario.epsilon, scenario.big_m)
