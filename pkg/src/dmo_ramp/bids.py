"""Microgrid demand/ramping bid curves."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

# Breakpoint comparisons; loads are in MW, so this is far below metering resolution.
LOAD_TOL = 1e-9


@dataclass(frozen=True)
class DgUnit:
    """A dispatchable unit inside a microgrid."""

    marginal_cost: float  # $/MWh
    capacity: float  # MW
    ramp_rate: float  # MW/h


@dataclass(frozen=True)
class BidSegment:
    price: float  # $/MWh
    max_quantity: float  # MW
    ramp_rate: float  # MW/h


@dataclass(frozen=True)
class MicrogridBid:
    """Stepwise demand bid of one microgrid.

    ``fixed_load`` is the non-curtailable hourly profile; ``segments`` is the
    responsive part, ordered j = 1..J. Selecting segment j implies the
    microgrid offers that segment's ramp rate upstream.
    """

    id: int
    fixed_load: tuple[float, ...]
    segments: tuple[BidSegment, ...]
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "fixed_load", tuple(float(x) for x in self.fixed_load))
        object.__setattr__(self, "segments", tuple(self.segments))
        if not self.name:
            object.__setattr__(self, "name", f"MG{self.id + 1}")

    @property
    def n_segments(self) -> int:
        return len(self.segments)

    @property
    def horizon(self) -> int:
        return len(self.fixed_load)

    @property
    def total_capacity(self) -> float:
        return float(sum(s.max_quantity for s in self.segments))

    @property
    def max_ramp(self) -> float:
        return max((s.ramp_rate for s in self.segments), default=0.0)

    def cumulative_capacity(self) -> np.ndarray:
        return np.cumsum([s.max_quantity for s in self.segments])

    def at_hour(self, t: int) -> MicrogridBid:
        """Single-hour view, used when building per-hour problems."""
        return MicrogridBid(self.id, (self.fixed_load[t],), self.segments, self.name)


def build_bid_from_fleet(
    fleet: Sequence[DgUnit],
    fixed_load: Sequence[float],
    id: int = 0,
    name: str = "",
) -> MicrogridBid:
    """Turn a dispatchable fleet into a bid, one segment per unit.

    Segments are ordered by descending marginal cost: the most expensive
    local generation is the first to be displaced by grid supply. Ties go
    to the larger unit, then to input order.
    """
    if len(fleet) == 0:
        raise ValueError("fleet must contain at least one DG unit")
    for k, unit in enumerate(fleet):
        if not unit.capacity > 0:
            raise ValueError(f"DG unit {k}: capacity must be positive, got {unit.capacity}")
        if unit.ramp_rate < 0:
            raise ValueError(f"DG unit {k}: ramp_rate must be non-negative, got {unit.ramp_rate}")
        if unit.marginal_cost < 0:
            raise ValueError(f"DG unit {k}: marginal_cost must be non-negative, got {unit.marginal_cost}")
    order = sorted(range(len(fleet)), key=lambda k: (-fleet[k].marginal_cost, -fleet[k].capacity))
    segments = tuple(
        BidSegment(float(fleet[k].marginal_cost), float(fleet[k].capacity), float(fleet[k].ramp_rate))
        for k in order
    )
    return MicrogridBid(id, tuple(fixed_load), segments, name)


def validate_bid(bid: MicrogridBid) -> list[str]:
    """Return the violated bid invariants; an empty list means the bid is valid."""
    problems = []
    if not bid.segments:
        problems.append("segments must be non-empty")
    for j, seg in enumerate(bid.segments, start=1):
        if not seg.max_quantity > 0:
            problems.append(f"segment {j}: max_quantity > 0 violated ({seg.max_quantity})")
        if seg.ramp_rate < 0:
            problems.append(f"segment {j}: ramp_rate >= 0 violated ({seg.ramp_rate})")
        if seg.price < 0:
            problems.append(f"segment {j}: price >= 0 violated ({seg.price})")
    prices = [s.price for s in bid.segments]
    if any(b > a for a, b in zip(prices, prices[1:])):
        problems.append("prices not non-increasing")
    bad_hours = [t for t, x in enumerate(bid.fixed_load) if not x >= 0]
    if bad_hours:
        problems.append(f"fixed_load >= 0 violated at hours {bad_hours}")
    return problems


def marginal_ramp_at(bid: MicrogridBid, responsive_load: float) -> float:
    """Ramp rate of the highest segment touched when ``responsive_load`` is
    filled bottom-up; 0 when nothing is loaded.

    At an exact breakpoint the last completely filled segment is marginal.
    """
    total = bid.total_capacity
    if responsive_load < -LOAD_TOL:
        raise ValueError(f"responsive load must be non-negative, got {responsive_load}")
    if responsive_load > total + LOAD_TOL:
        raise ValueError(f"responsive load {responsive_load} exceeds bid capacity {total}")
    if responsive_load <= LOAD_TOL:
        return 0.0
    cum = bid.cumulative_capacity()
    j = int(np.searchsorted(cum, responsive_load - LOAD_TOL, side="left"))
    return float(bid.segments[min(j, bid.n_segments - 1)].ramp_rate)


# Table I: (marginal cost $/MWh, capacity MW, ramp rate MW/h) for DG1..DG4 of each microgrid.
TABLE_I = {
    "MG1": [(71.5, 5, 3), (58.4, 5, 2), (45.2, 3, 3), (23.2, 2, 1.5)],
    "MG2": [(62.8, 4, 2.5), (50.5, 4, 2), (33.6, 2, 2), (25.7, 2, 1)],
    "MG3": [(64.5, 5, 3.5), (59.8, 3, 1.5), (46.2, 3, 1.5), (27.4, 1, 0.5)],
    "MG4": [(69.5, 5, 2), (57.2, 5, 2), (38.4, 4, 3), (27.9, 2, 1)],
    "MG5": [(76.5, 5, 3), (62.4, 4, 1), (40.5, 3, 2), (31.1, 2, 1)],
}


def table_i_fleets() -> dict[str, list[DgUnit]]:
    return {name: [DgUnit(*map(float, row)) for row in rows] for name, rows in TABLE_I.items()}
