"""DMO-side aggregation of microgrid bids into the upstream package."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .bids import MicrogridBid, marginal_ramp_at


@dataclass(frozen=True)
class MergedSegment:
    price: float
    quantity: float
    microgrid: int  # MicrogridBid.id
    segment: int  # 1-based segment index within that microgrid


@dataclass(frozen=True)
class AggregateDemandBid:
    fixed_total: tuple[float, ...]
    merged_segments: tuple[MergedSegment, ...]

    @property
    def total_quantity(self) -> float:
        return float(sum(s.quantity for s in self.merged_segments))


@dataclass(frozen=True)
class AggregateRampCurve:
    """Total offered ramp as a step function of total responsive load.

    ``breakpoints[i] = (L_i, R_i)`` means the curve equals ``R_i`` on
    ``(L_{i-1}, L_i]``; the value at zero load is 0.
    """

    breakpoints: tuple[tuple[float, float], ...]

    def __call__(self, load: float) -> float:
        if load <= 0:
            return 0.0
        loads = [b[0] for b in self.breakpoints]
        i = int(np.searchsorted(loads, load, side="left"))
        if i >= len(loads):
            raise ValueError(f"load {load} exceeds aggregate capacity {loads[-1]}")
        return self.breakpoints[i][1]


def total_fixed_load(bids: Sequence[MicrogridBid]) -> np.ndarray:
    """Hourly sum of all microgrids' fixed loads."""
    if len(bids) == 0:
        return np.zeros(0)
    horizons = {b.horizon for b in bids}
    if len(horizons) != 1:
        raise ValueError(f"fixed-load profiles have mismatched horizons: {sorted(horizons)}")
    return np.sum([np.asarray(b.fixed_load, dtype=float) for b in bids], axis=0)


def _merit_order(bids: Sequence[MicrogridBid]) -> list[MergedSegment]:
    merged = [
        MergedSegment(seg.price, seg.max_quantity, bid.id, j)
        for bid in sorted(bids, key=lambda b: b.id)
        for j, seg in enumerate(bid.segments, start=1)
    ]
    # stable: equal prices keep (microgrid, segment) order
    merged.sort(key=lambda s: -s.price)
    return merged


def aggregate_demand_bid(bids: Sequence[MicrogridBid]) -> AggregateDemandBid:
    if len(bids) == 0:
        raise ValueError("cannot aggregate an empty bid list")
    return AggregateDemandBid(tuple(total_fixed_load(bids)), tuple(_merit_order(bids)))


def aggregate_ramp_curve(bids: Sequence[MicrogridBid]) -> AggregateRampCurve:
    """Sum of per-microgrid marginal ramps along the merged merit order.

    Reporting only; the dispatch solvers pair ramps with segments directly.
    """
    if len(bids) == 0:
        raise ValueError("cannot aggregate an empty bid list")
    by_id = {b.id: b for b in bids}
    fill = {b.id: 0.0 for b in bids}
    total = 0.0
    points = []
    for seg in _merit_order(bids):
        fill[seg.microgrid] += seg.quantity
        total += seg.quantity
        ramp = sum(marginal_ramp_at(by_id[m], fill[m]) for m in fill)
        points.append((total, ramp))
    return AggregateRampCurve(tuple(points))
