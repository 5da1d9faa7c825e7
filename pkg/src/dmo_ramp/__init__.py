"""Distribution market operator: microgrid bid aggregation and ramp-constrained
award disaggregation."""
from .aggregation import (
    AggregateDemandBid,
    AggregateRampCurve,
    aggregate_demand_bid,
    aggregate_ramp_curve,
    total_fixed_load,
)
from .bids import (
    TABLE_I,
    BidSegment,
    DgUnit,
    MicrogridBid,
    build_bid_from_fleet,
    marginal_ramp_at,
    table_i_fleets,
    validate_bid,
)
from .solver import (
    HourProblem,
    HourSolution,
    Infeasible,
    enumerate_hour,
    feasibility_check,
    inner_fill,
    solve_horizon,
    solve_hour_bnb,
    verify_milp_constraints,
)

__version__ = "0.1.0"
