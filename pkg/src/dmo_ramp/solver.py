"""Hourly award disaggregation: exact solvers and a literal constraint check.

Sequential segment selection means every feasible binary pattern is a
per-microgrid prefix, so an hour is solved by choosing one prefix length
per microgrid. For a fixed prefix vector the continuous part is a
box-constrained program with one equality, solved exactly by filling
selected segments in price order (``inner_fill``).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .bids import MicrogridBid
from .kernels import PackedHour, enumerate_prefixes, pack

DEFAULT_EPSILON = 1e-3
DEFAULT_COMBINATION_CAP = 10**6
WINDOW_TOL = 1e-9
RAMP_TOL = 1e-9
TIE_RTOL = 1e-10
VERIFY_TOL = 1e-9


class CombinationCapExceeded(ValueError):
    pass


@dataclass(frozen=True)
class HourProblem:
    """One hour of the disaggregation problem.

    ``ramp_floor=None`` drops the ramp requirement altogether (market-only
    scheduling). ``big_m`` is only consumed by ``verify_milp_constraints``;
    ``None`` picks 1 + the largest segment ramp rate.
    """

    awarded_demand: float
    bids: tuple[MicrogridBid, ...]
    ramp_floor: float | None = None
    epsilon: float = DEFAULT_EPSILON
    big_m: float | None = None
    hour: int = 0

    def __post_init__(self):
        object.__setattr__(self, "bids", tuple(self.bids))
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        max_rr = max((b.max_ramp for b in self.bids), default=0.0)
        if self.big_m is None:
            object.__setattr__(self, "big_m", 1.0 + max_rr)
        elif not self.big_m > max_rr:
            raise ValueError(f"big_m={self.big_m} must exceed the largest ramp rate {max_rr}")

    @property
    def fixed_loads(self) -> np.ndarray:
        return np.array([b.fixed_load[self.hour] for b in self.bids], dtype=float)

    @property
    def responsive_demand(self) -> float:
        return float(self.awarded_demand - self.fixed_loads.sum())

    def packed(self) -> PackedHour:
        return pack(
            [[(s.price, s.max_quantity, s.ramp_rate) for s in b.segments] for b in self.bids],
            self.epsilon,
        )


@dataclass(frozen=True)
class HourSolution:
    prefix: tuple[int, ...]
    segment_awards: tuple[tuple[float, ...], ...]  # DX[m][j]
    selection: tuple[tuple[bool, ...], ...]  # delta[m][j]
    selected_ramp: tuple[float, ...]  # RR^Sel per microgrid
    total_ramp: float
    microgrid_awards: tuple[float, ...]  # PD^M
    responsive_awards: tuple[float, ...]  # d^r
    objective: float
    nodes: int = 0

    feasible = True


@dataclass(frozen=True)
class Infeasible:
    """Why an hour has no feasible disaggregation.

    ``max_total_ramp`` is the best total ramp over prefix vectors able to
    carry the responsive demand; ``demand_window`` is the responsive-demand
    range over vectors meeting the ramp floor. Either is None when no
    vector qualifies or the search space was too large to scan.
    """

    reason: str
    responsive_demand: float
    max_total_ramp: float | None = None
    demand_window: tuple[float, float] | None = None
    nodes: int = 0

    feasible = False


@dataclass(frozen=True)
class Fill:
    segment_awards: tuple[tuple[float, ...], ...]
    objective: float


def inner_fill(selected_prefixes: Sequence[int], responsive_demand: float,
               problem: HourProblem) -> Fill | None:
    """Best segment awards for fixed prefix lengths, or None if the demand
    falls outside ``[n * eps, selected capacity]``.

    Every selected segment gets epsilon; the rest of the demand goes to
    selected segments by descending price (ties: microgrid, then segment).
    """
    eps = problem.epsilon
    bids = problem.bids
    if len(selected_prefixes) != len(bids):
        raise ValueError("one prefix length per microgrid required")
    n = 0
    capsum = 0.0
    for k, bid in zip(selected_prefixes, bids):
        if not 0 <= k <= bid.n_segments:
            raise ValueError(f"prefix length {k} out of range for {bid.name}")
        if any(s.max_quantity < eps for s in bid.segments[:k]):
            return None
        n += k
        capsum += sum(s.max_quantity for s in bid.segments[:k])
    if n * eps > responsive_demand + WINDOW_TOL or responsive_demand > capsum + WINDOW_TOL:
        return None
    order = sorted(
        ((-s.price, m, j) for m, (k, bid) in enumerate(zip(selected_prefixes, bids))
         for j, s in enumerate(bid.segments[:k])),
    )
    awards = [[0.0] * b.n_segments for b in bids]
    rem = max(responsive_demand - n * eps, 0.0)
    obj = 0.0
    for _, m, j in order:
        seg = bids[m].segments[j]
        take = min(seg.max_quantity - eps, rem)
        take = max(take, 0.0)
        rem -= take
        awards[m][j] = eps + take
        obj += seg.price * (eps + take)
    return Fill(tuple(tuple(a) for a in awards), obj)


def _selected_ramp(bid: MicrogridBid, k: int) -> float:
    return bid.segments[k - 1].ramp_rate if k > 0 else 0.0


def _total_ramp(problem: HourProblem, prefix: Sequence[int]) -> float:
    total = 0.0
    for bid, k in zip(problem.bids, prefix):
        total += _selected_ramp(bid, k)
    return total


def _meets_floor(problem: HourProblem, total_ramp: float) -> bool:
    return problem.ramp_floor is None or total_ramp >= problem.ramp_floor - RAMP_TOL


def _materialize(problem: HourProblem, prefix: Sequence[int], nodes: int = 0) -> HourSolution:
    R = problem.responsive_demand
    fill = inner_fill(prefix, R, problem)
    assert fill is not None
    bids = problem.bids
    selection = tuple(tuple(j < k for j in range(b.n_segments)) for b, k in zip(bids, prefix))
    ramps = tuple(float(_selected_ramp(b, k)) for b, k in zip(bids, prefix))
    responsive = tuple(float(sum(a)) for a in fill.segment_awards)
    fixed = problem.fixed_loads
    return HourSolution(
        prefix=tuple(int(k) for k in prefix),
        segment_awards=fill.segment_awards,
        selection=selection,
        selected_ramp=ramps,
        total_ramp=_total_ramp(problem, prefix),
        microgrid_awards=tuple(float(r + f) for r, f in zip(responsive, fixed)),
        responsive_awards=responsive,
        objective=fill.objective,
        nodes=nodes,
    )


def _screen(problem: HourProblem) -> str | None:
    issues = feasibility_check(problem).issues
    return issues[0] if issues else None


def _infeasible(problem: HourProblem, reason: str | None, cap: int, nodes: int = 0) -> Infeasible:
    R = problem.responsive_demand
    packed = problem.packed()
    if int(np.prod(packed.radix)) > cap:
        return Infeasible(reason or "no feasible prefix combination", R, nodes=nodes)
    res = enumerate_prefixes(packed, R, problem.epsilon, problem.ramp_floor,
                             WINDOW_TOL, RAMP_TOL, TIE_RTOL)
    max_ramp = res.max_ramp_demand_ok if res.max_ramp_demand_ok >= 0 else None
    window = (res.window_lo, res.window_hi) if res.window_lo <= res.window_hi else None
    if reason is None:
        if max_ramp is None:
            reason = "responsive demand outside every selectable window"
        else:
            reason = "ramp floor not attainable at this demand"
    return Infeasible(reason, R, max_ramp, window, nodes)


def enumerate_hour(problem: HourProblem, cap: int = DEFAULT_COMBINATION_CAP,
                   use_numba: bool | None = None) -> HourSolution | Infeasible:
    """Exhaustive oracle over all prod(J_m + 1) prefix vectors."""
    packed = problem.packed()
    combos = int(np.prod(packed.radix))
    if combos > cap:
        raise CombinationCapExceeded(f"{combos} prefix combinations exceed the cap of {cap}")
    R = problem.responsive_demand
    res = enumerate_prefixes(packed, R, problem.epsilon, problem.ramp_floor,
                             WINDOW_TOL, RAMP_TOL, TIE_RTOL, use_numba=use_numba)
    if not res.found:
        return _infeasible(problem, _screen(problem), cap, nodes=combos)
    return _materialize(problem, res.prefix, nodes=combos)


@dataclass
class _Search:
    problem: HourProblem
    packed: PackedHour
    demand: float
    # per microgrid: best ramp over selectable prefixes, full selectable capacity
    free_ramp: np.ndarray
    free_cap: np.ndarray
    nodes: int = 0
    best_obj: float = -math.inf
    best_prefix: tuple[int, ...] | None = None

    def bound(self, fixed: tuple[int, ...]) -> tuple[float, tuple[int, ...]] | None:
        """Relaxation over the subtree: epsilon bounds and ramp pairing
        dropped, free microgrids may use every segment, optimistic ramp.

        Returns (upper bound, prefix vector read off the greedy fill), or
        None when the subtree is provably empty.
        """
        p = self.packed
        eps = self.problem.epsilon
        floor = self.problem.ramp_floor
        depth = len(fixed)
        M = p.radix.size
        n = 0
        ramp = 0.0
        cap = 0.0
        for m, k in enumerate(fixed):
            if not p.prefix_ok[m, k]:
                return None
            n += k
            ramp += p.rr_table[m, k]
            cap += p.cap_prefix[m, k]
        if n * eps > self.demand + WINDOW_TOL:
            return None
        for m in range(depth, M):
            ramp += self.free_ramp[m]
            cap += self.free_cap[m]
        if cap < self.demand - WINDOW_TOL:
            return None
        if floor is not None and ramp < floor - RAMP_TOL:
            return None
        limit = np.array(list(fixed) + [p.radix[m] - 1 for m in range(depth, M)], dtype=np.int64)
        rem = max(self.demand, 0.0)
        obj = 0.0
        filled = np.zeros(M, dtype=np.int64)
        for s in range(p.seg_price.size):
            m = p.seg_owner[s]
            j = p.seg_index[s]
            if j > limit[m] or rem <= 0.0:
                continue
            take = min(p.seg_cap[s], rem)
            rem -= take
            obj += p.seg_price[s] * take
            if take > 0.0 and j > filled[m]:
                filled[m] = j
        guess = tuple(fixed) + tuple(int(filled[m]) for m in range(depth, M))
        return obj, guess

    def leaf(self, prefix: tuple[int, ...]) -> float | None:
        fill = inner_fill(prefix, self.demand, self.problem)
        if fill is None or not _meets_floor(self.problem, _total_ramp(self.problem, prefix)):
            return None
        return fill.objective

    def offer(self, prefix: tuple[int, ...], obj: float):
        if obj > self.best_obj:
            self.best_obj = obj
            self.best_prefix = prefix

    def optimize(self, fixed: tuple[int, ...] = ()):
        """Find the optimal value (depth-first, lexicographic children)."""
        self.nodes += 1
        M = self.packed.radix.size
        if len(fixed) == M:
            obj = self.leaf(fixed)
            if obj is not None:
                self.offer(fixed, obj)
            return
        relaxed = self.bound(fixed)
        if relaxed is None:
            return
        ub, guess = relaxed
        if ub <= self.best_obj:
            return
        obj = self.leaf(guess)
        if obj is not None:
            self.offer(guess, obj)
            if obj >= ub - 1e-12 * max(1.0, abs(ub)):
                return
        for k in range(self.packed.radix[len(fixed)]):
            self.optimize(fixed + (k,))

    def first_within(self, cut: float, fixed: tuple[int, ...] = ()) -> tuple[int, ...] | None:
        """Lexicographically smallest feasible leaf with objective >= cut."""
        M = self.packed.radix.size
        if len(fixed) == M:
            obj = self.leaf(fixed)
            return fixed if obj is not None and obj >= cut else None
        relaxed = self.bound(fixed)
        if relaxed is None or relaxed[0] < cut - 1e-12 * max(1.0, abs(cut)):
            return None
        for k in range(self.packed.radix[len(fixed)]):
            hit = self.first_within(cut, fixed + (k,))
            if hit is not None:
                return hit
        return None


def solve_hour_bnb(problem: HourProblem, cap: int = DEFAULT_COMBINATION_CAP) -> HourSolution | Infeasible:
    """Branch and bound over per-microgrid prefix lengths.

    Returns the same optimum and the same tie-break (lexicographically
    smallest prefix vector within TIE_RTOL of the optimum) as
    ``enumerate_hour``. ``nodes`` counts nodes of the optimisation pass.
    ``cap`` only limits the diagnostic scan on infeasible hours.
    """
    packed = problem.packed()
    R = problem.responsive_demand
    M = packed.radix.size
    free_ramp = np.array([packed.rr_table[m, packed.prefix_ok[m]].max() for m in range(M)])
    free_cap = np.array([packed.cap_prefix[m, packed.prefix_ok[m]].max() for m in range(M)])
    search = _Search(problem, packed, R, free_ramp, free_cap)
    screen = _screen(problem)
    if screen is None:
        search.optimize()
    if search.best_prefix is None:
        return _infeasible(problem, screen, cap, nodes=search.nodes)
    best = search.best_obj
    cut = best - TIE_RTOL * max(1.0, abs(best))
    prefix = search.first_within(cut)
    assert prefix is not None
    return _materialize(problem, prefix, nodes=search.nodes)


SOLVERS = {"bnb": solve_hour_bnb, "enum": enumerate_hour}


def solve_horizon(problems: Sequence[HourProblem], method: str = "bnb") -> list[HourSolution | Infeasible]:
    """Solve independent hours; infeasible hours come back as ``Infeasible``."""
    solve = SOLVERS[method]
    return [solve(p) for p in problems]


def horizon_objective(results: Sequence[HourSolution | Infeasible]) -> float:
    return float(sum(r.objective for r in results if r.feasible))


def verify_milp_constraints(problem: HourProblem, solution: HourSolution,
                            tol: float = VERIFY_TOL) -> list[str]:
    """Evaluate the disaggregation MILP constraints literally, big-M forms
    included. Returns human-readable violations; empty means feasible."""
    out = []
    eps = problem.epsilon
    M = problem.big_m
    bids = problem.bids
    if len(solution.segment_awards) != len(bids) or len(solution.selection) != len(bids):
        return ["solution shape does not match problem"]
    fixed = problem.fixed_loads
    for m, bid in enumerate(bids):
        dx = solution.segment_awards[m]
        delta = [1.0 if d else 0.0 for d in solution.selection[m]]
        if len(dx) != bid.n_segments or len(delta) != bid.n_segments:
            out.append(f"{bid.name}: segment count mismatch")
            continue
        for j, seg in enumerate(bid.segments):
            if eps * delta[j] - dx[j] > tol:
                out.append(f"segment lower bound: {bid.name} seg {j + 1} DX={dx[j]:.9g} < eps*delta")
            if dx[j] - seg.max_quantity * delta[j] > tol:
                out.append(f"segment upper bound: {bid.name} seg {j + 1} DX={dx[j]:.9g} > DXmax*delta")
            if j > 0 and delta[j] > delta[j - 1]:
                out.append(f"sequential selection: {bid.name} seg {j + 1} selected without seg {j}")
        d_r = solution.responsive_awards[m]
        if abs(d_r - sum(dx)) > tol:
            out.append(f"responsive sum: {bid.name} d_r={d_r:.12g} != sum DX={sum(dx):.12g}")
        if abs(d_r + fixed[m] - solution.microgrid_awards[m]) > tol:
            out.append(f"microgrid balance: {bid.name} d_r + d_f != PD")
        rr_sel = solution.selected_ramp[m]
        for j, seg in enumerate(bid.segments):
            slack = M * (1 - delta[j] + sum(delta[j + 1:]))
            if abs(rr_sel - seg.ramp_rate) - slack > tol:
                out.append(f"ramp pairing: {bid.name} seg {j + 1} RR_sel={rr_sel:g} not paired with RR={seg.ramp_rate:g}")
        if abs(rr_sel) - M * sum(delta) > tol:
            out.append(f"zero ramp: {bid.name} RR_sel={rr_sel:g} with no segment selected")
    total_pd = sum(solution.microgrid_awards)
    if abs(total_pd - problem.awarded_demand) > tol:
        out.append(f"award balance: sum PD={total_pd:.12g} != D={problem.awarded_demand:.12g}")
    if abs(solution.total_ramp - sum(solution.selected_ramp)) > tol:
        out.append("ramp sum: RR_total != sum RR_sel")
    if problem.ramp_floor is not None and problem.ramp_floor - solution.total_ramp > tol:
        out.append(f"ramp floor: RR_total={solution.total_ramp:g} below floor {problem.ramp_floor:g}")
    return out


@dataclass(frozen=True)
class FeasibilityReport:
    issues: tuple[str, ...]
    responsive_demand: float
    ramp_upper_bound: float

    @property
    def ok(self) -> bool:
        return not self.issues


def feasibility_check(problem: HourProblem) -> FeasibilityReport:
    """Necessary conditions only; the solvers decide actual feasibility."""
    issues = []
    R = problem.responsive_demand
    if R < -WINDOW_TOL:
        issues.append("fixed load exceeds award")
    if R > sum(b.total_capacity for b in problem.bids) + WINDOW_TOL:
        issues.append("responsive demand exceeds total bid capacity")
    upper = float(sum(b.max_ramp for b in problem.bids))
    if problem.ramp_floor is not None and problem.ramp_floor > upper + RAMP_TOL:
        issues.append("ramp floor unreachable")
    return FeasibilityReport(tuple(issues), R, upper)
