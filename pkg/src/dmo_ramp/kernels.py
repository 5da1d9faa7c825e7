"""Hot loops of the prefix-enumeration oracle.

Two interchangeable backends: a numba kernel that walks the mixed-radix
prefix space one combination at a time, and a chunked numpy version that
evaluates blocks of combinations with array ops. ``enumerate_prefixes``
dispatches on ``_accel.USE_NUMBA``; both return the same ``EnumResult``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _accel
from ._accel import njit

CHUNK = 1 << 14


@dataclass(frozen=True)
class PackedHour:
    """Array form of one hour's bids, segments in global merit order.

    ``rr_table[m, k]`` / ``cap_prefix[m, k]`` give the marginal ramp and
    cumulative capacity when microgrid m selects its first k segments;
    ``prefix_ok[m, k]`` is False when some segment in that prefix is
    smaller than epsilon (it could never be selected).
    """

    radix: np.ndarray  # int64 (M,), J_m + 1
    rr_table: np.ndarray  # float64 (M, Jmax + 1)
    cap_prefix: np.ndarray  # float64 (M, Jmax + 1)
    prefix_ok: np.ndarray  # bool (M, Jmax + 1)
    seg_price: np.ndarray  # float64 (S,)
    seg_cap: np.ndarray  # float64 (S,)
    seg_owner: np.ndarray  # int64 (S,), position of the microgrid
    seg_index: np.ndarray  # int64 (S,), 1-based segment index


@dataclass(frozen=True)
class EnumResult:
    found: bool
    prefix: np.ndarray
    objective: float
    combinations: int
    max_ramp_demand_ok: float  # -1 when no prefix vector can carry the demand
    window_lo: float  # responsive-demand window over ramp-feasible vectors
    window_hi: float  # (inf, -inf) when none meets the floor


def pack(segments_per_mg, eps: float) -> PackedHour:
    """``segments_per_mg``: list over microgrids of lists of (price, cap, ramp)."""
    M = len(segments_per_mg)
    jmax = max((len(s) for s in segments_per_mg), default=0)
    radix = np.array([len(s) + 1 for s in segments_per_mg], dtype=np.int64)
    rr_table = np.zeros((M, jmax + 1))
    cap_prefix = np.zeros((M, jmax + 1))
    prefix_ok = np.zeros((M, jmax + 1), dtype=bool)
    rows = []
    for m, segs in enumerate(segments_per_mg):
        prefix_ok[m, 0] = True
        cum = 0.0
        for j, (price, cap, ramp) in enumerate(segs, start=1):
            cum += cap
            rr_table[m, j] = ramp
            cap_prefix[m, j] = cum
            prefix_ok[m, j] = prefix_ok[m, j - 1] and cap >= eps
            rows.append((-price, m, j, price, cap))
    rows.sort(key=lambda r: (r[0], r[1], r[2]))
    return PackedHour(
        radix=radix,
        rr_table=rr_table,
        cap_prefix=cap_prefix,
        prefix_ok=prefix_ok,
        seg_price=np.array([r[3] for r in rows], dtype=float),
        seg_cap=np.array([r[4] for r in rows], dtype=float),
        seg_owner=np.array([r[1] for r in rows], dtype=np.int64),
        seg_index=np.array([r[2] for r in rows], dtype=np.int64),
    )


@njit(cache=True)
def _fill_objective(k, seg_price, seg_cap, seg_owner, seg_index, n, demand, eps):
    rem = demand - n * eps
    if rem < 0.0:
        rem = 0.0
    obj = 0.0
    for s in range(seg_price.size):
        if seg_index[s] <= k[seg_owner[s]]:
            take = seg_cap[s] - eps
            if take > rem:
                take = rem
            if take < 0.0:
                take = 0.0
            rem -= take
            obj += seg_price[s] * (eps + take)
    return obj


@njit(cache=True)
def _enumerate_nb(radix, rr_table, cap_prefix, prefix_ok, seg_price, seg_cap, seg_owner,
                  seg_index, demand, eps, floor, has_floor, win_tol, ramp_tol, tie_rtol):
    M = radix.size
    total = 1
    for m in range(M):
        total *= radix[m]
    objs = np.full(total, -np.inf)
    k = np.zeros(M, dtype=np.int64)
    max_ramp = -1.0
    win_lo = np.inf
    win_hi = -np.inf
    best = -np.inf
    for it in range(total):
        n = 0
        ramp = 0.0
        capsum = 0.0
        ok = True
        for m in range(M):
            n += k[m]
            ramp += rr_table[m, k[m]]
            capsum += cap_prefix[m, k[m]]
            if not prefix_ok[m, k[m]]:
                ok = False
        if ok:
            lo = n * eps
            demand_ok = lo <= demand + win_tol and demand <= capsum + win_tol
            ramp_ok = (not has_floor) or ramp >= floor - ramp_tol
            if demand_ok and ramp > max_ramp:
                max_ramp = ramp
            if ramp_ok:
                if lo < win_lo:
                    win_lo = lo
                if capsum > win_hi:
                    win_hi = capsum
            if demand_ok and ramp_ok:
                obj = _fill_objective(k, seg_price, seg_cap, seg_owner, seg_index, n, demand, eps)
                objs[it] = obj
                if obj > best:
                    best = obj
        m = M - 1
        while m >= 0:
            k[m] += 1
            if k[m] < radix[m]:
                break
            k[m] = 0
            m -= 1
    pick = -1
    if best > -np.inf:
        cut = best - tie_rtol * max(1.0, abs(best))
        for it in range(total):
            if objs[it] >= cut:
                pick = it
                break
    return pick, best, max_ramp, win_lo, win_hi


def _unravel(flat: np.ndarray, radix: np.ndarray) -> np.ndarray:
    return np.stack(np.unravel_index(flat, tuple(int(r) for r in radix)), axis=1).astype(np.int64)


def _enumerate_np(radix, rr_table, cap_prefix, prefix_ok, seg_price, seg_cap, seg_owner,
                  seg_index, demand, eps, floor, has_floor, win_tol, ramp_tol, tie_rtol):
    M = radix.size
    total = int(np.prod(radix))
    objs = np.full(total, -np.inf)
    max_ramp = -1.0
    win_lo, win_hi = np.inf, -np.inf
    cols = np.arange(M)
    avail_full = seg_cap - eps
    for start in range(0, total, CHUNK):
        flat = np.arange(start, min(total, start + CHUNK))
        k = _unravel(flat, radix)
        n = k.sum(axis=1)
        ramp = rr_table[cols, k].sum(axis=1)
        capsum = cap_prefix[cols, k].sum(axis=1)
        ok = prefix_ok[cols, k].all(axis=1)
        lo = n * eps
        demand_ok = ok & (lo <= demand + win_tol) & (demand <= capsum + win_tol)
        ramp_ok = ok & (ramp >= floor - ramp_tol) if has_floor else ok
        if demand_ok.any():
            max_ramp = max(max_ramp, float(ramp[demand_ok].max()))
        if ramp_ok.any():
            win_lo = min(win_lo, float(lo[ramp_ok].min()))
            win_hi = max(win_hi, float(capsum[ramp_ok].max()))
        both = demand_ok & ramp_ok
        if not both.any():
            continue
        kb = k[both]
        mask = seg_index[None, :] <= kb[:, seg_owner]
        avail = np.clip(avail_full, 0.0, None) * mask
        rem = np.clip(demand - n[both] * eps, 0.0, None)
        before = np.cumsum(avail, axis=1) - avail
        take = np.clip(rem[:, None] - before, 0.0, avail)
        objs[flat[both]] = (seg_price * (eps * mask + take)).sum(axis=1)
    best = objs.max() if total else -np.inf
    pick = -1
    if best > -np.inf:
        cut = best - tie_rtol * max(1.0, abs(best))
        pick = int(np.argmax(objs >= cut))
    return pick, best, max_ramp, win_lo, win_hi


def enumerate_prefixes(packed: PackedHour, demand: float, eps: float, floor: float | None,
                       win_tol: float = 1e-9, ramp_tol: float = 1e-9, tie_rtol: float = 1e-10,
                       use_numba: bool | None = None) -> EnumResult:
    """Exhaustive search over every per-microgrid prefix vector.

    Among vectors whose objective is within ``tie_rtol`` of the best, the
    lexicographically smallest wins.
    """
    if use_numba is None:
        use_numba = _accel.USE_NUMBA
    fn = _enumerate_nb if use_numba else _enumerate_np
    has_floor = floor is not None
    p = packed
    pick, best, max_ramp, win_lo, win_hi = fn(
        p.radix, p.rr_table, p.cap_prefix, p.prefix_ok, p.seg_price, p.seg_cap, p.seg_owner,
        p.seg_index, float(demand), float(eps), float(floor) if has_floor else 0.0, has_floor,
        float(win_tol), float(ramp_tol), float(tie_rtol),
    )
    combos = int(np.prod(p.radix))
    if pick < 0:
        prefix = np.zeros(p.radix.size, dtype=np.int64)
    else:
        prefix = _unravel(np.array([pick]), p.radix)[0]
    return EnumResult(pick >= 0, prefix, float(best), combos, float(max_ramp), float(win_lo), float(win_hi))
