"""Time the prefix-enumeration oracle: numba kernel vs. numpy fallback,
with branch and bound for reference.

    python benchmarks/bench_enumerate.py [--microgrids 7] [--segments 4] [--repeat 3]
"""
import argparse
import time

import numpy as np

from dmo_ramp import BidSegment, HourProblem, MicrogridBid, solve_hour_bnb
from dmo_ramp.kernels import enumerate_prefixes


def make_problem(n_mg, n_seg, seed):
    rng = np.random.default_rng(seed)
    bids = []
    for m in range(n_mg):
        prices = np.sort(rng.uniform(10, 80, n_seg))[::-1]
        segs = tuple(BidSegment(float(p), float(rng.uniform(1, 5)), float(rng.uniform(0.5, 3.5))) for p in prices)
        bids.append(MicrogridBid(m, (0.0,), segs))
    total = sum(b.total_capacity for b in bids)
    floor = 0.8 * sum(b.max_ramp for b in bids)
    return HourProblem(0.5 * total, bids, floor)


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--microgrids", type=int, default=7)
    ap.add_argument("--segments", type=int, default=4)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    p = make_problem(args.microgrids, args.segments, args.seed)
    packed = p.packed()
    run = lambda nb: enumerate_prefixes(packed, p.responsive_demand, p.epsilon, p.ramp_floor, use_numba=nb)
    run(True)  # compile
    t_nb, r_nb = best_of(lambda: run(True), args.repeat)
    t_np, r_np = best_of(lambda: run(False), args.repeat)
    t_bb, r_bb = best_of(lambda: solve_hour_bnb(p), args.repeat)
    print(f"{args.microgrids} microgrids x {args.segments} segments: {r_nb.combinations:,} prefix vectors")
    print(f"  numba kernel   {t_nb * 1e3:9.2f} ms  objective {r_nb.objective:.6f}")
    print(f"  numpy fallback {t_np * 1e3:9.2f} ms  objective {r_np.objective:.6f}")
    print(f"  branch&bound   {t_bb * 1e3:9.2f} ms  objective {r_bb.objective if r_bb.feasible else float('nan'):.6f}"
          f"  ({r_bb.nodes} nodes)")
    print(f"  speedup numba/numpy: {t_np / t_nb:.1f}x")


if __name__ == "__main__":
    main()
