"""Command-line entry point: ``dmo-ramp run|validate|generate``."""
from __future__ import annotations

import argparse
import sys

from . import fileio
from .bids import table_i_fleets, validate_bid
from .scenario import DEFAULT_SEED, compare_cases, run_case, table_i_scenario, with_floor, with_profiles
from .solver import feasibility_check

EXIT_OK, EXIT_USAGE, EXIT_INFEASIBLE, EXIT_IO = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _load(args):
    scenario = fileio.parse_scenario(args.scenario)
    if getattr(args, "seed", None) is not None:
        scenario = with_profiles(scenario, args.seed)
    if getattr(args, "delta", None) is not None:
        scenario = with_floor(scenario, args.delta)
    return scenario


def cmd_run(args) -> int:
    scenario = _load(args)
    case1 = run_case(scenario, False, args.solver) if args.case in ("1", "both") else None
    case2 = run_case(scenario, True, args.solver) if args.case in ("2", "both") else None
    comparison = compare_cases(case1, case2)
    fileio.emit_reports(comparison, args.out)
    for case in (case1, case2):
        if case is None:
            continue
        print(f"{case.case_label}: objective {case.objective_total:.2f} $, "
              f"min total ramp {case.min_total_ramp:.3f} MW/h, "
              f"{len(case.infeasible_hours)} infeasible hour(s)")
        for t, r in case.infeasible_hours:
            print(f"  hour {t + 1}: {r.reason}")
    if comparison.objective_delta is not None:
        print(f"case1 - case2: {comparison.objective_delta:.2f} $ ({100 * comparison.relative_gap:.3f} %)")
    print(f"reports written to {args.out}")
    if any(c is not None and c.all_infeasible for c in (case1, case2)):
        return EXIT_INFEASIBLE
    return EXIT_OK


def cmd_validate(args) -> int:
    scenario = _load(args)
    bad = False
    for mg in scenario.microgrids:
        for issue in validate_bid(mg):
            print(f"{mg.name}: {issue}")
            bad = True
    if bad:
        return EXIT_USAGE
    flagged = 0
    for t in range(scenario.horizon):
        report = feasibility_check(scenario.hour_problem(t, True))
        for issue in report.issues:
            print(f"hour {t + 1}: {issue}")
        flagged += not report.ok
    print(f"{len(scenario.microgrids)} microgrids, {scenario.horizon} hours, "
          f"{flagged} hour(s) failing the pre-screen")
    return EXIT_INFEASIBLE if flagged == scenario.horizon else EXIT_OK


def cmd_generate(args) -> int:
    scenario = table_i_scenario(seed=args.seed, ramp_floor=args.delta, horizon=args.horizon)
    fileio.write_scenario(scenario, args.out, fleets=table_i_fleets(),
                          synthetic={"generator": "table_i", "seed": args.seed})
    print(f"wrote {args.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="dmo-ramp", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", help="solve case 1 and/or case 2 and write reports")
    run.add_argument("--scenario", required=True)
    run.add_argument("--case", choices=["1", "2", "both"], default="both")
    run.add_argument("--delta", type=float, help="override the ramp floor (MW/h) for every hour")
    run.add_argument("--out", default="out")
    run.add_argument("--solver", choices=["bnb", "enum"], default="bnb")
    run.add_argument("--seed", type=int, help="replace load profiles with synthetic ones from this seed")
    run.set_defaults(func=cmd_run)

    val = sub.add_parser("validate", help="parse, check bids and pre-screen every hour")
    val.add_argument("--scenario", required=True)
    val.add_argument("--delta", type=float)
    val.set_defaults(func=cmd_validate)

    gen = sub.add_parser("generate", help="write the Table I scenario with synthetic profiles")
    gen.add_argument("--out", required=True)
    gen.add_argument("--seed", type=int, default=DEFAULT_SEED)
    gen.add_argument("--delta", type=float, default=12.5)
    gen.add_argument("--horizon", type=int, default=24)
    gen.set_defaults(func=cmd_generate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except fileio.ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
