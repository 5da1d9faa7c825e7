"""Scenario files (JSON) and report files (JSON + CSV)."""
from __future__ import annotations

import csv
import json
import math
import os
from pathlib import Path

import jsonschema

from .bids import BidSegment, DgUnit, MicrogridBid, build_bid_from_fleet
from .scenario import CaseComparison, CaseReport, Scenario
from .solver import DEFAULT_EPSILON

SCHEMA_VERSION = 1

_NUM = {"type": "number"}
_NONNEG = {"type": "number", "minimum": 0}
_PROFILE = {"type": "array", "items": _NONNEG}

SCENARIO_SCHEMA = {
    "type": "object",
    "required": ["schema_version", "horizon", "microgrids", "award", "ramp_floor"],
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "horizon": {"type": "integer", "minimum": 1},
        "microgrids": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "required": ["name", "fixed_load"],
                "properties": {
                    "name": {"type": "string", "minLength": 1},
                    "fixed_load": _PROFILE,
                    "dg_units": {
                        "type": "array",
                        "minItems": 1,
                        "items": {
                            "type": "object",
                            "required": ["cost", "capacity", "ramp"],
                            "properties": {"cost": _NONNEG, "capacity": _NONNEG, "ramp": _NONNEG},
                            "additionalProperties": False,
                        },
                    },
                    "segments": {
                        "type": "array",
                        "minItems": 1,
                        "items": {
                            "type": "object",
                            "required": ["price", "max_quantity", "ramp_rate"],
                            "properties": {"price": _NONNEG, "max_quantity": _NONNEG, "ramp_rate": _NONNEG},
                            "additionalProperties": False,
                        },
                    },
                },
                "oneOf": [{"required": ["dg_units"]}, {"required": ["segments"]}],
                "additionalProperties": False,
            },
        },
        "award": _PROFILE,
        "ramp_floor": {"oneOf": [_NONNEG, _PROFILE]},
        "epsilon": {"type": "number", "exclusiveMinimum": 0},
        "big_m": _NUM,
        "synthetic": {"type": "object"},
    },
    "additionalProperties": False,
}


class ScenarioError(ValueError):
    pass


def _where(err: jsonschema.ValidationError) -> str:
    return "/".join(str(p) for p in err.absolute_path) or "<root>"


def scenario_from_dict(data: dict) -> Scenario:
    errors = sorted(jsonschema.Draft202012Validator(SCENARIO_SCHEMA).iter_errors(data),
                    key=lambda e: list(map(str, e.absolute_path)))
    if errors:
        raise ScenarioError("; ".join(f"{_where(e)}: {e.message}" for e in errors))
    horizon = data["horizon"]
    problems = []
    if len(data["award"]) != horizon:
        problems.append(f"award: length {len(data['award'])} != horizon {horizon}")
    if isinstance(data["ramp_floor"], list) and len(data["ramp_floor"]) != horizon:
        problems.append(f"ramp_floor: length {len(data['ramp_floor'])} != horizon {horizon}")
    bids = []
    for m, mg in enumerate(data["microgrids"]):
        if len(mg["fixed_load"]) != horizon:
            problems.append(f"microgrids/{m}/fixed_load: length {len(mg['fixed_load'])} != horizon {horizon}")
            continue
        try:
            if "dg_units" in mg:
                fleet = [DgUnit(u["cost"], u["capacity"], u["ramp"]) for u in mg["dg_units"]]
                bids.append(build_bid_from_fleet(fleet, mg["fixed_load"], m, mg["name"]))
            else:
                segs = tuple(BidSegment(float(s["price"]), float(s["max_quantity"]), float(s["ramp_rate"]))
                             for s in mg["segments"])
                if any(not s.max_quantity > 0 for s in segs):
                    raise ValueError("max_quantity must be positive")
                bids.append(MicrogridBid(m, mg["fixed_load"], segs, mg["name"]))
        except ValueError as exc:
            problems.append(f"microgrids/{m}: {exc}")
    if problems:
        raise ScenarioError("; ".join(problems))
    try:
        return Scenario(
            horizon=horizon,
            microgrids=tuple(bids),
            award=data["award"],
            ramp_floor=data["ramp_floor"],
            epsilon=data.get("epsilon", DEFAULT_EPSILON),
            big_m=data.get("big_m"),
        )
    except ValueError as exc:
        raise ScenarioError(str(exc)) from exc


def parse_scenario(path) -> Scenario:
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ScenarioError(f"{path}: not valid JSON ({exc})") from exc
    return scenario_from_dict(data)


def _bid_entry(mg: MicrogridBid, fleet) -> dict:
    entry = {"name": mg.name, "fixed_load": list(mg.fixed_load)}
    if fleet is not None:
        entry["dg_units"] = [{"cost": u.marginal_cost, "capacity": u.capacity, "ramp": u.ramp_rate}
                             for u in fleet]
    else:
        entry["segments"] = [{"price": s.price, "max_quantity": s.max_quantity, "ramp_rate": s.ramp_rate}
                             for s in mg.segments]
    return entry


def scenario_to_dict(scenario: Scenario, fleets: dict | None = None, **extra) -> dict:
    """Inverse of ``scenario_from_dict``.

    Bids are written as segments unless ``fleets`` maps the microgrid name
    to the DG units it was built from.
    """
    fleets = fleets or {}
    floor = scenario.ramp_floor
    out = {
        "schema_version": SCHEMA_VERSION,
        "horizon": scenario.horizon,
        "microgrids": [_bid_entry(mg, fleets.get(mg.name)) for mg in scenario.microgrids],
        "award": list(scenario.award),
        "ramp_floor": floor[0] if len(set(floor)) == 1 else list(floor),
        "epsilon": scenario.epsilon,
    }
    if scenario.big_m is not None:
        out["big_m"] = scenario.big_m
    out.update(extra)
    return out


def write_scenario(scenario: Scenario, path, fleets: dict | None = None, **extra):
    with open(path, "w") as fh:
        json.dump(scenario_to_dict(scenario, fleets, **extra), fh, indent=2)
        fh.write("\n")


def _fmt(x) -> str:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    return f"{x:.6f}"


def _num(x):
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return None
    return float(f"{x:.6f}")


def _case_summary(case: CaseReport | None):
    if case is None:
        return None
    return {
        "objective": _num(case.objective_total),
        "min_total_ramp": _num(case.min_total_ramp),
        "infeasible_hours": [
            {
                "hour": t + 1,
                "reason": r.reason,
                "responsive_demand": _num(r.responsive_demand),
                "max_total_ramp": _num(r.max_total_ramp),
                "demand_window": None if r.demand_window is None else [_num(v) for v in r.demand_window],
            }
            for t, r in case.infeasible_hours
        ],
    }


def emit_reports(comparison: CaseComparison, out_dir) -> list[Path]:
    """Write summary.json, ramp_profile.csv and awards.csv; hours are 1-based.

    Cells for a case that was not run, or an hour that was infeasible, are empty.
    """
    out = Path(out_dir)
    os.makedirs(out, exist_ok=True)
    c1, c2 = comparison.case1, comparison.case2
    ref = c1 if c1 is not None else c2
    summary = {
        "case1": _case_summary(c1),
        "case2": _case_summary(c2),
        "objective_delta": _num(comparison.objective_delta),
        "relative_gap": _num(comparison.relative_gap),
        "awards_conserved": comparison.awards_conserved,
        "max_award_residual": _num(max(comparison.award_residual)),
    }
    paths = [out / "summary.json", out / "ramp_profile.csv", out / "awards.csv"]
    with open(paths[0], "w") as fh:
        json.dump(summary, fh, indent=2)
        fh.write("\n")

    def col(case, attr, t):
        return "" if case is None else _fmt(getattr(case, attr)[t])

    with open(paths[1], "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["hour", "case1_total_ramp", "case2_total_ramp", "floor"])
        for t in range(len(ref.award)):
            w.writerow([t + 1, col(c1, "hourly_total_ramp", t), col(c2, "hourly_total_ramp", t),
                        _fmt(comparison.ramp_floor[t])])
    with open(paths[2], "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["hour", "microgrid", "case1_award", "case2_award"])
        for t in range(len(ref.award)):
            for m, name in enumerate(ref.names):
                w.writerow([t + 1, name,
                            "" if c1 is None else _fmt(c1.awards[t][m]),
                            "" if c2 is None else _fmt(c2.awards[t][m])])
    return paths
