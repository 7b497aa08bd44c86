"""Case and config files (JSON) and result bundles (JSON + CSV)."""

from __future__ import annotations

import csv
import json
from importlib import resources
from pathlib import Path

from .case import Branch, Generator, Load, NetworkCase
from .config import AssessmentConfig
from .errors import ContractViolation, MalformedCaseError
from .mt_search import AssessmentResult

TOP_KEYS = {"base_mva", "buses", "branches", "generators", "loads", "load_curve", "name"}
REQUIRED_KEYS = {"buses", "branches", "generators", "loads"}
BRANCH_KEYS = {"id", "from", "to", "x_pu", "rating_mw", "lambda0_per_hr"}
GEN_KEYS = {"bus", "p_mw", "pmin_mw", "pmax_mw", "ramp_mw_per_min"}
LOAD_KEYS = {"bus", "p_mw"}


def bundled_case_path(name: str) -> Path:
    """Path of a case shipped with the package (``four_node`` or ``rts96``)."""
    return Path(str(resources.files("mtrisk") / "data" / f"{name}.json"))


def _records(doc: dict, key: str, fields: set[str]) -> list[dict]:
    items = doc.get(key, [])
    if not isinstance(items, list):
        raise MalformedCaseError(key, "expected a list")
    for k, item in enumerate(items):
        if not isinstance(item, dict):
            raise MalformedCaseError(f"{key}[{k}]", "expected an object")
        extra = sorted(set(item) - fields)
        if extra:
            raise MalformedCaseError(f"{key}[{k}].{extra[0]}", "unknown key")
        missing = sorted(fields - set(item))
        if missing:
            raise MalformedCaseError(f"{key}[{k}].{missing[0]}", "missing key")
    return items


def case_from_dict(doc: dict) -> NetworkCase:
    if not isinstance(doc, dict):
        raise MalformedCaseError("$", "expected an object at top level")
    extra = sorted(set(doc) - TOP_KEYS)
    if extra:
        raise MalformedCaseError(extra[0], "unknown key")
    missing = sorted(REQUIRED_KEYS - set(doc))
    if missing:
        raise MalformedCaseError(missing[0], "missing key")
    buses = _records(doc, "buses", {"id"})
    branches = _records(doc, "branches", BRANCH_KEYS)
    gens = _records(doc, "generators", GEN_KEYS)
    loads = _records(doc, "loads", LOAD_KEYS)
    try:
        return NetworkCase(
            buses=[int(b["id"]) for b in buses],
            branches=[Branch(int(b["id"]), int(b["from"]), int(b["to"]), float(b["x_pu"]),
                             float(b["rating_mw"]), float(b["lambda0_per_hr"])) for b in branches],
            generators=[Generator(int(g["bus"]), float(g["p_mw"]), float(g["pmin_mw"]),
                                  float(g["pmax_mw"]), float(g["ramp_mw_per_min"])) for g in gens],
            loads=[Load(int(ld["bus"]), float(ld["p_mw"])) for ld in loads],
            base_mva=float(doc.get("base_mva", 100.0)),
            load_curve=[(float(t), float(m)) for t, m in doc.get("load_curve", [])],
            name=str(doc.get("name", "")),
        )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, MalformedCaseError):
            raise
        raise MalformedCaseError("$", str(exc)) from None


def case_to_dict(case: NetworkCase) -> dict:
    doc = {
        "base_mva": case.base_mva,
        "buses": [{"id": b} for b in case.buses],
        "branches": [{"id": b.id, "from": b.from_bus, "to": b.to_bus, "x_pu": b.x_pu,
                      "rating_mw": b.rating_mw, "lambda0_per_hr": b.lambda0_per_hr}
                     for b in case.branches],
        "generators": [{"bus": g.bus, "p_mw": g.p_mw, "pmin_mw": g.pmin_mw, "pmax_mw": g.pmax_mw,
                        "ramp_mw_per_min": g.ramp_mw_per_min} for g in case.generators],
        "loads": [{"bus": ld.bus, "p_mw": ld.p_mw} for ld in case.loads],
    }
    if case.load_curve:
        doc["load_curve"] = [list(k) for k in case.load_curve]
    if case.name:
        doc["name"] = case.name
    return doc


def load_case(path) -> NetworkCase:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise MalformedCaseError(f"{path}:{exc.lineno}:{exc.colno}", exc.msg) from None
    return case_from_dict(doc)


def save_case(case: NetworkCase, path) -> None:
    Path(path).write_text(json.dumps(case_to_dict(case), indent=1) + "\n")


def load_config(path) -> AssessmentConfig:
    doc = json.loads(Path(path).read_text())
    if not isinstance(doc, dict):
        raise ContractViolation("config file must hold an object")
    return AssessmentConfig.from_dict(doc)


def write_bundle(out_dir, result: AssessmentResult, config: AssessmentConfig,
                 initial_outages, extra: dict | None = None) -> Path:
    """Write summary.json, risk_curve.csv and top_paths.csv into ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    summary = {
        "risk": result.risk,
        "c0": result.c0,
        "coverage": result.coverage,
        "attempts": result.attempts,
        "converged": result.converged,
        "exhausted": result.exhausted,
        "states": result.n_states,
        "simulate_calls": result.simulate_calls,
        "seed": config.seed,
        "initial_outages": list(initial_outages),
        "wall_clock_s": result.wall_clock,
        "config": config.to_dict(),
    }
    if extra:
        summary.update(extra)
    (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    with open(out / "risk_curve.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["attempt", "risk", "coverage"])
        for j, (r, c) in enumerate(zip(result.risk_trace, result.coverage_trace), start=1):
            w.writerow([j, repr(float(r)), repr(float(c))])
    with open(out / "top_paths.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["state_key", "path_probability", "cost_contribution"])
        for key, p, contrib in result.top_paths:
            w.writerow([format_key(key), repr(float(p)), repr(float(contrib))])
    return out


def format_key(key) -> str:
    return "-".join(str(k) for k in key) if key else "root"

