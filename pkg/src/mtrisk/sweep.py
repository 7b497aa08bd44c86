"""Parameter sweeps over repeated assessments."""

from __future__ import annotations

import csv
import statistics
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .case import NetworkCase
from .config import AssessmentConfig
from .errors import ContractViolation, EnumerationCapExceeded
from .mt_search import TreeSearch, convergence_metric, enumerate_all

PARAMS = {"trust-lambda": "trust_lambda", "tau-d": "tau_d", "delay": "delay"}


@dataclass
class SweepRow:
    param: str
    value: float
    repeat: int
    seed: int
    risk: float
    attempts: int
    attempts_to_convergence: int | None
    phi: float
    converged: bool
    error: str = ""


def attempts_to_reach(trace: Sequence[float], target: float, eta: float) -> int | None:
    """First 1-based attempt whose risk is within ``eta`` (relative) of ``target``."""
    if target <= 0:
        return 1 if len(trace) else None
    for j, r in enumerate(trace, start=1):
        if r >= (1.0 - eta) * target:
            return j
    return None


def reference_risk(case: NetworkCase, config: AssessmentConfig, initial: Iterable[int]) -> float | None:
    try:
        return enumerate_all(case, config, initial).risk
    except EnumerationCapExceeded:
        return None


def run_sweep(case: NetworkCase, config: AssessmentConfig, param: str, values: Iterable[float],
              repeats: int = 1, initial_outages: Iterable[int] = (),
              mode: str = "search") -> list[SweepRow]:
    """Run ``repeats`` assessments per value (seeds ``config.seed + r``).

    ``mode="search"`` runs the tree search with the budget in ``config.attempts``
    and scores it against the enumerated risk when that is affordable;
    ``mode="enumerate"`` reports the exact risk only.
    """
    if param not in PARAMS:
        raise ContractViolation(f"unknown sweep parameter {param!r}; choose from {sorted(PARAMS)}")
    if mode not in ("search", "enumerate"):
        raise ContractViolation(f"unknown sweep mode {mode!r}")
    initial = list(initial_outages)
    rows: list[SweepRow] = []
    for value in values:
        cfg = config.with_(**{PARAMS[param]: float(value)})
        ref = reference_risk(case, cfg, initial) if mode == "search" else None
        for r in range(repeats if mode == "search" else 1):
            seed = config.seed + r
            cfg_r = cfg.with_(seed=seed)
            try:
                if mode == "enumerate":
                    res = enumerate_all(case, cfg_r, initial)
                    rows.append(SweepRow(param, float(value), r, seed, res.risk, res.n_paths,
                                         None, 0.0, True))
                    continue
                out = TreeSearch(case, cfg_r, initial).run()
                trace = out.risk_trace
                target = ref if ref is not None else out.risk
                n_s = max(cfg_r.attempts, trace.size)
                padded = np.concatenate([trace, np.full(n_s - trace.size, out.risk)])
                rows.append(SweepRow(param, float(value), r, seed, out.risk, out.attempts,
                                     attempts_to_reach(trace, target, cfg_r.eta),
                                     convergence_metric(padded, n_s), out.converged))
            except Exception as exc:  # recorded per row, sweep carries on
                rows.append(SweepRow(param, float(value), r, seed, float("nan"), 0, None,
                                     float("nan"), False, f"{type(exc).__name__}: {exc}"))
    return rows


def summarize(rows: list[SweepRow]) -> list[dict]:
    """Mean and stdev of risk, attempts-to-convergence and phi per swept value."""
    out = []
    for value in sorted({r.value for r in rows}):
        group = [r for r in rows if r.value == value and not r.error]
        def stats(xs):
            xs = [x for x in xs if x is not None]
            if not xs:
                return float("nan"), float("nan")
            return statistics.fmean(xs), (statistics.stdev(xs) if len(xs) > 1 else 0.0)
        risk_m, risk_s = stats([r.risk for r in group])
        att_m, att_s = stats([r.attempts_to_convergence for r in group])
        phi_m, phi_s = stats([r.phi for r in group])
        out.append({"value": value, "runs": len(group), "risk_mean": risk_m, "risk_std": risk_s,
                    "attempts_mean": att_m, "attempts_std": att_s, "phi_mean": phi_m, "phi_std": phi_s})
    return out


def write_sweep(out_dir, rows: list[SweepRow]) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "sweep_runs.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["param", "value", "repeat", "seed", "risk", "attempts",
                    "attempts_to_convergence", "phi", "converged", "error"])
        for r in rows:
            w.writerow([r.param, r.value, r.repeat, r.seed, repr(r.risk), r.attempts,
                        "" if r.attempts_to_convergence is None else r.attempts_to_convergence,
                        repr(r.phi), r.converged, r.error])
    summary = summarize(rows)
    with open(out / "sweep_summary.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(summary[0]) if summary else ["value"])
        w.writeheader()
        w.writerows(summary)
    return out
