"""Command-line entry point: ``mtrisk {assess,enumerate,mc,sweep}``."""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path

from .config import AssessmentConfig
from .errors import ContractViolation, EnumerationCapExceeded, MalformedCaseError
from .io import bundled_case_path, format_key, load_case, load_config, write_bundle
from .mc_baseline import mc_risk
from .mt_search import TreeSearch, enumerate_all
from .sweep import PARAMS, run_sweep, write_sweep

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_BUDGET = 2


def _ids(text: str | None) -> list[int]:
    if not text:
        return []
    return [int(t) for t in text.split(",") if t.strip()]


def _floats(text: str) -> list[float]:
    return [float(t) for t in text.split(",") if t.strip()]


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mtrisk", description="Cascading-outage risk assessment.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, seed=True):
        sp.add_argument("--case", required=True,
                        help="case JSON file, or the name of a bundled case (four_node, rts96)")
        sp.add_argument("--config", help="config JSON file")
        sp.add_argument("--initial-outage", default="", help="comma-separated branch ids")
        sp.add_argument("--out", required=True, help="output directory")
        if seed:
            sp.add_argument("--seed", type=int)

    a = sub.add_parser("assess", help="index-guided tree search")
    common(a)
    a.add_argument("--attempts", type=int)

    e = sub.add_parser("enumerate", help="exact risk by full enumeration")
    common(e, seed=False)

    m = sub.add_parser("mc", help="Monte-Carlo estimate")
    common(m)
    m.add_argument("--n", type=int, default=10_000)

    s = sub.add_parser("sweep", help="repeat assessments over a parameter")
    common(s)
    s.add_argument("--attempts", type=int)
    s.add_argument("--param", required=True, choices=sorted(PARAMS))
    s.add_argument("--values", required=True, help="comma-separated values")
    s.add_argument("--repeats", type=int, default=1)
    s.add_argument("--mode", choices=["search", "enumerate"], default="search")
    return p


def _resolve_case(text: str):
    path = Path(text)
    if not path.exists() and not path.suffix:
        path = bundled_case_path(text)
    return load_case(path)


def _check_outages(case, ids):
    unknown = [i for i in ids if i not in case.branch_index]
    if unknown:
        raise ContractViolation(f"unknown initial-outage branch ids: {unknown}")


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        case = _resolve_case(args.case)
        config = load_config(args.config) if args.config else AssessmentConfig()
        changes = {}
        if getattr(args, "seed", None) is not None:
            changes["seed"] = args.seed
        if getattr(args, "attempts", None) is not None:
            changes["attempts"] = args.attempts
        config = config.with_(**changes)
        initial = _ids(args.initial_outage)
        _check_outages(case, initial)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT

    out = Path(args.out)
    if args.command == "assess":
        result = TreeSearch(case, config, initial).run()
        write_bundle(out, result, config, initial)
        print(f"risk {result.risk:.6g} MW  coverage {result.coverage:.4f}  "
              f"attempts {result.attempts}  converged {result.converged}")
        return EXIT_OK if result.converged else EXIT_BUDGET

    if args.command == "enumerate":
        try:
            res = enumerate_all(case, config, initial)
        except EnumerationCapExceeded as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_INPUT
        out.mkdir(parents=True, exist_ok=True)
        (out / "summary.json").write_text(json.dumps({
            "risk": res.risk, "c0": res.c0, "paths": res.n_paths, "states": res.n_states,
            "coverage": res.coverage, "initial_outages": initial, "config": config.to_dict(),
        }, indent=2) + "\n")
        with open(out / "paths.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["state_key", "path_probability", "path_cost"])
            for key, p, c in res.paths:
                w.writerow([format_key(key), repr(p), repr(c)])
        print(f"risk {res.risk:.6g} MW over {res.n_paths} paths")
        return EXIT_OK

    if args.command == "mc":
        est = mc_risk(case, config, initial, n=args.n)
        out.mkdir(parents=True, exist_ok=True)
        (out / "summary.json").write_text(json.dumps({
            "mean": est.mean, "stderr": None if math.isnan(est.stderr) else est.stderr,
            "n": est.n, "wall_clock_s": est.wall_clock, "seed": config.seed,
            "initial_outages": initial, "config": config.to_dict(),
        }, indent=2) + "\n")
        se = "n/a" if math.isnan(est.stderr) else f"{est.stderr:.3g}"
        print(f"mean {est.mean:.6g} MW  stderr {se}  n {est.n}")
        return EXIT_OK

    rows = run_sweep(case, config, args.param, _floats(args.values), args.repeats, initial, args.mode)
    write_sweep(out, rows)
    print(f"{len(rows)} runs written to {out}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
