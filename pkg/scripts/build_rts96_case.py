"""Build src/mtrisk/data/rts96.json from MATPOWER case files.

Usage:
    python3 scripts/build_rts96_case.py RTS_GMLC.m case24_ieee_rts.m [out.json]

Topology, reactances, ratings and bus loads come from the three-area
RTS_GMLC case (branch ids follow its branch order). Generating units come
from case24_ieee_rts, aggregated per bus and copied into each area
(bus n -> 100*area + n). The base dispatch stays closest to the scaled
unit outputs among dispatches whose peak branch loading is within 0.02 of
the lowest achievable.
"""

from __future__ import annotations

import json
import re
import sys
from collections import defaultdict
from pathlib import Path

import numpy as np
from scipy.optimize import linprog

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from mtrisk.grid_model import build_admittance, pseudo_inverse  # noqa: E402
from mtrisk.io import case_from_dict  # noqa: E402

HOURS_PER_YEAR = 8760.0
LINE_RATE_PER_YR_PER_PU_X = 4.0
TRANSFORMER_RATE_PER_YR = 0.02

# MW/min by unit rating, approximating the RTS-96 unit-type ramp table
RAMP_BY_PMAX = {12: 1.0, 20: 3.0, 50: 3.0, 76: 2.0, 100: 7.0, 155: 3.0, 197: 3.0, 350: 4.0, 400: 20.0}


def matrix(text: str, name: str) -> np.ndarray:
    m = re.search(rf"mpc\.{name}\s*=\s*\[(.*?)\];", text, re.S)
    if m is None:
        raise ValueError(f"no mpc.{name} block")
    rows = []
    for line in m.group(1).splitlines():
        line = line.split("%")[0].strip().rstrip(";")
        if line:
            rows.append([float(v) for v in line.split()])
    return np.array(rows)


def units_by_bus(gen: np.ndarray) -> dict[int, dict]:
    agg: dict[int, dict] = defaultdict(lambda: {"p": 0.0, "pmin": 0.0, "pmax": 0.0, "ramp": 0.0})
    for row in gen:
        bus, pg, pmax, pmin = int(row[0]), row[1], row[8], row[9]
        a = agg[bus]
        a["p"] += pg
        a["pmin"] += pmin
        a["pmax"] += pmax
        a["ramp"] += RAMP_BY_PMAX.get(int(round(pmax)), 0.0)
    return dict(agg)


def base_dispatch(doc: dict, slack: float = 0.02) -> list[float]:
    """Dispatch with the lowest peak branch loading, then closest to the scaled unit outputs.

    Stage one minimises the largest |flow| / rating; stage two keeps every
    loading within ``slack`` of that optimum and minimises the total
    deviation from the case outputs scaled to the total load.
    """
    case = case_from_dict(doc)
    on = np.ones(case.n_branch, dtype=bool)
    Z = pseudo_inverse(build_admittance(case, on))
    H = case.susceptance[:, None] * (Z[case.f_idx, :] - Z[case.t_idx, :])
    ng, nb = len(case.generators), case.n_branch
    load = np.zeros(case.n_bus)
    np.add.at(load, case.load_bus, case.load_p)
    Hg = H[:, case.gen_bus] / case.rating[:, None]
    base = -(H @ load) / case.rating
    total = case.load_p.sum()
    gen_bounds = [(lo, hi) for lo, hi in zip(case.gen_pmin, case.gen_pmax)]

    # stage one, x = [P, t]
    c = np.concatenate([np.zeros(ng), [1.0]])
    A_ub = np.vstack([np.hstack([Hg, -np.ones((nb, 1))]), np.hstack([-Hg, -np.ones((nb, 1))])])
    b_ub = np.concatenate([-base, base])
    A_eq = np.concatenate([np.ones(ng), [0.0]])[None, :]
    res = linprog(c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=[total],
                  bounds=gen_bounds + [(0, None)], method="highs")
    if res.status != 0:
        raise RuntimeError(f"peak-loading dispatch failed: {res.message}")
    peak = res.x[-1] + slack

    # stage two, x = [P, dev+, dev-]
    target = case.gen_p * total / case.gen_p.sum()
    c = np.concatenate([np.zeros(ng), np.ones(2 * ng)])
    A_eq = np.vstack([
        np.concatenate([np.ones(ng), np.zeros(2 * ng)])[None, :],
        np.hstack([np.eye(ng), -np.eye(ng), np.eye(ng)]),
    ])
    b_eq = np.concatenate([[total], target])
    pad = np.zeros((nb, 2 * ng))
    A_ub = np.vstack([np.hstack([Hg, pad]), np.hstack([-Hg, pad])])
    b_ub = np.concatenate([peak - base, peak + base])
    res = linprog(c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq,
                  bounds=gen_bounds + [(0, None)] * (2 * ng), method="highs")
    if res.status != 0:
        raise RuntimeError(f"base dispatch failed: {res.message}")
    p = res.x[:ng]
    # absorb solver round-off so generation matches load exactly
    p[int(np.argmax(p))] += total - p.sum()
    return [float(v) for v in p]


def build(gmlc_path: str, rts24_path: str) -> dict:
    gmlc = Path(gmlc_path).read_text()
    rts24 = Path(rts24_path).read_text()
    bus = matrix(gmlc, "bus")
    branch = matrix(gmlc, "branch")
    units = units_by_bus(matrix(rts24, "gen"))

    buses = [int(b) for b in bus[:, 0]]
    loads = [{"bus": int(b[0]), "p_mw": float(b[2])} for b in bus if b[2] > 0]
    branches = []
    for k, row in enumerate(branch, start=1):
        is_xfmr = row[8] != 0
        rate = TRANSFORMER_RATE_PER_YR if is_xfmr else LINE_RATE_PER_YR_PER_PU_X * row[3]
        branches.append({"id": k, "from": int(row[0]), "to": int(row[1]), "x_pu": float(row[3]),
                         "rating_mw": float(row[5]), "lambda0_per_hr": rate / HOURS_PER_YEAR})
    generators = []
    for area in (1, 2, 3):
        for n in sorted(units):
            u = units[n]
            generators.append({"bus": 100 * area + n, "p_mw": u["p"], "pmin_mw": u["pmin"],
                               "pmax_mw": u["pmax"], "ramp_mw_per_min": u["ramp"]})
    # synchronous condensers carry no active power: give them a zero window
    for g in generators:
        g["pmin_mw"] = min(g["pmin_mw"], g["p_mw"])
    doc = {"name": "rts96", "base_mva": 100.0, "buses": [{"id": b} for b in buses],
           "branches": branches, "generators": generators, "loads": loads}
    for g, p in zip(generators, base_dispatch(doc)):
        g["p_mw"] = p
    return doc


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    if len(argv) < 2:
        print(__doc__)
        return 1
    out = Path(argv[2]) if len(argv) > 2 else (
        Path(__file__).resolve().parents[1] / "src" / "mtrisk" / "data" / "rts96.json")
    doc = build(argv[0], argv[1])
    out.write_text(json.dumps(doc, indent=1) + "\n")
    print(f"wrote {out}: {len(doc['buses'])} buses, {len(doc['branches'])} branches, "
          f"{len(doc['generators'])} generators, {len(doc['loads'])} loads")
    return 0


if __name__ == "__main__":
    sys.exit(main())
