"""Plain Monte-Carlo estimate of the same risk, for cross-checking the tree search.

Each sample runs the simulator over ``k_d * n_tau`` short sub-intervals and
lets every in-service branch fail independently in each one, so several
outages may land in the same sub-interval.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .case import NetworkCase
from .cascade_sim import branch_rates, make_root, simulate_transition
from .config import AssessmentConfig
from .errors import ContractViolation


@dataclass(frozen=True)
class McEstimate:
    mean: float
    stderr: float      # nan when n == 1
    n: int
    wall_clock: float


def sample_interval_outages(rates, tau_hours: float, rng: np.random.Generator) -> np.ndarray:
    """Boolean mask of branches failing in one interval, each with 1 - exp(-rate * tau)."""
    rates = np.asarray(rates, dtype=float)
    if np.any(rates < 0):
        raise ContractViolation("rates must be non-negative")
    p = -np.expm1(-rates * tau_hours)
    return rng.random(rates.size) < p


def sample_path_cost(case: NetworkCase, root_state, c0: float, config: AssessmentConfig,
                     rng: np.random.Generator) -> float:
    sub = config.tau_d / config.n_tau
    steps = config.k_d * config.n_tau
    state = root_state
    total = c0
    for _ in range(steps):
        rates = branch_rates(case, state, config)
        failed = sample_interval_outages(rates, sub / 60.0, rng)
        event = tuple(int(i) for i in case.branch_ids[failed])
        out = simulate_transition(case, state, event, config, dt=sub)
        total += out.cost
        state = out.state
        if out.terminal:
            break
    return total


def mc_risk(case: NetworkCase, config: AssessmentConfig, initial_outages: Iterable[int] = (),
            n: int = 10_000, seed: int | None = None) -> McEstimate:
    """Sample mean of the total cascade cost over ``n`` independent trajectories."""
    if n < 1:
        raise ContractViolation("need at least one sample")
    t0 = time.perf_counter()
    rng = np.random.default_rng(config.seed if seed is None else seed)
    root = make_root(case, initial_outages, config)
    costs = np.empty(n)
    for s in range(n):
        if root.terminal:
            costs[s] = root.cost
        else:
            costs[s] = sample_path_cost(case, root.state, root.cost, config, rng)
    mean = float(costs.mean())
    stderr = float(costs.std(ddof=1) / math.sqrt(n)) if n > 1 else float("nan")
    return McEstimate(mean=mean, stderr=stderr, n=n, wall_clock=time.perf_counter() - t0)
