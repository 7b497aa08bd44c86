"""Markovian-tree risk assessment by index-guided, non-duplicating search.

A node is keyed by the sequence of event labels from the root (0 for an
interval without outage). Each forward attempt walks from the root to a
terminal node, sampling children in proportion to ``rho ** trust_lambda``;
every node is simulated at most once and its ``probability * cost`` term is
added to the running risk the first time it is reached. The backward pass
then pushes terminal indices back up so explored regions lose weight.

On top of the index floor for terminals, subtrees that have been explored
completely are removed from sampling, so a small tree is exhausted in
exactly as many attempts as it has terminal paths.
"""

from __future__ import annotations

import math
import time
from collections import OrderedDict
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable

import numpy as np

from .case import NetworkCase
from .cascade_sim import (
    SystemState, TransitionOutcome, branch_rates, make_root, mt_outage_probabilities,
    simulate_transition,
)
from .config import AssessmentConfig
from .errors import ContractViolation, EnumerationCapExceeded
from .grid_model import GridMatrices
from .risk_estimator import CandidateIndices, candidate_indices, search_probabilities

StateKey = tuple[int, ...]


def path_count_formula(n: int, k_d: int) -> int:
    """Number of cascade paths over ``k_d`` intervals with ``n`` outage-able elements."""
    if n < 0 or k_d < 0:
        raise ContractViolation("need n >= 0 and k_d >= 0")
    f = math.factorial
    total = 0
    for i in range(k_d + 1):
        if n - k_d + i < 0:
            continue
        total += f(n) * f(k_d) // (f(n - k_d + i) * f(k_d - i) * f(i))
    return total


def convergence_metric(trace, n_s: int | None = None) -> float:
    """sum_j j * (R_N - R_j) over the first ``n_s`` entries of a risk trace (1-based j)."""
    r = np.asarray(trace, dtype=float)
    n_s = r.size if n_s is None else n_s
    if n_s > r.size:
        raise ContractViolation(f"trace has {r.size} entries, need {n_s}")
    r = r[:n_s]
    if n_s == 0:
        return 0.0
    j = np.arange(1, n_s + 1)
    return float(np.sum(j * (r[-1] - r)))


def check_convergence(risk_trace, coverage_now: float, config: AssessmentConfig,
                      start_risk: float = 0.0) -> bool:
    """Risk growth over the last ``window`` attempts below ``eta`` and coverage high enough.

    ``risk_trace[j-1]`` is the risk after attempt j; ``start_risk`` stands in
    for attempt 0.
    """
    n = len(risk_trace)
    w = config.window
    if n < w:
        return False
    r_now = risk_trace[-1]
    r_then = risk_trace[n - w - 1] if n > w else start_risk
    flat = True if r_now == 0 else (r_now - r_then) / r_now < config.eta
    return bool(flat and coverage_now >= config.p_cov)


@dataclass(eq=False)
class TreeNode:
    key: StateKey
    level: int
    state: SystemState
    path_prob: float
    cond_prob: float
    cost: float
    terminal: bool
    parent: "TreeNode | None" = None
    children: dict[int, "TreeNode"] = field(default_factory=dict)
    cand: CandidateIndices | None = None
    child_rho: np.ndarray | None = None   # working indices, refreshed by the backward pass
    rho: float = 0.0                      # own index as last computed
    open_children: int = 0
    exhausted: bool = False
    reported: bool = False                # exhaustion already passed to the parent

    @property
    def label(self) -> int:
        return self.key[-1] if self.key else 0


@dataclass
class AssessmentResult:
    risk: float
    c0: float
    risk_trace: np.ndarray
    coverage_trace: np.ndarray
    attempts: int
    converged: bool
    exhausted: bool
    n_states: int
    simulate_calls: int
    top_paths: list[tuple[StateKey, float, float]]
    wall_clock: float

    @property
    def coverage(self) -> float:
        return float(self.coverage_trace[-1]) if self.coverage_trace.size else 0.0


class TreeSearch:
    """One assessment: owns the state table, the rng and the running totals."""

    def __init__(self, case: NetworkCase, config: AssessmentConfig,
                 initial_outages: Iterable[int] = (),
                 simulator: Callable[..., TransitionOutcome] = simulate_transition):
        self.case = case
        self.config = config
        self.simulator = simulator
        self.rng = np.random.default_rng(config.seed)
        self.simulate_calls = 0
        self._resident: OrderedDict[StateKey, None] = OrderedDict()

        out = make_root(case, initial_outages, config)
        self.c0 = out.cost
        root = TreeNode(key=(), level=0, state=out.state, path_prob=1.0, cond_prob=1.0,
                        cost=out.cost, terminal=out.terminal)
        self.root = root
        self.table: dict[StateKey, TreeNode] = {(): root}
        self.risk = self.c0
        self.coverage = 0.0
        if root.terminal:
            root.exhausted = True
            self.coverage = 1.0
        self.risk_trace: list[float] = []
        self.coverage_trace: list[float] = []

    # -- matrices residency --------------------------------------------------

    def _state_with_matrices(self, node: TreeNode) -> SystemState:
        if node.state.matrices is None:
            grid = GridMatrices.build(self.case, node.state.in_service)
            node.state = replace(node.state, matrices=grid)
        self._touch(node)
        return node.state

    def _touch(self, node: TreeNode):
        cap = self.config.matrix_cache
        if cap <= 0 or node is self.root:
            return
        self._resident[node.key] = None
        self._resident.move_to_end(node.key)
        while len(self._resident) > cap:
            old, _ = self._resident.popitem(last=False)
            n = self.table[old]
            n.state = replace(n.state, matrices=None)

    # -- expansion -----------------------------------------------------------

    def expand(self, node: TreeNode) -> CandidateIndices:
        if node.cand is None:
            state = self._state_with_matrices(node)
            cand = candidate_indices(self.case, state, node.path_prob, self.config)
            node.cand = cand
            node.child_rho = cand.rho.copy()
            node.open_children = int(np.count_nonzero(cand.mt_prob > 0))
            if node.open_children == 0:
                node.exhausted = True
        return node.cand

    def _child(self, node: TreeNode, j: int) -> tuple[TreeNode, bool]:
        label = int(node.cand.labels[j])
        child = node.children.get(label)
        if child is not None:
            return child, False
        key = node.key + (label,)
        if key in self.table:
            raise ContractViolation(f"state {key} simulated twice")
        state = self._state_with_matrices(node)
        out = self.simulator(self.case, state, label, self.config)
        self.simulate_calls += 1
        cond = float(node.cand.mt_prob[j])
        child = TreeNode(key=key, level=node.level + 1, state=out.state,
                         path_prob=node.path_prob * cond, cond_prob=cond, cost=out.cost,
                         terminal=out.terminal or node.level + 1 >= self.config.k_d, parent=node)
        node.children[label] = child
        self.table[key] = child
        self.risk += child.path_prob * child.cost
        if child.terminal:
            child.state = replace(child.state, matrices=None)
            self.coverage += child.path_prob
        else:
            self._touch(child)
        return child, True

    # -- forward / backward ----------------------------------------------------

    def _selectable(self, node: TreeNode) -> np.ndarray:
        ok = node.cand.mt_prob > 0
        for child in node.children.values():
            if child.exhausted:
                ok[self._slot(node, child)] = False
        return ok

    def forward_search_attempt(self) -> list[TreeNode]:
        """Walk root to terminal, simulating unseen nodes on the way."""
        node = self.root
        path = [node]
        while not node.terminal:
            self.expand(node)
            ok = self._selectable(node)
            if not ok.any():
                break
            idx = np.flatnonzero(ok)
            probs = search_probabilities(node.child_rho[idx], self.config.trust_lambda)
            j = int(idx[self.rng.choice(idx.size, p=probs)])
            node, _ = self._child(node, j)
            path.append(node)
        return path

    def _slot(self, parent: TreeNode, child: TreeNode) -> int:
        label = child.label
        return 0 if label == 0 else int(np.searchsorted(parent.cand.labels[1:], label)) + 1

    def backward_update(self, path: list[TreeNode]):
        """Floor the terminal's index, then average child indices back to the root."""
        lam = self.config.trust_lambda
        end = path[-1]
        if end.terminal and end.parent is not None:
            parent = end.parent
            s = self._slot(parent, end)
            others = np.delete(parent.child_rho, s)
            ref = float(others.max()) if others.size and others.max() > 0 else float(parent.child_rho[s])
            parent.child_rho[s] = ref * math.exp(-self.config.eps_r_gap) if ref > 0 else 0.0
            end.rho = float(parent.child_rho[s])
        for node in reversed(path[:-1]):
            if node.cand is None:
                continue
            pr = search_probabilities(node.child_rho, lam)
            node.rho = float(np.dot(node.child_rho, pr))
            if node.parent is not None:
                node.parent.child_rho[self._slot(node.parent, node)] = node.rho
        # exhaustion bookkeeping
        for node in reversed(path):
            if node.terminal and not node.exhausted:
                node.exhausted = True
            if node.exhausted and node.parent is not None and not node.reported:
                node.reported = True
                if node.cond_prob > 0:
                    node.parent.open_children -= 1
                    if node.parent.open_children <= 0:
                        node.parent.exhausted = True

    # -- driver ----------------------------------------------------------------

    def step(self):
        path = self.forward_search_attempt()
        self.backward_update(path)
        self.risk_trace.append(self.risk)
        self.coverage_trace.append(min(self.coverage, 1.0 + 1e-12))

    def run(self, attempts: int | None = None) -> AssessmentResult:
        budget = self.config.attempts if attempts is None else attempts
        t0 = time.perf_counter()
        converged = self.root.exhausted
        while not converged and len(self.risk_trace) < budget:
            self.step()
            if self.root.exhausted:
                converged = True
            elif check_convergence(self.risk_trace, self.coverage, self.config, self.c0):
                converged = True
        return self.result(converged, time.perf_counter() - t0)

    def result(self, converged: bool, wall: float = 0.0) -> AssessmentResult:
        return AssessmentResult(
            risk=self.risk, c0=self.c0,
            risk_trace=np.array(self.risk_trace), coverage_trace=np.array(self.coverage_trace),
            attempts=len(self.risk_trace), converged=converged, exhausted=self.root.exhausted,
            n_states=len(self.table) - 1, simulate_calls=self.simulate_calls,
            top_paths=self.top_paths(self.config.top_paths), wall_clock=wall)

    # -- diagnostics -----------------------------------------------------------

    def accumulate_risk(self) -> float:
        """C_0 plus probability * cost over every simulated state, summed afresh."""
        return self.c0 + sum(n.path_prob * n.cost for k, n in self.table.items() if k)

    def coverage_from_table(self) -> float:
        return sum(n.path_prob for n in self.table.values() if n.terminal)

    def top_paths(self, k: int) -> list[tuple[StateKey, float, float]]:
        rows = [(key, n.path_prob, n.path_prob * n.cost) for key, n in self.table.items() if key]
        rows.sort(key=lambda r: (-r[2], r[0]))
        return rows[:k]

    def subsequent_risk(self, key: StateKey) -> float:
        """Risk carried by a node and its simulated descendants."""
        node = self.table[tuple(key)]
        total = 0.0
        stack = [node]
        while stack:
            n = stack.pop()
            total += n.path_prob * n.cost
            stack.extend(n.children.values())
        return total

    def level_one_diagnostic(self) -> list[tuple[int, float, float]]:
        """(label, initial index, subsequent risk) for every simulated level-1 state."""
        if self.root.cand is None:
            return []
        out = []
        for j, label in enumerate(self.root.cand.labels):
            if int(label) in self.root.children:
                out.append((int(label), float(self.root.cand.rho[j]),
                            self.subsequent_risk((int(label),))))
        return out


def assess(case: NetworkCase, config: AssessmentConfig, initial_outages: Iterable[int] = (),
           attempts: int | None = None) -> AssessmentResult:
    return TreeSearch(case, config, initial_outages).run(attempts)


@dataclass
class EnumerationResult:
    risk: float
    c0: float
    n_paths: int
    n_states: int
    paths: list[tuple[StateKey, float, float]]   # key, probability, C_0 + sum of level costs
    coverage: float


def enumerate_all(case: NetworkCase, config: AssessmentConfig,
                  initial_outages: Iterable[int] = (),
                  simulator: Callable[..., TransitionOutcome] = simulate_transition) -> EnumerationResult:
    """Expand every admissible event sequence depth first and sum the exact risk."""
    root = make_root(case, initial_outages, config)
    n_on = int(root.state.in_service.sum())
    estimate = path_count_formula(n_on, config.k_d)
    if estimate > config.enum_cap:
        raise EnumerationCapExceeded(estimate, config.enum_cap)

    c0 = root.cost
    risk = c0
    paths: list[tuple[StateKey, float, float]] = []
    n_states = 0
    tau_h = config.tau_d / 60.0
    stack = [((), root.state, 1.0, c0, root.terminal)]
    while stack:
        key, state, prob, path_cost, terminal = stack.pop()
        if terminal or len(key) >= config.k_d:
            paths.append((key, prob, path_cost))
            if len(paths) > config.enum_cap:
                raise EnumerationCapExceeded(len(paths), config.enum_cap)
            continue
        pos = np.flatnonzero(state.in_service)
        pr, p0 = mt_outage_probabilities(branch_rates(case, state, config)[pos], tau_h)
        events = [(0, p0)] + [(int(case.branch_ids[k]), float(p)) for k, p in zip(pos, pr)]
        for label, p in reversed(events):
            out = simulator(case, state, label, config)
            n_states += 1
            child_prob = prob * p
            risk += child_prob * out.cost
            stack.append((key + (label,), out.state, child_prob, path_cost + out.cost,
                          out.terminal or len(key) + 1 >= config.k_d))
    paths.sort(key=lambda r: r[0])
    coverage = float(sum(p for _, p, _ in paths))
    return EnumerationResult(risk=risk, c0=c0, n_paths=len(paths), n_states=n_states,
                             paths=paths, coverage=coverage)
