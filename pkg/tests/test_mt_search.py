import itertools
import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mtrisk import AssessmentConfig, Branch, Generator, Load, NetworkCase
from mtrisk.cascade_sim import simulate_transition
from mtrisk.errors import ContractViolation, EnumerationCapExceeded
from mtrisk.mt_search import (
    TreeSearch, check_convergence, convergence_metric, enumerate_all, path_count_formula,
)
from mtrisk.risk_estimator import search_probabilities

from conftest import FOUR_NODE_INITIAL


def pair_case():
    """Two lightly loaded parallel branches feeding one load."""
    return NetworkCase(buses=[1, 2],
                       branches=[Branch(1, 1, 2, 0.1, 100, 0.5), Branch(2, 1, 2, 0.1, 100, 0.5)],
                       generators=[Generator(1, 40, 0, 100, 10)], loads=[Load(2, 40)])


def brute_force_paths(n, k_d):
    """Every length-k_d label sequence over {0, 1..n} with no branch failing twice."""
    count = 0
    for seq in itertools.product(range(n + 1), repeat=k_d):
        fails = [s for s in seq if s]
        if len(fails) == len(set(fails)):
            count += 1
    return count


class TestPathCount:
    def test_small_values(self):
        assert path_count_formula(2, 1) == 3
        assert path_count_formula(2, 2) == 7

    def test_four_by_four(self):
        assert path_count_formula(4, 4) == 209

    @given(n=st.integers(0, 6), k=st.integers(0, 5))
    def test_matches_brute_force(self, n, k):
        assert path_count_formula(n, k) == brute_force_paths(n, k)

    @pytest.mark.parametrize("k_d,expect", [(1, 3), (2, 7)])
    def test_matches_enumeration(self, k_d, expect):
        cfg = AssessmentConfig(t_max=15.0 * k_d)
        assert enumerate_all(pair_case(), cfg).n_paths == expect

    def test_negative_rejected(self):
        with pytest.raises(ContractViolation):
            path_count_formula(-1, 2)


class TestConvergenceMetric:
    def test_constant_trace(self):
        assert convergence_metric([4.0] * 10) == 0

    def test_small_trace(self):
        assert convergence_metric([0.0, 2.5, 2.5], 3) == pytest.approx(2.5)

    @given(st.lists(st.floats(0, 1e3), min_size=1, max_size=50))
    def test_matches_loop(self, trace):
        r = sorted(trace)
        expect = sum(j * (r[-1] - r[j - 1]) for j in range(1, len(r) + 1))
        assert convergence_metric(r) == pytest.approx(expect, rel=1e-12, abs=1e-9)

    @given(st.lists(st.floats(0, 1e3), min_size=2, max_size=30))
    def test_late_gains_cost_more(self, steps):
        # same increments, earliest-largest ordering minimises the metric
        inc = sorted(steps, reverse=True)
        best = convergence_metric(np.cumsum(inc))
        worst = convergence_metric(np.cumsum(inc[::-1]))
        assert best <= worst + 1e-9 * max(1.0, worst)


    @settings(max_examples=30)
    @given(st.lists(st.floats(0, 100), min_size=5, max_size=5))
    def test_largest_first_is_best_of_all_orders(self, inc):
        best = convergence_metric(np.cumsum(sorted(inc, reverse=True)))
        every = [convergence_metric(np.cumsum(p)) for p in itertools.permutations(inc)]
        assert best <= min(every) + 1e-9 * max(1.0, best)


class TestCheckConvergence:
    cfg = AssessmentConfig(window=5, eta=1e-3, p_cov=0.97)

    def test_flat_and_covered(self):
        assert check_convergence([1.0] * 6, 0.99, self.cfg)

    def test_rising(self):
        assert not check_convergence([1, 1.1, 1.2, 1.3, 1.4, 1.5], 0.99, self.cfg)

    def test_flat_but_uncovered(self):
        assert not check_convergence([1.0] * 6, 0.5, self.cfg)

    def test_window_not_filled(self):
        assert not check_convergence([1.0] * 4, 0.99, self.cfg)

    def test_zero_risk(self):
        assert check_convergence([0.0] * 5, 0.98, self.cfg)


def zero_cost(case, state, event, config, dt=None):
    return replace(simulate_transition(case, state, event, config, dt), cost=0.0)


class CountingSimulator:
    def __init__(self):
        self.keys = []

    def __call__(self, case, state, event, config, dt=None):
        self.keys.append((tuple(np.flatnonzero(~state.in_service)), state.level, event))
        return simulate_transition(case, state, event, config, dt)


class TestTreeSearch:
    def test_root_only(self, four_node, config):
        ts = TreeSearch(four_node, config, FOUR_NODE_INITIAL)
        assert ts.risk == ts.c0 and ts.coverage == 0

    def test_zero_cost_grid(self, four_node, config):
        ts = TreeSearch(four_node, config, FOUR_NODE_INITIAL, simulator=zero_cost)
        res = ts.run(40)
        assert np.all(res.risk_trace == res.c0)

    def test_first_attempt(self, four_node, config):
        ts = TreeSearch(four_node, config, FOUR_NODE_INITIAL)
        ts.step()
        path = [n for n in ts.table.values() if n.key]
        assert len(path) == config.k_d or path[-1].terminal
        assert ts.risk == pytest.approx(ts.c0 + sum(n.path_prob * n.cost for n in path))
        leaf = max(path, key=lambda n: n.level)
        assert ts.coverage == pytest.approx(leaf.path_prob)

    def test_retraced_path_adds_nothing(self, four_node, config):
        ts = TreeSearch(four_node, config.with_(trust_lambda=math.inf), FOUR_NODE_INITIAL)
        ts.step()
        r, calls = ts.risk, ts.simulate_calls
        # walk the same key again by hand
        node = ts.root
        for label in max(ts.table, key=len):
            node, new = ts._child(node, int(np.flatnonzero(node.cand.labels == label)[0]))
            assert not new
        assert ts.risk == r and ts.simulate_calls == calls

    def test_exhaustion_equals_enumeration(self, four_node, config):
        ts = TreeSearch(four_node, config, FOUR_NODE_INITIAL)
        res = ts.run(10_000)
        ref = enumerate_all(four_node, config, FOUR_NODE_INITIAL)
        assert res.exhausted and res.converged
        assert res.risk == pytest.approx(ref.risk, rel=1e-10)
        assert res.coverage == pytest.approx(1.0, abs=1e-9)
        assert res.attempts == ref.n_paths

    def test_traces_nondecreasing_and_bookkeeping(self, four_node, config):
        ts = TreeSearch(four_node, config, FOUR_NODE_INITIAL)
        res = ts.run(60)
        assert np.all(np.diff(res.risk_trace) >= 0) and np.all(np.diff(res.coverage_trace) >= 0)
        assert ts.accumulate_risk() == pytest.approx(ts.risk, rel=1e-12)
        assert ts.coverage_from_table() == pytest.approx(ts.coverage, rel=1e-12)

    def test_each_state_simulated_once(self, four_node, config):
        sim = CountingSimulator()
        ts = TreeSearch(four_node, config, FOUR_NODE_INITIAL, simulator=sim)
        res = ts.run(80)
        assert res.simulate_calls == res.n_states == len(sim.keys)

    def test_backward_averaging(self, four_node, config):
        ts = TreeSearch(four_node, config, FOUR_NODE_INITIAL)
        path = ts.forward_search_attempt()
        ts.backward_update(path)
        end = path[-1]
        parent = end.parent
        slot = ts._slot(parent, end)
        others = np.delete(parent.child_rho, slot)
        assert parent.child_rho[slot] <= others.max() * math.exp(-config.eps_r_gap) * (1 + 1e-12)
        for node in path[:-1]:
            pr = search_probabilities(node.child_rho, config.trust_lambda)
            assert node.rho == pytest.approx(float(np.dot(node.child_rho, pr)), rel=1e-12)

    def test_parent_index_from_two_children(self):
        rho = np.array([1.0, 3.0])
        pr = search_probabilities(rho, 1.0)
        assert pr == pytest.approx([0.25, 0.75]) and float(rho @ pr) == pytest.approx(2.5)

    def test_explored_subtree_collapses(self, four_node, config):
        ts = TreeSearch(four_node, config, FOUR_NODE_INITIAL)
        ts.run(10_000)
        floor = math.exp(-config.eps_r_gap)
        checked = 0
        for node in ts.table.values():
            if node.cand is None or node.terminal:
                continue
            assert node.exhausted
            kids = list(node.children.values())
            if node.parent is not None and kids and all(k.terminal for k in kids):
                assert node.rho <= node.cand.rho.max() * floor * (1 + 1e-9)
                checked += 1
        assert checked > 0

    def test_same_seed_same_trace(self, four_node, config):
        a = TreeSearch(four_node, config.with_(seed=7), FOUR_NODE_INITIAL).run(50)
        b = TreeSearch(four_node, config.with_(seed=7), FOUR_NODE_INITIAL).run(50)
        assert np.array_equal(a.risk_trace, b.risk_trace)
        assert np.array_equal(a.coverage_trace, b.coverage_trace)

    def test_small_matrix_cache_agrees(self, four_node, config):
        a = TreeSearch(four_node, config, FOUR_NODE_INITIAL).run(10_000)
        b = TreeSearch(four_node, config.with_(matrix_cache=2), FOUR_NODE_INITIAL).run(10_000)
        assert b.risk == pytest.approx(a.risk, rel=1e-9)

    def test_subsequent_risk(self, four_node, config):
        ts = TreeSearch(four_node, config, FOUR_NODE_INITIAL)
        ts.run(10_000)
        ref = enumerate_all(four_node, config, FOUR_NODE_INITIAL)
        for label in ts.root.children:
            expect = sum(p * (c - ref.c0) for key, p, c in ref.paths if key[0] == label)
            assert ts.subsequent_risk((label,)) == pytest.approx(expect, rel=1e-9, abs=1e-15)
        leaf = next(n for n in ts.table.values() if n.terminal and n.key)
        assert ts.subsequent_risk(leaf.key) == leaf.path_prob * leaf.cost
        diag = ts.level_one_diagnostic()
        assert {d[0] for d in diag} == set(ts.root.children)

    def test_zero_cost_subtree(self, four_node, config):
        ts = TreeSearch(four_node, config, FOUR_NODE_INITIAL, simulator=zero_cost)
        ts.run(30)
        assert all(ts.subsequent_risk((lab,)) == 0 for lab in ts.root.children)


class TestEnumeration:
    def test_coverage_one(self, four_node, config):
        res = enumerate_all(four_node, config, FOUR_NODE_INITIAL)
        assert res.coverage == pytest.approx(1.0, abs=1e-9)

    def test_cap(self, four_node, config):
        with pytest.raises(EnumerationCapExceeded) as err:
            enumerate_all(four_node, config.with_(enum_cap=10), FOUR_NODE_INITIAL)
        assert err.value.estimate > 10

    def test_path_costs_reconstruct_risk(self, four_node, config):
        res = enumerate_all(four_node, config, FOUR_NODE_INITIAL)
        assert sum(p * c for _, p, c in res.paths) == pytest.approx(res.risk, rel=1e-12)

    @settings(max_examples=5, deadline=None)
    @given(seed=st.integers(0, 1000))
    def test_search_matches_enumeration_on_pair(self, seed):
        cfg = AssessmentConfig(seed=seed, t_max=45.0)
        ref = enumerate_all(pair_case(), cfg)
        res = TreeSearch(pair_case(), cfg).run(10_000)
        assert res.risk == pytest.approx(ref.risk, rel=1e-10)
        assert res.attempts == ref.n_paths
