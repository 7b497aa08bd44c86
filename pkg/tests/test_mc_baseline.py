import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mtrisk import AssessmentConfig, mc_risk
from mtrisk.errors import ContractViolation
from mtrisk.mc_baseline import sample_interval_outages

from conftest import FOUR_NODE_INITIAL, line_case


class TestSampling:
    def test_zero_rates_never_fail(self):
        rng = np.random.default_rng(0)
        assert not any(sample_interval_outages(np.zeros(5), 0.25, rng).any() for _ in range(1000))

    def test_half_chance(self):
        rng = np.random.default_rng(1)
        hits = sum(bool(sample_interval_outages([math.log(2)], 1.0, rng)[0]) for _ in range(10_000))
        assert abs(hits / 10_000 - 0.5) <= 3 * math.sqrt(0.25 / 10_000)

    def test_small_rate_first_order(self):
        rng = np.random.default_rng(2)
        x, n = 0.01, 200_000
        freq = sample_interval_outages(np.full(n, x), 1.0, rng).mean()
        assert abs(freq - x) <= 3 * math.sqrt(x / n)

    def test_negative_rejected(self):
        with pytest.raises(ContractViolation):
            sample_interval_outages([-1.0], 1.0, np.random.default_rng(0))

    @settings(max_examples=20)
    @given(rates=st.lists(st.floats(0, 10), min_size=1, max_size=10), seed=st.integers(0, 2**31))
    def test_mask_shape(self, rates, seed):
        m = sample_interval_outages(rates, 0.25, np.random.default_rng(seed))
        assert m.shape == (len(rates),) and m.dtype == bool


class TestMcRisk:
    def test_terminal_root_is_exact(self, config):
        c = line_case(gen=50, load=50)
        est = mc_risk(c, config, [1], n=50)
        assert est.mean == 50.0 and est.stderr == 0.0

    def test_single_sample_has_no_stderr(self, four_node, config):
        est = mc_risk(four_node, config, FOUR_NODE_INITIAL, n=1)
        assert est.n == 1 and math.isnan(est.stderr)

    def test_rejects_empty(self, four_node, config):
        with pytest.raises(ContractViolation):
            mc_risk(four_node, config, FOUR_NODE_INITIAL, n=0)

    def test_seeded(self, four_node, config):
        a = mc_risk(four_node, config, FOUR_NODE_INITIAL, n=200, seed=5)
        b = mc_risk(four_node, config, FOUR_NODE_INITIAL, n=200, seed=5)
        assert a.mean == b.mean and a.stderr == b.stderr

    def test_stderr_shrinks_with_n(self, four_node, config):
        small = mc_risk(four_node, config, FOUR_NODE_INITIAL, n=1000, seed=3)
        large = mc_risk(four_node, config, FOUR_NODE_INITIAL, n=4000, seed=4)
        assert 1.5 <= small.stderr / large.stderr <= 2.6

    def test_non_negative(self, four_node):
        est = mc_risk(four_node, AssessmentConfig(), FOUR_NODE_INITIAL, n=100)
        assert est.mean >= 0
