"""Tests for the fast invariant suite behind ``nolawbohm validate``."""

import pytest

from nolawbohm.invariants import normalization_suite, positivity_causality_sweep, run_invariant_suite


class TestInvariantSuite:
    def test_all_pass(self):
        results = run_invariant_suite(seed=0)
        failed = [r for r in results if not r.passed]
        assert not failed, failed

    def test_names_unique(self):
        names = [r.name for r in run_invariant_suite(seed=1)]
        assert len(names) == len(set(names))

    def test_sweep_counts_cases(self):
        _, _, cases = positivity_causality_sweep(states=2, leaves=3, configs=4, seed=0)
        assert cases == 24

    def test_normalization_suite_keys(self):
        norms = normalization_suite()
        assert set(norms) == {"rest", "boosted_0.6", "curved_tanh"}
        for v in norms.values():
            assert v == pytest.approx(1.0, abs=2e-3)
