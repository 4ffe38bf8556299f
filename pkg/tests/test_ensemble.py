"""Tests for equilibrium sampling on leaves and ensemble transport."""

import numpy as np
import pytest

from conftest import straight_lines, synthetic_run
from nolawbohm import ensemble
from nolawbohm._validation import FailureBudgetError
from nolawbohm.dirac import DiracPacket, MultiTimeWaveFunction
from nolawbohm.ensemble import (
    crossings,
    distance_report,
    equivariance_rel,
    estimate_event_prob,
    joint_bins,
    leaf_marginals,
    marginal_bins,
    run_ensemble,
    sample_on_leaf,
)
from nolawbohm.events import Region
from nolawbohm.foliation import CurvedFoliation, FlatFoliation, FlatLeaf, TanhShape


@pytest.fixture(scope="module")
def fast_pair():
    """Entangled pair moving at |p| = 1.5; used for the corrupted-velocity control."""
    p = DiracPacket
    return MultiTimeWaveFunction.from_packets(
        [(1.0, (p(0.0, 1.5, 1.0), p(3.0, 1.5, 1.0))), (1.0, (p(0.0, -1.5, 1.0), p(3.0, -1.5, 1.0)))]
    )


class TestMarginals:
    def test_marginals_integrate_to_one(self, entangled):
        marg = leaf_marginals(entangled, CurvedFoliation(TanhShape(0.3)).leaf(0.5))
        dx = marg.xs[1] - marg.xs[0]
        np.testing.assert_allclose(marg.densities.sum(axis=1) * dx, 1.0, atol=2e-3)

    def test_bins_hold_almost_all_mass(self, entangled):
        leaf = FlatLeaf(0.6, 0.2)
        for i in range(2):
            _, probs = marginal_bins(entangled, leaf, i, 30)
            assert probs.sum() == pytest.approx(1.0, abs=2e-3)
        edges, cells = joint_bins(entangled, leaf, 8)
        assert cells.shape == (8, 8) and len(edges) == 2
        assert 0.95 < cells.sum() <= 1.0 + 2e-3


class TestSampling:
    def test_seeded(self, entangled):
        leaf = FlatLeaf(0.0, 0.0)
        a = sample_on_leaf(entangled, leaf, 200, seed=3)
        np.testing.assert_array_equal(a, sample_on_leaf(entangled, leaf, 200, seed=3))
        assert not np.array_equal(a, sample_on_leaf(entangled, leaf, 200, seed=3, stream=1))

    def test_samples_are_equilibrium_distributed(self, entangled):
        leaf = CurvedFoliation(TanhShape(0.5)).leaf(0.0)
        x = sample_on_leaf(entangled, leaf, 4000, seed=1)
        rep = distance_report(entangled, leaf, x, bins=20, joint=6)
        assert rep.within(3.0)
        assert rep.joint <= 3.0 * rep.joint_noise_floor


class TestTransport:
    def test_thread_and_chunk_independence(self, entangled, monkeypatch):
        fol = FlatFoliation(0.3)
        serial = run_ensemble(entangled, fol, 150, seed=2, s1=0.5, ds=0.05, threads=1)
        monkeypatch.setattr(ensemble, "CHUNK", 40)
        parallel = run_ensemble(entangled, fol, 150, seed=2, s1=0.5, ds=0.05, threads=3)
        np.testing.assert_array_equal(serial.points, parallel.points)

    def test_threads_from_environment(self, monkeypatch):
        monkeypatch.setenv(ensemble.THREADS_ENV, "4")
        assert ensemble.default_threads() == 4
        monkeypatch.setenv(ensemble.THREADS_ENV, "many")
        assert ensemble.default_threads() == 1

    def test_prepared_initial_configurations(self, entangled):
        x0 = np.array([[0.0, 3.0], [0.5, 2.5]])
        run = run_ensemble(entangled, FlatFoliation(0.0), 2, s1=0.2, ds=0.1, initial=x0)
        np.testing.assert_array_equal(run.points[:, 0, :, 1], x0)

    def test_zero_length_run(self, entangled):
        run = run_ensemble(entangled, FlatFoliation(0.0), 10, s0=1.0, s1=1.0)
        assert run.points.shape == (10, 1, 2, 2)

    def test_crossings_lie_on_leaf(self, entangled):
        run = run_ensemble(entangled, FlatFoliation(0.0), 50, s1=1.0, ds=0.05, record_every=4)
        other = CurvedFoliation(TanhShape(0.2))
        pts = crossings(run, other, 0.6)
        np.testing.assert_allclose(pts[..., 0], other.time(0.6, pts[..., 1]), atol=1e-2)

    def test_missing_crossing(self):
        run = synthetic_run(straight_lines([0.0], 0.0, t0=0.0, t1=1.0))
        with pytest.raises(ValueError):
            crossings(run, FlatFoliation(0.0), 5.0)
        assert np.isnan(crossings(run, FlatFoliation(0.0), 5.0, require=False)).all()


class TestEquivariance:
    def test_curved_foliation(self, entangled):
        rep = equivariance_rel(entangled, CurvedFoliation(TanhShape(0.3)), 0.0, 1.0, 1500, bins=20, seed=4)
        assert rep.within(3.0)

    @pytest.mark.slow
    def test_corrupted_current_detected(self, fast_pair):
        fol = CurvedFoliation(TanhShape(0.3))
        good = equivariance_rel(fast_pair, fol, 0.0, 4.0, 2000, 30, seed=1)
        bad = equivariance_rel(fast_pair, fol, 0.0, 4.0, 2000, 30, seed=1, current_scale=0.5)
        assert good.within(3.0)
        assert not bad.within(3.0)


class TestEventEstimates:
    def test_fraction_and_interval(self):
        run = synthetic_run(straight_lines(np.linspace(-1, 1, 100), 0.0))
        est = estimate_event_prob(Region(0, (1.0, 1.0), (0.0, np.inf)), run)
        assert est.value == 0.5 and est.successes == 50
        assert est.lower < 0.5 < est.upper

    def test_failures_stay_in_denominator(self):
        valid = np.ones(100, dtype=bool)
        valid[:10] = False
        run = synthetic_run(straight_lines(np.linspace(-1, 1, 100), 0.0), valid=valid)
        est = estimate_event_prob(Region(0, (1.0, 1.0)), run)
        assert est.count == 100 and est.failures == 10

    def test_all_failed(self):
        run = synthetic_run(straight_lines([0.0], 0.0), valid=[False])
        with pytest.raises(FailureBudgetError):
            estimate_event_prob(Region(0, (1.0, 1.0)), run)

    def test_failure_budget(self):
        valid = np.ones(100, dtype=bool)
        valid[:2] = False
        with pytest.raises(FailureBudgetError):
            ensemble._check_budget(synthetic_run(straight_lines(np.zeros(100), 0.0), valid=valid))
