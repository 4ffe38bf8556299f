"""Tests for the non-relativistic guiding equation and its two backends."""

import math

import numpy as np
import pytest

from nolawbohm._validation import DomainError, NodeProximityError, PhysicsError
from nolawbohm.nr import (
    GaussianPacket,
    GaussianWaveFunction,
    GridWaveFunction,
    harmonic_potential,
    marginal_histogram,
    nr_continuity_residual,
    nr_current,
    nr_density,
    nr_equivariance,
    nr_integrate,
    nr_sample,
    nr_velocity,
)


def free_trajectory(x0, t, center=0.0, momentum=0.0, width=1.0, mass=1.0):
    """Exact Bohmian trajectory of one free Gaussian packet."""
    spread = math.sqrt(1.0 + (t / (2 * mass * width ** 2)) ** 2)
    return center + momentum * t / mass + (x0 - center) * spread


def odd_cat():
    """psi = g(x - 2) - g(x + 2): an exact node at x = 0 for every t."""
    return GaussianWaveFunction(
        ((1.0, (GaussianPacket(2.0, 0.0, 0.7),)), (-1.0, (GaussianPacket(-2.0, 0.0, 0.7),)))
    )


class TestGaussianBackend:
    def test_normalized(self):
        wf = GaussianWaveFunction(
            ((1.0, (GaussianPacket(-1, 0.5, 1), GaussianPacket(1, -0.5, 1))),
             (1j, (GaussianPacket(-1, -0.5, 1), GaussianPacket(1, 0.5, 1))))
        )
        lo, hi = wf.support_box(0.7)
        xs = np.linspace(lo[0], hi[0], 1201)
        dens = wf.marginal_density(0, 0.7, xs)
        assert dens.sum() * (xs[1] - xs[0]) == pytest.approx(1.0, abs=1e-6)

    def test_density_matches_closed_form(self):
        wf = GaussianWaveFunction.single(0.5, 1.0, 0.8)
        t = 1.3
        s_t = 0.8 * math.sqrt(1 + (t / (2 * 0.8 ** 2)) ** 2)
        x = np.linspace(-3, 5, 9)[:, None]
        exact = np.exp(-(x[:, 0] - 0.5 - t) ** 2 / (2 * s_t ** 2)) / math.sqrt(2 * math.pi * s_t ** 2)
        np.testing.assert_allclose(nr_density(wf, t, x), exact, rtol=1e-12)

    def test_current_of_plane_phase(self):
        """At t = 0 the velocity of a packet with momentum p is p/m everywhere."""
        wf = GaussianWaveFunction.single(0.0, 0.7, 1.0, mass=2.0)
        x = np.linspace(-2, 2, 5)[:, None]
        np.testing.assert_allclose(nr_velocity(wf, 0.0, x)[:, 0], 0.35, rtol=1e-13)
        np.testing.assert_allclose(nr_current(wf, 0.0, x)[:, 0], 0.35 * nr_density(wf, 0.0, x), rtol=1e-13)

    def test_continuity(self):
        wf = odd_cat()
        x = np.linspace(-4, 4, 17)[:, None] + 0.01
        assert nr_continuity_residual(wf, 0.8, x).max() < 1e-7

    def test_invalid_width(self):
        with pytest.raises(PhysicsError):
            GaussianPacket(0.0, 0.0, -1.0)

    def test_wrong_configuration_shape(self):
        wf = GaussianWaveFunction.single()
        with pytest.raises(ValueError):
            nr_density(wf, 0.0, np.zeros((3, 2)))


class TestGridBackend:
    def test_free_evolution_matches_analytic(self):
        gauss = GaussianWaveFunction.single(0.0, 0.5, 1.0)
        grid = GridWaveFunction.from_function(lambda x: gauss.psi(0.0, x.reshape(-1, 1)).reshape(x.shape), 40.0, 128)
        x = np.linspace(-3, 4, 15)[:, None]
        for t in (0.5, 2.0):
            np.testing.assert_allclose(nr_density(grid, t, x), nr_density(gauss, t, x), atol=1e-10)
            np.testing.assert_allclose(nr_velocity(grid, t, x), nr_velocity(gauss, t, x), atol=1e-8)

    def test_norm_preserved_with_potential(self):
        ground = GridWaveFunction.from_function(
            lambda x: np.exp(-x ** 2 / 2), 20.0, 64, potential=harmonic_potential(), dt=1e-2
        )
        assert ground.norm(1.0) == pytest.approx(1.0, abs=1e-12)

    def test_ground_state_trajectories_are_static(self):
        ground = GridWaveFunction.from_function(
            lambda x: np.exp(-x ** 2 / 2), 20.0, 64, potential=harmonic_potential(), dt=1e-2
        )
        traj = nr_integrate(ground, [0.7], 0.0, 1.0, 1e-2)
        # The sampled Gaussian is an eigenstate only up to the O(dt^2) splitting error.
        assert abs(traj.positions[-1, 0] - 0.7) < 1e-4

    def test_coherent_state_moves_rigidly(self):
        """Displaced oscillator ground state: every trajectory follows x0 + a (cos t - 1)."""
        a = 1.5
        coherent = GridWaveFunction.from_function(
            lambda x: np.exp(-(x - a) ** 2 / 2), 24.0, 96, potential=harmonic_potential(), dt=1e-3
        )
        x0 = np.array([[0.5], [1.5], [2.3]])
        t1 = 1.2
        trajs = nr_integrate(coherent, x0, 0.0, t1, 1e-2)
        for x, tr in zip(x0[:, 0], trajs):
            assert tr.positions[-1, 0] == pytest.approx(x + a * (math.cos(t1) - 1), abs=1e-5)

    def test_outside_box(self):
        grid = GridWaveFunction.from_function(lambda x: np.exp(-x ** 2), 10.0, 32)
        with pytest.raises(DomainError):
            nr_density(grid, 0.0, [[6.0]])


class TestIntegration:
    @pytest.mark.parametrize("x0", [-1.3, 0.4, 2.0])
    def test_spreading_packet_oracle(self, x0):
        wf = GaussianWaveFunction.single()
        traj = nr_integrate(wf, [x0], 0.0, 2.0, 1e-3)
        assert traj.positions[-1, 0] == pytest.approx(free_trajectory(x0, 2.0), abs=1e-8)

    def test_moving_packet_oracle(self):
        wf = GaussianWaveFunction.single(1.0, -0.6, 0.7, mass=1.5)
        traj = nr_integrate(wf, [1.4], 0.0, 1.5, 1e-3)
        exact = free_trajectory(1.4, 1.5, 1.0, -0.6, 0.7, 1.5)
        assert traj.positions[-1, 0] == pytest.approx(exact, abs=1e-8)

    def test_fourth_order_convergence(self):
        wf = GaussianWaveFunction.single()
        errs = [abs(nr_integrate(wf, [1.0], 0.0, 2.0, h).positions[-1, 0] - math.sqrt(2)) for h in (0.2, 0.1)]
        assert math.log2(errs[0] / errs[1]) == pytest.approx(4.0, abs=0.3)

    def test_start_on_node_raises(self):
        with pytest.raises(NodeProximityError):
            nr_integrate(odd_cat(), [0.0], 0.0, 1.0)

    def test_node_is_never_crossed(self):
        """Trajectories of the odd state stay on their side of the node."""
        trajs = nr_integrate(odd_cat(), [[-0.3], [0.3]], 0.0, 2.0, 1e-2)
        assert np.all(trajs[0].positions < 0) and np.all(trajs[1].positions > 0)

    def test_batch_equals_single(self):
        wf = GaussianWaveFunction.single(0.0, 0.3, 1.0)
        batch = nr_integrate(wf, [[0.2], [1.1]], 0.0, 1.0, 1e-2)
        single = nr_integrate(wf, [1.1], 0.0, 1.0, 1e-2)
        np.testing.assert_array_equal(batch[1].positions, single.positions)

    def test_backwards_interval_rejected(self):
        with pytest.raises(ValueError):
            nr_integrate(GaussianWaveFunction.single(), [0.0], 1.0, 0.0)


class TestEquivariance:
    def test_sampling_is_seeded(self):
        wf = GaussianWaveFunction.single()
        np.testing.assert_array_equal(nr_sample(wf, 0.0, 300, seed=5), nr_sample(wf, 0.0, 300, seed=5))
        assert not np.array_equal(nr_sample(wf, 0.0, 300, seed=5), nr_sample(wf, 0.0, 300, seed=6))

    def test_histogram_mass(self):
        wf = GaussianWaveFunction.single(0.0, 1.0, 1.0)
        edges, probs = marginal_histogram(wf, 0, 1.0, 30)
        assert probs.sum() == pytest.approx(math.erf(6 / math.sqrt(2)), abs=1e-8)
        assert len(edges) == 31

    def test_small_ensemble_within_floor(self):
        wf = GaussianWaveFunction.single(0.0, 0.5, 1.0)
        report = nr_equivariance(wf, 0.0, 1.5, 2000, bins=20, seed=2, h=1e-2)
        assert report.within(3.0)
        assert report.failures == 0

    def test_corrupted_velocity_detected(self):
        wf = GaussianWaveFunction.single(0.0, 1.0, 1.0)
        report = nr_equivariance(wf, 0.0, 2.0, 2000, bins=20, seed=2, h=1e-2, velocity_scale=0.5)
        assert not report.within(3.0)
