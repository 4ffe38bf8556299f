"""Fast invariant suite shared by ``nolawbohm validate`` and the tests."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .dirac import (
    DiracPacket,
    MultiTimeWaveFunction,
    PlaneWaveMode,
    PoincareTransform,
    apply_poincare,
    clifford_residual,
    density_and_currents,
    evaluate_psi,
    intertwining_residual,
    metric_residual,
    normalization,
)
from .foliation import CurvedFoliation, FlatFoliation, FlatLeaf, GraphLeaf, TanhShape, check_ordering
from .hbd import integrate_flat_frame, integrate_hbd
from .nr import GaussianWaveFunction, GridWaveFunction, nr_continuity_residual, nr_density, nr_integrate


@dataclass(frozen=True)
class InvariantResult:
    name: str
    value: float
    threshold: float
    passed: bool


def _check(name, value, threshold):
    value = float(value)
    return InvariantResult(name, value, threshold, bool(value <= threshold))


def random_packet_state(rng, n_particles=2, n_terms=2, negative=False, n_modes=32):
    """Random normalized superposition of packet products (coefficients complex)."""
    terms = []
    for _ in range(n_terms):
        packets = tuple(
            DiracPacket(
                float(rng.uniform(-2, 2)),
                float(rng.uniform(-1, 1)),
                float(rng.uniform(0.6, 1.5)),
                int(rng.choice([1, -1])) if negative else 1,
            )
            for _ in range(n_particles)
        )
        terms.append((complex(rng.normal(), rng.normal()), packets))
    return MultiTimeWaveFunction.from_packets(terms, n_modes=n_modes)


def random_leaf(rng):
    if rng.random() < 0.5:
        return FlatLeaf(float(rng.uniform(-0.9, 0.9)), float(rng.uniform(-1, 1)))
    a = float(rng.uniform(-0.8, 0.8))
    w = float(rng.uniform(1.0, 2.0))
    c = float(rng.uniform(-1, 1))
    shape = TanhShape(a, c, w)
    shift = float(rng.uniform(-1, 1))
    return GraphLeaf(lambda x: shift + shape(x), shape.derivative, slope_max=0.8, validate=False)


def positivity_causality_sweep(states=10, leaves=10, configs=10, seed=0, negative=True):
    """Minimum rho_Sigma and minimum j0 - |j1| over states x leaves x configs random cases."""
    rng = np.random.default_rng(seed)
    min_rho = math.inf
    min_causal = math.inf
    cases = 0
    for _ in range(states):
        wf = random_packet_state(rng, negative=negative)
        for _ in range(leaves):
            leaf = random_leaf(rng)
            x = rng.uniform(-3, 3, size=(configs, wf.n_particles))
            t = leaf.time(x)
            rho, j = density_and_currents(wf.tensor(t, x), leaf.normal(x))
            min_rho = min(min_rho, float(rho.min()))
            min_causal = min(min_causal, float((j[..., 0] - np.abs(j[..., 1])).min()))
            cases += configs
    return min_rho, min_causal, cases


def normalization_suite(wf=None):
    """Norm of one packet state on the rest, v = 0.6 and tanh-curved leaves."""
    if wf is None:
        p = DiracPacket
        wf = MultiTimeWaveFunction.from_packets(
            [(1.0, (p(-1.0, 0.5, 1.0), p(1.0, -0.5, 1.0))), (1.0, (p(-1.0, -0.5, 1.0), p(1.0, 0.5, 1.0)))]
        )
    curved = CurvedFoliation(TanhShape(0.3, 0.0, 1.0))
    leaves = {"rest": FlatLeaf(0.0, 0.0), "boosted_0.6": FlatLeaf(0.6, 0.0), "curved_tanh": curved.leaf(0.0)}
    with warnings.catch_warnings():
        warnings.simplefilter("error", RuntimeWarning)
        return {k: normalization(wf, leaf) for k, leaf in leaves.items()}


def run_invariant_suite(seed=0):
    """List of :class:`InvariantResult`, each comparing a residual against its bound."""
    rng = np.random.default_rng(seed)
    out = [_check("clifford_residual", clifford_residual(), 1e-12)]
    out.append(_check("intertwining_residual", max(intertwining_residual(e) for e in rng.uniform(-2, 2, 8)), 1e-12))
    out.append(_check("metric_residual", max(metric_residual(e) for e in rng.uniform(-2, 2, 8)), 1e-12))
    modes = [PlaneWaveMode(float(p), 1.0, b) for p in rng.uniform(-3, 3, 8) for b in (1, -1)]
    out.append(_check("mode_dirac_residual", max(m.residual() for m in modes), 1e-12))
    min_rho, min_causal, _ = positivity_causality_sweep(seed=seed)
    out.append(_check("rho_sigma_negativity", -min_rho, 1e-12))
    out.append(_check("current_spacelike_excess", -min_causal, 1e-12))
    norms = normalization_suite()
    out.append(_check("normalization_deviation", max(abs(v - 1.0) for v in norms.values()), 2e-3))

    wf = random_packet_state(rng)
    g1 = PoincareTransform(0.4, (0.3, -0.2))
    g2 = PoincareTransform(-0.7, (1.0, 0.5))
    pts = rng.uniform(-2, 2, size=(20, 2, 2))
    a = evaluate_psi(apply_poincare(g2, apply_poincare(g1, wf)), pts)
    b = evaluate_psi(apply_poincare(g2.compose(g1), wf), pts)
    out.append(_check("poincare_representation", np.abs(a - b).max(), 1e-9))

    gauss = GaussianWaveFunction.single(0.0, 0.0, 1.0)
    traj = nr_integrate(gauss, [1.0], 0.0, 2.0, 1e-3)
    out.append(_check("nr_guiding_oracle", abs(traj.positions[-1, 0] - math.sqrt(2.0)), 1e-8))
    xs = rng.uniform(-2, 2, size=(20, 1))
    out.append(_check("nr_continuity_residual", nr_continuity_residual(gauss, 1.0, xs).max(), 1e-7))
    grid = GridWaveFunction.from_function(lambda x: gauss.psi(0.0, x.reshape(-1, 1)).reshape(x.shape), 40.0, 64)
    xg = np.linspace(-3, 3, 13)[:, None]
    diff = max(np.abs(nr_density(grid, t, xg) - nr_density(gauss, t, xg)).max() for t in (0.0, 1.0, 2.0))
    out.append(_check("nr_backend_agreement", diff, 1e-6))

    fol = CurvedFoliation(TanhShape(0.3, 0.0, 1.0))
    p0 = np.array([[fol.time(0.0, 1.0), 1.0]])
    landed = fol.advance(0.05, p0, np.array([[1.0, 0.0]]))
    out.append(_check("advance_to_leaf_landing", abs(landed[0, 0] - p0[0, 0] - 0.05), 1e-12))
    out.append(_check("foliation_ordering", 0.0 if check_ordering(fol, np.linspace(-2, 2, 9)) else 1.0, 0.0))

    wf1 = MultiTimeWaveFunction.from_packets([(1.0, (DiracPacket(0.0, 0.3, 1.0),))])
    flat = FlatFoliation(0.6)
    hbd = integrate_hbd(wf1, flat, [0.4], 0.0, 0.5, 1e-3)
    ref = integrate_flat_frame(wf1, 0.6, [0.4], 0.0, 0.5, 1e-3)
    out.append(_check("flat_frame_cross_oracle", np.abs(hbd.points - ref.points).max(), 1e-6))

    g = PoincareTransform.boost(0.45, (0.2, -0.7))
    wl = rng.uniform(-3, 3, size=(10, 2))
    out.append(_check("transform_round_trip", np.abs(g.inverse().apply(g.apply(wl)) - wl).max(), 1e-12))
    return out


__all__ = [
    "InvariantResult",
    "normalization_suite",
    "positivity_causality_sweep",
    "random_leaf",
    "random_packet_state",
    "run_invariant_suite",
]
