"""Equilibrium ensembles on leaves: sampling, transport and frame-dependence tests."""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from ._validation import EnvelopeError, FailureBudgetError, check_count, check_seed
from .dirac import leaf_density_grid, rho_sigma
from .hbd import NODE_GUARD, integrate_batch, leaf_peak_density
from .sampling import (
    DistanceReport,
    l1_distance,
    noise_floor,
    rejection_sample,
    simpson_weights,
    wilson_interval,
)

DEFAULT_DOMAIN = (-20.0, 20.0)
CHUNK = 2048
FAILURE_BUDGET = 0.01
THREADS_ENV = "NOLAWBOHM_THREADS"


def default_threads():
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


@dataclass(frozen=True)
class LeafMarginals:
    """Per-particle marginal densities of rho_Sigma (w.r.t. x) on a quadrature grid."""

    xs: np.ndarray
    densities: np.ndarray

    def moments(self, i):
        w = self.densities[i] / self.densities[i].sum()
        mu = float(w @ self.xs)
        return mu, math.sqrt(float(w @ (self.xs - mu) ** 2))

    def box(self, i, nsig, domain=DEFAULT_DOMAIN):
        mu, sd = self.moments(i)
        return max(domain[0], mu - nsig * sd), min(domain[1], mu + nsig * sd)


def leaf_marginals(wf, leaf, domain=DEFAULT_DOMAIN, points=801):
    xs = np.linspace(domain[0], domain[1], points)
    dens = leaf_density_grid(wf, leaf, [xs] * wf.n_particles)
    w = simpson_weights(points, xs[1] - xs[0])
    out = []
    for i in range(wf.n_particles):
        m = np.moveaxis(dens, i, 0)
        for _ in range(wf.n_particles - 1):
            m = np.tensordot(m, w, axes=([1], [0]))
        out.append(m)
    return LeafMarginals(xs, np.array(out))


def _leaf_density(wf, leaf):
    """Density of configurations w.r.t. dx_1..dx_N on ``leaf`` (proper-length factors included)."""

    def density(x):
        x = np.asarray(x, dtype=float)
        rho = rho_sigma(wf, leaf, np.stack([leaf.time(x), x], axis=-1))
        return rho * np.prod(np.sqrt(1.0 - leaf.slope(x) ** 2), axis=1)

    return density


def sample_on_leaf(wf, leaf, count, seed=0, stream=0, domain=DEFAULT_DOMAIN, nsig=8.0):
    """Rejection-sample M configurations (M, N) of x coordinates from rho_Sigma on ``leaf``.

    The envelope box covers ``nsig`` standard deviations of every marginal;
    its height is 1.1 times the maximum found on a tensor grid over the box.
    """
    count = check_count(count, "count")
    seed = check_seed(seed)
    marg = leaf_marginals(wf, leaf, domain)
    n = wf.n_particles
    lo = np.empty(n)
    hi = np.empty(n)
    for i in range(n):
        lo[i], hi[i] = marg.box(i, nsig, domain)
    per_axis = max(24, min(401, int(round(160_000 ** (1.0 / n)))))
    axes = [np.linspace(lo[i], hi[i], per_axis) for i in range(n)]
    peak = float(leaf_density_grid(wf, leaf, axes).max())
    if not peak > 0:
        raise EnvelopeError("density vanishes on the envelope box")
    return rejection_sample(_leaf_density(wf, leaf), lo, hi, 1.1 * peak, count, seed, stream)


@dataclass
class EnsembleRun:
    """Equilibrium ensemble transported along one foliation.

    ``points`` has shape (M, K, N, 2): configuration m on leaf s[k].
    ``valid`` flags trajectories that completed; failed ones keep the
    world line up to the failure and stay in every denominator.
    """

    wf_label: str
    foliation_label: str
    s: np.ndarray
    points: np.ndarray
    valid: np.ndarray
    count: int
    seed: int

    @property
    def failures(self):
        return int((~self.valid).sum())

    @property
    def successes(self):
        return self.count - self.failures

    @property
    def final(self):
        return self.points[:, -1]


def transport(wf, foliation, x0, s0, s1, ds, record_every=1, current_scale=1.0, threads=None, eps_rho=None):
    """Integrate many configurations in fixed-size chunks (scheduling-independent)."""
    x0 = np.atleast_2d(np.asarray(x0, dtype=float))
    if eps_rho is None:
        eps_rho = NODE_GUARD * leaf_peak_density(wf, foliation.leaf(s0))
    chunks = [x0[i:i + CHUNK] for i in range(0, len(x0), CHUNK)]
    threads = default_threads() if threads is None else max(1, int(threads))

    def work(chunk):
        return integrate_batch(wf, foliation, chunk, s0, s1, ds, record_every, eps_rho, current_scale)

    if threads == 1 or len(chunks) == 1:
        results = [work(c) for c in chunks]
    else:
        with ThreadPoolExecutor(threads) as pool:
            results = list(pool.map(work, chunks))
    s = results[0].s
    points = np.concatenate([r.points for r in results])
    valid = np.concatenate([r.valid for r in results])
    return s, points, valid


def run_ensemble(
    wf,
    foliation,
    count,
    seed=0,
    s0=0.0,
    s1=2.0,
    ds=1e-2,
    record_every=5,
    stream=0,
    current_scale=1.0,
    threads=None,
    initial=None,
    wf_label="psi",
):
    """Sample on leaf(s0) (or use ``initial`` x coordinates) and transport to leaf(s1)."""
    count = check_count(count, "count")
    x0 = sample_on_leaf(wf, foliation.leaf(s0), count, seed, stream) if initial is None else initial
    if s1 > s0:
        s, points, valid = transport(wf, foliation, x0, s0, s1, ds, record_every, current_scale, threads)
    else:
        s = np.array([s0])
        points = np.stack([foliation.time(s0, x0), x0], axis=-1)[:, None]
        valid = np.ones(count, dtype=bool)
    return EnsembleRun(wf_label, foliation.label, s, points, valid, count, check_seed(seed))


def _check_budget(run):
    if run.failures > FAILURE_BUDGET * run.count:
        raise FailureBudgetError(
            f"{run.failures} of {run.count} trajectories hit the node guard (budget {FAILURE_BUDGET:.0%})"
        )


def crossings(run, foliation, s, require=True):
    """Interpolated crossing points (M, N, 2) of every world line with ``foliation.leaf(s)``.

    Raises when a world line does not reach the leaf and ``require`` is set;
    otherwise missing crossings are NaN.
    """
    pts = run.points if isinstance(run, EnsembleRun) else np.asarray(run)
    t, x = pts[..., 0], pts[..., 1]
    gap = t - foliation.time(s, x)
    cross = (gap[:, :-1] <= 0) & (gap[:, 1:] >= 0)
    has = cross.any(axis=1)
    if require and not np.all(has):
        raise ValueError(
            f"{int((~has).sum())} world lines never reach the requested leaf; extend the leaf-parameter range"
        )
    k = np.argmax(cross, axis=1)
    idx = k[:, None, :, None]
    g0 = np.take_along_axis(gap, k[:, None, :], axis=1)[:, 0]
    g1 = np.take_along_axis(gap, k[:, None, :] + 1, axis=1)[:, 0]
    p0 = np.take_along_axis(pts, idx, axis=1)[:, 0]
    p1 = np.take_along_axis(pts, idx + 1, axis=1)[:, 0]
    denom = g1 - g0
    with np.errstate(divide="ignore", invalid="ignore"):
        u = np.where(denom > 0, -g0 / denom, 0.0)
    out = p0 + u[..., None] * (p1 - p0)
    out[~has] = np.nan
    return out


def marginal_bins(wf, leaf, i, bins, nsig=6.0, domain=DEFAULT_DOMAIN, sub=8, marginals=None):
    """Edges over mean +- nsig std of marginal i and the exact mass of every bin."""
    marg = leaf_marginals(wf, leaf, domain) if marginals is None else marginals
    mu, sd = marg.moments(i)
    edges = np.linspace(mu - nsig * sd, mu + nsig * sd, bins + 1)
    n = 2 * sub + 1
    pts = np.concatenate([np.linspace(a, b, n) for a, b in zip(edges[:-1], edges[1:])])
    full = marg.xs
    w_full = simpson_weights(len(full), full[1] - full[0])
    axes = [full] * wf.n_particles
    axes[i] = pts
    dens = np.moveaxis(leaf_density_grid(wf, leaf, axes), i, 0)
    for _ in range(wf.n_particles - 1):
        dens = np.tensordot(dens, w_full, axes=([1], [0]))
    w_bin = simpson_weights(n, (edges[1] - edges[0]) / (n - 1))
    return edges, dens.reshape(bins, n) @ w_bin


def joint_bins(wf, leaf, bins, nsig=3.0, domain=DEFAULT_DOMAIN, sub=4, marginals=None):
    """Edges per particle and exact masses of the N-dimensional histogram cells."""
    marg = leaf_marginals(wf, leaf, domain) if marginals is None else marginals
    n = 2 * sub + 1
    edges, axes = [], []
    for i in range(wf.n_particles):
        mu, sd = marg.moments(i)
        e = np.linspace(mu - nsig * sd, mu + nsig * sd, bins + 1)
        edges.append(e)
        axes.append(np.concatenate([np.linspace(a, b, n) for a, b in zip(e[:-1], e[1:])]))
    dens = leaf_density_grid(wf, leaf, axes)
    for i in range(wf.n_particles):
        w = simpson_weights(n, (edges[i][1] - edges[i][0]) / (n - 1))
        shape = dens.shape[:i] + (bins, n) + dens.shape[i + 1:]
        dens = np.tensordot(dens.reshape(shape), w, axes=([i + 1], [0]))
    return edges, dens


def distance_report(wf, leaf, configs, bins=30, joint=None, failures=0, domain=DEFAULT_DOMAIN):
    """Marginal (and optionally joint) L1 distances of x configurations (M, N) to rho on ``leaf``."""
    configs = np.asarray(configs, dtype=float)
    marg = leaf_marginals(wf, leaf, domain)
    dists = []
    for i in range(wf.n_particles):
        edges, probs = marginal_bins(wf, leaf, i, bins, domain=domain, marginals=marg)
        dists.append(l1_distance(configs[:, i], edges, probs))
    kwargs = {}
    if joint:
        edges, probs = joint_bins(wf, leaf, joint, domain=domain, marginals=marg)
        kwargs = dict(
            joint=l1_distance(configs, edges, probs),
            joint_bins=joint,
            joint_noise_floor=noise_floor(joint ** wf.n_particles, len(configs)),
        )
    return DistanceReport(tuple(dists), bins, noise_floor(bins, len(configs)), len(configs), failures, **kwargs)


def equivariance_rel(
    wf,
    foliation,
    s0,
    s1,
    count,
    bins=30,
    seed=0,
    ds=1e-2,
    current_scale=1.0,
    joint=None,
    threads=None,
    return_final=False,
):
    """Sample on leaf(s0), transport to leaf(s1), compare with rho on leaf(s1).

    ``current_scale`` != 1 scales the spatial velocity (negative control).
    """
    count = check_count(count, "count", minimum=100)
    run = run_ensemble(
        wf, foliation, count, seed, s0, s1, ds, record_every=10**9, current_scale=current_scale, threads=threads
    )
    _check_budget(run)
    report = distance_report(wf, foliation.leaf(s1), run.final[..., 1], bins, joint, run.failures)
    return (report, run.final[..., 1]) if return_final else report


@dataclass(frozen=True)
class CrossFoliationReport:
    """Same-foliation baseline against the distance measured on a leaf of another foliation."""

    baseline: DistanceReport
    cross: DistanceReport

    @property
    def ratio(self):
        return self.cross.joint / self.baseline.joint if self.cross.joint is not None else (
            self.cross.max_distance / self.baseline.max_distance
        )


def cross_foliation_test(
    wf,
    foliation,
    other,
    s0,
    s_other,
    count,
    bins=30,
    seed=0,
    s1=None,
    s_baseline=None,
    ds=1e-2,
    record_every=2,
    joint=8,
    threads=None,
):
    """Prepare equilibrium on ``foliation``, then compare against rho on ``other.leaf(s_other)``.

    Crossing points with both the baseline leaf ``foliation.leaf(s_baseline)``
    and the foreign leaf are extracted from the same world lines by linear
    interpolation. Marginals of a single particle cannot reveal the effect
    (they do not depend on the foliation), so the joint histogram is reported.
    """
    count = check_count(count, "count", minimum=100)
    s1 = s0 + 2.0 if s1 is None else s1
    s_baseline = 0.5 * (s0 + s1) if s_baseline is None else s_baseline
    run = run_ensemble(wf, foliation, count, seed, s0, s1, ds, record_every, threads=threads)
    _check_budget(run)
    base_pts = crossings(run, foliation, s_baseline)
    other_pts = crossings(run, other, s_other)
    baseline = distance_report(wf, foliation.leaf(s_baseline), base_pts[..., 1], bins, joint, run.failures)
    cross = distance_report(wf, other.leaf(s_other), other_pts[..., 1], bins, joint, run.failures)
    return CrossFoliationReport(baseline, cross)


@dataclass(frozen=True)
class EventEstimate:
    """Fraction of trajectories in an event with its Wilson 95% interval."""

    value: float
    lower: float
    upper: float
    successes: int
    count: int
    failures: int = 0


def estimate_event_prob(event, run):
    """P_F(event) on one run; failed trajectories count via their partial world lines."""
    if run.successes == 0:
        raise FailureBudgetError("every trajectory of the run failed")
    hits = np.asarray(event.evaluate(run.points), dtype=bool)
    k = int(hits.sum())
    lo, hi = wilson_interval(k, run.count)
    return EventEstimate(k / run.count, lo, hi, k, run.count, run.failures)


__all__ = [
    "CrossFoliationReport",
    "EnsembleRun",
    "EventEstimate",
    "LeafMarginals",
    "cross_foliation_test",
    "crossings",
    "distance_report",
    "equivariance_rel",
    "estimate_event_prob",
    "joint_bins",
    "leaf_marginals",
    "marginal_bins",
    "run_ensemble",
    "sample_on_leaf",
    "transport",
]
