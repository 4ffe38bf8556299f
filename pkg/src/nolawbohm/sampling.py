"""Seeded rejection sampling, histogram distances and binomial intervals."""

from __future__ import annotations

import math
import zlib
from dataclasses import dataclass

import numpy as np

from ._validation import EnvelopeError, check_count, check_seed

BLOCK_SIZE = 256
ENVELOPE_SAFETY = 1.1


def block_rng(seed, block, stream=0):
    """Counter-based generator owning one block of consecutive sample indices."""
    key = np.random.SeedSequence([check_seed(seed), int(stream), int(block)]).generate_state(2, np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def label_stream(label):
    """Stable integer stream id for a string label (independent of family ordering)."""
    return zlib.crc32(label.encode("utf-8"))


def rejection_sample(density, lo, hi, bound, count, seed, stream=0):
    """Draw ``count`` points from ``density`` under a uniform box envelope.

    ``density`` maps an (n, d) array to n non-negative values. ``bound`` must
    dominate the density on the box; a violation raises :class:`EnvelopeError`.
    Sample ``k`` is produced by the stream of block ``k // BLOCK_SIZE`` so the
    output does not depend on how callers split the work.
    """
    count = check_count(count, "count")
    lo = np.atleast_1d(np.asarray(lo, dtype=float))
    hi = np.atleast_1d(np.asarray(hi, dtype=float))
    if lo.shape != hi.shape or np.any(hi <= lo):
        raise EnvelopeError(f"degenerate envelope box lo={lo}, hi={hi}")
    if not (np.isfinite(bound) and bound > 0):
        raise EnvelopeError(f"invalid envelope height {bound!r}")
    dim = lo.size
    volume = float(np.prod(hi - lo))
    acceptance = min(1.0, 1.0 / (volume * bound))
    out = np.empty((count, dim))
    n_blocks = -(-count // BLOCK_SIZE)
    for b in range(n_blocks):
        rng = block_rng(seed, b, stream)
        start = b * BLOCK_SIZE
        need = min(BLOCK_SIZE, count - start)
        filled = 0
        rounds = 0
        while filled < need:
            rounds += 1
            if rounds > 10_000:
                raise EnvelopeError("rejection sampler made no progress; envelope too loose")
            # Batch size fixed per block, so the first k accepted points never depend on count.
            n_cand = max(64, int(1.3 * BLOCK_SIZE / acceptance))
            cand = lo + (hi - lo) * rng.random((n_cand, dim))
            u = rng.random(n_cand) * bound
            rho = np.asarray(density(cand), dtype=float)
            if np.any(rho > bound):
                raise EnvelopeError(
                    f"density {rho.max():.6g} exceeds envelope {bound:.6g}; "
                    "grid scan under-resolved the peak"
                )
            accepted = cand[u < rho]
            take = min(len(accepted), need - filled)
            out[start + filled:start + filled + take] = accepted[:take]
            filled += take
    return out


def scan_bound(density, lo, hi, points_per_axis=None):
    """1.1x the maximum of ``density`` over a regular grid spanning the box."""
    lo = np.atleast_1d(np.asarray(lo, dtype=float))
    hi = np.atleast_1d(np.asarray(hi, dtype=float))
    dim = lo.size
    if points_per_axis is None:
        points_per_axis = max(24, min(801, int(round(160_000 ** (1.0 / dim)))))
    axes = [np.linspace(a, b, points_per_axis) for a, b in zip(lo, hi)]
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, dim)
    peak = 0.0
    for chunk in np.array_split(mesh, max(1, len(mesh) // 20_000)):
        peak = max(peak, float(np.max(density(chunk))))
    if not peak > 0:
        raise EnvelopeError("density vanishes on the whole envelope box")
    return ENVELOPE_SAFETY * peak, peak


def l1_distance(samples, edges, probabilities):
    """L1 distance between the empirical histogram of ``samples`` and bin probabilities.

    Samples outside the histogram range count as mass in an overflow cell whose
    reference probability is ``1 - sum(probabilities)``.
    """
    samples = np.asarray(samples, dtype=float)
    probabilities = np.asarray(probabilities, dtype=float)
    if samples.ndim == 1:
        counts, _ = np.histogram(samples, bins=edges)
    else:
        counts, _ = np.histogramdd(samples, bins=edges)
    m = len(samples)
    empirical = counts / m
    overflow_emp = 1.0 - empirical.sum()
    overflow_ref = max(0.0, 1.0 - probabilities.sum())
    return float(np.abs(empirical - probabilities).sum() + abs(overflow_emp - overflow_ref))


def noise_floor(bins, count, c=2.0):
    """Monte Carlo scale of the histogram L1 distance, ``c * sqrt(bins / M)``."""
    return c * math.sqrt(bins / count)


def wilson_interval(successes, total, z=1.959963984540054):
    """Wilson score interval for a binomial proportion (95% by default)."""
    if total <= 0:
        raise ValueError("Wilson interval needs at least one trial")
    p = successes / total
    denom = 1.0 + z * z / total
    centre = (p + z * z / (2 * total)) / denom
    half = z * math.sqrt(p * (1 - p) / total + z * z / (4 * total * total)) / denom
    lo = 0.0 if successes == 0 else max(0.0, centre - half)
    hi = 1.0 if successes == total else min(1.0, centre + half)
    return lo, hi


def simpson_weights(n_points, h):
    """Composite Simpson weights for an odd number of equally spaced points."""
    if n_points < 3 or n_points % 2 == 0:
        raise ValueError("composite Simpson needs an odd number of points >= 3")
    w = np.ones(n_points)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return w * h / 3.0


def bin_probabilities_1d(density, edges, sub=8):
    """Integrate a vectorized 1-D density over each histogram bin (Simpson)."""
    edges = np.asarray(edges, dtype=float)
    n = 2 * sub + 1
    probs = np.empty(len(edges) - 1)
    pts = np.concatenate([np.linspace(a, b, n) for a, b in zip(edges[:-1], edges[1:])])
    vals = np.asarray(density(pts), dtype=float).reshape(len(probs), n)
    for k in range(len(probs)):
        h = (edges[k + 1] - edges[k]) / (n - 1)
        probs[k] = vals[k] @ simpson_weights(n, h)
    return probs


@dataclass(frozen=True)
class DistanceReport:
    """Histogram L1 distances between an ensemble and its reference density.

    ``distances`` holds one entry per particle marginal; ``joint`` (when set)
    is the distance of the N-dimensional histogram with ``joint_bins`` per axis.
    """

    distances: tuple
    bins: int
    noise_floor: float
    count: int
    failures: int = 0
    joint: float | None = None
    joint_bins: int | None = None
    joint_noise_floor: float | None = None

    def __post_init__(self):
        for d in self.distances + ((self.joint,) if self.joint is not None else ()):
            if not -1e-12 <= d <= 2.0 + 1e-12:
                raise ValueError(f"L1 distance {d} outside [0, 2]")

    @property
    def max_distance(self):
        return max(self.distances)

    def within(self, factor=3.0):
        return all(d <= factor * self.noise_floor for d in self.distances)

    def verdicts(self, factor=3.0):
        return tuple(d <= factor * self.noise_floor for d in self.distances)
