"""Hypersurface Bohm-Dirac guidance: stepping configurations from leaf to leaf.

Each particle moves along its own current j_i evaluated with the leaf normals
at the current configuration. A step from leaf(s) to leaf(s + ds) is a Heun
predictor-corrector on the normalized directions (1, j1 / j0).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._validation import NodeProximityError, check_positive, check_scalar
from .dirac import PoincareTransform, apply_poincare, density_and_currents, leaf_density_grid
from .foliation import FlatFoliation, transform_foliation

NULL_GUARD = 1e-12
NODE_GUARD = 1e-12
CAUSAL_SLACK = 1e-9


@dataclass
class Trajectory:
    """World lines of one configuration, sampled on leaves s[0] < s[1] < ...

    ``points`` has shape (K, N, 2) with rows (t, x). ``valid`` is False when
    the integration stopped early near a node; later rows repeat the last point.
    """

    label: str
    s: np.ndarray
    points: np.ndarray
    valid: bool = True
    failed_at: float | None = None

    def world_line(self, i):
        return self.points[:, i, :]

    @property
    def n_particles(self):
        return self.points.shape[1]


@dataclass
class BatchResult:
    """Many configurations integrated through the same leaves; points (M, K, N, 2)."""

    s: np.ndarray
    points: np.ndarray
    valid: np.ndarray
    failed_at: np.ndarray = field(default=None)

    def trajectory(self, m, label=""):
        ok = bool(self.valid[m])
        return Trajectory(label, self.s, self.points[m], ok, None if ok else float(self.failed_at[m]))


def leaf_peak_density(wf, leaf, domain=(-20.0, 20.0), points=201):
    """Peak of rho_Sigma over a tensor grid on ``leaf``."""
    xs = np.linspace(domain[0], domain[1], points)
    dens = leaf_density_grid(wf, leaf, [xs] * wf.n_particles)
    # Undo the proper-length factors: the node guard compares rho_Sigma itself.
    for i in range(wf.n_particles):
        shape = [1] * wf.n_particles
        shape[i] = points
        dens = dens / np.sqrt(1.0 - leaf.slope(xs) ** 2).reshape(shape)
    return float(dens.max())


def guidance_directions(wf, foliation, s, points, current_scale=1.0):
    """Unit-j0 directions (1, v_i) at configurations on leaf(s).

    Returns directions (M, N, 2) and rho (M,). ``current_scale`` multiplies
    the spatial velocity only; it exists to build corrupted negative controls.
    """
    t, x = points[..., 0], points[..., 1]
    normals = foliation.normal(s, x)
    rho, j = density_and_currents(wf.tensor(t, x), normals)
    j0, j1 = j[..., 0], j[..., 1]
    with np.errstate(divide="ignore", invalid="ignore"):
        v = np.where(j0 > 0, j1 / j0, 0.0)
    near_null = (j0 - np.abs(j1)) < NULL_GUARD * np.abs(j0)
    v = np.where(near_null, np.sign(j1), v)
    v = np.clip(v * current_scale, -1.0, 1.0)
    d = np.empty(points.shape)
    d[..., 0] = 1.0
    d[..., 1] = v
    return d, rho


def integrate_batch(
    wf,
    foliation,
    x0,
    s0,
    s1,
    ds=1e-3,
    record_every=1,
    eps_rho=None,
    current_scale=1.0,
    on_node="flag",
):
    """Integrate configurations x0 (M, N) from leaf(s0) to leaf(s1).

    Near a node (rho_Sigma < eps_rho) a configuration is frozen and flagged,
    or :class:`NodeProximityError` is raised when ``on_node == "raise"``.
    """
    x0 = np.atleast_2d(np.asarray(x0, dtype=float))
    m, n = x0.shape
    if n != wf.n_particles:
        raise ValueError(f"configurations have {n} particles, wave function has {wf.n_particles}")
    check_positive(ds, "ds")
    s0 = check_scalar(s0, "s0")
    s1 = check_scalar(s1, "s1")
    if s1 <= s0:
        raise ValueError("s1 must exceed s0")
    if eps_rho is None:
        eps_rho = NODE_GUARD * leaf_peak_density(wf, foliation.leaf(s0))
    steps = max(1, math.ceil((s1 - s0) / ds - 1e-9))
    h = (s1 - s0) / steps
    record_every = max(1, int(record_every))
    rec_idx = list(range(0, steps + 1, record_every))
    if rec_idx[-1] != steps:
        rec_idx.append(steps)
    s_rec = s0 + h * np.asarray(rec_idx, dtype=float)
    out = np.empty((m, len(rec_idx), n, 2))
    pts = np.stack([foliation.time(s0, x0), x0], axis=-1)
    valid = np.ones(m, dtype=bool)
    failed_at = np.full(m, np.nan)
    out[:, 0] = pts
    slot = 1
    for k in range(steps):
        s = s0 + k * h
        s_next = s0 + (k + 1) * h
        live = np.flatnonzero(valid)
        if len(live):
            p = pts[live]
            d1, rho = guidance_directions(wf, foliation, s, p, current_scale)
            bad = rho < eps_rho
            if np.any(bad):
                if on_node == "raise":
                    raise NodeProximityError(f"rho_Sigma below {eps_rho:.3e} at s = {s:.6g}")
                valid[live[bad]] = False
                failed_at[live[bad]] = s
                keep = ~bad
                live, p, d1 = live[keep], p[keep], d1[keep]
            if len(live):
                flat = p.reshape(-1, 2)
                pred = foliation.advance(s_next, flat, d1.reshape(-1, 2)).reshape(p.shape)
                d2, _ = guidance_directions(wf, foliation, s_next, pred, current_scale)
                new = foliation.advance(s_next, flat, (0.5 * (d1 + d2)).reshape(-1, 2)).reshape(p.shape)
                step = new - p
                if np.any(np.abs(step[..., 1]) > step[..., 0] + CAUSAL_SLACK):
                    raise RuntimeError("superluminal step detected; the leaf stepping is broken")
                pts[live] = new
        if slot < len(rec_idx) and k + 1 == rec_idx[slot]:
            out[:, slot] = pts
            slot += 1
    return BatchResult(s_rec, out, valid, failed_at)


def integrate_hbd(wf, foliation, x0, s0, s1, ds=1e-3, record_every=1, eps_rho=None, on_node="flag"):
    """Single configuration x0 (N,) on leaf(s0) integrated to leaf(s1)."""
    x0 = np.asarray(x0, dtype=float).reshape(1, -1)
    res = integrate_batch(wf, foliation, x0, s0, s1, ds, record_every, eps_rho, on_node=on_node)
    return res.trajectory(0, foliation.label)


def integrate_flat_frame(wf, velocity, x0, s0, s1, h=1e-3):
    """Reference integrator for a flat foliation: RK4 in the frame where its leaves are t' = const.

    ``x0`` are lab-frame positions on the leaf gamma (t - v x) = s0. The
    returned trajectory is mapped back to lab coordinates.
    """
    fol = FlatFoliation(velocity)
    g = PoincareTransform.boost(velocity)
    g_inv = g.inverse()
    wf_frame = apply_poincare(g, wf)
    x0 = np.asarray(x0, dtype=float)
    lab = np.stack([fol.time(s0, x0), x0], axis=-1)
    frame = g.apply(lab)
    n = wf.n_particles
    rest = np.tile([1.0, 0.0], (1, n, 1))

    def vel(tp, xp):
        t = np.full((1, n), tp)
        _, j = density_and_currents(wf_frame.tensor(t, xp[None]), rest)
        return j[0, :, 1] / j[0, :, 0]

    steps = max(1, math.ceil((s1 - s0) / h - 1e-9))
    dt = (s1 - s0) / steps
    xs = frame[:, 1].copy()
    tp = frame[0, 0]
    out = np.empty((steps + 1, n, 2))
    out[0] = lab
    for k in range(steps):
        k1 = vel(tp, xs)
        k2 = vel(tp + dt / 2, xs + dt / 2 * k1)
        k3 = vel(tp + dt / 2, xs + dt / 2 * k2)
        k4 = vel(tp + dt, xs + dt * k3)
        xs = xs + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        tp = frame[0, 0] + (k + 1) * dt
        out[k + 1] = g_inv.apply(np.stack([np.full(n, tp), xs], axis=-1))
    return Trajectory(fol.label, s0 + dt * np.arange(steps + 1), out)


@dataclass(frozen=True)
class CovarianceReport:
    """sup-distance between g(Q) and the trajectory computed in the transformed picture."""

    distance: float
    refined_distance: float
    ds: float

    @property
    def order(self):
        if self.refined_distance <= 0 or self.distance <= 0:
            return float("inf")
        return math.log2(self.distance / self.refined_distance)

    def passed(self, tol=1e-6):
        return self.distance <= tol


def _sup_distance(a, b):
    return float(np.max(np.linalg.norm(a - b, axis=-1)))


def covariance_distance(wf, foliation, x0, g, s0, s1, ds):
    traj = integrate_hbd(wf, foliation, x0, s0, s1, ds)
    g_fol = transform_foliation(g, foliation)
    start = g.apply(traj.points[0])
    traj_g = integrate_hbd(apply_poincare(g, wf), g_fol, start[:, 1], s0, s1, ds)
    return _sup_distance(g.apply(traj.points), traj_g.points)


def covariance_check(wf, foliation, x0, g, s0=0.0, s1=2.0, ds=1e-3):
    """Integrate in both pictures at ds and ds/2; the gap should shrink like ds^2."""
    d1 = covariance_distance(wf, foliation, x0, g, s0, s1, ds)
    d2 = covariance_distance(wf, foliation, x0, g, s0, s1, ds / 2)
    return CovarianceReport(d1, d2, ds)


@dataclass(frozen=True)
class OverlapReport:
    """Agreement of one trajectory under F and under F deformed away from it."""

    distance: float
    tolerance: float
    margin: float
    bump: float

    @property
    def passed(self):
        return self.distance <= self.tolerance


def overlap_check(wf, foliation, x0, margin, bump, s0=0.0, s1=2.0, ds=1e-3, base_tol=1e-4, ramp=0.5):
    """Re-integrate with a foliation that agrees with ``foliation`` near the trajectory's crossings."""
    from .foliation import deform_foliation_away

    traj = integrate_hbd(wf, foliation, x0, s0, s1, ds)
    deformed = deform_foliation_away(foliation, traj, margin, bump, ramp=ramp)
    traj2 = integrate_hbd(wf, deformed, x0, s0, s1, ds)
    return OverlapReport(_sup_distance(traj.points, traj2.points), 10 * base_tol, margin, bump)


__all__ = [
    "BatchResult",
    "CovarianceReport",
    "OverlapReport",
    "Trajectory",
    "covariance_check",
    "covariance_distance",
    "guidance_directions",
    "integrate_batch",
    "integrate_flat_frame",
    "integrate_hbd",
    "leaf_peak_density",
    "overlap_check",
]
