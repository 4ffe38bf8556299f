"""Non-relativistic N-particle Bohmian mechanics, one spatial dimension per particle.

Units are natural (hbar = 1). Two wave-function backends share one interface:

* :class:`GaussianWaveFunction` - finite superpositions of products of free
  Gaussian packets, evolved in closed form (V = 0). Used as the oracle.
* :class:`GridWaveFunction` - amplitudes on a periodic box evolved with a
  Strang split-step scheme for a general static potential.

The module-level functions (:func:`nr_density`, :func:`nr_current`, ...) are
the public operations; they accept configurations of shape (N,) or (M, N).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._validation import (
    DomainError,
    NodeProximityError,
    check_configurations,
    check_count,
    check_positive,
    check_scalar,
)
from .sampling import (
    DistanceReport,
    bin_probabilities_1d,
    l1_distance,
    noise_floor,
    rejection_sample,
    scan_bound,
)

NODE_GUARD = 1e-12
TINY_DENSITY = 1e-300


@dataclass(frozen=True)
class GaussianPacket:
    """Free Gaussian packet: |psi|^2 has mean ``center`` and std ``width`` at t=0."""

    center: float = 0.0
    momentum: float = 0.0
    width: float = 1.0

    def __post_init__(self):
        check_scalar(self.center, "center")
        check_scalar(self.momentum, "momentum")
        check_positive(self.width, "width")

    def _parts(self, t, x, mass):
        s2 = self.width ** 2
        a = 1.0 + 1j * t / (2.0 * mass * s2)
        xi = x - self.center - self.momentum * t / mass
        amp = (2.0 * np.pi * s2) ** -0.25 / np.sqrt(a)
        phase = -xi ** 2 / (4.0 * s2 * a) + 1j * self.momentum * (x - self.center)
        phase = phase - 1j * self.momentum ** 2 * t / (2.0 * mass)
        value = amp * np.exp(phase)
        q = -xi / (2.0 * s2 * a) + 1j * self.momentum
        return value, q, a

    def value(self, t, x, mass):
        return self._parts(t, x, mass)[0]

    def derivatives(self, t, x, mass):
        """Return (psi, dpsi/dx, d2psi/dx2)."""
        value, q, a = self._parts(t, x, mass)
        return value, value * q, value * (q * q - 1.0 / (2.0 * self.width ** 2 * a))

    def spread(self, t, mass):
        return self.width * math.sqrt(1.0 + (t / (2.0 * mass * self.width ** 2)) ** 2)

    def mean(self, t, mass):
        return self.center + self.momentum * t / mass


def gaussian_overlap(a: GaussianPacket, b: GaussianPacket):
    """<a|b> at t=0 in closed form (free evolution preserves it)."""
    sa, sb = a.width ** 2, b.width ** 2
    alpha = 1.0 / (4 * sa) + 1.0 / (4 * sb)
    beta = a.center / (2 * sa) + b.center / (2 * sb) + 1j * (b.momentum - a.momentum)
    gamma = (
        -a.center ** 2 / (4 * sa)
        - b.center ** 2 / (4 * sb)
        + 1j * a.momentum * a.center
        - 1j * b.momentum * b.center
    )
    norm = (2 * np.pi * sa) ** -0.25 * (2 * np.pi * sb) ** -0.25
    return complex(norm * np.sqrt(np.pi / alpha) * np.exp(beta ** 2 / (4 * alpha) + gamma))


class _Backend:
    n_particles: int
    masses: np.ndarray

    def psi(self, t, x):
        raise NotImplementedError

    def derivatives(self, t, x):
        """Return (psi, grad (M, N), laplacian terms (M, N))."""
        raise NotImplementedError

    def support_box(self, t, nsig=8.0):
        raise NotImplementedError

    def marginal_density(self, i, t, xs):
        raise NotImplementedError

    def norm(self, t):
        raise NotImplementedError

    def check_domain(self, x):
        return check_configurations(x, self.n_particles)


@dataclass(frozen=True, eq=False)
class GaussianWaveFunction(_Backend):
    """Superposition of products of free Gaussian packets (V = 0).

    ``terms`` is a sequence of ``(coefficient, packets)`` with one packet per
    particle. Coefficients are rescaled so the state has unit norm.
    """

    terms: tuple
    masses: np.ndarray = None
    normalize: bool = True
    n_particles: int = field(init=False)

    def __post_init__(self):
        terms = tuple((complex(c), tuple(p)) for c, p in self.terms)
        if not terms:
            raise ValueError("need at least one term")
        n = len(terms[0][1])
        if n < 1 or any(len(p) != n for _, p in terms):
            raise ValueError("every term needs one packet per particle")
        masses = np.ones(n) if self.masses is None else np.asarray(self.masses, dtype=float)
        if masses.shape != (n,) or np.any(masses <= 0):
            raise ValueError("masses must be positive, one per particle")
        object.__setattr__(self, "n_particles", n)
        object.__setattr__(self, "masses", masses)
        if self.normalize:
            total = self._norm_from_overlaps(terms)
            if total <= 0:
                raise ValueError("superposition has zero norm")
            terms = tuple((c / math.sqrt(total), p) for c, p in terms)
        object.__setattr__(self, "terms", terms)

    @classmethod
    def single(cls, center=0.0, momentum=0.0, width=1.0, mass=1.0):
        return cls(((1.0, (GaussianPacket(center, momentum, width),)),), masses=[mass])

    @classmethod
    def product(cls, packets, masses=None):
        return cls(((1.0, tuple(packets)),), masses=masses)

    @staticmethod
    def _norm_from_overlaps(terms):
        total = 0.0 + 0.0j
        for ca, pa in terms:
            for cb, pb in terms:
                ov = np.conj(ca) * cb
                for ga, gb in zip(pa, pb):
                    ov *= gaussian_overlap(ga, gb)
                total += ov
        return total.real

    def norm(self, t=0.0):
        return self._norm_from_overlaps(self.terms)

    def psi(self, t, x):
        x = check_configurations(x, self.n_particles)
        out = np.zeros(len(x), dtype=complex)
        for c, packets in self.terms:
            term = np.full(len(x), c, dtype=complex)
            for i, g in enumerate(packets):
                term *= g.value(t, x[:, i], self.masses[i])
            out += term
        return out

    def derivatives(self, t, x):
        x = check_configurations(x, self.n_particles)
        m, n = x.shape
        psi = np.zeros(m, dtype=complex)
        grad = np.zeros((m, n), dtype=complex)
        lap = np.zeros((m, n), dtype=complex)
        for c, packets in self.terms:
            vals, d1, d2 = [], [], []
            for i, g in enumerate(packets):
                v, dv, ddv = g.derivatives(t, x[:, i], self.masses[i])
                vals.append(v)
                d1.append(dv)
                d2.append(ddv)
            prod = c * np.prod(vals, axis=0)
            psi += prod
            for i in range(n):
                others = c * np.prod([vals[j] for j in range(n) if j != i], axis=0) if n > 1 else c
                grad[:, i] += others * d1[i]
                lap[:, i] += others * d2[i]
        return psi, grad, lap

    def support_box(self, t, nsig=8.0):
        lo = np.full(self.n_particles, np.inf)
        hi = np.full(self.n_particles, -np.inf)
        for _, packets in self.terms:
            for i, g in enumerate(packets):
                mu, s = g.mean(t, self.masses[i]), g.spread(t, self.masses[i])
                lo[i] = min(lo[i], mu - nsig * s)
                hi[i] = max(hi[i], mu + nsig * s)
        return lo, hi

    def marginal_density(self, i, t, xs):
        xs = np.asarray(xs, dtype=float)
        out = np.zeros(xs.shape, dtype=complex)
        for ca, pa in self.terms:
            va = np.conj(pa[i].value(t, xs, self.masses[i]))
            for cb, pb in self.terms:
                w = np.conj(ca) * cb
                for j in range(self.n_particles):
                    if j != i:
                        w *= gaussian_overlap(pa[j], pb[j])
                out += w * va * pb[i].value(t, xs, self.masses[i])
        return out.real


class GridWaveFunction(_Backend):
    """Amplitudes on the periodic box [-L/2, L/2)^N with a static potential.

    Evolution uses the Strang splitting K(dt/2) V(dt) K(dt/2); for a vanishing
    potential the kinetic propagator is applied exactly for any t. Point
    evaluation is by trigonometric interpolation, derivatives are spectral.
    """

    def __init__(self, psi0, length, masses=None, potential=None, dt=1e-3, t0=0.0, normalize=True):
        psi0 = np.asarray(psi0, dtype=complex)
        self.n_particles = psi0.ndim
        n = psi0.shape[0]
        if any(s != n for s in psi0.shape):
            raise ValueError("grid must have the same number of points on every axis")
        self.length = check_positive(length, "length")
        self.points = n
        self.dx = self.length / n
        self.grid = -self.length / 2 + self.dx * np.arange(n)
        self.masses = np.ones(self.n_particles) if masses is None else np.asarray(masses, dtype=float)
        self.dt = check_positive(dt, "dt")
        self.t0 = float(t0)
        k = 2 * np.pi * np.fft.fftfreq(n, d=self.dx)
        k_interp = k.copy()
        if n % 2 == 0:
            k_interp[n // 2] = 0.0
        self._k = k
        self._k_interp = k_interp
        self._nyquist = n // 2 if n % 2 == 0 else None
        mesh = np.meshgrid(*([self.grid] * self.n_particles), indexing="ij")
        kmesh = np.meshgrid(*([k] * self.n_particles), indexing="ij")
        self._kinetic = sum(kk ** 2 / (2 * m) for kk, m in zip(kmesh, self.masses))
        if potential is None:
            self.potential = np.zeros(psi0.shape)
        elif callable(potential):
            self.potential = np.asarray(potential(*mesh), dtype=float)
        else:
            self.potential = np.asarray(potential, dtype=float)
        if self.potential.shape != psi0.shape:
            raise ValueError("potential must be sampled on the same grid as psi0")
        self.free = not np.any(self.potential)
        if normalize:
            psi0 = psi0 / math.sqrt(np.sum(np.abs(psi0) ** 2) * self.dx ** self.n_particles)
        self._psi0 = psi0
        self._psi0.setflags(write=False)
        self._checkpoints = {0: psi0}
        self._coeff_cache = {}

    @classmethod
    def from_function(cls, fn, length, points, n_particles=1, **kwargs):
        """Sample ``fn(*coords)`` on the grid and wrap it."""
        x = -length / 2 + (length / points) * np.arange(points)
        mesh = np.meshgrid(*([x] * n_particles), indexing="ij")
        return cls(fn(*mesh), length, **kwargs)

    def _kick(self, psi, tau):
        return np.fft.ifftn(np.exp(-1j * self._kinetic * tau) * np.fft.fftn(psi))

    def _strang(self, psi, tau):
        psi = self._kick(psi, tau / 2)
        psi = np.exp(-1j * self.potential * tau) * psi
        return self._kick(psi, tau / 2)

    def state(self, t):
        """Amplitudes on the grid at time ``t``."""
        tau = float(t) - self.t0
        if self.free:
            return self._psi0 if tau == 0 else self._kick(self._psi0, tau)
        if tau < 0:
            raise DomainError("grid backend with a potential only evolves forward in time")
        n_steps = int(math.floor(tau / self.dt + 1e-9))
        base = max(k for k in self._checkpoints if k <= n_steps)
        psi = self._checkpoints[base]
        for k in range(base + 1, n_steps + 1):
            psi = self._strang(psi, self.dt)
            if k % 100 == 0:
                self._checkpoints[k] = psi
        rest = tau - n_steps * self.dt
        if rest > 1e-15:
            psi = self._strang(psi, rest)
        return psi

    def _coefficients(self, t):
        key = float(t)
        c = self._coeff_cache.get(key)
        if c is None:
            c = np.fft.fftn(self.state(t)) / self.points ** self.n_particles
            if self._nyquist is not None:
                for ax in range(self.n_particles):
                    idx = [slice(None)] * self.n_particles
                    idx[ax] = self._nyquist
                    c[tuple(idx)] = 0.0
            if len(self._coeff_cache) > 64:
                self._coeff_cache.clear()
            self._coeff_cache[key] = c
        return c

    def check_domain(self, x):
        x = check_configurations(x, self.n_particles)
        half = self.length / 2
        if np.any(x < -half) or np.any(x >= half):
            raise DomainError(f"configuration outside the periodic box [-{half}, {half})")
        return x

    def _contract(self, coeffs, x, deriv_axis=None, order=0):
        phases = [np.exp(1j * np.outer(x[:, i] + self.length / 2, self._k_interp)) for i in range(self.n_particles)]
        if deriv_axis is not None:
            phases[deriv_axis] = phases[deriv_axis] * (1j * self._k_interp) ** order
        out = np.einsum("mk,k...->m...", phases[0], coeffs)
        for i in range(1, self.n_particles):
            out = np.einsum("mk,mk...->m...", phases[i], out)
        return out

    def psi(self, t, x):
        x = self.check_domain(x)
        return self._contract(self._coefficients(t), x)

    def derivatives(self, t, x):
        x = self.check_domain(x)
        c = self._coefficients(t)
        psi = self._contract(c, x)
        grad = np.stack([self._contract(c, x, i, 1) for i in range(self.n_particles)], axis=1)
        lap = np.stack([self._contract(c, x, i, 2) for i in range(self.n_particles)], axis=1)
        return psi, grad, lap

    def norm(self, t=0.0):
        return float(np.sum(np.abs(self.state(t)) ** 2) * self.dx ** self.n_particles)

    def marginal_density(self, i, t, xs):
        xs = np.asarray(xs, dtype=float)
        c = np.fft.fft(self.state(t), axis=i) / self.points
        c = np.moveaxis(c, i, 0)
        if self._nyquist is not None:
            c[self._nyquist] = 0.0
        ph = np.exp(1j * np.outer(xs.ravel() + self.length / 2, self._k_interp))
        vals = np.tensordot(ph, c, axes=(1, 0))
        dens = np.abs(vals) ** 2
        if self.n_particles > 1:
            dens = dens.reshape(len(xs.ravel()), -1).sum(axis=1) * self.dx ** (self.n_particles - 1)
        return dens.reshape(xs.shape)

    def support_box(self, t, nsig=8.0):
        lo = np.empty(self.n_particles)
        hi = np.empty(self.n_particles)
        half = self.length / 2
        for i in range(self.n_particles):
            p = self.marginal_density(i, t, self.grid) * self.dx
            p = p / p.sum()
            mu = float(p @ self.grid)
            sd = math.sqrt(max(float(p @ (self.grid - mu) ** 2), 1e-300))
            lo[i] = max(-half, mu - nsig * sd)
            hi[i] = min(half - 1e-12, mu + nsig * sd)
        return lo, hi


def harmonic_potential(omega=1.0, mass=1.0):
    return lambda *xs: sum(0.5 * mass * omega ** 2 * x ** 2 for x in xs)


@dataclass
class NrTrajectory:
    """Sampled Bohmian trajectory; ``valid`` is False after a node-guard abort."""

    times: np.ndarray
    positions: np.ndarray
    valid: bool = True


def nr_density(wf, t, x):
    """|psi_t(x)|^2 at each configuration."""
    x = wf.check_domain(x)
    return np.abs(wf.psi(t, x)) ** 2


def nr_current(wf, t, x):
    """Probability current (1/m_i) Im(psi* d_i psi), shape (M, N)."""
    x = wf.check_domain(x)
    psi, grad, _ = wf.derivatives(t, x)
    return (np.conj(psi)[:, None] * grad).imag / wf.masses


def nr_velocity(wf, t, x, eps_rho=0.0):
    """Guiding velocity j/rho. Raises :class:`NodeProximityError` at rho <= eps_rho."""
    x = wf.check_domain(x)
    psi, grad, _ = wf.derivatives(t, x)
    rho = np.abs(psi) ** 2
    if np.any(rho <= eps_rho):
        raise NodeProximityError(f"density {rho.min():.3e} at or below node guard {eps_rho:.3e}")
    return (np.conj(psi)[:, None] * grad).imag / (wf.masses * rho[:, None])


def _divergence(wf, t, x):
    psi, _, lap = wf.derivatives(t, x)
    return ((np.conj(psi)[:, None] * lap).imag / wf.masses).sum(axis=1), np.abs(psi) ** 2


def nr_continuity_residual(wf, t, x, h_t=1e-4):
    """|d_t rho + div j| with a central difference in time.

    Points where the density is below 1e-300 return 0 by convention.
    """
    x = wf.check_domain(x)
    drho = (nr_density(wf, t + h_t, x) - nr_density(wf, t - h_t, x)) / (2 * h_t)
    div, rho = _divergence(wf, t, x)
    res = np.abs(drho + div)
    return np.where(rho < TINY_DENSITY, 0.0, res)


def peak_density(wf, t):
    lo, hi = wf.support_box(t)
    _, peak = scan_bound(lambda pts: nr_density(wf, t, pts), lo, hi)
    return peak


def _rk4_batch(wf, x0, t0, t1, h, eps_rho, velocity_scale=1.0):
    n_steps = max(1, math.ceil((t1 - t0) / h - 1e-12))
    step = (t1 - t0) / n_steps
    times = t0 + step * np.arange(n_steps + 1)
    m, n = x0.shape
    out = np.empty((n_steps + 1, m, n))
    out[0] = x0
    valid = np.ones(m, dtype=bool)
    x = x0.copy()

    def vel(t, pts):
        psi, grad, _ = wf.derivatives(t, pts)
        rho = np.abs(psi) ** 2
        bad = rho <= eps_rho
        v = (np.conj(psi)[:, None] * grad).imag / (wf.masses * np.where(bad, 1.0, rho)[:, None])
        return velocity_scale * v, bad

    for k in range(n_steps):
        t = times[k]
        live = valid.copy()
        xs = x[live]
        k1, b1 = vel(t, xs)
        k2, b2 = vel(t + step / 2, xs + step / 2 * k1)
        k3, b3 = vel(t + step / 2, xs + step / 2 * k2)
        k4, b4 = vel(t + step, xs + step * k3)
        bad = b1 | b2 | b3 | b4
        xs_new = xs + step / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        xs_new[bad] = xs[bad]
        x[live] = xs_new
        idx = np.flatnonzero(live)
        valid[idx[bad]] = False
        out[k + 1] = x
    return times, out, valid


def nr_integrate(wf, x0, t0, t1, h=1e-3, eps_rho=None, velocity_scale=1.0):
    """Integrate the guiding equation with fixed-step classical RK4.

    ``x0`` of shape (N,) yields one :class:`NrTrajectory`; shape (M, N) yields a
    list. ``eps_rho`` defaults to 1e-12 times the peak density at ``t0``.
    """
    single = np.ndim(x0) <= 1
    x0 = wf.check_domain(x0)
    if not t1 > t0:
        raise ValueError("t1 must exceed t0")
    check_positive(h, "h")
    if eps_rho is None:
        eps_rho = NODE_GUARD * peak_density(wf, t0)
    rho0 = nr_density(wf, t0, x0)
    if np.any(rho0 <= eps_rho):
        raise NodeProximityError("initial configuration sits at a node of the wave function")
    times, pos, valid = _rk4_batch(wf, x0, t0, t1, h, eps_rho, velocity_scale)
    trajs = [NrTrajectory(times, pos[:, j, :], bool(valid[j])) for j in range(x0.shape[0])]
    return trajs[0] if single else trajs


def nr_sample(wf, t, count, seed=0):
    """Draw ``count`` configurations from |psi_t|^2 (rejection sampling)."""
    count = check_count(count, "count")
    lo, hi = wf.support_box(t)

    def dens(pts):
        return nr_density(wf, t, pts)

    bound, _ = scan_bound(dens, lo, hi)
    return rejection_sample(dens, lo, hi, bound, count, seed)


def marginal_histogram(wf, i, t, bins, nsig=6.0):
    """Bin edges over mean +- nsig*std of the i-th marginal and exact bin masses."""
    lo, hi = wf.support_box(t)
    xs = np.linspace(lo[i], hi[i], 4001)
    p = wf.marginal_density(i, t, xs)
    w = p / p.sum()
    mu = float(w @ xs)
    sd = math.sqrt(float(w @ (xs - mu) ** 2))
    edges = np.linspace(mu - nsig * sd, mu + nsig * sd, bins + 1)
    return edges, bin_probabilities_1d(lambda z: wf.marginal_density(i, t, z), edges)


def nr_equivariance(wf, t0, t1, count, bins=30, seed=0, h=1e-3, velocity_scale=1.0, return_final=False):
    """Sample at ``t0``, transport to ``t1`` and compare marginals with |psi_t1|^2.

    ``velocity_scale`` != 1 corrupts the guiding law (negative control).
    With ``return_final`` the transported configurations (M, N) are returned too.
    """
    count = check_count(count, "count", minimum=100)
    x0 = nr_sample(wf, t0, count, seed)
    if t1 > t0:
        eps = NODE_GUARD * peak_density(wf, t0)
        _, pos, valid = _rk4_batch(wf, x0, t0, t1, h, eps, velocity_scale)
        final = pos[-1]
        failures = int((~valid).sum())
    else:
        final = x0
        failures = 0
    distances = []
    for i in range(wf.n_particles):
        edges, probs = marginal_histogram(wf, i, t1, bins)
        distances.append(l1_distance(final[:, i], edges, probs))
    report = DistanceReport(
        distances=tuple(distances),
        bins=bins,
        noise_floor=noise_floor(bins, count),
        count=count,
        failures=failures,
    )
    return (report, final) if return_final else report
