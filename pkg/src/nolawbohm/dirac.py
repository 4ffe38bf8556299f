"""Free multi-time Dirac wave functions in 1+1 dimensions.

Conventions: metric signature (+, -), hbar = c = 1, points are (t, x) pairs.
The gamma matrices are gamma0 = diag(1, -1) and gamma1 = [[0, 1], [-1, 0]].
A single-particle factor is a finite sum of exact plane-wave solutions, so the
multi-time wave function can be evaluated at any N-tuple of spacetime points
without solving a PDE. Spinor indices of particle i live on tensor axis i.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from ._kernels import mode_sum
from ._validation import PhysicsError, check_positive, check_scalar, check_velocity
from .sampling import simpson_weights

GAMMA0 = np.array([[1, 0], [0, -1]], dtype=complex)
GAMMA1 = np.array([[0, 1], [-1, 0]], dtype=complex)
IDENTITY = np.eye(2, dtype=complex)
METRIC = np.diag([1.0, -1.0])
# gamma0 @ gamma1; the Dirac adjoint turns gamma^mu into gamma0 gamma^mu.
ALPHA = GAMMA0 @ GAMMA1

RHO_CLAMP = 1e-12
ON_LEAF_TOL = 1e-9


def minkowski_dot(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return a[..., 0] * b[..., 0] - a[..., 1] * b[..., 1]


def check_unit_normal(n, tol=1e-9):
    n = np.asarray(n, dtype=float)
    if np.any(n[..., 0] <= 0):
        raise PhysicsError("normal must be future oriented (n0 > 0)")
    if np.any(np.abs(minkowski_dot(n, n) - 1.0) > tol):
        raise PhysicsError("normal must be unit timelike (n.n = 1)")
    return n


def gamma_dot(n):
    """gamma^mu n_mu = n0 gamma0 - n1 gamma1 for a future unit timelike ``n``."""
    n = check_unit_normal(n)
    return n[0] * GAMMA0 - n[1] * GAMMA1


def clifford_residual():
    """Max deviation from {gamma^mu, gamma^nu} = 2 g^{mu nu} I."""
    gam = (GAMMA0, GAMMA1)
    worst = 0.0
    for a in range(2):
        for b in range(2):
            anti = gam[a] @ gam[b] + gam[b] @ gam[a]
            worst = max(worst, np.abs(anti - 2 * METRIC[a, b] * IDENTITY).max())
    return float(worst)


def energy(p, mass):
    return np.sqrt(np.asarray(p, dtype=float) ** 2 + mass ** 2)


def spinor(p, mass, branch=1):
    """Unit-norm spinor of the plane wave exp(-i s E t + i p x), s = ``branch``.

    Positive branch: (E + m, p); negative branch: (-p, E + m).
    """
    p = np.asarray(p, dtype=float)
    e = energy(p, mass)
    scale = np.sqrt(2 * e * (e + mass))
    if branch > 0:
        u = np.stack([e + mass, p], axis=-1)
    else:
        u = np.stack([-p, e + mass], axis=-1)
    return (u / scale[..., None]).astype(complex)


def dirac_operator(signed_energy, p, mass):
    """gamma0 E - gamma1 p - m; annihilates the mode spinor."""
    return signed_energy * GAMMA0 - p * GAMMA1 - mass * IDENTITY


@dataclass(frozen=True)
class PlaneWaveMode:
    momentum: float
    mass: float = 1.0
    branch: int = 1
    coefficient: complex = 1.0

    def __post_init__(self):
        check_scalar(self.momentum, "momentum")
        check_positive(self.mass, "mass")
        if self.branch not in (1, -1):
            raise ValueError("branch must be +1 or -1")

    @property
    def energy(self):
        return float(energy(self.momentum, self.mass))

    @property
    def spinor(self):
        return spinor(self.momentum, self.mass, self.branch)

    def residual(self):
        op = dirac_operator(self.branch * self.energy, self.momentum, self.mass)
        return float(np.abs(op @ self.spinor).max())


@dataclass(frozen=True)
class DiracPacket:
    """Gaussian packet descriptor: position spread ``width`` at t = 0 (momentum spread 1/(2 width))."""

    center: float = 0.0
    momentum: float = 0.0
    width: float = 1.0
    branch: int = 1

    def __post_init__(self):
        check_scalar(self.center, "center")
        check_scalar(self.momentum, "momentum")
        check_positive(self.width, "width")
        if self.branch not in (1, -1):
            raise ValueError("branch must be +1 or -1")

    @property
    def momentum_width(self):
        return 1.0 / (2.0 * self.width)


class SpinorField:
    """sum_k w_k exp(-i E_k t + i p_k x) with signed energies E_k and weights w_k in C^2."""

    def __init__(self, momenta, energies, weights, mass):
        self.momenta = np.ascontiguousarray(momenta, dtype=float)
        self.energies = np.ascontiguousarray(energies, dtype=float)
        self.weights = np.ascontiguousarray(weights, dtype=complex)
        self.mass = float(mass)
        for a in (self.momenta, self.energies, self.weights):
            a.setflags(write=False)

    def __call__(self, t, x):
        x = np.asarray(x, dtype=float)
        flat = x.reshape(-1)
        t = np.broadcast_to(np.asarray(t, dtype=float), x.shape).reshape(-1)
        return mode_sum(t, flat, self.momenta, self.energies, self.weights).reshape(x.shape + (2,))

    def transformed(self, g):
        lam = g.lorentz
        e_new = lam[0, 0] * self.energies + lam[0, 1] * self.momenta
        p_new = lam[1, 0] * self.energies + lam[1, 1] * self.momenta
        phase = np.exp(1j * (e_new * g.translation[0] - p_new * g.translation[1]))
        w_new = (self.weights @ g.spinor_matrix.T) * phase[:, None]
        return SpinorField(p_new, e_new, w_new, self.mass)


class MultiTimeWaveFunction:
    """psi(x_1, ..., x_N) = sum_terms c * phi_1(x_1) (x) ... (x) phi_N(x_N).

    ``factors[i]`` lists the distinct single-particle fields of particle i and
    each term is ``(coefficient, (index_1, ..., index_N))`` into those lists.
    """

    def __init__(self, factors, terms, period=None):
        self.factors = tuple(tuple(f) for f in factors)
        self.terms = tuple((complex(c), tuple(int(j) for j in idx)) for c, idx in terms)
        self.n_particles = len(self.factors)
        if self.n_particles < 1 or not self.terms:
            raise ValueError("need at least one particle and one term")
        for _, idx in self.terms:
            if len(idx) != self.n_particles:
                raise ValueError("term index tuple must name one factor per particle")
        self.masses = np.array([fs[0].mass for fs in self.factors])
        self._groups = tuple(_group_fields(fs) for fs in self.factors)
        # Spatial period of the discrete mode sums (None once the grid is no longer uniform).
        self.period = period

    @classmethod
    def from_modes(cls, modes_per_particle):
        """Bare plane-wave superpositions (unnormalizable; local tests only)."""
        factors = []
        for modes in modes_per_particle:
            p = np.array([md.momentum for md in modes])
            e = np.array([md.branch * md.energy for md in modes])
            w = np.array([md.coefficient * md.spinor for md in modes])
            factors.append((SpinorField(p, e, w, modes[0].mass),))
        return cls(factors, [(1.0, (0,) * len(factors))])

    @classmethod
    def from_packets(cls, terms, masses=None, n_modes=64, cutoff=6.0, normalize=True):
        """Build a packet superposition on a shared uniform momentum grid per particle.

        ``terms`` is a sequence of ``(coefficient, packets)`` with one
        :class:`DiracPacket` per particle. Normalization is exact (Parseval over
        one spatial period of the discrete mode sum).
        """
        terms = [(complex(c), tuple(ps)) for c, ps in terms]
        n = len(terms[0][1])
        if any(len(ps) != n for _, ps in terms):
            raise ValueError("every term needs one packet per particle")
        masses = np.ones(n) if masses is None else np.asarray(masses, dtype=float)
        if masses.shape != (n,) or np.any(masses <= 0):
            raise PhysicsError("masses must be positive, one per particle")
        if n_modes < 2:
            raise ValueError("packets need at least two modes")
        factors, index, spacing = [], [], []
        for i in range(n):
            packets = []
            for _, ps in terms:
                if ps[i] not in packets:
                    packets.append(ps[i])
            lo = min(pk.momentum - cutoff * pk.momentum_width for pk in packets)
            hi = max(pk.momentum + cutoff * pk.momentum_width for pk in packets)
            grid = np.linspace(lo, hi, n_modes)
            dp = grid[1] - grid[0]
            branches = sorted({pk.branch for pk in packets}, reverse=True)
            p_all = np.concatenate([grid] * len(branches))
            e_all = np.concatenate([b * energy(grid, masses[i]) for b in branches])
            fields = []
            for pk in packets:
                amp = np.exp(-((grid - pk.momentum) ** 2) / (4 * pk.momentum_width ** 2) - 1j * grid * pk.center)
                w = np.zeros((len(p_all), 2), dtype=complex)
                b = branches.index(pk.branch)
                w[b * n_modes:(b + 1) * n_modes] = amp[:, None] * spinor(grid, masses[i], pk.branch)
                # Unit norm over one period 2 pi / dp.
                w /= math.sqrt(2 * np.pi / dp * np.sum(np.abs(w) ** 2))
                fields.append(SpinorField(p_all, e_all, w, masses[i]))
            factors.append(fields)
            index.append({pk: j for j, pk in enumerate(packets)})
            spacing.append(dp)
        idx_terms = [(c, tuple(index[i][ps[i]] for i in range(n))) for c, ps in terms]
        period = min(2 * np.pi / dp for dp in spacing)
        wf = cls(factors, idx_terms, period=period)
        if normalize:
            total = wf.reference_norm()
            if not total > 0:
                raise ValueError("superposition has zero norm")
            wf = cls(factors, [(c / math.sqrt(total), idx) for c, idx in idx_terms], period=period)
        return wf

    def reference_norm(self):
        """Exact norm on the t = 0 rest leaf via per-particle Parseval overlaps."""
        if self.period is None:
            raise ValueError("exact norm only available for uniform-grid packet states")
        overlaps = []
        for fs in self.factors:
            span = 2 * np.pi / (fs[0].momenta[1] - fs[0].momenta[0])
            overlaps.append(np.array([[span * np.vdot(a.weights, b.weights) for b in fs] for a in fs]))
        total = 0.0 + 0.0j
        for ca, ia in self.terms:
            for cb, ib in self.terms:
                v = np.conj(ca) * cb
                for i in range(self.n_particles):
                    v *= overlaps[i][ia[i], ib[i]]
                total += v
        return float(total.real)

    def factor_values(self, i, t, x):
        """Values of every distinct field of particle i at (t, x); list of (..., 2)."""
        x = np.asarray(x, dtype=float)
        flat = x.reshape(-1)
        tt = np.broadcast_to(np.asarray(t, dtype=float), x.shape).reshape(-1)
        out = [None] * len(self.factors[i])
        for p, e, w, members in self._groups[i]:
            vals = mode_sum(tt, flat, p, e, w)
            for j, v in zip(members, vals):
                out[j] = v.reshape(x.shape + (2,))
        return out

    def tensor(self, t, x):
        """psi at configurations t, x of shape (M, N); result shape (M, 2, ..., 2)."""
        t = np.asarray(t, dtype=float)
        x = np.asarray(x, dtype=float)
        vals = [self.factor_values(i, t[:, i], x[:, i]) for i in range(self.n_particles)]
        out = None
        for c, idx in self.terms:
            term = vals[0][idx[0]] * c
            for i in range(1, self.n_particles):
                term = term[..., None] * vals[i][idx[i]].reshape((len(x),) + (1,) * i + (2,))
            out = term if out is None else out + term
        return out

    def grid_tensor(self, t_axes, x_axes):
        """psi on a tensor grid, one axis of points per particle.

        Returns shape (n_1, ..., n_N, 2, ..., 2).
        """
        vals = [self.factor_values(i, t_axes[i], x_axes[i]) for i in range(self.n_particles)]
        sizes = [len(x) for x in x_axes]
        n = self.n_particles
        out = None
        for c, idx in self.terms:
            term = np.asarray(c)
            for i in range(n):
                v = vals[i][idx[i]]
                shape = [1] * (2 * n)
                shape[i] = sizes[i]
                shape[n + i] = 2
                term = term * v.reshape(shape)
            out = term if out is None else out + term
        return out


def _group_fields(fields):
    """Bundle fields that share one mode grid so each phase is computed once."""
    groups = []
    for j, f in enumerate(fields):
        for g in groups:
            if np.array_equal(g[0], f.momenta) and np.array_equal(g[1], f.energies):
                g[2].append(f.weights)
                g[3].append(j)
                break
        else:
            groups.append((f.momenta, f.energies, [f.weights], [j]))
    return tuple((p, e, np.ascontiguousarray(np.stack(w)), tuple(m)) for p, e, w, m in groups)


def evaluate_psi(wf, points):
    """Spinor tensor at N spacetime points; ``points`` has shape (N, 2) or (M, N, 2)."""
    pts = np.asarray(points, dtype=float)
    single = pts.ndim == 2
    if single:
        pts = pts[None]
    if pts.shape[1:] != (wf.n_particles, 2):
        raise ValueError(f"expected points of shape (M, {wf.n_particles}, 2), got {pts.shape}")
    out = wf.tensor(pts[..., 0], pts[..., 1])
    return out[0] if single else out


def normal_matrix(n):
    """gamma0 (gamma . n) = n0 I - n1 alpha, batched over leading axes of ``n``."""
    n = np.asarray(n, dtype=float)
    out = np.empty(n.shape[:-1] + (2, 2))
    out[..., 0, 0] = n[..., 0]
    out[..., 1, 1] = n[..., 0]
    out[..., 0, 1] = -n[..., 1]
    out[..., 1, 0] = -n[..., 1]
    return out


def _apply(psi, mats, axis):
    """Contract a batch of 2x2 matrices (M, 2, 2) into spinor axis ``axis`` of psi (M, 2, ..., 2)."""
    moved = np.moveaxis(psi, axis + 1, -1)
    out = np.einsum("m...b,mab->m...a", moved, mats)
    return np.moveaxis(out, -1, axis + 1)


def _swap(psi, axis):
    return np.flip(psi, axis=axis + 1)


def _bilinear(psi, other):
    return (np.conj(psi) * other).reshape(len(psi), -1).sum(axis=1).real


def _clamp(rho):
    return np.where((rho < 0) & (rho >= -RHO_CLAMP), 0.0, rho)


def density_and_currents(psi, normals):
    """rho_Sigma and the currents j_i for a batch of spinor tensors.

    ``psi`` has shape (M, 2, ..., 2) and ``normals`` shape (M, N, 2). Returns
    rho (M,) and j (M, N, 2) with contravariant components (j0, j1).
    """
    n = psi.ndim - 1
    mats = [normal_matrix(normals[:, i]) for i in range(n)]
    full = psi
    for i in range(n):
        full = _apply(full, mats[i], i)
    rho = _clamp(_bilinear(psi, full))
    currents = np.empty((psi.shape[0], n, 2))
    for i in range(n):
        part = psi
        for j in range(n):
            if j != i:
                part = _apply(part, mats[j], j)
        currents[:, i, 0] = _bilinear(psi, part)
        currents[:, i, 1] = _bilinear(psi, _swap(part, i))
    return rho, currents


def _leaf_points(leaf, config):
    """Split a configuration on ``leaf`` into times, positions and unit normals.

    Three-dimensional input is read as spacetime points (M, N, 2); anything of
    lower rank as spatial coordinates (M, N).
    """
    pts = np.asarray(config, dtype=float)
    if pts.ndim == 3:
        t, x = pts[..., 0], pts[..., 1]
        off = np.abs(leaf.time(x) - t)
        if np.any(off > ON_LEAF_TOL):
            raise PhysicsError(f"configuration point lies {off.max():.3e} off the leaf")
    else:
        x = np.atleast_2d(pts)
        t = leaf.time(x)
    return t, x, leaf.normal(x)


def rho_sigma(wf, leaf, config):
    """Hypersurface density at configurations on ``leaf``.

    ``config`` is either spacetime points (M, N, 2) that must lie on the
    leaf, or spatial coordinates (M, N) whose times are read off the leaf.
    """
    t, x, normals = _leaf_points(leaf, config)
    rho, _ = density_and_currents(wf.tensor(t, x), normals)
    return rho


def current_i_sigma(wf, leaf, config, i):
    """Current of particle ``i`` at configurations on ``leaf``; shape (M, 2)."""
    t, x, normals = _leaf_points(leaf, config)
    _, j = density_and_currents(wf.tensor(t, x), normals)
    return j[:, i]


def leaf_density_grid(wf, leaf, axes):
    """Density w.r.t. the coordinates x_i on a tensor grid (includes proper-length factors).

    ``axes`` gives one 1-D array of x values per particle.
    """
    n = wf.n_particles
    axes = [np.asarray(a, dtype=float) for a in axes]
    t_axes = [leaf.time(a) for a in axes]
    psi = wf.grid_tensor(t_axes, axes)
    grid_shape = psi.shape[:n]
    flat = psi.reshape((-1,) + (2,) * n)
    full = flat
    for i in range(n):
        nrm = leaf.normal(axes[i])
        mats = normal_matrix(nrm)
        shape = [1] * n
        shape[i] = len(axes[i])
        mats = np.broadcast_to(mats.reshape(tuple(shape) + (2, 2)), grid_shape + (2, 2)).reshape(-1, 2, 2)
        full = _apply(full, mats, i)
    rho = _clamp(_bilinear(flat, full)).reshape(grid_shape)
    for i in range(n):
        shape = [1] * n
        shape[i] = len(axes[i])
        rho = rho * np.sqrt(1.0 - leaf.slope(axes[i]) ** 2).reshape(shape)
    return rho


def normalization(wf, leaf, domain=(-20.0, 20.0), points=801, coverage_tol=1e-6):
    """Integral of rho_Sigma over Sigma^N with proper-length measure (composite Simpson).

    Warns when the marginal density at the domain boundary exceeds
    ``coverage_tol`` times its peak.
    """
    xs = np.linspace(domain[0], domain[1], points)
    w = simpson_weights(points, xs[1] - xs[0])
    dens = leaf_density_grid(wf, leaf, [xs] * wf.n_particles)
    total = dens
    for _ in range(wf.n_particles):
        total = np.tensordot(total, w, axes=([0], [0]))
    for i in range(wf.n_particles):
        marg = np.moveaxis(dens, i, 0)
        for _ in range(wf.n_particles - 1):
            marg = np.tensordot(marg, w, axes=([1], [0]))
        if max(marg[0], marg[-1]) > coverage_tol * max(marg.max(), 1e-300):
            warnings.warn(
                f"particle {i}: boundary density {max(marg[0], marg[-1]):.3e} suggests the "
                "quadrature domain does not cover the state",
                RuntimeWarning,
                stacklevel=2,
            )
    return float(total)


@dataclass(frozen=True)
class PoincareTransform:
    """x -> Lambda(rapidity) x + translation, with spinor matrix S(rapidity).

    ``Lambda(eta) = [[cosh eta, sinh eta], [sinh eta, cosh eta]]`` and
    ``S(eta) = exp(eta gamma0 gamma1 / 2)``. :meth:`boost` builds the change to
    the coordinates of an observer moving with velocity ``v``, i.e. rapidity
    ``-atanh(v)``: a particle at rest acquires velocity ``-v``.
    """

    rapidity: float = 0.0
    translation: tuple = (0.0, 0.0)

    def __post_init__(self):
        check_scalar(self.rapidity, "rapidity")
        a = tuple(float(c) for c in self.translation)
        if len(a) != 2 or not all(np.isfinite(a)):
            raise ValueError("translation must be a finite (a0, a1) pair")
        object.__setattr__(self, "translation", a)

    @classmethod
    def boost(cls, velocity, translation=(0.0, 0.0)):
        return cls(-math.atanh(check_velocity(velocity)), translation)

    @classmethod
    def shift(cls, a0=0.0, a1=0.0):
        return cls(0.0, (a0, a1))

    @property
    def velocity(self):
        """Velocity of the observer whose coordinates this transform produces."""
        return -math.tanh(self.rapidity)

    @property
    def lorentz(self):
        ch, sh = math.cosh(self.rapidity), math.sinh(self.rapidity)
        return np.array([[ch, sh], [sh, ch]])

    @property
    def spinor_matrix(self):
        ch, sh = math.cosh(self.rapidity / 2), math.sinh(self.rapidity / 2)
        return np.array([[ch, sh], [sh, ch]], dtype=complex)

    def apply(self, points):
        pts = np.asarray(points, dtype=float)
        return pts @ self.lorentz.T + np.asarray(self.translation)

    def apply_vector(self, vectors):
        return np.asarray(vectors, dtype=float) @ self.lorentz.T

    def inverse(self):
        back = PoincareTransform(-self.rapidity)
        a = -back.apply_vector(self.translation)
        return PoincareTransform(-self.rapidity, tuple(a))

    def compose(self, first):
        """``self`` after ``first``."""
        a = self.apply_vector(first.translation) + np.asarray(self.translation)
        return PoincareTransform(self.rapidity + first.rapidity, tuple(a))

    def is_identity(self):
        return self.rapidity == 0.0 and self.translation == (0.0, 0.0)


def intertwining_residual(rapidity):
    """max |S^-1 gamma^mu S - Lambda^mu_nu gamma^nu| over mu."""
    g = PoincareTransform(rapidity)
    s = g.spinor_matrix
    s_inv = np.linalg.inv(s)
    lam = g.lorentz
    gam = (GAMMA0, GAMMA1)
    return float(
        max(np.abs(s_inv @ gam[mu] @ s - (lam[mu, 0] * gam[0] + lam[mu, 1] * gam[1])).max() for mu in range(2))
    )


def metric_residual(rapidity):
    lam = PoincareTransform(rapidity).lorentz
    return float(np.abs(lam.T @ METRIC @ lam - METRIC).max())


def apply_poincare(g, wf):
    """(U_g psi)(x_1..x_N) = S x ... x S psi(g^-1 x_1, ..., g^-1 x_N), exact in the mode basis."""
    if g.is_identity():
        return wf
    factors = [[f.transformed(g) for f in fs] for fs in wf.factors]
    period = wf.period if g.rapidity == 0.0 else None
    return MultiTimeWaveFunction(factors, wf.terms, period=period)
