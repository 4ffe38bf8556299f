"""Spacelike leaves and foliations of 1+1 Minkowski spacetime.

Every leaf is a graph t = T(x) with sup |T'| < 1. Foliations are
one-parameter families ``leaf(s)``; all of them expose the same vectorized
interface (``time``, ``slope``, ``normal``, ``advance``) so the integrator
never needs to know which family it is stepping through.
"""

from __future__ import annotations

import math

import numpy as np

from ._validation import DegenerateStepError, PhysicsError, check_scalar, check_velocity
from .dirac import PoincareTransform

DEFAULT_DOMAIN = (-20.0, 20.0)
SHAPE_SLOPE_LIMIT = 0.8
LEAF_SLOPE_LIMIT = 0.98
VALIDATION_STEP = 0.01
LAND_TOL = 1e-12
DEGENERATE = 1e-9


def normal_from_slope(slope):
    slope = np.asarray(slope, dtype=float)
    if np.any(np.abs(slope) >= 1.0):
        raise PhysicsError("leaf is not spacelike at the requested point (|T'| >= 1)")
    g = 1.0 / np.sqrt(1.0 - slope ** 2)
    return np.stack([g, g * slope], axis=-1)


class Leaf:
    """A spacelike graph t = T(x)."""

    def time(self, x):
        raise NotImplementedError

    def slope(self, x):
        raise NotImplementedError

    def normal(self, x):
        return normal_from_slope(self.slope(x))

    def contains(self, points, tol=1e-9):
        pts = np.asarray(points, dtype=float)
        return np.abs(self.time(pts[..., 1]) - pts[..., 0]) <= tol


class FlatLeaf(Leaf):
    """gamma (t - v x) = tau: the equal-time line of a frame moving with velocity v."""

    def __init__(self, velocity=0.0, tau=0.0):
        self.velocity = check_velocity(velocity)
        self.tau = check_scalar(tau, "tau")
        self.gamma = 1.0 / math.sqrt(1.0 - self.velocity ** 2)

    def time(self, x):
        return self.velocity * np.asarray(x, dtype=float) + self.tau / self.gamma

    def slope(self, x):
        return np.full(np.shape(x), self.velocity)

    def normal(self, x):
        shape = np.shape(x)
        out = np.empty(shape + (2,))
        out[..., 0] = self.gamma
        out[..., 1] = self.gamma * self.velocity
        return out

    def __repr__(self):
        return f"FlatLeaf(velocity={self.velocity}, tau={self.tau})"


class GraphLeaf(Leaf):
    """t = T(x) from callables; validated spacelike on a 0.01 grid over ``domain``."""

    def __init__(self, time_fn, slope_fn, slope_max=LEAF_SLOPE_LIMIT, domain=DEFAULT_DOMAIN, validate=True):
        self._time = time_fn
        self._slope = slope_fn
        self.slope_max = float(slope_max)
        self.domain = tuple(domain)
        if not self.slope_max < 1.0:
            raise PhysicsError("slope bound must be < 1")
        if validate:
            xs = np.arange(domain[0], domain[1] + VALIDATION_STEP / 2, VALIDATION_STEP)
            worst = float(np.max(np.abs(self._slope(xs))))
            if worst > self.slope_max:
                raise PhysicsError(f"leaf slope {worst:.4f} exceeds bound {self.slope_max}")

    def time(self, x):
        return self._time(np.asarray(x, dtype=float))

    def slope(self, x):
        return self._slope(np.asarray(x, dtype=float))


def unit_normal(leaf, x):
    """Future-pointing unit normal (1, T')/sqrt(1 - T'^2) of ``leaf`` at x."""
    return leaf.normal(x)


class TanhShape:
    """f(x) = a tanh((x - x0) / w)."""

    def __init__(self, amplitude, center=0.0, width=1.0):
        self.amplitude = check_scalar(amplitude, "amplitude")
        self.center = check_scalar(center, "center")
        self.width = check_scalar(width, "width", lo=0.0, lo_open=True)
        if abs(self.amplitude) / self.width > SHAPE_SLOPE_LIMIT:
            raise PhysicsError(
                f"tanh shape slope |a|/w = {abs(self.amplitude) / self.width:.3f} exceeds {SHAPE_SLOPE_LIMIT}"
            )
        self.slope_max = abs(self.amplitude) / self.width

    def __call__(self, x):
        return self.amplitude * np.tanh((x - self.center) / self.width)

    def derivative(self, x):
        return self.amplitude / self.width / np.cosh((x - self.center) / self.width) ** 2

    def describe(self):
        return f"tanh(a={self.amplitude:g},x0={self.center:g},w={self.width:g})"


class SinShape:
    """f(x) = a sin(omega x)."""

    def __init__(self, amplitude, omega=1.0):
        self.amplitude = check_scalar(amplitude, "amplitude")
        self.omega = check_scalar(omega, "omega")
        if abs(self.amplitude * self.omega) > SHAPE_SLOPE_LIMIT:
            raise PhysicsError(
                f"sin shape slope |a omega| = {abs(self.amplitude * self.omega):.3f} exceeds {SHAPE_SLOPE_LIMIT}"
            )
        self.slope_max = abs(self.amplitude * self.omega)

    def __call__(self, x):
        return self.amplitude * np.sin(self.omega * x)

    def derivative(self, x):
        return self.amplitude * self.omega * np.cos(self.omega * x)

    def describe(self):
        return f"sin(a={self.amplitude:g},w={self.omega:g})"


class Foliation:
    """One-parameter family of leaves; ``leaf(s)`` lies strictly in the past of ``leaf(s')`` for s < s'."""

    label: str
    slope_max: float

    def time(self, s, x):
        raise NotImplementedError

    def slope(self, s, x):
        raise NotImplementedError

    def normal(self, s, x):
        return normal_from_slope(self.slope(s, x))

    def leaf(self, s):
        return GraphLeaf(
            lambda x: self.time(s, x),
            lambda x: self.slope(s, x),
            slope_max=min(self.slope_max, LEAF_SLOPE_LIMIT),
            validate=False,
        )

    def advance(self, s_next, points, directions):
        """Move each point along its direction until it meets ``leaf(s_next)``.

        Newton on lambda, safeguarded by a bisection bracket. The bracket
        follows from the slope bound: t + lambda d0 - T(x + lambda d1) grows at
        least at rate d0 - k |d1| > 0.
        """
        pts = np.asarray(points, dtype=float)
        d = np.asarray(directions, dtype=float)
        t0, x0 = pts[..., 0], pts[..., 1]
        gap0 = t0 - self.time(s_next, x0)
        if np.any(gap0 > LAND_TOL):
            raise ValueError("target leaf is not in the future of the point")
        rate = d[..., 0] - self.slope_max * np.abs(d[..., 1])
        if np.any(rate < DEGENERATE):
            raise DegenerateStepError("direction nearly tangent to the leaf family")
        lo = np.zeros_like(t0)
        hi = np.maximum(-gap0, 0.0) / rate
        lam = np.clip(-gap0 / d[..., 0], lo, hi)
        for _ in range(200):
            x = x0 + lam * d[..., 1]
            g = t0 + lam * d[..., 0] - self.time(s_next, x)
            if np.all(np.abs(g) <= 0.1 * LAND_TOL):
                break
            lo = np.where(g < 0, lam, lo)
            hi = np.where(g > 0, lam, hi)
            step = lam - g / (d[..., 0] - self.slope(s_next, x) * d[..., 1])
            inside = (step > lo) & (step < hi)
            lam = np.where(inside, step, 0.5 * (lo + hi))
        x_new = x0 + lam * d[..., 1]
        return np.stack([self.time(s_next, x_new), x_new], axis=-1)

    def transformed(self, g):
        return TransformedFoliation(self, g)

    def __repr__(self):
        return f"{type(self).__name__}({self.label!r})"


class FlatFoliation(Foliation):
    """Leaves gamma (t - v x) = s + offset: the simultaneity slices of one inertial frame."""

    def __init__(self, velocity=0.0, offset=0.0, label=None):
        self.velocity = check_velocity(velocity)
        self.offset = check_scalar(offset, "offset")
        self.gamma = 1.0 / math.sqrt(1.0 - self.velocity ** 2)
        self.slope_max = abs(self.velocity)
        # Rounded so boost roundoff does not leak into labels (and their RNG streams).
        self.label = label or f"Flat({round(self.velocity, 12) + 0.0:g})"

    def time(self, s, x):
        return self.velocity * np.asarray(x, dtype=float) + (s + self.offset) / self.gamma

    def slope(self, s, x):
        return np.full(np.shape(x), self.velocity)

    def normal(self, s, x):
        return FlatLeaf(self.velocity).normal(x)

    def leaf(self, s):
        return FlatLeaf(self.velocity, s + self.offset)

    @property
    def normal_vector(self):
        return np.array([self.gamma, self.gamma * self.velocity])

    def advance(self, s_next, points, directions):
        pts = np.asarray(points, dtype=float)
        d = np.asarray(directions, dtype=float)
        n = self.normal_vector
        nd = n[0] * d[..., 0] - n[1] * d[..., 1]
        if np.any(nd < DEGENERATE):
            raise DegenerateStepError("direction nearly tangent to the leaf family")
        npnt = n[0] * pts[..., 0] - n[1] * pts[..., 1]
        lam = (s_next + self.offset - npnt) / nd
        if np.any(lam < -LAND_TOL):
            raise ValueError("target leaf is not in the future of the point")
        return pts + lam[..., None] * d

    def transformed(self, g):
        n_new = g.apply_vector(self.normal_vector)
        a = np.asarray(g.translation)
        shift = n_new[0] * a[0] - n_new[1] * a[1]
        label = self.label if g.rapidity == 0.0 else None
        return FlatFoliation(n_new[1] / n_new[0], self.offset + shift, label=label)


class CurvedFoliation(Foliation):
    """Leaves t = s + f(x), with f frozen to its boundary value outside ``domain``."""

    def __init__(self, shape, domain=DEFAULT_DOMAIN, label=None):
        self.shape = shape
        self.domain = tuple(float(d) for d in domain)
        self.slope_max = shape.slope_max
        self.label = label or shape.describe()

    def time(self, s, x):
        x = np.asarray(x, dtype=float)
        return s + self.shape(np.clip(x, *self.domain))

    def slope(self, s, x):
        x = np.asarray(x, dtype=float)
        inside = (x >= self.domain[0]) & (x <= self.domain[1])
        return np.where(inside, self.shape.derivative(np.clip(x, *self.domain)), 0.0)


def _smoothstep(u):
    u = np.clip(u, 0.0, 1.0)
    return u * u * u * (10.0 + u * (-15.0 + 6.0 * u))


def _smoothstep_prime(u):
    inside = (u > 0.0) & (u < 1.0)
    u = np.clip(u, 0.0, 1.0)
    return np.where(inside, 30.0 * u * u * (1.0 - u) ** 2, 0.0)


class DeformedFoliation(Foliation):
    """``base`` lifted by ``bump * profile(x) * mask(s, x)`` away from a trajectory.

    The mask vanishes within ``margin`` of every crossing point of the
    trajectory with leaf(s) and reaches 1 a distance ``ramp`` further out.
    With ``margin == 0`` nothing is protected and the mask is 1 everywhere.
    The profile 0.75 + 0.25 tanh(x / scale) is deliberately non-constant so the
    lift changes the synchronization it is applied to.
    """

    def __init__(self, base, knots_s, knots_x, margin, bump, ramp=0.5, scale=2.0, label=None, domain=DEFAULT_DOMAIN):
        self.base = base
        self.knots_s = np.asarray(knots_s, dtype=float)
        self.knots_x = np.asarray(knots_x, dtype=float).reshape(len(self.knots_s), -1)
        self.margin = check_scalar(margin, "margin", lo=0.0)
        self.bump = check_scalar(bump, "bump")
        self.ramp = check_scalar(ramp, "ramp", lo=0.0, lo_open=True)
        self.scale = check_scalar(scale, "scale", lo=0.0, lo_open=True)
        self.domain = tuple(domain)
        self.label = label or f"{base.label}~deformed(margin={self.margin:g},bump={self.bump:g})"
        self.slope_max = LEAF_SLOPE_LIMIT
        self._validate()

    def _crossings(self, s):
        return np.array([np.interp(s, self.knots_s, self.knots_x[:, i]) for i in range(self.knots_x.shape[1])])

    def _mask(self, s, x):
        if self.margin == 0.0:
            return np.ones_like(x), np.zeros_like(x)
        cx = self._crossings(s)
        diff = x[..., None] - cx
        k = np.argmin(np.abs(diff), axis=-1)
        nearest = np.take_along_axis(diff, k[..., None], axis=-1)[..., 0]
        u = (np.abs(nearest) - self.margin) / self.ramp
        return _smoothstep(u), _smoothstep_prime(u) * np.sign(nearest) / self.ramp

    def _profile(self, x):
        th = np.tanh(x / self.scale)
        return 0.75 + 0.25 * th, 0.25 * (1 - th ** 2) / self.scale

    def time(self, s, x):
        x = np.asarray(x, dtype=float)
        mask, _ = self._mask(s, x)
        prof, _ = self._profile(x)
        return self.base.time(s, x) + self.bump * prof * mask

    def slope(self, s, x):
        x = np.asarray(x, dtype=float)
        mask, dmask = self._mask(s, x)
        prof, dprof = self._profile(x)
        return self.base.slope(s, x) + self.bump * (dprof * mask + prof * dmask)

    def _validate(self):
        xs = np.arange(self.domain[0], self.domain[1] + VALIDATION_STEP / 2, VALIDATION_STEP)
        stride = max(1, len(self.knots_s) // 50)
        samples = self.knots_s[::stride]
        worst = max(float(np.max(np.abs(self.slope(s, xs)))) for s in samples)
        if worst > LEAF_SLOPE_LIMIT:
            raise PhysicsError(
                f"deformation violates the spacelike bound: slope {worst:.3f} > {LEAF_SLOPE_LIMIT}"
            )
        if len(samples) > 1:
            times = np.array([self.time(s, xs) for s in samples])
            if np.any(np.diff(times, axis=0) <= 0):
                raise PhysicsError("deformation breaks the ordering of leaves")


class TransformedFoliation(Foliation):
    """Image g F of a foliation under a Poincare transformation.

    Stepping is done by pulling points back to the base foliation, which is
    exact because g is affine.
    """

    def __init__(self, base, g, label=None):
        self.base = base
        self.g = g
        self.g_inv = g.inverse()
        self.slope_max = LEAF_SLOPE_LIMIT
        self.label = label or f"g[{base.label}]"

    def _base_x(self, s, x):
        """Base-frame coordinate whose image on leaf(s) has spatial coordinate x.

        The image coordinate is strictly increasing in the base coordinate
        (derivative >= cosh - |sinh| k > 0), so Newton converges from the
        pulled-back guess; bisection is the fallback.
        """
        x = np.asarray(x, dtype=float)
        lam = self.g.lorentz
        a1 = self.g.translation[1]

        def image_x(xb):
            return lam[1, 0] * self.base.time(s, xb) + lam[1, 1] * xb + a1

        xb = self.g_inv.apply(np.stack([np.zeros_like(x), x], axis=-1))[..., 1]
        for _ in range(50):
            r = image_x(xb) - x
            if np.all(np.abs(r) <= 1e-13 * np.maximum(1.0, np.abs(x))):
                return xb
            xb = xb - r / (lam[1, 0] * self.base.slope(s, xb) + lam[1, 1])
        width = np.ones_like(x)
        lo, hi = xb - width, xb + width
        for _ in range(200):
            bad_lo = image_x(lo) > x
            bad_hi = image_x(hi) < x
            if not (np.any(bad_lo) or np.any(bad_hi)):
                break
            width = width * 2.0
            lo = np.where(bad_lo, xb - width, lo)
            hi = np.where(bad_hi, xb + width, hi)
        for _ in range(200):
            if np.all(hi - lo <= 1e-14 * np.maximum(1.0, np.abs(lo))):
                break
            mid = 0.5 * (lo + hi)
            below = image_x(mid) < x
            lo = np.where(below, mid, lo)
            hi = np.where(below, hi, mid)
        return 0.5 * (lo + hi)

    def time(self, s, x):
        xb = self._base_x(s, x)
        pts = np.stack([self.base.time(s, xb), xb], axis=-1)
        return self.g.apply(pts)[..., 0]

    def slope(self, s, x):
        xb = self._base_x(s, x)
        k = self.base.slope(s, xb)
        lam = self.g.lorentz
        return (lam[0, 0] * k + lam[0, 1]) / (lam[1, 0] * k + lam[1, 1])

    def advance(self, s_next, points, directions):
        back_pts = self.g_inv.apply(points)
        back_dir = self.g_inv.apply_vector(directions)
        return self.g.apply(self.base.advance(s_next, back_pts, back_dir))

    def transformed(self, g):
        return TransformedFoliation(self.base, g.compose(self.g))


def advance_to_leaf(foliation, s_next, point, direction):
    """Point + lambda * direction on ``foliation.leaf(s_next)`` with lambda > 0."""
    return foliation.advance(s_next, point, direction)


def transform_leaf(g, leaf):
    if isinstance(leaf, FlatLeaf):
        n = g.apply_vector([leaf.gamma, leaf.gamma * leaf.velocity])
        a = np.asarray(g.translation)
        return FlatLeaf(n[1] / n[0], leaf.tau + n[0] * a[0] - n[1] * a[1])
    fol = _LeafAsFoliation(leaf)
    return TransformedFoliation(fol, g).leaf(0.0)


def transform_foliation(g, foliation):
    if g.is_identity():
        return foliation
    return foliation.transformed(g)


def transform_worldlines(g, points):
    """Apply g to an array of spacetime points (..., 2)."""
    if g.is_identity():
        return np.asarray(points, dtype=float)
    return g.apply(points)


class _LeafAsFoliation(Foliation):
    """Leaf(s) = leaf shifted by s in time; used to transform a lone graph leaf."""

    def __init__(self, leaf):
        self._leaf = leaf
        self.slope_max = getattr(leaf, "slope_max", LEAF_SLOPE_LIMIT)
        self.label = "leaf"

    def time(self, s, x):
        return s + self._leaf.time(x)

    def slope(self, s, x):
        return self._leaf.slope(x)


def deform_foliation_away(foliation, trajectory, margin, bump, ramp=0.5, scale=2.0):
    """Foliation agreeing with ``foliation`` near the trajectory's leaf crossings."""
    if bump == 0.0:
        return foliation
    xs = trajectory.points[..., 1]
    span = getattr(foliation, "domain", DEFAULT_DOMAIN)
    if margin > 0 and margin >= (span[1] - span[0]):
        return foliation
    return DeformedFoliation(foliation, trajectory.s, xs, margin, bump, ramp=ramp, scale=scale)


def check_ordering(foliation, s_values, xs=None):
    """True iff leaf times increase strictly with s at every sampled x."""
    if xs is None:
        xs = np.arange(DEFAULT_DOMAIN[0], DEFAULT_DOMAIN[1] + 0.05, 0.1)
    times = np.array([foliation.time(s, xs) for s in s_values])
    return bool(np.all(np.diff(times, axis=0) > 0))


def leaf_crossing(foliation, s, world_line):
    """First crossing of a polyline (K, 2) with leaf(s) by linear interpolation, or None."""
    wl = np.asarray(world_line, dtype=float)
    gap = wl[:, 0] - foliation.time(s, wl[:, 1])
    idx = np.flatnonzero((gap[:-1] <= 0) & (gap[1:] >= 0))
    if len(idx) == 0:
        return None
    k = idx[0]
    denom = gap[k + 1] - gap[k]
    u = 0.0 if denom == 0 else -gap[k] / denom
    return wl[k] + u * (wl[k + 1] - wl[k])


__all__ = [
    "FlatLeaf",
    "GraphLeaf",
    "Leaf",
    "Foliation",
    "FlatFoliation",
    "CurvedFoliation",
    "DeformedFoliation",
    "TransformedFoliation",
    "TanhShape",
    "SinShape",
    "PoincareTransform",
    "advance_to_leaf",
    "check_ordering",
    "deform_foliation_away",
    "leaf_crossing",
    "normal_from_slope",
    "transform_foliation",
    "transform_leaf",
    "transform_worldlines",
    "unit_normal",
]
