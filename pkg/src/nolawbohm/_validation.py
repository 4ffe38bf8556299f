"""Input validation helpers shared by the estimators and the CLI."""

from __future__ import annotations

import numbers

import numpy as np


class PhysicsError(ValueError):
    """A physical precondition is violated (superluminal frame, bad width, ...)."""


class DomainError(ValueError):
    """A query point lies outside the representable domain."""


class NodeProximityError(RuntimeError):
    """Density fell below the node guard while integrating a trajectory."""


class DegenerateStepError(RuntimeError):
    """A step direction is (numerically) tangent to the target leaf."""


class EnvelopeError(RuntimeError):
    """Rejection-sampling envelope does not dominate the target density."""


def check_scalar(value, name, *, lo=None, hi=None, lo_open=False, hi_open=False):
    if not isinstance(value, numbers.Real) or isinstance(value, bool):
        raise TypeError(f"{name} must be a real number, got {type(value).__name__}")
    value = float(value)
    if not np.isfinite(value):
        raise PhysicsError(f"{name} must be finite, got {value}")
    if lo is not None and (value < lo or (lo_open and value == lo)):
        raise PhysicsError(f"{name}={value} below allowed bound {lo}")
    if hi is not None and (value > hi or (hi_open and value == hi)):
        raise PhysicsError(f"{name}={value} above allowed bound {hi}")
    return value


def check_velocity(v, name="velocity"):
    """Frame velocities must be strictly subluminal."""
    v = check_scalar(v, name)
    if not abs(v) < 1.0:
        raise PhysicsError(f"{name}={v} is not subluminal (|v| < 1 required)")
    return v


def check_positive(value, name):
    return check_scalar(value, name, lo=0.0, lo_open=True)


def check_count(value, name, minimum=1):
    if not isinstance(value, numbers.Integral) or isinstance(value, bool):
        raise TypeError(f"{name} must be an integer, got {type(value).__name__}")
    if value < minimum:
        raise ValueError(f"{name}={value} must be >= {minimum}")
    return int(value)


def check_seed(seed):
    if seed is None:
        return 0
    if not isinstance(seed, numbers.Integral) or seed < 0:
        raise ValueError(f"seed must be a non-negative integer, got {seed!r}")
    return int(seed)


def check_configurations(x, n_particles):
    """Coerce ``x`` to a float array of shape (M, n_particles).

    A single configuration of shape (n_particles,) is promoted to (1, n_particles).
    """
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        x = x.reshape(1, 1)
    if x.ndim == 1:
        if n_particles == 1 and x.shape[0] != 1:
            x = x[:, None]
        else:
            x = x[None, :]
    if x.ndim != 2 or x.shape[1] != n_particles:
        raise ValueError(
            f"expected configurations with {n_particles} coordinates, got shape {x.shape}"
        )
    if not np.all(np.isfinite(x)):
        raise ValueError("configurations contain non-finite coordinates")
    return x


def check_weights(weights, size):
    w = np.asarray(weights, dtype=float)
    if w.shape != (size,):
        raise ValueError(f"expected {size} weights, got shape {w.shape}")
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise ValueError("weights must be finite and non-negative")
    if abs(w.sum() - 1.0) > 1e-9:
        raise ValueError(f"weights must sum to 1, got {w.sum()!r}")
    return w


class FailureBudgetError(RuntimeError):
    """Too many trajectories were lost to the node guard for a result to be trusted."""
