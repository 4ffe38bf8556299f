"""Foliation-independent events: Boolean trees over world-line/rectangle intersections.

An event only reads the world lines as sets of spacetime points (polylines
through the recorded leaf crossings), never the leaves that produced them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._validation import check_count
from .dirac import PoincareTransform


class Event:
    """Base class; ``evaluate(points)`` maps (M, K, N, 2) world lines to bools (M,)."""

    def evaluate(self, points):
        raise NotImplementedError

    def atoms(self):
        return ()

    def transformed(self, g):
        raise NotImplementedError

    def __and__(self, other):
        return And(self, other)

    def __or__(self, other):
        return Or(self, other)

    def __invert__(self):
        return Not(self)


@dataclass(frozen=True)
class Constant(Event):
    value: bool

    def evaluate(self, points):
        return np.full(np.shape(points)[0], self.value, dtype=bool)

    def transformed(self, g):
        return self

    def describe(self):
        return "TRUE" if self.value else "FALSE"


TRUE = Constant(True)
FALSE = Constant(False)


def _segments_hit(p0, p1, t_range, x_range):
    """Liang-Barsky clip of segments p0 -> p1 (..., 2) against a closed rectangle."""
    u_lo = np.zeros(p0.shape[:-1])
    u_hi = np.ones(p0.shape[:-1])
    ok = np.ones(p0.shape[:-1], dtype=bool)
    for axis, (lo, hi) in enumerate((t_range, x_range)):
        start = p0[..., axis]
        delta = p1[..., axis] - start
        flat = delta == 0
        ok &= ~flat | ((start >= lo) & (start <= hi))
        with np.errstate(divide="ignore", invalid="ignore"):
            ua = np.where(flat, -np.inf, (lo - start) / np.where(flat, 1.0, delta))
            ub = np.where(flat, np.inf, (hi - start) / np.where(flat, 1.0, delta))
        u_lo = np.maximum(u_lo, np.minimum(ua, ub))
        u_hi = np.minimum(u_hi, np.maximum(ua, ub))
    return ok & (u_lo <= u_hi)


@dataclass(frozen=True)
class Region(Event):
    """World line of ``particle`` meets g([t1, t2] x [x1, x2]); infinite bounds allowed.

    ``frame`` is the Poincare map g carrying the coordinate rectangle into
    spacetime (None for the lab frame); a zero-height band t1 == t2 is legal.
    """

    particle: int
    t_range: tuple
    x_range: tuple = (-math.inf, math.inf)
    frame: PoincareTransform | None = None

    def __post_init__(self):
        check_count(self.particle, "particle", minimum=0)
        for name, (lo, hi) in (("t_range", self.t_range), ("x_range", self.x_range)):
            if not lo <= hi:
                raise ValueError(f"{name} must satisfy lower <= upper, got {(lo, hi)}")

    def _local(self, points):
        wl = np.asarray(points, dtype=float)[:, :, self.particle, :]
        if self.frame is not None and not self.frame.is_identity():
            wl = self.frame.inverse().apply(wl)
        return wl

    def evaluate(self, points):
        wl = self._local(points)
        if wl.shape[1] == 1:
            return _segments_hit(wl[:, 0], wl[:, 0], self.t_range, self.x_range)
        hit = _segments_hit(wl[:, :-1], wl[:, 1:], self.t_range, self.x_range)
        return hit.any(axis=1)

    def covered(self, points):
        """True where the recorded world line spans the whole time window of the region."""
        wl = self._local(points)
        return (wl[:, 0, 0] <= self.t_range[0]) & (wl[:, -1, 0] >= self.t_range[1])

    def atoms(self):
        return (self,)

    def transformed(self, g):
        frame = g if self.frame is None else g.compose(self.frame)
        return Region(self.particle, self.t_range, self.x_range, frame)

    def describe(self):
        where = "" if self.frame is None else f" in frame(eta={self.frame.rapidity:.4g})"
        return f"X{self.particle} meets t{list(self.t_range)} x{list(self.x_range)}{where}"


@dataclass(frozen=True)
class And(Event):
    left: Event
    right: Event

    def evaluate(self, points):
        return self.left.evaluate(points) & self.right.evaluate(points)

    def atoms(self):
        return self.left.atoms() + self.right.atoms()

    def transformed(self, g):
        return And(self.left.transformed(g), self.right.transformed(g))

    def describe(self):
        return f"({self.left.describe()} AND {self.right.describe()})"


@dataclass(frozen=True)
class Or(Event):
    left: Event
    right: Event

    def evaluate(self, points):
        return self.left.evaluate(points) | self.right.evaluate(points)

    def atoms(self):
        return self.left.atoms() + self.right.atoms()

    def transformed(self, g):
        return Or(self.left.transformed(g), self.right.transformed(g))

    def describe(self):
        return f"({self.left.describe()} OR {self.right.describe()})"


@dataclass(frozen=True)
class Not(Event):
    inner: Event

    def evaluate(self, points):
        return ~self.inner.evaluate(points)

    def atoms(self):
        return self.inner.atoms()

    def transformed(self, g):
        return Not(self.inner.transformed(g))

    def describe(self):
        return f"NOT {self.inner.describe()}"


def check_coverage(event, points):
    """Raise unless every recorded world line spans the time window of every atom."""
    for atom in event.atoms():
        miss = ~atom.covered(points)
        if np.any(miss):
            raise ValueError(
                f"{int(miss.sum())} world lines do not span the window of [{atom.describe()}]; "
                "extend the leaf-parameter range"
            )


def event_from_dict(spec):
    """Build an event from a nested mapping (the CLI descriptor format)."""
    if isinstance(spec, bool):
        return TRUE if spec else FALSE
    kind = spec.get("kind", "region")
    if kind == "true":
        return TRUE
    if kind == "false":
        return FALSE
    if kind == "region":
        inf = math.inf

        def bound(pair):
            return tuple(-inf if v is None and k == 0 else inf if v is None else float(v) for k, v in enumerate(pair))

        return Region(int(spec["particle"]), bound(spec["t"]), bound(spec.get("x", [None, None])))
    if kind == "not":
        return Not(event_from_dict(spec["event"]))
    if kind in ("and", "or"):
        parts = [event_from_dict(e) for e in spec["events"]]
        out = parts[0]
        for p in parts[1:]:
            out = And(out, p) if kind == "and" else Or(out, p)
        return out
    raise ValueError(f"unknown event kind {kind!r}")


__all__ = [
    "And",
    "Constant",
    "Event",
    "FALSE",
    "Not",
    "Or",
    "Region",
    "TRUE",
    "check_coverage",
    "event_from_dict",
]
