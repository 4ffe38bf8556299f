"""The no-law model: P* = inf over a foliation family of per-foliation probabilities.

No weight is ever placed on the family. ``p_mu`` exists only to check that a
weighted average never undercuts the infimum.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._validation import FailureBudgetError, check_count, check_scalar, check_weights
from .dirac import apply_poincare
from .ensemble import EventEstimate, estimate_event_prob, run_ensemble
from .events import FALSE, TRUE, Region, check_coverage
from .foliation import CurvedFoliation, FlatFoliation, SinShape, TanhShape, transform_foliation
from .sampling import label_stream, wilson_interval

DEFAULT_EPSILON = 0.02
DEFAULT_S_RANGE = (-5.0, 6.0)


@dataclass(frozen=True)
class FoliationFamily:
    """Finite stand-in for the set of all foliations; labels must be distinct."""

    foliations: tuple
    s_range: tuple = DEFAULT_S_RANGE

    def __post_init__(self):
        object.__setattr__(self, "foliations", tuple(self.foliations))
        if not self.foliations:
            raise ValueError("a foliation family needs at least one member")
        labels = self.labels
        if len(set(labels)) != len(labels):
            raise ValueError(f"foliation labels must be distinct: {labels}")
        if not self.s_range[0] < self.s_range[1]:
            raise ValueError("s_range must be increasing")

    @property
    def labels(self):
        return tuple(f.label for f in self.foliations)

    def __len__(self):
        return len(self.foliations)

    def __iter__(self):
        return iter(self.foliations)

    def subset(self, labels):
        keep = tuple(f for f in self.foliations if f.label in set(labels))
        return FoliationFamily(keep, self.s_range)

    def transformed(self, g):
        out = []
        for f in self.foliations:
            tf = transform_foliation(g, f)
            if tf is not f and tf.label == f.label and not g.is_identity():
                tf.label = f"g[{f.label}]"
            out.append(tf)
        return FoliationFamily(tuple(out), self.s_range)


def default_family(s_range=DEFAULT_S_RANGE):
    """Flat(0), Flat(+-0.3), Flat(+-0.6), two tanh-curved and one sin-curved foliation."""
    return FoliationFamily(
        (
            FlatFoliation(0.0),
            FlatFoliation(0.3),
            FlatFoliation(-0.3),
            FlatFoliation(0.6),
            FlatFoliation(-0.6),
            CurvedFoliation(TanhShape(0.5, 0.0, 1.0)),
            CurvedFoliation(TanhShape(-0.6, 2.0, 1.5)),
            CurvedFoliation(SinShape(0.4, 1.0)),
        ),
        s_range,
    )


@dataclass(frozen=True)
class LowerProbEstimate:
    """Per-foliation estimates and their minimum, with the arg-min named."""

    estimates: dict = field(hash=False)

    def __post_init__(self):
        if not self.estimates:
            raise ValueError("no per-foliation estimates")

    @property
    def value(self):
        return min(e.value for e in self.estimates.values())

    @property
    def argmin(self):
        return min(self.estimates, key=lambda k: (self.estimates[k].value, k))

    @property
    def lower(self):
        """Conservative bound: the smallest lower CI end over the family."""
        return min(e.lower for e in self.estimates.values())

    @property
    def upper(self):
        return self.estimates[self.argmin].upper

    def table(self):
        return [(k, e.value, e.lower, e.upper, e.successes, e.count, e.failures) for k, e in self.estimates.items()]


def simulate_family(wf, family, count, seed=0, ds=5e-2, record_every=2, threads=None, initial=None):
    """One equilibrium run per foliation; seed stream keyed by the foliation label.

    ``initial`` optionally maps labels to prepared x configurations.
    """
    count = check_count(count, "count", minimum=1)
    s0, s1 = family.s_range
    runs = {}
    for f in family:
        init = None if initial is None else initial.get(f.label)
        run = run_ensemble(
            wf, f, count, seed, s0, s1, ds, record_every, stream=label_stream(f.label), threads=threads, initial=init
        )
        if run.successes == 0:
            raise FailureBudgetError(f"every trajectory failed under {f.label}")
        runs[f.label] = run
    return runs


def _estimate(event, run, check=True):
    if check and event not in (TRUE, FALSE):
        check_coverage(event, run.points)
    return estimate_event_prob(event, run)


def p_star(event, family=None, wf=None, count=None, seed=0, runs=None, **run_kwargs):
    """P*(event) over ``family``; pass ``runs`` to evaluate on shared samples."""
    if runs is None:
        runs = simulate_family(wf, family, count, seed, **run_kwargs)
    return LowerProbEstimate({label: _estimate(event, run) for label, run in runs.items()})


def p_star_prime(predicate, family=None, wf=None, count=None, seed=0, runs=None, **run_kwargs):
    """Variant with the foliation in the sample space.

    ``predicate(label, points)`` returns bools (M,) and may read the label.
    An :class:`~nolawbohm.events.Event` is accepted as a label-blind predicate.
    """
    if runs is None:
        runs = simulate_family(wf, family, count, seed, **run_kwargs)
    out = {}
    for label, run in runs.items():
        if hasattr(predicate, "evaluate"):
            hits = predicate.evaluate(run.points)
        else:
            hits = np.asarray(predicate(label, run.points), dtype=bool)
        k = int(hits.sum())
        lo, hi = wilson_interval(k, run.count)
        out[label] = EventEstimate(k / run.count, lo, hi, k, run.count, run.failures)
    return LowerProbEstimate(out)


def label_is(label):
    """Predicate true for every trajectory of the foliation ``label`` and false elsewhere."""

    def predicate(lab, points):
        return np.full(len(points), lab == label)

    return predicate


@dataclass(frozen=True)
class TypicalityVerdict:
    typical: bool
    lower: float
    epsilon: float
    argmin: str

    @property
    def text(self):
        if self.typical:
            return (
                f"typical: lower bound {self.lower:.4f} >= 1 - {self.epsilon:g} on every foliation; "
                "according to Cournot's principle the realized trajectory can be expected in this set"
            )
        return (
            f"not typical: lower bound {self.lower:.4f} < 1 - {self.epsilon:g} (worst foliation {self.argmin}); "
            "Cournot's principle licenses no prediction"
        )


def is_typical(estimate, epsilon=DEFAULT_EPSILON):
    """Typical iff the conservative lower CI bound of P* reaches 1 - epsilon."""
    epsilon = check_scalar(epsilon, "epsilon", lo=0.0, hi=1.0, lo_open=True, hi_open=True)
    lower = estimate.lower
    return TypicalityVerdict(bool(lower >= 1.0 - epsilon), lower, epsilon, estimate.argmin)


def p_mu(event, weights, family=None, wf=None, count=None, seed=0, runs=None, **run_kwargs):
    """Weighted average of per-foliation estimates (weights in family order)."""
    if runs is None:
        runs = simulate_family(wf, family, count, seed, **run_kwargs)
    w = check_weights(weights, len(runs))
    vals = np.array([_estimate(event, run).value for run in runs.values()])
    return float(w @ vals)


@dataclass(frozen=True)
class CapacityReport:
    """Exact-on-shared-samples checks of the set-function properties of P*."""

    values: dict = field(hash=False)
    checks: dict = field(hash=False)

    @property
    def passed(self):
        return all(self.checks.values())


def check_capacity_properties(
    family=None, wf=None, count=None, seed=0, a=None, b=None, c=None, d=None, weights=None, runs=None, **run_kwargs
):
    """Boundary values, monotonicity, superadditivity, P* <= P_mu and family growth.

    All comparisons use one shared ensemble per foliation, so they hold
    exactly rather than statistically.
    """
    if runs is None:
        runs = simulate_family(wf, family, count, seed, **run_kwargs)
    a = Region(0, (1.0, 1.0), (0.0, np.inf)) if a is None else a
    b = Region(0, (1.0, 1.0), (-np.inf, 0.0)) if b is None else b
    c = Region(0, (0.9, 1.1), (-0.5, 0.5)) if c is None else c
    d = Region(0, (0.8, 1.2), (-1.0, 1.0)) if d is None else d
    n = len(runs)
    if weights is None:
        rng = np.random.default_rng(label_stream("capacity-weights"))
        weights = [np.full(n, 1.0 / n), np.eye(n)[0], rng.dirichlet(np.ones(n))]

    def ps(event):
        return p_star(event, runs=runs).value

    v = {
        "empty": ps(FALSE),
        "whole": ps(TRUE),
        "A": ps(a),
        "B": ps(b),
        "A_or_B": ps(a | b),
        "A_and_B": ps(a & b),
        "C": ps(c),
        "D": ps(d),
    }
    checks = {
        "empty_is_zero": v["empty"] == 0.0,
        "whole_is_one": v["whole"] == 1.0,
        "monotone": v["C"] <= v["D"],
        "disjoint": v["A_and_B"] == 0.0,
        "superadditive": v["A_or_B"] >= v["A"] + v["B"],
    }
    for k, w in enumerate(weights):
        pm = p_mu(a, w, runs=runs)
        v[f"p_mu_{k}"] = pm
        checks[f"p_star_le_p_mu_{k}"] = v["A"] <= pm + 1e-15
    labels = list(runs)
    growth = []
    for size in range(1, n + 1):
        sub = {lab: runs[lab] for lab in labels[:size]}
        growth.append(p_star(a, runs=sub).value)
    v["growth"] = tuple(growth)
    checks["family_growth_nonincreasing"] = all(x >= y for x, y in zip(growth, growth[1:]))
    return CapacityReport(v, checks)


@dataclass(frozen=True)
class CovarianceComparison:
    original: LowerProbEstimate
    transformed: LowerProbEstimate

    @property
    def overlap(self):
        o, t = self.original, self.transformed
        lo_o, hi_o = o.estimates[o.argmin].lower, o.estimates[o.argmin].upper
        lo_t, hi_t = t.estimates[t.argmin].lower, t.estimates[t.argmin].upper
        return max(lo_o, lo_t) <= min(hi_o, hi_t)


def covariance_p_star(event, family, wf, g, count, seed=0, **run_kwargs):
    """Compare P*(event; psi, F) with P*(g event; U_g psi, g F).

    The transformed run for g F starts from the images under g of the very
    configurations sampled for F, so the pairing is exact.
    """
    runs = simulate_family(wf, family, count, seed, **run_kwargs)
    original = p_star(event, runs=runs)
    g_family = family.transformed(g)
    g_wf = apply_poincare(g, wf)
    initial = {gf.label: g.apply(runs[f.label].points[:, 0])[..., 1] for f, gf in zip(family, g_family)}
    g_runs = simulate_family(g_wf, g_family, count, seed, initial=initial, **run_kwargs)
    transformed = p_star(event.transformed(g), runs=g_runs)
    return CovarianceComparison(original, transformed)


__all__ = [
    "CapacityReport",
    "CovarianceComparison",
    "FoliationFamily",
    "LowerProbEstimate",
    "TypicalityVerdict",
    "check_capacity_properties",
    "covariance_p_star",
    "default_family",
    "is_typical",
    "label_is",
    "p_mu",
    "p_star",
    "p_star_prime",
    "simulate_family",
]
