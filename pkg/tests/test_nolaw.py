"""Tests for the lower probability P* over a foliation family."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import straight_lines, synthetic_run
from nolawbohm.dirac import PoincareTransform
from nolawbohm.events import FALSE, TRUE, Region
from nolawbohm.foliation import CurvedFoliation, FlatFoliation, TanhShape
from nolawbohm.nolaw import (
    FoliationFamily,
    LowerProbEstimate,
    check_capacity_properties,
    covariance_p_star,
    default_family,
    is_typical,
    label_is,
    p_mu,
    p_star,
    p_star_prime,
    simulate_family,
)

RIGHT = Region(0, (1.0, 1.0), (0.0, math.inf))


def three_runs():
    """Three 'foliations' whose world lines put 30%, 50% and 80% of mass right of 0 at t = 1."""
    runs = {}
    for label, frac in (("F1", 0.3), ("F2", 0.5), ("F3", 0.8)):
        n_right = int(100 * frac)
        x0 = np.concatenate([np.full(100 - n_right, -1.0), np.full(n_right, 1.0)])
        runs[label] = synthetic_run(straight_lines(x0, 0.0), label)
    return runs


class TestFamily:
    def test_default_family(self):
        fam = default_family()
        assert len(fam) == 8
        assert fam.labels[0] == "Flat(0)"
        assert len(set(fam.labels)) == 8

    def test_duplicate_labels_rejected(self):
        with pytest.raises(ValueError):
            FoliationFamily((FlatFoliation(0.0), FlatFoliation(0.0)))

    def test_subset_and_transform(self):
        fam = default_family()
        sub = fam.subset(["Flat(0)", "Flat(0.3)"])
        assert sub.labels == ("Flat(0)", "Flat(0.3)")
        img = sub.transformed(PoincareTransform.boost(0.3))
        assert img.labels == ("Flat(-0.3)", "Flat(0)")


class TestLowerProbability:
    def test_infimum_and_argmin(self):
        est = p_star(RIGHT, runs=three_runs())
        assert est.value == pytest.approx(0.3)
        assert est.argmin == "F1"
        assert est.lower < 0.3 < est.upper
        assert len(est.table()) == 3

    def test_constants(self):
        runs = three_runs()
        assert p_star(TRUE, runs=runs).value == 1.0
        assert p_star(FALSE, runs=runs).value == 0.0

    def test_p_mu_upper_bounds_p_star(self):
        runs = three_runs()
        assert p_mu(RIGHT, [0.2, 0.3, 0.5], runs=runs) == pytest.approx(0.2 * 0.3 + 0.3 * 0.5 + 0.5 * 0.8)

    @settings(max_examples=40, deadline=None)
    @given(st.lists(st.floats(0.01, 1.0), min_size=3, max_size=3))
    def test_p_star_below_every_average(self, w):
        runs = three_runs()
        w = np.asarray(w) / np.sum(w)
        assert p_star(RIGHT, runs=runs).value <= p_mu(RIGHT, w, runs=runs) + 1e-15

    def test_variant_with_foliation_in_sample_space(self):
        runs = three_runs()
        assert p_star_prime(label_is("F2"), runs=runs).value == 0.0
        assert p_star_prime(RIGHT, runs=runs).value == pytest.approx(0.3)

    def test_uncovered_event_rejected(self):
        with pytest.raises(ValueError):
            p_star(Region(0, (10.0, 10.0)), runs=three_runs())

    def test_empty_estimate_rejected(self):
        with pytest.raises(ValueError):
            LowerProbEstimate({})


class TestTypicality:
    def test_typical_event(self):
        runs = {"F": synthetic_run(straight_lines(np.zeros(2000), 0.0))}
        verdict = is_typical(p_star(Region(0, (1.0, 1.0)), runs=runs), 0.02)
        assert verdict.typical
        assert "Cournot" in verdict.text

    def test_atypical_event(self):
        verdict = is_typical(p_star(RIGHT, runs=three_runs()), 0.02)
        assert not verdict.typical
        assert verdict.argmin == "F1"

    def test_epsilon_range(self):
        with pytest.raises(ValueError):
            is_typical(p_star(RIGHT, runs=three_runs()), 1.5)


class TestCapacity:
    def test_synthetic_family(self):
        rep = check_capacity_properties(runs=three_runs())
        assert rep.passed, rep.checks
        assert rep.values["A"] == pytest.approx(0.3)
        assert rep.values["B"] == pytest.approx(0.2)
        assert rep.values["A_or_B"] == 1.0

    def test_strict_superadditivity(self):
        """P*(A or B) can exceed P*(A) + P*(B): P* is not additive."""
        rep = check_capacity_properties(runs=three_runs())
        assert rep.values["A_or_B"] > rep.values["A"] + rep.values["B"]

    def test_growth_sequence(self):
        rep = check_capacity_properties(runs=three_runs())
        assert rep.values["growth"] == (0.3, 0.3, 0.3)


class TestSimulated:
    def test_small_family(self, entangled):
        fam = FoliationFamily((FlatFoliation(0.0), CurvedFoliation(TanhShape(0.4))), (-1.0, 2.5))
        runs = simulate_family(entangled, fam, 150, seed=1, ds=0.1, record_every=1)
        assert set(runs) == set(fam.labels)
        rep = check_capacity_properties(runs=runs)
        assert rep.passed, rep.checks
        again = simulate_family(entangled, fam, 150, seed=1, ds=0.1, record_every=1)
        for label in runs:
            np.testing.assert_array_equal(runs[label].points, again[label].points)

    def test_streams_keyed_by_label(self, entangled):
        """Reordering the family does not change any member's samples."""
        a, b = FlatFoliation(0.0), FlatFoliation(0.3)
        r1 = simulate_family(entangled, FoliationFamily((a, b), (0.0, 0.2)), 50, seed=1, ds=0.1)
        r2 = simulate_family(entangled, FoliationFamily((b, a), (0.0, 0.2)), 50, seed=1, ds=0.1)
        np.testing.assert_array_equal(r1["Flat(0.3)"].points, r2["Flat(0.3)"].points)

    def test_covariance_small(self, entangled):
        fam = FoliationFamily((FlatFoliation(0.0), FlatFoliation(0.3)), (-1.0, 2.5))
        cmp_ = covariance_p_star(
            RIGHT, fam, entangled, PoincareTransform.boost(0.3), 200, seed=0, ds=0.05, record_every=2
        )
        assert cmp_.overlap
        assert abs(cmp_.original.value - cmp_.transformed.value) <= 0.02
