"""Tests for spacelike leaves, foliations and their Poincare images."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nolawbohm._validation import DegenerateStepError, PhysicsError
from nolawbohm.dirac import PoincareTransform
from nolawbohm.foliation import (
    CurvedFoliation,
    DeformedFoliation,
    FlatFoliation,
    FlatLeaf,
    GraphLeaf,
    SinShape,
    TanhShape,
    TransformedFoliation,
    advance_to_leaf,
    check_ordering,
    leaf_crossing,
    normal_from_slope,
    transform_foliation,
    transform_leaf,
)
from nolawbohm.hbd import Trajectory
from nolawbohm.foliation import deform_foliation_away

FOLIATIONS = [
    FlatFoliation(0.0),
    FlatFoliation(0.6, 0.3),
    CurvedFoliation(TanhShape(0.5, 0.0, 1.0)),
    CurvedFoliation(SinShape(0.4, 1.0)),
    TransformedFoliation(CurvedFoliation(TanhShape(0.3)), PoincareTransform.boost(0.3, (0.2, -0.5))),
]


def _ids(fols):
    return [f.label for f in fols]


class TestLeaves:
    def test_flat_leaf_is_simultaneity_line(self):
        """gamma (t - v x) = tau on FlatLeaf(v, tau)."""
        leaf = FlatLeaf(0.6, 0.8)
        x = np.linspace(-3, 3, 7)
        np.testing.assert_allclose(1.25 * (leaf.time(x) - 0.6 * x), 0.8, rtol=1e-14)

    def test_normal_is_unit_future_timelike(self):
        n = normal_from_slope(np.array([-0.7, 0.0, 0.5]))
        np.testing.assert_allclose(n[:, 0] ** 2 - n[:, 1] ** 2, 1.0, rtol=1e-14)
        assert np.all(n[:, 0] > 0)

    def test_normal_is_orthogonal_to_tangent(self):
        leaf = CurvedFoliation(TanhShape(0.5)).leaf(0.0)
        x = np.linspace(-2, 2, 9)
        n = leaf.normal(x)
        tangent = np.stack([leaf.slope(x), np.ones_like(x)], axis=-1)
        np.testing.assert_allclose(n[:, 0] * tangent[:, 0] - n[:, 1] * tangent[:, 1], 0.0, atol=1e-14)

    def test_lightlike_slope_rejected(self):
        with pytest.raises(PhysicsError):
            normal_from_slope(1.0)

    def test_graph_leaf_validation(self):
        with pytest.raises(PhysicsError):
            GraphLeaf(lambda x: 0.99 * x, lambda x: np.full_like(x, 0.99))

    @pytest.mark.parametrize("shape", [lambda: TanhShape(0.9, 0.0, 1.0), lambda: SinShape(0.5, 2.0)])
    def test_steep_shapes_rejected(self, shape):
        with pytest.raises(PhysicsError):
            shape()

    @pytest.mark.parametrize("shape", [TanhShape(0.5, 1.0, 1.5), SinShape(0.4, 1.3)])
    def test_shape_derivative(self, shape):
        x = np.linspace(-3, 3, 13)
        h = 1e-6
        np.testing.assert_allclose(shape.derivative(x), (shape(x + h) - shape(x - h)) / (2 * h), atol=1e-8)

    def test_superluminal_frame_rejected(self):
        with pytest.raises(PhysicsError):
            FlatFoliation(1.2)


class TestAdvance:
    @pytest.mark.parametrize("fol", FOLIATIONS, ids=_ids(FOLIATIONS))
    def test_lands_on_leaf(self, fol):
        rng = np.random.default_rng(0)
        x = rng.uniform(-4, 4, 20)
        pts = np.stack([fol.time(0.0, x), x], axis=-1)
        v = rng.uniform(-0.95, 0.95, 20)
        dirs = np.stack([np.ones(20), v], axis=-1)
        out = fol.advance(0.07, pts, dirs)
        np.testing.assert_allclose(out[:, 0], fol.time(0.07, out[:, 1]), atol=1e-12)
        # The landing point lies on the ray through the start point.
        lam = out[:, 0] - pts[:, 0]
        assert np.all(lam > 0)
        np.testing.assert_allclose(out[:, 1], pts[:, 1] + lam * v, atol=1e-12)

    @settings(max_examples=40, deadline=None)
    @given(st.floats(-5, 5), st.floats(-0.99, 0.99), st.floats(1e-3, 0.5))
    def test_curved_advance_property(self, x, v, ds):
        fol = CurvedFoliation(TanhShape(0.6, 0.5, 1.0))
        pt = np.array([[fol.time(0.0, x), x]])
        out = advance_to_leaf(fol, ds, pt, np.array([[1.0, v]]))
        assert abs(out[0, 0] - fol.time(ds, out[0, 1])) <= 1e-12

    def test_past_leaf_rejected(self):
        fol = FlatFoliation(0.0)
        with pytest.raises(ValueError):
            fol.advance(-1.0, np.array([[0.0, 0.0]]), np.array([[1.0, 0.0]]))

    def test_tangent_direction_rejected(self):
        fol = FlatFoliation(0.5)
        with pytest.raises(DegenerateStepError):
            fol.advance(1.0, np.array([[0.0, 0.0]]), np.array([[0.5, 1.0]]))

    @pytest.mark.parametrize("fol", FOLIATIONS, ids=_ids(FOLIATIONS))
    def test_leaves_are_ordered(self, fol):
        assert check_ordering(fol, np.linspace(-1, 1, 5))


class TestTransforms:
    def test_boosted_rest_frame_is_flat(self):
        """The rest frame seen by an observer with velocity 0.6 has slices of slope -0.6."""
        img = transform_foliation(PoincareTransform.boost(0.6), FlatFoliation(0.0))
        assert isinstance(img, FlatFoliation)
        assert img.velocity == pytest.approx(-0.6)
        assert img.label == "Flat(-0.6)"

    @pytest.mark.parametrize("fol", FOLIATIONS[:4], ids=_ids(FOLIATIONS[:4]))
    def test_image_of_leaf_points(self, fol):
        g = PoincareTransform.boost(-0.4, (0.3, 1.1))
        img = transform_foliation(g, fol)
        x = np.linspace(-3, 3, 11)
        pts = g.apply(np.stack([fol.time(0.5, x), x], axis=-1))
        np.testing.assert_allclose(img.time(0.5, pts[:, 1]), pts[:, 0], atol=1e-11)

    def test_flat_closed_form_matches_generic(self):
        g = PoincareTransform.boost(0.3, (0.5, -0.2))
        base = FlatFoliation(0.2, 0.1)
        closed = base.transformed(g)
        generic = TransformedFoliation(base, g)
        x = np.linspace(-4, 4, 9)
        for s in (0.0, 1.3):
            np.testing.assert_allclose(closed.time(s, x), generic.time(s, x), atol=1e-12)
            np.testing.assert_allclose(closed.slope(s, x), generic.slope(s, x), atol=1e-12)

    def test_transform_leaf(self):
        g = PoincareTransform.boost(0.5, (0.1, 0.2))
        flat = FlatLeaf(0.1, 0.3)
        curved = CurvedFoliation(TanhShape(0.4)).leaf(0.2)
        for leaf in (flat, curved):
            x = np.linspace(-2, 2, 5)
            img_pts = g.apply(np.stack([leaf.time(x), x], axis=-1))
            np.testing.assert_allclose(transform_leaf(g, leaf).time(img_pts[:, 1]), img_pts[:, 0], atol=1e-11)

    def test_identity_is_noop(self):
        fol = FOLIATIONS[2]
        assert transform_foliation(PoincareTransform(), fol) is fol


class TestDeformation:
    def _trajectory(self):
        s = np.linspace(0, 2, 21)
        pts = np.zeros((21, 2, 2))
        pts[:, 0, 0] = pts[:, 1, 0] = s
        pts[:, 0, 1] = -1.0 + 0.2 * s
        pts[:, 1, 1] = 3.0
        return Trajectory("test", s, pts)

    def test_unchanged_near_trajectory(self):
        base = FlatFoliation(0.0)
        traj = self._trajectory()
        deformed = deform_foliation_away(base, traj, margin=1.0, bump=0.2)
        x = np.array([-1.0 + 0.2 * 1.0 - 0.9, -0.8, 2.2, 3.0, 3.9])
        np.testing.assert_array_equal(deformed.time(1.0, x), base.time(1.0, x))
        np.testing.assert_array_equal(deformed.slope(1.0, x), base.slope(1.0, x))
        far = np.array([10.0, -10.0])
        assert np.all(deformed.time(1.0, far) > base.time(1.0, far) + 0.04)

    def test_zero_margin_lifts_everywhere(self):
        base = FlatFoliation(0.0)
        deformed = deform_foliation_away(base, self._trajectory(), margin=0.0, bump=0.2)
        x = np.linspace(-3, 3, 7)
        assert np.all(deformed.time(1.0, x) > base.time(1.0, x))

    def test_zero_bump_returns_base(self):
        base = FlatFoliation(0.0)
        assert deform_foliation_away(base, self._trajectory(), 1.0, 0.0) is base

    def test_too_steep_rejected(self):
        traj = self._trajectory()
        with pytest.raises(PhysicsError):
            DeformedFoliation(FlatFoliation(0.0), traj.s, traj.points[..., 1], 1.0, 3.0, ramp=0.2)


class TestCrossing:
    def test_linear_interpolation(self):
        wl = np.array([[0.0, 0.0], [1.0, 0.5], [2.0, 1.0]])
        pt = leaf_crossing(FlatFoliation(0.0), 1.5, wl)
        np.testing.assert_allclose(pt, [1.5, 0.75])

    def test_missing_crossing(self):
        wl = np.array([[0.0, 0.0], [1.0, 0.5]])
        assert leaf_crossing(FlatFoliation(0.0), 3.0, wl) is None
