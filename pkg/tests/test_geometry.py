"""Tests for the geometry module."""

import math

import numpy as np
import pytest

from nbm_solver.errors import DegenerateGradientError
from nbm_solver.geometry import cell_geometry, is_crossed, robust_normal, tile_volume_and_area
from nbm_solver.levelset import LevelSetField
from nbm_solver.problems import sphere_phi


def plane(offset=0.0):
    return LevelSetField.analytic(lambda x: np.asarray(x)[..., 0] - offset)


class TestCellGeometry:
    """Sub-volumes, face fractions and interface patches of single cells."""

    def test_uncrossed_plus_cell(self):
        h = 0.1
        geom = cell_geometry(LevelSetField.analytic(sphere_phi), np.array([0.9, 0.9, 0.9]), h)
        assert not geom.crossed
        assert geom.vol_minus == 0.0
        assert geom.vol_plus == pytest.approx(h ** 3)
        np.testing.assert_allclose(geom.face_area_plus, h ** 2)
        assert geom.interface_simplices == []

    def test_uncrossed_minus_cell(self):
        h = 0.1
        geom = cell_geometry(LevelSetField.analytic(sphere_phi), np.array([0.05, 0.0, 0.0]), h)
        assert geom.vol_minus == pytest.approx(h ** 3)
        np.testing.assert_allclose(geom.face_area_minus, h ** 2)

    def test_planar_cut(self):
        """The plane x = 0 cuts a cell centred at x = 0.02 at 30% of its width."""
        h = 0.1
        geom = cell_geometry(plane(), np.array([0.02, 0.0, 0.0]), h)
        assert geom.crossed
        assert geom.vol_minus == pytest.approx(0.03 * h ** 2, abs=1e-15)
        assert geom.vol_minus + geom.vol_plus == pytest.approx(h ** 3, abs=1e-15)
        np.testing.assert_allclose(
            geom.face_area_minus,
            [h ** 2, 0.0, 0.03 * h, 0.03 * h, 0.03 * h, 0.03 * h],
            atol=1e-15,
        )
        assert geom.interface_area == pytest.approx(h ** 2, abs=1e-15)
        np.testing.assert_allclose(geom.normal, [1.0, 0.0, 0.0], atol=1e-10)
        assert geom.delta == pytest.approx(0.02, abs=1e-12)
        np.testing.assert_allclose(geom.proj, [0.0, 0.0, 0.0], atol=1e-12)

    def test_face_centers(self):
        geom = cell_geometry(plane(), np.array([0.02, 0.0, 0.0]), 0.1)
        np.testing.assert_allclose(geom.face_centers()[1], [0.07, 0.0, 0.0])
        np.testing.assert_allclose(geom.face_centers()[4], [0.02, 0.0, -0.05])

    @pytest.mark.parametrize("center", [
        (0.48, 0.03, -0.02),
        (0.3, 0.3, 0.25),
        (-0.1, 0.45, 0.2),
    ])
    def test_sphere_cells_conserve_volume(self, center):
        h = 0.1
        geom = cell_geometry(LevelSetField.analytic(sphere_phi), np.array(center), h)
        assert geom.crossed
        assert 0.0 < geom.vol_minus < h ** 3
        assert geom.vol_minus + geom.vol_plus == pytest.approx(h ** 3, rel=1e-12)
        assert np.all(geom.face_area_minus >= 0.0)
        assert np.all(geom.face_area_minus <= h ** 2)
        assert geom.interface_area > 0.0

    @pytest.mark.parametrize("center", [
        (0.48, 0.03, -0.02),
        (0.3, 0.3, 0.25),
        (-0.1, 0.45, 0.2),
        (0.02, -0.01, 0.51),
    ])
    def test_flipping_phi_swaps_the_sides(self, center):
        h = 0.1
        inside = cell_geometry(LevelSetField.analytic(sphere_phi), np.array(center), h)
        outside = cell_geometry(LevelSetField.analytic(lambda x: -sphere_phi(x)), np.array(center), h)
        assert outside.crossed == inside.crossed
        assert outside.vol_plus == pytest.approx(inside.vol_minus, rel=1e-12, abs=1e-15)
        assert outside.vol_minus == pytest.approx(inside.vol_plus, rel=1e-12, abs=1e-15)
        np.testing.assert_allclose(outside.face_area_plus, inside.face_area_minus, rtol=1e-12, atol=1e-14)
        np.testing.assert_allclose(outside.face_area_minus, inside.face_area_plus, rtol=1e-12, atol=1e-14)
        assert outside.interface_area == pytest.approx(inside.interface_area, rel=1e-12, abs=1e-14)

    def test_crossing_seen_only_from_centre(self):
        """A sign change between the centre and all corners still marks the cell crossed."""
        phi = LevelSetField.analytic(lambda x: np.sum(np.asarray(x) ** 2, axis=-1) - 0.01)
        assert is_crossed(phi, np.zeros(3), 0.4)


class TestRobustNormal:

    def test_uncrossed_degenerate_cell(self):
        phi = LevelSetField.analytic(lambda x: np.ones(np.shape(x)[:-1]))
        center = np.array([0.1, 0.2, 0.3])
        normal, delta, proj = robust_normal(phi, center, 0.1, crossed=False)
        np.testing.assert_array_equal(normal, np.zeros(3))
        assert delta == 0.0
        np.testing.assert_array_equal(proj, center)

    def test_crossed_cell_uses_corner_normal(self):
        phi = LevelSetField.analytic(lambda x: np.asarray(x)[..., 0] ** 2 - 0.01)
        with pytest.warns(UserWarning, match="corner"):
            normal, delta, proj = robust_normal(phi, np.zeros(3), 0.4, crossed=True)
        np.testing.assert_allclose(normal, [-1.0, 0.0, 0.0], atol=1e-10)
        assert delta == pytest.approx(-0.025, abs=1e-12)
        np.testing.assert_allclose(proj, [-0.025, 0.0, 0.0], atol=1e-12)

    def test_crossed_cell_without_any_gradient(self):
        phi = LevelSetField.analytic(lambda x: np.zeros(np.shape(x)[:-1]) - 1.0)
        with pytest.raises(DegenerateGradientError):
            robust_normal(phi, np.zeros(3), 0.4, crossed=True)


class TestTiling:

    def test_sphere_volume_and_area(self):
        """Tilings of 8^3, 16^3 and 32^3 cells converge to the volume and area of the radius-1/2 sphere."""
        exact_volume = 4.0 / 3.0 * math.pi * 0.125
        volume_errors, area_errors = [], []
        for n in (8, 16, 32):
            volume, area = tile_volume_and_area(LevelSetField.analytic(sphere_phi), -np.ones(3), np.ones(3), n)
            volume_errors.append(abs(volume - exact_volume))
            area_errors.append(abs(area - math.pi))
        assert volume == pytest.approx(exact_volume, rel=0.01)
        assert area == pytest.approx(math.pi, rel=0.02)
        assert np.all(np.log2(np.divide(volume_errors[:-1], volume_errors[1:])) >= 1.8)
        assert np.all(np.log2(np.divide(area_errors[:-1], area_errors[1:])) >= 0.9)

    def test_requires_cubic_tiling(self):
        with pytest.raises(ValueError):
            tile_volume_and_area(plane(), np.zeros(3), np.array([1.0, 2.0, 1.0]), 4)
