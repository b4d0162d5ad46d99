"""Tests for the simplex module."""

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from nbm_solver.errors import PreconditionViolation
from nbm_solver.simplex import (
    Simplex,
    edge_intersection,
    integrate_simplex,
    intersect_simplex,
    triangle_negative_area,
    triangulate_cell,
)

REFERENCE = Simplex(np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]))


def phi_on(simplex, function):
    return np.array([function(v) for v in simplex.vertices])


def negative_volume(cut):
    return sum(s.volume for s in cut.negative)


def gamma_area(cut):
    return sum(s.volume for s in cut.gamma)


class TestSimplex:

    def test_rejects_bad_shape(self):
        with pytest.raises(PreconditionViolation):
            Simplex(np.zeros((2, 3)))

    def test_reference_volume(self):
        assert REFERENCE.volume == pytest.approx(1.0 / 6.0, abs=1e-15)
        assert REFERENCE.dim == 3

    def test_triangle_area(self):
        triangle = Simplex(np.array([[0.0, 0.0, 0.0], [2.0, 0.0, 0.0], [0.0, 3.0, 0.0]]))
        assert triangle.volume == pytest.approx(3.0, abs=1e-14)


class TestTriangulation:
    """The middle-cut decomposition of a cube."""

    def test_five_tetrahedra_fill_the_cube(self):
        h = 0.3
        tets = triangulate_cell(np.array([0.1, -0.2, 0.5]), h)
        assert len(tets) == 5
        assert sum(t.volume for t in tets) == pytest.approx(h ** 3, rel=1e-12)
        for t in tets[:4]:
            assert t.volume == pytest.approx(h ** 3 / 6.0, rel=1e-12)
        assert tets[4].volume == pytest.approx(h ** 3 / 3.0, rel=1e-12)


class TestEdgeIntersection:

    def test_linear_root(self):
        point = edge_intersection([0.0, 0.0, 0.0], [1.0, 0.0, 0.0], -1.0, 3.0)
        np.testing.assert_allclose(point, [0.25, 0.0, 0.0], atol=1e-15)

    def test_same_sign_raises(self):
        with pytest.raises(PreconditionViolation):
            edge_intersection([0.0, 0.0, 0.0], [1.0, 0.0, 0.0], 1.0, 3.0)
        with pytest.raises(PreconditionViolation):
            edge_intersection([0.0, 0.0, 0.0], [1.0, 0.0, 0.0], 0.0, 3.0)


class TestIntersectSimplex:
    """Clipping a tetrahedron by a linear level set, one case per negative-vertex count."""

    def test_no_negative_vertex(self):
        cut = intersect_simplex(REFERENCE, np.ones(4))
        assert cut.gamma == [] and cut.negative == []

    def test_all_negative(self):
        cut = intersect_simplex(REFERENCE, -np.ones(4))
        assert cut.gamma == []
        assert negative_volume(cut) == pytest.approx(1.0 / 6.0, abs=1e-15)

    def test_one_negative_vertex(self):
        s = 0.4
        cut = intersect_simplex(REFERENCE, phi_on(REFERENCE, lambda v: v.sum() - s))
        assert len(cut.gamma) == 1
        assert negative_volume(cut) == pytest.approx(s ** 3 / 6.0, abs=1e-14)
        assert gamma_area(cut) == pytest.approx(math.sqrt(3.0) / 2.0 * s ** 2, abs=1e-14)

    def test_three_negative_vertices(self):
        s = 0.4
        cut = intersect_simplex(REFERENCE, phi_on(REFERENCE, lambda v: s - v.sum()))
        assert len(cut.negative) == 3
        assert negative_volume(cut) == pytest.approx((1.0 - s ** 3) / 6.0, abs=1e-14)
        assert gamma_area(cut) == pytest.approx(math.sqrt(3.0) / 2.0 * s ** 2, abs=1e-14)

    def test_two_negative_vertices(self):
        """The plane x + y = 1/2 halves the reference tetrahedron."""
        cut = intersect_simplex(REFERENCE, phi_on(REFERENCE, lambda v: v[0] + v[1] - 0.5))
        assert len(cut.gamma) == 2
        assert len(cut.negative) == 3
        assert negative_volume(cut) == pytest.approx(1.0 / 12.0, abs=1e-14)
        assert gamma_area(cut) == pytest.approx(math.sqrt(2.0) / 4.0, abs=1e-14)

    def test_exact_zero_goes_negative(self):
        cut = intersect_simplex(REFERENCE, np.array([0.0, 1.0, 1.0, 1.0]))
        assert len(cut.gamma) == 1
        assert negative_volume(cut) < 1e-30

    def test_rejects_triangle(self):
        triangle = Simplex(REFERENCE.vertices[:3])
        with pytest.raises(PreconditionViolation):
            intersect_simplex(triangle, np.ones(3))

    @given(st.lists(
        st.one_of(st.floats(min_value=-1.0, max_value=-1e-3), st.floats(min_value=1e-3, max_value=1.0)),
        min_size=4, max_size=4,
    ))
    def test_sides_partition_the_tetrahedron(self, values):
        """Negative parts of phi and -phi tile the simplex and share the interface."""
        phi = np.array(values)
        inside = intersect_simplex(REFERENCE, phi)
        outside = intersect_simplex(REFERENCE, -phi)
        assert negative_volume(inside) + negative_volume(outside) == pytest.approx(1.0 / 6.0, abs=1e-12)
        assert gamma_area(inside) == pytest.approx(gamma_area(outside), abs=1e-12)


class TestFacesAndQuadrature:

    def test_triangle_negative_area(self):
        vertices = np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
        phi = vertices[:, 0] + vertices[:, 1] - 0.5
        assert triangle_negative_area(vertices, phi) == pytest.approx(0.125, abs=1e-15)
        assert triangle_negative_area(vertices, -phi) == pytest.approx(0.375, abs=1e-15)
        assert triangle_negative_area(vertices, np.ones(3)) == 0.0
        assert triangle_negative_area(vertices, -np.ones(3)) == pytest.approx(0.5)

    def test_linear_integral(self):
        """The integral of x over the reference tetrahedron is 1/24."""
        assert integrate_simplex(REFERENCE, REFERENCE.vertices[:, 0]) == pytest.approx(1.0 / 24.0, abs=1e-15)

    def test_integral_needs_vertex_values(self):
        with pytest.raises(PreconditionViolation):
            integrate_simplex(REFERENCE, np.ones(3))
