"""Tests for the levelset module."""

import numpy as np
import pytest

from nbm_solver.errors import DegenerateGradientError, FileFormatError, GeometryDomainError
from nbm_solver.levelset import (
    LevelSetField,
    SampledGrid,
    curvature,
    interp_quadratic,
    interp_trilinear,
    normal_and_delta,
    normals_and_deltas,
    read_levelset_grid,
    write_levelset_grid,
)
from nbm_solver.problems import sphere_phi


def grid_of(function, n=5, lo=-1.0, hi=1.0):
    axes = [np.linspace(lo, hi, n)] * 3
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    return SampledGrid(values=function(mesh), lo=np.full(3, lo), hi=np.full(3, hi))


class TestSampledGrid:
    """Construction and interpolation of sampled grids."""

    def test_rejects_small_grid(self):
        with pytest.raises(GeometryDomainError):
            SampledGrid(values=np.zeros((1, 4, 4)), lo=np.zeros(3), hi=np.ones(3))

    def test_rejects_inverted_box(self):
        with pytest.raises(GeometryDomainError):
            SampledGrid(values=np.zeros((3, 3, 3)), lo=np.ones(3), hi=np.zeros(3))

    def test_trilinear_reproduces_linear_field(self):
        """Linear fields are interpolated exactly."""
        grid = grid_of(lambda x: x[..., 0] + 2.0 * x[..., 1] - 3.0 * x[..., 2])
        points = np.random.default_rng(0).uniform(-1, 1, size=(50, 3))
        expected = points[:, 0] + 2.0 * points[:, 1] - 3.0 * points[:, 2]
        np.testing.assert_allclose(interp_trilinear(grid, points), expected, atol=1e-12)
        np.testing.assert_allclose(interp_quadratic(grid, points), expected, atol=1e-12)

    def test_quadratic_reproduces_axis_parabola(self):
        """The second-difference correction removes the trilinear error of x^2."""
        grid = grid_of(lambda x: x[..., 0] ** 2, n=9)
        points = np.random.default_rng(1).uniform(-1, 1, size=(50, 3))
        np.testing.assert_allclose(interp_quadratic(grid, points), points[:, 0] ** 2, atol=1e-12)
        assert np.max(np.abs(interp_trilinear(grid, points) - points[:, 0] ** 2)) > 1e-4

    def test_outside_point_raises(self):
        grid = grid_of(lambda x: x[..., 0])
        with pytest.raises(GeometryDomainError) as exc_info:
            interp_trilinear(grid, np.array([1.5, 0.0, 0.0]))
        assert "1.5" in str(exc_info.value)

    def test_scalar_query_shape(self):
        grid = grid_of(lambda x: x[..., 1])
        assert np.shape(interp_trilinear(grid, np.array([0.1, 0.2, 0.3]))) == ()


class TestLevelSetField:
    """Analytic and sampled level sets."""

    def test_needs_exactly_one_source(self):
        with pytest.raises(ValueError):
            LevelSetField()
        with pytest.raises(ValueError):
            LevelSetField(function=sphere_phi, grid=grid_of(sphere_phi))

    def test_unknown_interp_mode(self):
        with pytest.raises(ValueError):
            LevelSetField.sampled(grid_of(sphere_phi), interp_mode="cubic")

    def test_sampled_matches_analytic(self):
        """A 41^3 sample of the sphere agrees with the analytic field to O(h^2)."""
        sampled = LevelSetField.from_callable_on_grid(sphere_phi, (41, 41, 41), -np.ones(3), np.ones(3))
        rng = np.random.default_rng(2)
        directions = rng.normal(size=(100, 3))
        directions /= np.linalg.norm(directions, axis=1, keepdims=True)
        points = directions * rng.uniform(0.3, 0.9, size=(100, 1))
        assert sampled.source == "sampled"
        np.testing.assert_allclose(sampled(points), sphere_phi(points), atol=2e-3)

    def test_clip_only_for_sampled(self):
        analytic = LevelSetField.analytic(sphere_phi)
        sampled = LevelSetField.sampled(grid_of(sphere_phi))
        point = np.array([2.0, 0.0, 0.0])
        np.testing.assert_array_equal(analytic.clip(point), point)
        np.testing.assert_array_equal(sampled.clip(point), [1.0, 0.0, 0.0])


class TestNormals:
    """Normals, signed distances, projections and curvature."""

    def test_sphere_normal_and_projection(self):
        phi = LevelSetField.analytic(sphere_phi)
        normal, delta, proj = normal_and_delta(phi, np.array([0.8, 0.0, 0.0]), 0.1)
        np.testing.assert_allclose(normal, [1.0, 0.0, 0.0], atol=1e-8)
        assert delta == pytest.approx(0.3, abs=1e-8)
        np.testing.assert_allclose(proj, [0.5, 0.0, 0.0], atol=1e-8)

    def test_degenerate_gradient(self):
        phi = LevelSetField.analytic(lambda x: np.ones(np.shape(x)[:-1]))
        with pytest.raises(DegenerateGradientError):
            normal_and_delta(phi, np.zeros(3), 0.1)

    def test_batched_matches_single(self):
        phi = LevelSetField.analytic(sphere_phi)
        points = np.array([[0.8, 0.0, 0.0], [0.1, 0.2, -0.3], [0.0, 0.0, 0.0]])
        normal, delta, proj, degenerate = normals_and_deltas(phi, points, 0.1)
        for i in range(2):
            n_i, d_i, p_i = normal_and_delta(phi, points[i], 0.1)
            np.testing.assert_allclose(normal[i], n_i, atol=1e-12)
            assert delta[i] == pytest.approx(d_i, abs=1e-12)
            np.testing.assert_allclose(proj[i], p_i, atol=1e-12)
        # the sphere's distance function has a symmetric kink at the origin
        assert degenerate.tolist() == [False, False, True]
        np.testing.assert_array_equal(normal[2], np.zeros(3))

    def test_sphere_curvature(self):
        """The mean curvature of a sphere of radius 1/2 is 4."""
        phi = LevelSetField.analytic(sphere_phi)
        assert curvature(phi, np.array([0.5, 0.0, 0.0]), 1e-3) == pytest.approx(4.0, abs=1e-3)


class TestGridFiles:
    """The raw level-set grid format."""

    def test_write_then_read(self, tmp_path):
        grid = SampledGrid(
            values=np.random.default_rng(3).normal(size=(4, 3, 2)),
            lo=np.array([-1.0, -2.0, 0.0]),
            hi=np.array([1.0, 2.0, 0.5]),
        )
        path = tmp_path / "phi.grid"
        write_levelset_grid(path, grid)
        loaded = read_levelset_grid(path)
        np.testing.assert_array_equal(loaded.values, grid.values)
        np.testing.assert_array_equal(loaded.lo, grid.lo)
        np.testing.assert_array_equal(loaded.hi, grid.hi)

    def test_x_varies_fastest(self, tmp_path):
        values = np.arange(24, dtype=np.float64).reshape(4, 3, 2)
        path = tmp_path / "phi.grid"
        write_levelset_grid(path, SampledGrid(values=values, lo=np.zeros(3), hi=np.ones(3)))
        payload = path.read_bytes()
        body = np.frombuffer(payload[payload.index(b"\n") + 1:], dtype="<f8")
        assert payload.startswith(b"4 3 2 ")
        assert body[1] == values[1, 0, 0]
        assert body[4] == values[0, 1, 0]

    def test_truncated_payload(self, tmp_path):
        path = tmp_path / "phi.grid"
        header = b"2 2 2 0 0 0 1 1 1\n"
        path.write_bytes(header + b"\x00" * 20)
        with pytest.raises(FileFormatError) as exc_info:
            read_levelset_grid(path)
        assert exc_info.value.offset == len(header) + 20
        assert "byte offset" in str(exc_info.value)

    def test_bad_header(self, tmp_path):
        path = tmp_path / "phi.grid"
        path.write_bytes(b"2 2 two 0 0 0 1 1 1\n")
        with pytest.raises(FileFormatError) as exc_info:
            read_levelset_grid(path)
        assert exc_info.value.offset == 0
