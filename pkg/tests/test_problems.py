"""Tests for the built-in problems."""

import math

import numpy as np
import pytest
import torch

from nbm_solver.errors import PreconditionViolation
from nbm_solver.levelset import LevelSetField
from nbm_solver.problem import ProblemSpec, constant
from nbm_solver.problems import (
    LPBE_OMEGA,
    LPBE_OMEGA_SCALE,
    PROBLEMS,
    builtin_problem,
    lpbe_phi,
    lpbe_problem,
    problem_defaults,
    source_from_exact,
    sphere_phi,
    star_phi,
)
from nbm_solver.sampling import PointCloud, UniformGrid, project_to_interface

INTERFACES = {"sphere": sphere_phi, "star": star_phi, "lpbe": lpbe_phi}


def tensor(points):
    return torch.as_tensor(np.asarray(points, dtype=np.float64))


class TestRegistry:

    def test_unknown_problem(self):
        with pytest.raises(KeyError, match="unknown problem"):
            builtin_problem("torus")

    @pytest.mark.parametrize("name", sorted(PROBLEMS))
    def test_every_problem_is_well_posed(self, name):
        spec = builtin_problem(name)
        assert spec.name == name
        assert spec.has_exact
        x = np.random.default_rng(0).uniform(spec.lo, spec.hi, size=(50, 3))
        spec.check_coefficients(x)

    def test_defaults(self):
        assert problem_defaults("bulk").sampling == UniformGrid(16)
        lpbe = problem_defaults("lpbe")
        assert isinstance(lpbe.sampling, PointCloud)
        assert (lpbe.activation_minus, lpbe.activation_plus) == ("tanh", "celu")


class TestSources:

    def test_bulk_source(self):
        spec = builtin_problem("bulk")
        x = tensor([[0.1, 0.2, 0.3], [-0.5, 0.7, 0.0]])
        np.testing.assert_allclose(spec.f_plus(x).numpy(), 3.0 * spec.exact_plus(x).numpy())

    def test_source_from_exact(self):
        f = source_from_exact(constant(1.0), constant(0.0), lambda x: (x ** 2).sum(-1))
        np.testing.assert_allclose(f(tensor([[0.3, -0.1, 0.4], [0.0, 0.0, 0.0]])).numpy(), -6.0)

    def test_source_with_variable_coefficients(self):
        """f = k u - div(mu grad u) for mu = 1 + x, u = x^2, k = 2."""
        f = source_from_exact(lambda x: 1.0 + x[..., 0], constant(2.0), lambda x: x[..., 0] ** 2)
        x = tensor([[0.5, 0.0, 0.0]])
        expected = 2.0 * 0.25 - (2.0 * (1.0 + 0.5) + 2.0 * 0.5)
        assert float(f(x)) == pytest.approx(expected)

    def test_sphere_source_matches_exact_solution(self):
        spec = builtin_problem("sphere")
        x = tensor([[0.1, 0.2, -0.1], [0.7, -0.2, 0.4]])
        for side in ("minus", "plus"):
            mu = spec.coefficient("mu", side)
            expected = source_from_exact(mu, constant(0.0), spec.coefficient("exact", side))(x)
            np.testing.assert_allclose(spec.coefficient("f", side)(x).numpy(), expected.numpy(), rtol=1e-10)


class TestJumpData:

    @pytest.mark.parametrize("name", ["sphere", "star", "lpbe"])
    def test_jumps_at_projected_interface_points(self, name):
        """alpha and beta equal the value and flux jumps of the exact fields on the interface."""
        spec = builtin_problem(name)
        candidates = np.random.default_rng(0).uniform(spec.lo, spec.hi, size=(2000, 3))
        projected, converged = project_to_interface(spec, candidates, 1e-4, tolerance=1e-12)
        assert converged.sum() >= 1000
        x = projected[converged][:1000]

        y = tensor(x).requires_grad_(True)
        (grad,) = torch.autograd.grad(INTERFACES[name](y, torch).sum(), y)
        normal = (grad / grad.norm(dim=-1, keepdim=True)).numpy()
        value_jump = spec.exact("plus", x) - spec.exact("minus", x)
        flux_jump = (
            spec.value("mu_plus", x) * spec.exact_normal_derivative("plus", x, normal)
            - spec.value("mu_minus", x) * spec.exact_normal_derivative("minus", x, normal)
        )
        np.testing.assert_allclose(spec.value("alpha", x), value_jump, rtol=0, atol=1e-10)
        np.testing.assert_allclose(spec.value("beta", x), flux_jump, rtol=0, atol=1e-10)

    def test_sphere_flux_jump_at_north_pole(self):
        """At (0, 0, 1/2) the normal is e_z so beta = mu+ d_z u+ - mu- d_z u-."""
        spec = builtin_problem("sphere")
        x = tensor([[0.0, 0.0, 0.5]])
        assert float(spec.beta(x)) == pytest.approx(-4.0 * math.exp(0.5), rel=1e-12)

    def test_star_interface_contains_the_origin(self):
        spec = builtin_problem("star")
        assert spec.phi(np.zeros(3)) < 0
        assert spec.phi(np.array([0.95, 0.0, 0.0])) > 0


class TestLpbe:
    """The linearised Poisson-Boltzmann benchmark."""

    def test_value_jump_is_the_coulomb_potential(self):
        spec = lpbe_problem()
        x = tensor([[1.0, 0.0, 0.0], [0.0, 0.6, 0.8]])
        jump = spec.exact_plus(x) - spec.exact_minus(x)
        np.testing.assert_allclose(jump.numpy(), spec.alpha(x).numpy(), rtol=1e-12)

    def test_flux_jump(self):
        spec = lpbe_problem()
        omega = LPBE_OMEGA / LPBE_OMEGA_SCALE
        x = tensor([[1.0, 0.0, 0.0]])
        assert float(spec.beta(x)) == pytest.approx(-omega / (4.0 * math.pi), rel=1e-12)
        radial = spec.exact_normal_derivative("plus", x.numpy(), np.array([[1.0, 0.0, 0.0]]))
        assert float(spec.beta(x)) == pytest.approx(80.0 * float(radial[0]), rel=1e-9)

    def test_scaling(self):
        scaled, physical = lpbe_problem(), lpbe_problem(scaled=False)
        x = tensor([[1.5, 0.0, 0.0]])
        assert scaled.solution_scale == LPBE_OMEGA_SCALE
        assert physical.solution_scale == 1.0
        assert float(scaled.exact_plus(x)) * scaled.solution_scale == pytest.approx(float(physical.exact_plus(x)))

    def test_inner_solution_is_constant(self):
        spec = lpbe_problem()
        x = np.array([[0.1, 0.2, 0.3]])
        np.testing.assert_array_equal(spec.exact_normal_derivative("minus", x, np.array([[0.0, 0.0, 1.0]])), [0.0])


class TestProblemSpec:

    def flat_problem(self, **changes):
        fields = dict(
            name="flat", lo=-np.ones(3), hi=np.ones(3),
            phi=LevelSetField.analytic(lambda x: np.asarray(x)[..., 0]),
            mu_minus=constant(1.0), mu_plus=constant(2.0),
            k_minus=constant(0.0), k_plus=constant(0.0),
            f_minus=constant(0.0), f_plus=constant(0.0),
            alpha=constant(0.0), beta=constant(0.0), dirichlet_g=constant(0.0),
        )
        fields.update(changes)
        return ProblemSpec(**fields)

    def test_rejects_empty_box(self):
        with pytest.raises(PreconditionViolation):
            self.flat_problem(hi=-np.ones(3))

    def test_rejects_nonpositive_diffusion(self):
        spec = self.flat_problem(mu_plus=constant(0.0))
        with pytest.raises(PreconditionViolation, match="mu_plus"):
            spec.check_coefficients(np.zeros((2, 3)))

    def test_rejects_negative_reaction(self):
        spec = self.flat_problem(k_minus=constant(-1.0))
        with pytest.raises(PreconditionViolation, match="k_minus"):
            spec.check_coefficients(np.zeros((2, 3)))

    def test_missing_exact_solution(self):
        spec = self.flat_problem()
        assert not spec.has_exact
        with pytest.raises(PreconditionViolation):
            spec.exact("minus", np.zeros((1, 3)))

    def test_boundary_distance(self):
        spec = self.flat_problem()
        np.testing.assert_allclose(spec.boundary_distance(np.array([[0.5, 0.0, -0.9], [0.0, 0.0, 0.0]])), [0.1, 1.0])
