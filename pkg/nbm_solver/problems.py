"""Built-in benchmark problems."""

import math
from dataclasses import dataclass
from typing import Callable, Dict, Optional, Tuple

import numpy as np
import torch

from .levelset import LevelSetField
from .problem import ProblemSpec, constant
from .sampling import PointCloud, UniformGrid

STAR_RADIUS = 0.483
STAR_MODES = ((3, 0.1, 0.5), (4, -0.1, 1.8), (7, 0.15, 0.0))

LPBE_SIGMA = 1.0
LPBE_MU_MINUS = 2.0
LPBE_MU_PLUS = 80.0
LPBE_KAPPA = 1.0299e-3
LPBE_OMEGA = 7.0465e3
LPBE_OMEGA_SCALE = 293.6


@dataclass(frozen=True)
class ProblemDefaults:
    """Network shapes and sampling a problem is solved with unless overridden."""
    layers_minus: Tuple[int, ...]
    layers_plus: Tuple[int, ...]
    activation_minus: str
    activation_plus: str
    sampling: object


def _xyz(x):
    return x[..., 0], x[..., 1], x[..., 2]


def _radius(x, xp):
    return xp.sqrt(x[..., 0] ** 2 + x[..., 1] ** 2 + x[..., 2] ** 2)


def sphere_phi(x, xp=np):
    return _radius(x, xp) - 0.5


def star_phi(x, xp=np):
    """Star-shaped level set with angular modulation around the z axis."""
    r = _radius(x, xp)
    planar = (x[..., 0] ** 2 + x[..., 1] ** 2) / (r ** 2 + 1e-30)
    theta = xp.arctan2(x[..., 1], x[..., 0])
    modulation = sum(beta * xp.cos(n * (theta - shift)) for n, beta, shift in STAR_MODES)
    return r - STAR_RADIUS * (1.0 + planar ** 2 * modulation)


def lpbe_phi(x, xp=np):
    return _radius(x, xp) - LPBE_SIGMA


def _gradient(fn, x):
    x = x.detach().requires_grad_(True)
    (grad,) = torch.autograd.grad(fn(x).sum(), x)
    return grad


def _unit_normal(phi_torch, x):
    grad = _gradient(lambda y: phi_torch(y, torch), x)
    return grad / torch.linalg.norm(grad, dim=-1, keepdim=True).clamp_min(1e-300)


def source_from_exact(mu, k, exact):
    """``f = k u - div(mu grad u)`` by automatic differentiation of the exact field."""
    def f(x):
        with torch.enable_grad():
            y = x.detach().requires_grad_(True)
            u = exact(y)
            (grad,) = torch.autograd.grad(u.sum(), y, create_graph=True)
            flux = mu(y)[..., None] * grad
            divergence = torch.zeros_like(u)
            for axis in range(3):
                (d,) = torch.autograd.grad(flux[..., axis].sum(), y, create_graph=True)
                divergence = divergence + d[..., axis]
            value = k(y) * u - divergence
        return value.detach()
    return f


def jump_data(phi_torch, mu_minus, mu_plus, exact_minus, exact_plus):
    """``alpha = u+ - u-`` and ``beta = mu+ d_n u+ - mu- d_n u-`` from exact fields."""
    def alpha(x):
        return exact_plus(x) - exact_minus(x)

    def beta(x):
        with torch.enable_grad():
            normal = _unit_normal(phi_torch, x)
            flux_plus = mu_plus(x) * (_gradient(exact_plus, x) * normal).sum(-1)
            flux_minus = mu_minus(x) * (_gradient(exact_minus, x) * normal).sum(-1)
        return (flux_plus - flux_minus).detach()

    return alpha, beta


def bulk_problem() -> ProblemSpec:
    def exact(x):
        x_, y_, z_ = _xyz(x)
        return torch.cos(x_) * torch.sin(y_) * torch.cos(z_)

    def source(x):
        return 3.0 * exact(x)

    return ProblemSpec(
        name="bulk",
        lo=np.full(3, -1.0),
        hi=np.full(3, 1.0),
        phi=LevelSetField.analytic(lambda x: np.ones(np.shape(x)[:-1])),
        mu_minus=constant(1.0), mu_plus=constant(1.0),
        k_minus=constant(0.0), k_plus=constant(0.0),
        f_minus=source, f_plus=source,
        alpha=constant(0.0), beta=constant(0.0),
        dirichlet_g=exact,
        exact_minus=exact, exact_plus=exact,
    )


def sphere_problem() -> ProblemSpec:
    def exact_minus(x):
        return torch.exp(x[..., 2])

    def exact_plus(x):
        x_, y_, _ = _xyz(x)
        return torch.cos(x_) * torch.sin(y_)

    def mu_minus(x):
        x_, y_, _ = _xyz(x)
        return y_ ** 2 * torch.log(x_ + 2.0) + 4.0

    def mu_plus(x):
        return torch.exp(-x[..., 2])

    def f_minus(x):
        return -mu_minus(x) * torch.exp(x[..., 2])

    def f_plus(x):
        return 2.0 * exact_plus(x) * torch.exp(-x[..., 2])

    alpha, beta = jump_data(sphere_phi, mu_minus, mu_plus, exact_minus, exact_plus)
    return ProblemSpec(
        name="sphere",
        lo=np.full(3, -1.0),
        hi=np.full(3, 1.0),
        phi=LevelSetField.analytic(sphere_phi),
        mu_minus=mu_minus, mu_plus=mu_plus,
        k_minus=constant(0.0), k_plus=constant(0.0),
        f_minus=f_minus, f_plus=f_plus,
        alpha=alpha, beta=beta,
        dirichlet_g=exact_plus,
        exact_minus=exact_minus, exact_plus=exact_plus,
    )


def star_problem(phi: Optional[LevelSetField] = None) -> ProblemSpec:
    """
    Star interface with oscillating inner diffusion.

    A sampled ``phi`` (e.g. read from a grid file) replaces the analytic
    level set for the geometry; jump data keep using the analytic normal.
    """
    def exact_minus(x):
        x_, y_, z_ = _xyz(x)
        return torch.sin(2.0 * x_) * torch.cos(2.0 * y_) * torch.exp(z_)

    def exact_plus(x):
        x_, y_, z_ = _xyz(x)
        s = (y_ - x_) / 3.0
        chebyshev = 16.0 * s ** 5 - 20.0 * s ** 3 + 5.0 * s
        return chebyshev * torch.log(x_ + y_ + 3.0) * torch.cos(z_)

    def mu_minus(x):
        x_, y_, z_ = _xyz(x)
        return 10.0 * (
            1.0 + 0.2 * torch.cos(2.0 * math.pi * (x_ + y_)) * torch.sin(2.0 * math.pi * (x_ - y_)) * torch.cos(z_)
        )

    mu_plus = constant(1.0)
    zero = constant(0.0)
    alpha, beta = jump_data(star_phi, mu_minus, mu_plus, exact_minus, exact_plus)
    return ProblemSpec(
        name="star",
        lo=np.full(3, -1.0),
        hi=np.full(3, 1.0),
        phi=phi if phi is not None else LevelSetField.analytic(star_phi),
        mu_minus=mu_minus, mu_plus=mu_plus,
        k_minus=zero, k_plus=zero,
        f_minus=source_from_exact(mu_minus, zero, exact_minus),
        f_plus=source_from_exact(mu_plus, zero, exact_plus),
        alpha=alpha, beta=beta,
        dirichlet_g=exact_plus,
        exact_minus=exact_minus, exact_plus=exact_plus,
    )


def lpbe_problem(scaled: bool = True) -> ProblemSpec:
    """
    Linearised Poisson-Boltzmann equation around a unit spherical molecule.

    The minus solution is the regular part of the potential inside the
    molecule; the Coulomb singularity ``g = omega / (4 pi mu- r)`` enters
    through ``alpha = g`` and ``beta = mu- d_n g``. With ``scaled`` the charge
    is divided by 293.6 and ``solution_scale`` restores physical units.
    """
    omega = LPBE_OMEGA / LPBE_OMEGA_SCALE if scaled else LPBE_OMEGA
    sigma, kappa = LPBE_SIGMA, LPBE_KAPPA
    mu_m, mu_p = LPBE_MU_MINUS, LPBE_MU_PLUS

    def coulomb(x):
        return omega / (4.0 * math.pi * mu_m * _radius(x, torch))

    def exact_minus(x):
        value = omega / (4.0 * math.pi * sigma) * (1.0 / (mu_p * (1.0 + kappa * sigma)) - 1.0 / mu_m)
        return torch.full(x.shape[:-1], value, dtype=x.dtype)

    def exact_plus(x):
        r = _radius(x, torch)
        return omega / (4.0 * math.pi * mu_p) * torch.exp(kappa * (sigma - r)) / ((1.0 + kappa * sigma) * r)

    def beta(x):
        with torch.enable_grad():
            normal = _unit_normal(lpbe_phi, x)
            flux = mu_m * (_gradient(coulomb, x) * normal).sum(-1)
        return flux.detach()

    return ProblemSpec(
        name="lpbe",
        lo=np.full(3, -2.5),
        hi=np.full(3, 2.5),
        phi=LevelSetField.analytic(lpbe_phi),
        mu_minus=constant(mu_m), mu_plus=constant(mu_p),
        k_minus=constant(0.0), k_plus=constant(mu_p * kappa ** 2),
        f_minus=constant(0.0), f_plus=constant(0.0),
        alpha=coulomb, beta=beta,
        dirichlet_g=exact_plus,
        exact_minus=exact_minus, exact_plus=exact_plus,
        solution_scale=LPBE_OMEGA_SCALE if scaled else 1.0,
        metadata={"omega": omega, "kappa": kappa, "sigma": sigma},
    )


PROBLEMS: Dict[str, Callable[[], ProblemSpec]] = {
    "bulk": bulk_problem,
    "sphere": sphere_problem,
    "star": star_problem,
    "lpbe": lpbe_problem,
}

DEFAULTS: Dict[str, ProblemDefaults] = {
    "bulk": ProblemDefaults((3,) + (10,) * 5 + (1,), (3,) + (10,) * 5 + (1,), "celu", "celu", UniformGrid(16)),
    "sphere": ProblemDefaults((3,) + (10,) * 5 + (1,), (3,) + (10,) * 5 + (1,), "sine", "sine", UniformGrid(16)),
    "star": ProblemDefaults((3, 100, 1), (3, 100, 1), "sine", "sine", UniformGrid(16)),
    "lpbe": ProblemDefaults((3, 1, 1), (3, 10, 10, 1), "tanh", "celu", PointCloud(2000, 100, 1000, 200, 0.00244)),
}


def builtin_problem(name: str) -> ProblemSpec:
    """
    Look up a built-in problem by name.

    Raises
    ------
    KeyError
        If ``name`` is not one of ``bulk``, ``sphere``, ``star`` or ``lpbe``.
    """
    try:
        factory = PROBLEMS[name]
    except KeyError:
        raise KeyError(f"unknown problem {name!r}; choose from {', '.join(PROBLEMS)}") from None
    return factory()


def problem_defaults(name: str) -> ProblemDefaults:
    return DEFAULTS[name]
