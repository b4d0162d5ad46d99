"""The elliptic interface problem container."""

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import torch

from .errors import PreconditionViolation
from .levelset import LevelSetField

TorchField = Callable[[torch.Tensor], torch.Tensor]

COEFFICIENTS = (
    "mu_minus", "mu_plus", "k_minus", "k_plus", "f_minus", "f_plus",
    "alpha", "beta", "dirichlet_g",
)


def constant(value: float) -> TorchField:
    """A spatially constant field."""
    def fn(x):
        return torch.full(x.shape[:-1], float(value), dtype=x.dtype, device=x.device)
    return fn


@dataclass
class ProblemSpec:
    """
    ``k u - div(mu grad u) = f`` on both sides of ``phi = 0`` with
    ``[u] = alpha`` and ``[mu d_n u] = beta`` across the interface and
    ``u = dirichlet_g`` on the box boundary.

    Every coefficient is a torch callable mapping ``(..., 3)`` float64
    tensors to ``(...)`` tensors; :meth:`value` evaluates them on numpy input.
    ``alpha`` and ``beta`` are evaluated at projection points on the interface.
    """
    name: str
    lo: np.ndarray
    hi: np.ndarray
    phi: LevelSetField
    mu_minus: TorchField
    mu_plus: TorchField
    k_minus: TorchField
    k_plus: TorchField
    f_minus: TorchField
    f_plus: TorchField
    alpha: TorchField
    beta: TorchField
    dirichlet_g: TorchField
    exact_minus: Optional[TorchField] = None
    exact_plus: Optional[TorchField] = None
    # multiply solutions by this factor to recover physical units
    solution_scale: float = 1.0
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.lo = np.asarray(self.lo, dtype=np.float64)
        self.hi = np.asarray(self.hi, dtype=np.float64)
        if self.lo.shape != (3,) or self.hi.shape != (3,) or not np.all(self.lo < self.hi):
            raise PreconditionViolation(f"invalid problem box {self.lo} .. {self.hi}")

    @property
    def has_exact(self) -> bool:
        return self.exact_minus is not None and self.exact_plus is not None

    def coefficient(self, name: str, side: Optional[str] = None) -> TorchField:
        if side is not None:
            name = f"{name}_{side}"
        if name not in COEFFICIENTS and name not in ("exact_minus", "exact_plus"):
            raise KeyError(f"unknown coefficient {name!r}")
        fn = getattr(self, name)
        if fn is None:
            raise PreconditionViolation(f"problem {self.name!r} has no {name}")
        return fn

    def value(self, name: str, x, side: Optional[str] = None) -> np.ndarray:
        """Evaluate a coefficient on numpy points of shape ``(..., 3)``."""
        fn = self.coefficient(name, side)
        tensor = torch.as_tensor(np.asarray(x, dtype=np.float64))
        return fn(tensor).detach().numpy()

    def exact(self, side: str, x) -> np.ndarray:
        return self.value("exact", x, side)

    def exact_normal_derivative(self, side: str, x, direction) -> np.ndarray:
        """Directional derivative of the exact solution of one side."""
        fn = self.coefficient("exact", side)
        x = torch.as_tensor(np.asarray(x, dtype=np.float64)).clone().requires_grad_(True)
        value = fn(x)
        grad = None
        if value.requires_grad:
            (grad,) = torch.autograd.grad(value.sum(), x, allow_unused=True)
        if grad is None:
            grad = torch.zeros_like(x)
        direction = torch.as_tensor(np.asarray(direction, dtype=np.float64))
        return (grad * direction).sum(-1).detach().numpy()

    def boundary_distance(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        return np.minimum(x - self.lo, self.hi - x).min(axis=-1)

    def check_coefficients(self, x) -> None:
        """
        Check positivity of mu and nonnegativity of k at sample points.

        Raises
        ------
        PreconditionViolation
            If any sampled diffusion coefficient is not positive or any
            reaction coefficient is negative.
        """
        for side in ("minus", "plus"):
            mu = self.value("mu", x, side)
            if np.any(mu <= 0):
                raise PreconditionViolation(f"mu_{side} must be positive, found {mu.min():.3e}")
            k = self.value("k", x, side)
            if np.any(k < 0):
                raise PreconditionViolation(f"k_{side} must be nonnegative, found {k.min():.3e}")
