"""Pointwise PDE residual loss used as a comparison baseline."""

import numpy as np
import torch

from .discretization import MINUS, PLUS, SIDES, InterfaceFrame, pinn_interface_residual, side_of
from .levelset import normals_and_deltas
from .problem import ProblemSpec


def _coefficient_gradient(fn, x: np.ndarray) -> np.ndarray:
    y = torch.as_tensor(x).clone().requires_grad_(True)
    value = fn(y)
    if not value.requires_grad:
        return np.zeros_like(x)
    (grad,) = torch.autograd.grad(value.sum(), y, allow_unused=True)
    return np.zeros_like(x) if grad is None else grad.detach().numpy()


class PinnBaseline:
    """
    Strong-form residuals at collocation points.

    Interior points contribute ``k u - mu lap(u) - grad(mu) . grad(u) - f``
    with the network of their side, points within ``h / 2`` of the box
    contribute ``u - g``, and points tagged ``interface`` or within ``h`` of
    the interface also contribute the Taylor-expanded jump mismatch with the
    normal derivative of their own side's network. Every coefficient is
    evaluated once here.
    """

    def __init__(self, spec: ProblemSpec, positions, kinds, h):
        positions = np.asarray(positions, dtype=np.float64).reshape(-1, 3)
        self.n_points = len(positions)
        self.positions = positions
        h = np.broadcast_to(np.asarray(h, dtype=np.float64), (self.n_points,))
        kinds = np.asarray(kinds)
        phi = spec.phi

        self.sides = np.array([side_of(v) for v in phi(phi.clip(positions))])
        self.boundary = (kinds == "boundary") | (spec.boundary_distance(positions) <= 0.5 * h)
        self.g = spec.value("dirichlet_g", positions)

        self.bulk = {}
        for side in SIDES:
            mask = ~self.boundary & (self.sides == side)
            x = positions[mask]
            self.bulk[side] = {
                "index": np.flatnonzero(mask),
                "mu": spec.value("mu", x, side),
                "k": spec.value("k", x, side),
                "f": spec.value("f", x, side),
                "grad_mu": _coefficient_gradient(spec.coefficient("mu", side), x),
            }

        normal, delta, proj, degenerate = normals_and_deltas(phi, phi.clip(positions), h)
        band = ~self.boundary & ~degenerate & ((kinds == "interface") | (np.abs(delta) <= h))
        self.band = {}
        for side in SIDES:
            mask = band & (self.sides == side)
            frame = InterfaceFrame(normal[mask], delta[mask], proj[mask])
            self.band[side] = (np.flatnonzero(mask), frame)
        self.spec = spec

    def batch_residuals(self, pair, points=None) -> torch.Tensor:
        """All residual rows of the selected points, concatenated."""
        wanted = np.zeros(self.n_points, dtype=bool)
        wanted[np.arange(self.n_points) if points is None else np.asarray(points, dtype=np.int64)] = True
        rows = []

        for side in SIDES:
            data = self.bulk[side]
            keep = wanted[data["index"]]
            if not np.any(keep):
                continue
            net = pair.network(side)
            u, grad, laplacian = net.gradient_and_laplacian(self.positions[data["index"][keep]])
            grad_mu = torch.as_tensor(data["grad_mu"][keep])
            rows.append(
                torch.as_tensor(data["k"][keep]) * u
                - torch.as_tensor(data["mu"][keep]) * laplacian
                - (grad_mu * grad).sum(-1)
                - torch.as_tensor(data["f"][keep])
            )

        boundary = np.flatnonzero(self.boundary & wanted)
        for side in SIDES:
            index = boundary[self.sides[boundary] == side]
            if len(index):
                u = pair.network(side)(torch.as_tensor(self.positions[index]))
                rows.append(u - torch.as_tensor(self.g[index]))

        for side in SIDES:
            index, frame = self.band[side]
            keep = wanted[index]
            if not np.any(keep):
                continue
            frame = InterfaceFrame(frame.normal[keep], frame.delta[keep], frame.proj[keep])
            x = torch.as_tensor(self.positions[index[keep]])
            u_m = pair.network(MINUS)(x)
            u_p = pair.network(PLUS)(x)
            dnu = pair.network(side).directional_derivative(frame.proj, frame.normal, create_graph=True)
            rows.append(pinn_interface_residual(self.spec, frame, u_m, u_p, dnu, side))

        if not rows:
            return torch.zeros(0, dtype=torch.float64)
        return torch.cat(rows)


def pinn_baseline_loss(spec: ProblemSpec, pair, positions, kinds, h) -> torch.Tensor:
    """Sum of squared bulk, boundary and interface residuals over the points."""
    residuals = PinnBaseline(spec, positions, kinds, h).batch_residuals(pair)
    return (residuals ** 2).sum()
