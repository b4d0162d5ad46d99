"""Collocation point sets."""

from dataclasses import dataclass

import numpy as np

from .discretization import side_of
from .problem import ProblemSpec

PROJECTION_TOLERANCE = 1e-6


@dataclass(frozen=True)
class UniformGrid:
    n: int


@dataclass(frozen=True)
class PointCloud:
    n_plus: int
    n_minus: int
    n_boundary: int
    n_interface: int
    voxel: float = 0.00244


@dataclass
class CollocationPoints:
    """Points with their cell sizes and a tag of how each one was drawn."""
    positions: np.ndarray
    h: np.ndarray
    kinds: np.ndarray

    def __len__(self):
        return len(self.positions)

    def sides(self, spec: ProblemSpec) -> np.ndarray:
        phi = spec.phi
        return np.array([side_of(v) for v in phi(phi.clip(self.positions))])


def uniform_grid_points(spec: ProblemSpec, n: int) -> CollocationPoints:
    if n < 2:
        raise ValueError(f"a uniform grid needs at least 2 nodes per axis, got {n}")
    axes = [np.linspace(spec.lo[a], spec.hi[a], n) for a in range(3)]
    positions = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 3)
    h = float(np.min((spec.hi - spec.lo) / (n - 1)))
    kinds = np.where(spec.boundary_distance(positions) <= 0.5 * h, "boundary", "bulk")
    return CollocationPoints(positions, np.full(len(positions), h), kinds)


def _uniform_in_box(spec, rng, count):
    return spec.lo + (spec.hi - spec.lo) * rng.random((count, 3))


def _rejection_sample(spec, rng, count, want_negative, max_rounds=1000):
    found = []
    total = 0
    for _ in range(max_rounds):
        if total >= count:
            break
        candidates = _uniform_in_box(spec, rng, max(4 * count, 64))
        values = spec.phi(candidates)
        keep = candidates[(values <= 0) if want_negative else (values > 0)]
        found.append(keep)
        total += len(keep)
    points = np.concatenate(found) if found else np.zeros((0, 3))
    if len(points) < count:
        raise ValueError(
            f"could not draw {count} points on the {'minus' if want_negative else 'plus'} side"
        )
    return points[:count]


def _boundary_sample(spec, rng, count):
    points = _uniform_in_box(spec, rng, count)
    faces = rng.integers(0, 6, size=count)
    axis = faces // 2
    upper = faces % 2 == 1
    points[np.arange(count), axis] = np.where(upper, spec.hi[axis], spec.lo[axis])
    return points


def project_to_interface(spec: ProblemSpec, x: np.ndarray, h: float, iterations: int = 50,
                         tolerance: float = PROJECTION_TOLERANCE):
    """
    Newton projection ``x <- x - phi grad(phi) / |grad(phi)|^2``.

    Returns the projected points and a mask of those that reached
    ``|phi| <= tolerance`` inside the box.
    """
    phi = spec.phi
    x = np.array(x, dtype=np.float64)
    for _ in range(iterations):
        x = phi.clip(np.clip(x, spec.lo, spec.hi))
        values = phi(x)
        if np.all(np.abs(values) <= tolerance):
            break
        grad = phi.gradient(x, h)
        norm2 = np.sum(grad ** 2, axis=-1)
        safe = np.where(norm2 > 1e-24, norm2, 1.0)
        step = np.where(norm2[:, None] > 1e-24, (values / safe)[:, None] * grad, 0.0)
        x = x - step
    x = np.clip(x, spec.lo, spec.hi)
    return x, np.abs(phi(phi.clip(x))) <= tolerance


def _interface_sample(spec, rng, count, h, max_rounds=100):
    found = []
    total = 0
    for _ in range(max_rounds):
        if total >= count:
            break
        candidates = _uniform_in_box(spec, rng, max(2 * count, 64))
        projected, converged = project_to_interface(spec, candidates, h)
        found.append(projected[converged])
        total += int(converged.sum())
    points = np.concatenate(found) if found else np.zeros((0, 3))
    if len(points) < count:
        raise ValueError(f"could not project {count} points onto the interface")
    return points[:count]


def sample_collocation(spec: ProblemSpec, mode, seed: int = 0) -> CollocationPoints:
    """
    Draw collocation points.

    Parameters
    ----------
    spec : ProblemSpec
        The problem; its box and level set drive the sampling.
    mode : UniformGrid or PointCloud
        ``UniformGrid(n)`` gives the ``n^3`` box nodes with
        ``h = box / (n - 1)``. ``PointCloud`` draws uniform points on each
        side by rejection, points on the box faces and points projected onto
        the interface, all with cell size ``voxel``.
    seed : int
        Seed of the point-cloud generator.
    """
    if isinstance(mode, UniformGrid):
        return uniform_grid_points(spec, mode.n)
    if not isinstance(mode, PointCloud):
        raise TypeError(f"unknown sampling mode {mode!r}")
    counts = (mode.n_plus, mode.n_minus, mode.n_boundary, mode.n_interface)
    if min(counts) < 0:
        raise ValueError(f"point counts must be nonnegative, got {counts}")

    rng = np.random.default_rng(seed)
    parts = [
        (_rejection_sample(spec, rng, mode.n_plus, False) if mode.n_plus else np.zeros((0, 3)), "plus"),
        (_rejection_sample(spec, rng, mode.n_minus, True) if mode.n_minus else np.zeros((0, 3)), "minus"),
        (_boundary_sample(spec, rng, mode.n_boundary), "boundary"),
        (_interface_sample(spec, rng, mode.n_interface, mode.voxel) if mode.n_interface else np.zeros((0, 3)),
         "interface"),
    ]
    positions = np.concatenate([p for p, _ in parts]).reshape(-1, 3)
    kinds = np.concatenate([np.full(len(p), kind) for p, kind in parts])
    return CollocationPoints(positions, np.full(len(positions), mode.voxel), kinds)
