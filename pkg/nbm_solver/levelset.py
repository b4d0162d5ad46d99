"""Level-set fields: analytic callables or sampled grids with interpolation."""

from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Tuple

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from .errors import DegenerateGradientError, FileFormatError, GeometryDomainError

GRADIENT_TOLERANCE = 1e-12
INTERP_MODES = ("trilinear", "quadratic")


def _second_differences(values: np.ndarray, axis: int) -> np.ndarray:
    """Undivided second differences along one axis, one-sided at the ends."""
    n = values.shape[axis]
    out = np.zeros_like(values)
    if n < 3:
        return out

    def take(start, stop):
        return np.take(values, np.arange(start, stop), axis=axis)

    interior = take(0, n - 2) - 2.0 * take(1, n - 1) + take(2, n)
    index = [slice(None)] * values.ndim
    index[axis] = slice(1, n - 1)
    out[tuple(index)] = interior

    # the one-sided stencil at a boundary node equals the central one at its neighbour
    index[axis] = 0
    out[tuple(index)] = np.take(interior, 0, axis=axis)
    index[axis] = n - 1
    out[tuple(index)] = np.take(interior, interior.shape[axis] - 1, axis=axis)
    return out


@dataclass(frozen=True)
class SampledGrid:
    """
    Uniform node-centred samples of a scalar field.

    Parameters
    ----------
    values : np.ndarray
        Node values indexed ``values[i, j, k]`` with ``i`` along x.
    lo, hi : np.ndarray
        Box corners; nodes sit at ``lo + index * spacing``.
    """
    values: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    _linear: RegularGridInterpolator = field(init=False, repr=False, compare=False)
    _second: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        lo = np.asarray(self.lo, dtype=np.float64).reshape(3)
        hi = np.asarray(self.hi, dtype=np.float64).reshape(3)
        if values.ndim != 3 or min(values.shape) < 2:
            raise GeometryDomainError(
                f"sampled grid needs at least 2 nodes per axis, got shape {values.shape}"
            )
        if not np.all(lo < hi):
            raise GeometryDomainError(f"grid corners must satisfy lo < hi, got {lo} and {hi}")

        axes = tuple(np.linspace(lo[a], hi[a], values.shape[a]) for a in range(3))
        linear = RegularGridInterpolator(axes, values, method="linear", bounds_error=False)
        second = np.stack([_second_differences(values, a) for a in range(3)], axis=-1)

        object.__setattr__(self, "values", values)
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        object.__setattr__(self, "_linear", linear)
        object.__setattr__(self, "_second", second)

    @property
    def shape(self) -> Tuple[int, int, int]:
        return self.values.shape

    @property
    def spacing(self) -> np.ndarray:
        return (self.hi - self.lo) / (np.array(self.shape) - 1)

    @property
    def axes(self):
        return tuple(np.linspace(self.lo[a], self.hi[a], self.shape[a]) for a in range(3))

    def check_inside(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        slack = 1e-12 * (self.hi - self.lo)
        outside = np.any((x < self.lo - slack) | (x > self.hi + slack), axis=-1)
        if np.any(outside):
            bad = x.reshape(-1, 3)[np.flatnonzero(outside.reshape(-1))[0]]
            raise GeometryDomainError("point outside sampled level-set grid", point=bad)
        return np.clip(x, self.lo, self.hi)

    def locate(self, x: np.ndarray):
        """Return the parent-cell index and the local coordinates in [0, 1]^3."""
        t = (x - self.lo) / self.spacing
        index = np.clip(np.floor(t).astype(np.int64), 0, np.array(self.shape) - 2)
        return index, t - index


def interp_trilinear(grid: SampledGrid, x) -> np.ndarray:
    """
    Trilinear interpolation of a sampled grid.

    Parameters
    ----------
    grid : SampledGrid
        The sampled field.
    x : array_like
        Query points of shape ``(3,)`` or ``(..., 3)``.

    Returns
    -------
    np.ndarray
        Interpolated values with the leading shape of ``x``.

    Raises
    ------
    GeometryDomainError
        If any point lies outside the grid box.
    """
    x = grid.check_inside(x)
    return grid._linear(x.reshape(-1, 3)).reshape(x.shape[:-1])


def interp_quadratic(grid: SampledGrid, x) -> np.ndarray:
    """
    Quadratic non-oscillatory interpolation.

    The trilinear value is corrected by ``-D_aa * t_a (1 - t_a) / 2`` per axis,
    where ``t`` are local cell coordinates and ``D_aa`` is, among the eight
    parent vertices, the undivided second difference of smallest magnitude.
    """
    x = grid.check_inside(x)
    flat = x.reshape(-1, 3)
    value = grid._linear(flat)

    index, local = grid.locate(flat)
    corners = np.array([[a, b, c] for a in (0, 1) for b in (0, 1) for c in (0, 1)])
    nodes = index[:, None, :] + corners[None, :, :]
    second = grid._second[nodes[..., 0], nodes[..., 1], nodes[..., 2]]  # (n, 8, 3)
    pick = np.argmin(np.abs(second), axis=1)
    d_aa = np.take_along_axis(second, pick[:, None, :], axis=1)[:, 0, :]

    value = value - np.sum(d_aa * local * (1.0 - local) / 2.0, axis=-1)
    return value.reshape(x.shape[:-1])


class LevelSetField:
    """
    Implicit interface Gamma = {phi = 0}, negative inside Omega-.

    Either wraps an analytic callable ``phi(x)`` acting on ``(..., 3)`` arrays,
    or a :class:`SampledGrid` evaluated by trilinear or quadratic interpolation.
    """

    def __init__(
            self,
            function: Optional[Callable[[np.ndarray], np.ndarray]] = None,
            grid: Optional[SampledGrid] = None,
            interp_mode: str = "trilinear"
    ):
        if (function is None) == (grid is None):
            raise ValueError("LevelSetField needs exactly one of function or grid")
        if interp_mode not in INTERP_MODES:
            raise ValueError(f"unknown interpolation mode {interp_mode!r}")
        self.function = function
        self.grid = grid
        self.interp_mode = interp_mode
        self._gradient_grid = None
        if grid is not None:
            components = np.stack(np.gradient(grid.values, *grid.spacing), axis=-1)
            self._gradient_grid = RegularGridInterpolator(
                grid.axes, components, method="linear", bounds_error=False
            )

    @classmethod
    def analytic(cls, function):
        return cls(function=function)

    @classmethod
    def sampled(cls, grid: SampledGrid, interp_mode: str = "trilinear"):
        return cls(grid=grid, interp_mode=interp_mode)

    @classmethod
    def from_callable_on_grid(cls, function, shape, lo, hi, interp_mode="trilinear"):
        """Sample an analytic level set onto a uniform grid."""
        axes = [np.linspace(lo[a], hi[a], shape[a]) for a in range(3)]
        mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
        grid = SampledGrid(values=function(mesh), lo=np.asarray(lo), hi=np.asarray(hi))
        return cls.sampled(grid, interp_mode)

    @property
    def source(self) -> str:
        return "analytic" if self.function is not None else "sampled"

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if self.function is not None:
            return np.asarray(self.function(x), dtype=np.float64)
        if self.interp_mode == "quadratic":
            return interp_quadratic(self.grid, x)
        return interp_trilinear(self.grid, x)

    def clip(self, x) -> np.ndarray:
        """Clamp points into the sampled box; analytic fields are defined everywhere."""
        x = np.asarray(x, dtype=np.float64)
        if self.grid is None:
            return x
        return np.clip(x, self.grid.lo, self.grid.hi)

    def gradient(self, x, h: float) -> np.ndarray:
        """
        Gradient of phi at ``x`` for a local cell of side ``h``.

        Analytic sources use symmetric differences with step ``h / 100``;
        sampled sources interpolate node-wise central differences.
        """
        x = np.asarray(x, dtype=np.float64)
        if self.grid is not None:
            x = self.grid.check_inside(x)
            return self._gradient_grid(x.reshape(-1, 3)).reshape(x.shape)
        step = h / 100.0
        grad = np.empty(x.shape, dtype=np.float64)
        for a in range(3):
            shift = np.zeros(3)
            shift[a] = step
            grad[..., a] = (self.function(x + shift) - self.function(x - shift)) / (2.0 * step)
        return grad


def normal_and_delta(phi: LevelSetField, x, h: float):
    """
    Unit normal, signed distance estimate and projection onto Gamma.

    Returns
    -------
    tuple
        ``(normal, delta, proj)`` with ``delta = phi / |grad phi|`` and
        ``proj = x - delta * normal``.

    Raises
    ------
    DegenerateGradientError
        If ``|grad phi| < 1e-12``.
    """
    x = np.asarray(x, dtype=np.float64)
    grad = phi.gradient(x, h)
    magnitude = float(np.linalg.norm(grad))
    if magnitude < GRADIENT_TOLERANCE:
        raise DegenerateGradientError(x, magnitude)
    normal = grad / magnitude
    delta = float(phi(x)) / magnitude
    return normal, delta, x - delta * normal


def normals_and_deltas(phi: LevelSetField, x, h):
    """Batched :func:`normal_and_delta`; degenerate points get a zero normal and are flagged."""
    x = np.asarray(x, dtype=np.float64).reshape(-1, 3)
    h = np.broadcast_to(np.asarray(h, dtype=np.float64), (len(x),))
    if phi.grid is not None:
        grad = phi.gradient(x, float(h[0]))
    else:
        grad = np.stack([phi.gradient(p, hp) for p, hp in zip(x, h)]) if len(x) else np.zeros((0, 3))
    magnitude = np.linalg.norm(grad, axis=-1)
    degenerate = magnitude < GRADIENT_TOLERANCE
    safe = np.where(degenerate, 1.0, magnitude)
    normal = np.where(degenerate[:, None], 0.0, grad / safe[:, None])
    delta = np.where(degenerate, 0.0, phi(x) / safe)
    return normal, delta, x - delta[:, None] * normal, degenerate


def curvature(phi: LevelSetField, x, h: float) -> float:
    """Mean curvature ``div(n)`` (sum of principal curvatures) by central differences."""
    x = np.asarray(x, dtype=np.float64)
    total = 0.0
    for a in range(3):
        shift = np.zeros(3)
        shift[a] = h
        forward, _, _ = normal_and_delta(phi, x + shift, h)
        backward, _, _ = normal_and_delta(phi, x - shift, h)
        total += (forward[a] - backward[a]) / (2.0 * h)
    return total


def read_levelset_grid(path) -> SampledGrid:
    """
    Read a raw level-set grid file.

    The file starts with one text line ``nx ny nz lox loy loz hix hiy hiz``
    followed by ``nx*ny*nz`` little-endian float64 values, x fastest.
    """
    path = Path(path)
    with open(path, "rb") as f:
        payload = f.read()

    newline = payload.find(b"\n")
    if newline < 0:
        raise FileFormatError("missing header line", 0, path)
    try:
        fields = payload[:newline].decode("ascii").split()
        nx, ny, nz = (int(v) for v in fields[:3])
        lo = np.array([float(v) for v in fields[3:6]])
        hi = np.array([float(v) for v in fields[6:9]])
        if len(fields) != 9:
            raise ValueError(f"expected 9 header fields, got {len(fields)}")
    except (UnicodeDecodeError, ValueError) as e:
        raise FileFormatError(f"bad header: {e}", 0, path) from e

    start = newline + 1
    expected = nx * ny * nz * 8
    body = payload[start:]
    if len(body) != expected:
        raise FileFormatError(
            f"expected {expected} bytes of float64 data, found {len(body)}",
            start + min(len(body), expected),
            path,
        )
    flat = np.frombuffer(body, dtype="<f8")
    values = flat.reshape(nz, ny, nx).transpose(2, 1, 0)
    return SampledGrid(values=values.copy(), lo=lo, hi=hi)


def write_levelset_grid(path, grid: SampledGrid) -> None:
    nx, ny, nz = grid.shape
    header = " ".join(
        [str(nx), str(ny), str(nz)]
        + [repr(float(v)) for v in grid.lo]
        + [repr(float(v)) for v in grid.hi]
    )
    body = np.ascontiguousarray(grid.values.transpose(2, 1, 0)).astype("<f8").tobytes()
    with open(path, "wb") as f:
        f.write(header.encode("ascii") + b"\n")
        f.write(body)
