"""Geometric summaries of implicit cells: sub-volumes, face fractions and interface patches."""

import warnings
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from .errors import DegenerateGradientError
from .levelset import LevelSetField, normal_and_delta
from .simplex import (
    CORNER_OFFSETS,
    FACE_TRIANGLES,
    MIDDLE_CUT,
    Simplex,
    intersect_simplex,
    nudge_zeros,
    triangle_negative_area,
)

FACE_NAMES = ("x-", "x+", "y-", "y+", "z-", "z+")
# outward unit offset of each face, in FACE_NAMES order
FACE_OFFSETS = np.array(
    [[-1, 0, 0], [1, 0, 0], [0, -1, 0], [0, 1, 0], [0, 0, -1], [0, 0, 1]], dtype=np.int64
)


@dataclass
class CellGeometry:
    """
    Geometry of the cube of side ``h`` centred at ``center``.

    ``normal``, ``delta`` and ``proj`` describe the interface seen from the
    centre; for uncrossed cells with a vanishing level-set gradient the normal
    is the zero vector and ``proj`` equals ``center``.
    """
    center: np.ndarray
    h: float
    vol_minus: float
    vol_plus: float
    face_area_minus: np.ndarray
    face_area_plus: np.ndarray
    interface_simplices: List[Simplex] = field(default_factory=list)
    normal: np.ndarray = field(default_factory=lambda: np.zeros(3))
    delta: float = 0.0
    proj: Optional[np.ndarray] = None
    crossed: bool = False

    @property
    def interface_area(self) -> float:
        return sum(s.volume for s in self.interface_simplices)

    def face_centers(self) -> np.ndarray:
        return self.center + 0.5 * self.h * FACE_OFFSETS


def cell_corners(center, h: float) -> np.ndarray:
    return np.asarray(center, dtype=np.float64) - 0.5 * h + h * CORNER_OFFSETS


def corner_values(phi: LevelSetField, center, h: float) -> np.ndarray:
    return nudge_zeros(phi(phi.clip(cell_corners(center, h))), 1e-12 * h)


def is_crossed(phi: LevelSetField, center, h: float) -> bool:
    """True when the corner and centre signs of phi are not all equal."""
    values = np.append(corner_values(phi, center, h), phi(phi.clip(center)))
    values = nudge_zeros(values, 1e-12 * h)
    return bool(np.any(values < 0) and np.any(values > 0))


def robust_normal(phi: LevelSetField, center, h: float, crossed: bool) -> Tuple[np.ndarray, float, np.ndarray]:
    """
    ``normal_and_delta`` at the centre, with a corner fallback on crossed cells.

    When the gradient vanishes at the centre of a crossed cell the corner
    normal with the largest gradient magnitude is used instead.
    """
    center = np.asarray(center, dtype=np.float64)
    try:
        return normal_and_delta(phi, phi.clip(center), h)
    except DegenerateGradientError:
        if not crossed:
            return np.zeros(3), 0.0, center.copy()

    corners = phi.clip(cell_corners(center, h))
    grads = np.stack([phi.gradient(c, h) for c in corners])
    magnitudes = np.linalg.norm(grads, axis=-1)
    best = int(np.argmax(magnitudes))
    if magnitudes[best] < 1e-12:
        raise DegenerateGradientError(center, float(magnitudes[best]))
    warnings.warn(
        f"Degenerate level-set gradient at crossed cell {tuple(center)}, "
        f"using corner {best} normal instead"
    )
    normal = grads[best] / magnitudes[best]
    delta = float(phi(phi.clip(center))) / magnitudes[best]
    return normal, delta, center - delta * normal


def cell_geometry(phi: LevelSetField, center, h: float) -> CellGeometry:
    """
    Intersect the cell around ``center`` with the interface.

    Parameters
    ----------
    phi : LevelSetField
        Level set; negative values are inside the minus region.
    center : array_like
        Cell centre.
    h : float
        Cell side length.

    Returns
    -------
    CellGeometry
        Sub-volumes, per-face area splits, interface triangles and the
        centre's normal, signed distance and projection.
    """
    center = np.asarray(center, dtype=np.float64)
    corners = cell_corners(center, h)
    values = corner_values(phi, center, h)
    crossed = is_crossed(phi, center, h)

    cell_volume = h ** 3
    face_area = h ** 2
    if np.all(values > 0) or np.all(values < 0):
        inside = bool(values[0] < 0)
        vol_minus = cell_volume if inside else 0.0
        area_minus = np.full(6, face_area if inside else 0.0)
        gamma = []
    else:
        vol_minus = 0.0
        gamma = []
        for indices in MIDDLE_CUT:
            indices = list(indices)
            cut = intersect_simplex(Simplex(corners[indices]), values[indices], 1e-12 * h)
            gamma.extend(cut.gamma)
            vol_minus += sum(s.volume for s in cut.negative)
        area_minus = np.array([
            sum(triangle_negative_area(corners[list(t)], values[list(t)], 1e-12 * h) for t in pair)
            for pair in FACE_TRIANGLES
        ])

    vol_minus = min(max(vol_minus, 0.0), cell_volume)
    area_minus = np.clip(area_minus, 0.0, face_area)
    normal, delta, proj = robust_normal(phi, center, h, crossed)

    return CellGeometry(
        center=center,
        h=h,
        vol_minus=vol_minus,
        vol_plus=cell_volume - vol_minus,
        face_area_minus=area_minus,
        face_area_plus=face_area - area_minus,
        interface_simplices=gamma,
        normal=normal,
        delta=delta,
        proj=proj,
        crossed=crossed,
    )


def tile_volume_and_area(phi: LevelSetField, lo, hi, n: int) -> Tuple[float, float]:
    """
    Total minus-region volume and interface area over an ``n^3`` tiling of a box.

    Only cells whose corner signs differ are intersected; the rest are
    classified from their corner values.
    """
    lo = np.asarray(lo, dtype=np.float64)
    hi = np.asarray(hi, dtype=np.float64)
    h = (hi - lo) / n
    if not np.allclose(h, h[0]):
        raise ValueError("tile_volume_and_area needs a cubic tiling")
    h = float(h[0])

    axes = [lo[a] + h * np.arange(n + 1) for a in range(3)]
    nodes = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    values = nudge_zeros(phi(phi.clip(nodes)), 1e-12 * h)

    negative = values < 0
    corner_slices = [
        negative[i:i + n, j:j + n, k:k + n] for i in (0, 1) for j in (0, 1) for k in (0, 1)
    ]
    count = np.sum(corner_slices, axis=0)

    volume = h ** 3 * float(np.sum(count == 8))
    area = 0.0
    for index in np.argwhere((count > 0) & (count < 8)):
        center = lo + h * (index + 0.5)
        local = values[index[0]:index[0] + 2, index[1]:index[1] + 2, index[2]:index[2] + 2].reshape(8)
        corners = cell_corners(center, h)
        for indices in MIDDLE_CUT:
            indices = list(indices)
            cut = intersect_simplex(Simplex(corners[indices]), local[indices], 1e-12 * h)
            volume += sum(s.volume for s in cut.negative)
            area += sum(s.volume for s in cut.gamma)
    return volume, area
