"""Middle-cut triangulation of cubic cells and linear interface clipping of simplices."""

from dataclasses import dataclass
from math import factorial
from typing import List, NamedTuple, Sequence

import numpy as np

from .errors import PreconditionViolation

# corner c of a cell sits at lo + h * CORNER_OFFSETS[c], c = 4*i + 2*j + k
CORNER_OFFSETS = np.array(
    [[i, j, k] for i in (0, 1) for j in (0, 1) for k in (0, 1)], dtype=np.float64
)

# the five middle-cut tetrahedra as corner indices; the last one is the central
# tetrahedron whose edges are the face diagonals
MIDDLE_CUT = (
    (0, 4, 2, 1),
    (6, 4, 2, 7),
    (5, 4, 7, 1),
    (3, 7, 2, 1),
    (7, 4, 2, 1),
)

# the two triangles of each cell face exposed by the middle cut, in x-, x+, y-, y+, z-, z+ order
FACE_TRIANGLES = (
    ((0, 2, 1), (3, 2, 1)),
    ((6, 4, 7), (5, 4, 7)),
    ((0, 4, 1), (5, 4, 1)),
    ((6, 2, 7), (3, 7, 2)),
    ((0, 4, 2), (6, 4, 2)),
    ((5, 7, 1), (3, 7, 1)),
)

ZERO_SHIFT = 1e-12


@dataclass(frozen=True)
class Simplex:
    """A triangle (3 vertices) or tetrahedron (4 vertices) in 3D."""
    vertices: np.ndarray

    def __post_init__(self):
        vertices = np.asarray(self.vertices, dtype=np.float64)
        if vertices.shape not in ((3, 3), (4, 3)):
            raise PreconditionViolation(
                f"a simplex needs 3 or 4 vertices in 3D, got shape {vertices.shape}"
            )
        object.__setattr__(self, "vertices", vertices)

    @property
    def dim(self) -> int:
        return len(self.vertices) - 1

    @property
    def volume(self) -> float:
        """Area of a triangle or volume of a tetrahedron (never negative)."""
        edges = self.vertices[1:] - self.vertices[0]
        gram = edges @ edges.T
        return float(np.sqrt(max(np.linalg.det(gram), 0.0)) / factorial(self.dim))


class Intersection(NamedTuple):
    gamma: List[Simplex]
    negative: List[Simplex]


def triangulate_cell(lo, h: float) -> List[Simplex]:
    """
    Split the cube ``[lo, lo + h]^3`` into its five middle-cut tetrahedra.

    Four corner tetrahedra have volume ``h^3 / 6`` and the central one ``h^3 / 3``.
    """
    corners = np.asarray(lo, dtype=np.float64) + h * CORNER_OFFSETS
    return [Simplex(corners[list(indices)]) for indices in MIDDLE_CUT]


def edge_intersection(p_i, p_j, phi_i: float, phi_j: float) -> np.ndarray:
    """
    Root of the linear interpolant of phi along the edge from ``p_i`` to ``p_j``.

    Raises
    ------
    PreconditionViolation
        If ``phi_i`` and ``phi_j`` do not have strictly opposite signs.
    """
    if not phi_i * phi_j < 0:
        raise PreconditionViolation(
            f"edge endpoints must straddle the interface, got phi values {phi_i} and {phi_j}"
        )
    p_i = np.asarray(p_i, dtype=np.float64)
    p_j = np.asarray(p_j, dtype=np.float64)
    denominator = phi_i - phi_j
    return p_j * (phi_i / denominator) - p_i * (phi_j / denominator)


def split_prism(a: Sequence[np.ndarray], b: Sequence[np.ndarray]) -> List[Simplex]:
    """Three tetrahedra filling the prism with lateral edges ``a[m] -> b[m]``."""
    return [
        Simplex(np.array([a[0], a[1], a[2], b[0]])),
        Simplex(np.array([a[1], a[2], b[0], b[1]])),
        Simplex(np.array([a[2], b[0], b[1], b[2]])),
    ]


def nudge_zeros(phi, shift: float = ZERO_SHIFT) -> np.ndarray:
    """Move exact zeros of phi to ``-shift`` so every vertex has a strict sign."""
    phi = np.asarray(phi, dtype=np.float64)
    return np.where(phi == 0.0, -shift, phi)


def intersect_simplex(simplex: Simplex, phi, zero_shift: float = ZERO_SHIFT) -> Intersection:
    """
    Clip a tetrahedron by the linear interpolant of vertex phi values.

    Parameters
    ----------
    simplex : Simplex
        A 4-vertex simplex.
    phi : array_like
        Level-set values at the four vertices.
    zero_shift : float
        Magnitude used to push exact zeros into the negative side.

    Returns
    -------
    Intersection
        ``gamma`` holds up to two interface triangles and ``negative`` up to
        three tetrahedra covering the part of the simplex where phi < 0.
    """
    if simplex.dim != 3:
        raise PreconditionViolation("intersect_simplex expects a tetrahedron")
    phi = nudge_zeros(phi, zero_shift)
    vertices = simplex.vertices
    negative = [i for i in range(4) if phi[i] < 0]
    positive = [i for i in range(4) if phi[i] > 0]

    def cut(i, j):
        return edge_intersection(vertices[i], vertices[j], phi[i], phi[j])

    eta = len(negative)
    if eta == 0:
        return Intersection([], [])
    if eta == 4:
        return Intersection([], [simplex])

    if eta == 1:
        a = negative[0]
        points = [cut(a, j) for j in positive]
        triangle = Simplex(np.array(points))
        return Intersection([triangle], [Simplex(np.array([vertices[a]] + points))])

    if eta == 3:
        d = positive[0]
        points = [cut(i, d) for i in negative]
        prism = split_prism([vertices[i] for i in negative], points)
        return Intersection([Simplex(np.array(points))], prism)

    a, b = negative
    c, d = positive
    p_ac, p_ad, p_bc, p_bd = cut(a, c), cut(a, d), cut(b, c), cut(b, d)
    # the interface quad is split along p_ad - p_bc, matching the prism split below
    triangles = [
        Simplex(np.array([p_ac, p_ad, p_bc])),
        Simplex(np.array([p_ad, p_bc, p_bd])),
    ]
    prism = split_prism([vertices[a], p_ac, p_ad], [vertices[b], p_bc, p_bd])
    return Intersection(triangles, prism)


def triangle_negative_area(vertices, phi, zero_shift: float = ZERO_SHIFT) -> float:
    """Area of the part of a triangle where the linear interpolant of phi is negative."""
    vertices = np.asarray(vertices, dtype=np.float64)
    phi = nudge_zeros(phi, zero_shift)
    negative = [i for i in range(3) if phi[i] < 0]
    positive = [i for i in range(3) if phi[i] > 0]
    full = Simplex(vertices).volume

    if not negative:
        return 0.0
    if not positive:
        return full

    if len(negative) == 1:
        lone, others, flip = negative[0], positive, False
    else:
        lone, others, flip = positive[0], negative, True
    corner = Simplex(np.array(
        [vertices[lone]] + [edge_intersection(vertices[lone], vertices[j], phi[lone], phi[j]) for j in others]
    )).volume
    return full - corner if flip else corner


def integrate_simplex(simplex: Simplex, values) -> float:
    """Integral of the linear interpolant of vertex ``values`` over the simplex."""
    values = np.asarray(values, dtype=np.float64)
    if values.shape != (len(simplex.vertices),):
        raise PreconditionViolation(
            f"expected {len(simplex.vertices)} vertex values, got shape {values.shape}"
        )
    return simplex.volume * float(values.mean())
