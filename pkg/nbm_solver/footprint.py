"""
Per-point residual forms compiled for batched evaluation.

Every collocation point contributes one or more rows ``(form, diag)``; the
forms only depend on geometry and problem data, so they are assembled once
and then evaluated against the networks every optimizer step.
"""

import logging
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import torch

from .discretization import (
    MINUS,
    SIDES,
    AffineForm,
    Slot,
    build_stencil,
    extrapolation_rules,
    face_neighbors,
    fv_form,
    neural_extrapolation_coeffs,
    position_key,
    sides_present,
    side_of,
)
from .geometry import CellGeometry, cell_geometry
from .problem import ProblemSpec
from .simplex import nudge_zeros

logger = logging.getLogger(__name__)

APPROACHES = ("regression", "neural")


@dataclass
class Row:
    point: int
    level: int
    form: AffineForm
    diag: float
    dirichlet: bool = False


class FootprintBuilder:
    """
    Builds residual forms for collocation points.

    Cell geometry and node value forms are cached by rounded position and
    cell size, so neighbouring points share work.
    """

    def __init__(self, spec: ProblemSpec, approach: str = "regression", bias: str = "bias_slow"):
        if approach not in APPROACHES:
            raise ValueError(f"unknown residual approach {approach!r}")
        self.spec = spec
        self.approach = approach
        self.bias = bias
        self._geometry: Dict[tuple, CellGeometry] = {}
        self._node_forms: Dict[tuple, AffineForm] = {}

    def geometry(self, x, h: float) -> CellGeometry:
        key = (position_key(x), h)
        geom = self._geometry.get(key)
        if geom is None:
            geom = cell_geometry(self.spec.phi, x, h)
            self._geometry[key] = geom
        return geom

    def own_side(self, x, h: float) -> str:
        phi = self.spec.phi
        return side_of(float(nudge_zeros(phi(phi.clip(x)), 1e-12 * h)))

    def node_form(self, y, side: str, h: float) -> AffineForm:
        """Form for ``u^side`` at node ``y``."""
        key = (position_key(y), side, h)
        form = self._node_forms.get(key)
        if form is not None:
            return form

        own = self.own_side(y, h)
        if own == side:
            form = AffineForm.single(Slot.value(side, y))
        else:
            geom = self.geometry(y, h)
            if not geom.crossed:
                form = AffineForm.single(Slot.value(own, y))
            elif self.approach == "regression":
                st = build_stencil(self.spec, y, h)
                rule_minus, rule_plus = extrapolation_rules(self.spec, st, geom, self.bias)
                form = (rule_minus if side == MINUS else rule_plus).to_form(st)
            else:
                w_value, w_derivative, constant = neural_extrapolation_coeffs(self.spec, geom, own)
                form = AffineForm.single(Slot.value(own, y), float(w_value), float(constant))
                form.terms[Slot.normal(own, geom.proj, geom.normal)] += float(w_derivative)

        self._node_forms[key] = form
        return form

    def dirichlet_row(self, index: int, x, h: float) -> Row:
        own = self.own_side(x, h)
        g = float(self.spec.value("dirichlet_g", x))
        return Row(index, 0, AffineForm.single(Slot.value(own, x), 1.0, -g), 1.0, dirichlet=True)

    def cell_row(self, index: int, x, h: float, level: int = 0) -> Row:
        geom = self.geometry(x, h)
        neighbors = face_neighbors(x, h)
        node_forms = {
            side: [self.node_form(x, side, h)] + [self.node_form(y, side, h) for y in neighbors]
            for side in sides_present(geom)
        }
        form, diag = fv_form(self.spec, geom, node_forms)
        return Row(index, level, form, diag)

    def point_rows(self, index: int, x, h: float, levels: int = 1) -> List[Row]:
        """
        Rows of one collocation point.

        Points within ``h / 2`` of the box boundary get a single Dirichlet
        row; others get one finite-volume row per resolution level with cell
        size ``h / 2**level``.
        """
        x = np.asarray(x, dtype=np.float64)
        if self.spec.boundary_distance(x) <= 0.5 * h:
            return [self.dirichlet_row(index, x, h)]
        return [self.cell_row(index, x, h / 2 ** level, level) for level in range(levels)]


class CompiledFootprint:
    """
    Sparse arrays of every row, ready for batched torch evaluation.

    Attributes
    ----------
    slots : list of Slot
        Distinct network quantities referenced by any row.
    row_point, row_diag, row_const : np.ndarray
        Owning point, Jacobi diagonal and constant term per row.
    entry_row, entry_slot, entry_weight : np.ndarray
        Nonzero coefficients of the rows.
    """

    def __init__(self, rows: Sequence[Row], point_sides: Sequence[str], n_points: int):
        slot_index: Dict[Slot, int] = {}
        entry_row, entry_slot, entry_weight = [], [], []
        for r, row in enumerate(rows):
            for slot, weight in row.form.terms.items():
                if weight == 0.0:
                    continue
                entry_row.append(r)
                entry_slot.append(slot_index.setdefault(slot, len(slot_index)))
                entry_weight.append(weight)

        self.slots = list(slot_index)
        self.n_points = n_points
        self.point_sides = np.asarray(point_sides)
        self.row_point = np.array([row.point for row in rows], dtype=np.int64)
        self.row_level = np.array([row.level for row in rows], dtype=np.int64)
        self.row_dirichlet = np.array([row.dirichlet for row in rows], dtype=bool)
        self.row_diag = np.array([row.diag for row in rows], dtype=np.float64)
        self.row_const = np.array([row.form.constant for row in rows], dtype=np.float64)
        self.entry_row = np.array(entry_row, dtype=np.int64)
        self.entry_slot = np.array(entry_slot, dtype=np.int64)
        self.entry_weight = np.array(entry_weight, dtype=np.float64)

        self.slot_kind = np.array([s.kind for s in self.slots])
        self.slot_side = np.array([s.side for s in self.slots])
        self.slot_position = np.array([s.position for s in self.slots], dtype=np.float64).reshape(-1, 3)
        self.slot_direction = np.array(
            [s.direction if s.direction is not None else (0.0, 0.0, 0.0) for s in self.slots],
            dtype=np.float64,
        ).reshape(-1, 3)

    @property
    def n_rows(self) -> int:
        return len(self.row_point)

    def select(self, points=None):
        """Row indices, entry indices and used slot indices for a subset of points."""
        if points is None:
            rows = np.arange(self.n_rows)
            entries = np.arange(len(self.entry_row))
        else:
            wanted = np.zeros(self.n_points, dtype=bool)
            wanted[np.asarray(points, dtype=np.int64)] = True
            rows = np.flatnonzero(wanted[self.row_point])
            entries = np.flatnonzero(wanted[self.row_point[self.entry_row]])
        used = np.unique(self.entry_slot[entries])
        return rows, entries, used

    def slot_values(self, pair, used: np.ndarray) -> torch.Tensor:
        """Network quantities for the slots in ``used``, in that order."""
        values = torch.zeros(len(used), dtype=torch.float64)
        for kind in ("value", "normal"):
            for side in SIDES:
                mask = (self.slot_kind[used] == kind) & (self.slot_side[used] == side)
                if not np.any(mask):
                    continue
                local = np.flatnonzero(mask)
                positions = torch.as_tensor(self.slot_position[used[local]])
                net = pair.network(side)
                if kind == "value":
                    quantity = net(positions)
                else:
                    directions = torch.as_tensor(self.slot_direction[used[local]])
                    quantity = net.directional_derivative(positions, directions, create_graph=True)
                values = values.index_put((torch.as_tensor(local),), quantity)
        return values

    def residuals(self, pair, points=None) -> Tuple[torch.Tensor, np.ndarray]:
        """
        Preconditioned residuals ``r / diag`` of the selected rows.

        Returns
        -------
        tuple
            ``(scaled_residuals, row_indices)``.
        """
        rows, entries, used = self.select(points)
        q = self.slot_values(pair, used)
        slot_position = torch.as_tensor(np.searchsorted(used, self.entry_slot[entries]))
        row_position = torch.as_tensor(np.searchsorted(rows, self.entry_row[entries]))
        weights = torch.as_tensor(self.entry_weight[entries])

        residual = torch.as_tensor(self.row_const[rows]).clone()
        residual = residual.index_add(0, row_position, weights * q[slot_position])
        return residual / torch.as_tensor(self.row_diag[rows]), rows

    def batch_residuals(self, pair, points=None) -> torch.Tensor:
        return self.residuals(pair, points)[0]

    def residuals_with(
            self,
            value_fn: Callable[[str, np.ndarray], np.ndarray],
            normal_fn: Optional[Callable[[str, np.ndarray, np.ndarray], np.ndarray]] = None,
            points=None,
    ) -> np.ndarray:
        """
        Preconditioned residuals with footprint values from plain callables.

        ``value_fn(side, positions)`` and ``normal_fn(side, positions, directions)``
        stand in for the networks, e.g. to evaluate exact solutions.
        """
        rows, entries, used = self.select(points)
        q = np.zeros(len(used))
        for side in SIDES:
            mask = (self.slot_kind[used] == "value") & (self.slot_side[used] == side)
            if np.any(mask):
                q[mask] = value_fn(side, self.slot_position[used[mask]])
            mask = (self.slot_kind[used] == "normal") & (self.slot_side[used] == side)
            if np.any(mask):
                q[mask] = normal_fn(side, self.slot_position[used[mask]], self.slot_direction[used[mask]])

        residual = self.row_const[rows].copy()
        np.add.at(
            residual,
            np.searchsorted(rows, self.entry_row[entries]),
            self.entry_weight[entries] * q[np.searchsorted(used, self.entry_slot[entries])],
        )
        return residual / self.row_diag[rows]


def assemble_footprint(
        spec: ProblemSpec,
        positions: np.ndarray,
        h: np.ndarray,
        approach: str = "regression",
        bias: str = "bias_slow",
        levels: int = 1,
        workers: int = 0,
) -> CompiledFootprint:
    """
    Build and compile the residual rows of every collocation point.

    Parameters
    ----------
    spec : ProblemSpec
        Problem data.
    positions : np.ndarray
        Collocation points, shape ``(n, 3)``.
    h : np.ndarray
        Cell size per point.
    approach : str
        ``"regression"`` for least-squares extrapolation rules or ``"neural"``
        for network extrapolation with normal-derivative slots.
    bias : str
        ``"bias_slow"`` or ``"bias_fast"``.
    levels : int
        Resolution levels per point.
    workers : int
        Thread count for assembly; 0 assembles serially. Results are
        gathered in point order either way.
    """
    positions = np.asarray(positions, dtype=np.float64).reshape(-1, 3)
    h = np.broadcast_to(np.asarray(h, dtype=np.float64), (len(positions),))
    builder = FootprintBuilder(spec, approach, bias)

    def build(index):
        return builder.point_rows(index, positions[index], float(h[index]), levels)

    with warnings.catch_warnings(record=True) as fallbacks:
        warnings.simplefilter("always")
        if workers and workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                per_point = list(pool.map(build, range(len(positions))))
        else:
            per_point = [build(i) for i in range(len(positions))]
    for caught in fallbacks:
        logger.debug("fallback: %s", caught.message)
    if fallbacks:
        logger.warning("%d fallbacks during assembly (see debug log)", len(fallbacks))

    rows = [row for point in per_point for row in point]
    sides = [builder.own_side(x, hx) for x, hx in zip(positions, h)]
    compiled = CompiledFootprint(rows, sides, len(positions))
    logger.info(
        "assembled %d rows over %d points (%d slots, %d crossed cells cached)",
        compiled.n_rows, len(positions), len(compiled.slots),
        sum(1 for g in builder._geometry.values() if g.crossed),
    )
    return compiled
