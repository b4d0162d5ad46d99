"""
Finite-volume residuals on implicit cells with jump conditions.

A residual is kept in affine form ``sum_j w_j q_j + c`` where each ``q_j``
is a network quantity identified by a :class:`Slot`: the value of one side's
network at a position, or its directional derivative there.
"""

import warnings
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Dict, Mapping, NamedTuple, Optional, Tuple

import numpy as np
import torch

from .errors import DegenerateStencilError, FootprintError, SingularExtrapolationError
from .geometry import FACE_OFFSETS, CellGeometry
from .levelset import normals_and_deltas
from .problem import ProblemSpec
from .simplex import nudge_zeros

MINUS = "minus"
PLUS = "plus"
SIDES = (MINUS, PLUS)
BIAS_MODES = ("bias_slow", "bias_fast")

# the 26 offsets of the 3x3x3 neighbourhood without its centre
OFFSETS = np.array(
    [(p, q, r) for p in (-1, 0, 1) for q in (-1, 0, 1) for r in (-1, 0, 1) if (p, q, r) != (0, 0, 0)],
    dtype=np.int64,
)
SINGULAR_TOLERANCE = 1e-12
POSITION_DECIMALS = 12


def other_side(side: str) -> str:
    return PLUS if side == MINUS else MINUS


def side_of(phi_value: float) -> str:
    """Side of a point; exact zeros belong to the minus region."""
    return MINUS if phi_value <= 0 else PLUS


def position_key(x) -> Tuple[float, float, float]:
    return tuple(round(float(c), POSITION_DECIMALS) + 0.0 for c in x)


class Slot(NamedTuple):
    """
    One network quantity a residual consumes.

    ``kind`` is ``"value"`` for ``N^side(position)`` or ``"normal"`` for the
    derivative of ``N^side`` at ``position`` along ``direction``.
    """
    kind: str
    side: str
    position: Tuple[float, float, float]
    direction: Optional[Tuple[float, float, float]] = None

    @classmethod
    def value(cls, side, position):
        return cls("value", side, position_key(position))

    @classmethod
    def normal(cls, side, position, direction):
        return cls("normal", side, position_key(position), position_key(direction))


@dataclass
class AffineForm:
    """``sum(weight * q[slot]) + constant`` over a sparse set of slots."""
    terms: Dict[Slot, float] = field(default_factory=lambda: defaultdict(float))
    constant: float = 0.0

    @classmethod
    def single(cls, slot: Slot, weight: float = 1.0, constant: float = 0.0):
        form = cls(constant=constant)
        form.terms[slot] += weight
        return form

    def add(self, other: "AffineForm", scale: float = 1.0) -> "AffineForm":
        for slot, weight in other.terms.items():
            self.terms[slot] += scale * weight
        self.constant += scale * other.constant
        return self

    def scaled(self, scale: float) -> "AffineForm":
        return AffineForm(constant=0.0).add(self, scale)

    @property
    def slots(self):
        return frozenset(self.terms)

    def evaluate(self, values: Mapping[Slot, float]) -> float:
        total = self.constant
        for slot, weight in self.terms.items():
            if slot not in values:
                raise FootprintError(slot.position, slot.side)
            total += weight * values[slot]
        return total


@dataclass(frozen=True)
class NeighborStencil:
    """The 26 neighbours of a node at spacing ``h`` and their sides."""
    center: np.ndarray
    h: float
    own_side: str
    positions: np.ndarray
    membership_minus: np.ndarray
    membership_plus: np.ndarray

    @property
    def offsets(self) -> np.ndarray:
        return OFFSETS

    def membership(self, side: str) -> np.ndarray:
        return self.membership_minus if side == MINUS else self.membership_plus


@dataclass(frozen=True)
class ExtrapolationRule:
    """
    ``u^side = coeff_center * u_center + sum(coeff_neighbors * u_neighbors) + constant``.

    ``u_center`` is the node's own-side value and the neighbour values are
    values of ``approx_side``'s network.
    """
    side: str
    own_side: str
    approx_side: str
    coeff_center: float
    coeff_neighbors: np.ndarray
    constant: float

    @classmethod
    def identity(cls, side, own_side):
        return cls(side, own_side, own_side, 1.0, np.zeros(len(OFFSETS)), 0.0)

    @property
    def is_identity(self) -> bool:
        return self.coeff_center == 1.0 and not np.any(self.coeff_neighbors) and self.constant == 0.0

    def to_form(self, st: NeighborStencil) -> AffineForm:
        form = AffineForm.single(Slot.value(self.own_side, st.center), self.coeff_center, self.constant)
        for index in np.flatnonzero(self.coeff_neighbors):
            form.terms[Slot.value(self.approx_side, st.positions[index])] += float(self.coeff_neighbors[index])
        return form


class ZetaGamma(NamedTuple):
    zeta_neighbors: np.ndarray
    zeta_center: float
    gamma_neighbors: np.ndarray
    gamma_center: float


class InterfaceFrame(NamedTuple):
    """Normals, signed distances and projections of one or many nodes."""
    normal: np.ndarray
    delta: np.ndarray
    proj: np.ndarray


@dataclass
class PointResidual:
    residual: float
    diag: float
    footprint: frozenset


def build_stencil(spec: ProblemSpec, center, h: float) -> NeighborStencil:
    """Classify the 26 neighbours of ``center`` by the sign of phi."""
    center = np.asarray(center, dtype=np.float64)
    positions = center + h * OFFSETS
    phi = spec.phi
    values = nudge_zeros(phi(phi.clip(positions)), 1e-12 * h)
    own = nudge_zeros(phi(phi.clip(center)), 1e-12 * h)
    return NeighborStencil(
        center=center,
        h=h,
        own_side=side_of(float(own)),
        positions=positions,
        membership_minus=values < 0,
        membership_plus=values > 0,
    )


def ls_normal_coeffs(st: NeighborStencil, normal, side: Optional[str], h: float):
    """
    Least-squares weights for the normal derivative from one side's neighbours.

    Parameters
    ----------
    st : NeighborStencil
        Neighbourhood of the node.
    normal : array_like
        Unit normal the derivative is taken along.
    side : str or None
        ``"minus"`` or ``"plus"`` restricts the fit to that side's
        neighbours; ``None`` uses the whole neighbourhood.
    h : float
        Node spacing.

    Returns
    -------
    tuple
        ``(c_center, c_neighbors)`` with ``c_center = -sum(c_neighbors)`` and
        zeros for neighbours outside the side.

    Raises
    ------
    DegenerateStencilError
        If the side has fewer than 3 affinely independent neighbours.
    """
    weights = np.ones(len(OFFSETS)) if side is None else st.membership(side).astype(np.float64)
    members = int(weights.sum())
    x = OFFSETS * h
    if members < 3 or np.linalg.matrix_rank(x[weights > 0]) < 3:
        raise DegenerateStencilError(side or "whole", members)

    wx = x * weights[:, None]
    normal_matrix = x.T @ wx
    normal_matrix += 1e-12 * np.trace(normal_matrix) * np.eye(3)
    d = np.linalg.solve(normal_matrix, wx.T)
    c_neighbors = np.asarray(normal, dtype=np.float64) @ d
    return -float(c_neighbors.sum()), c_neighbors


def zeta_gamma(c_neighbors, delta: float, mu_minus: float, mu_plus: float, side: str) -> ZetaGamma:
    """
    Jump-weighted least-squares coefficients.

    ``zeta_pq = delta * (mu_plus - mu_minus) / mu_other * c_pq`` where
    ``mu_other`` is the opposite side's coefficient, and
    ``gamma_pq = zeta_pq / (1 +/- zeta)`` with ``+`` for the plus side.

    Raises
    ------
    SingularExtrapolationError
        If ``|1 +/- zeta| < 1e-12``.
    """
    c_neighbors = np.asarray(c_neighbors, dtype=np.float64)
    mu_other = mu_minus if side == PLUS else mu_plus
    zeta_neighbors = delta * (mu_plus - mu_minus) / mu_other * c_neighbors
    zeta_center = -float(zeta_neighbors.sum())
    denominator = 1.0 + zeta_center if side == PLUS else 1.0 - zeta_center
    if abs(denominator) < SINGULAR_TOLERANCE:
        raise SingularExtrapolationError(side, denominator)
    gamma_neighbors = zeta_neighbors / denominator
    return ZetaGamma(zeta_neighbors, zeta_center, gamma_neighbors, -float(gamma_neighbors.sum()))


def approximated_side(mu_minus: float, mu_plus: float, mode: str) -> str:
    """Side whose normal derivative is fitted; ties take the ``mu_minus >= mu_plus`` branch."""
    if mode not in BIAS_MODES:
        raise ValueError(f"unknown bias mode {mode!r}")
    minus_dominates = mu_minus >= mu_plus
    if mode == "bias_slow":
        return MINUS if minus_dominates else PLUS
    return PLUS if minus_dominates else MINUS


def _normal_coeffs_with_fallback(st: NeighborStencil, normal, side: str):
    try:
        return ls_normal_coeffs(st, normal, side, st.h)
    except DegenerateStencilError as e:
        warnings.warn(f"{e}; using the whole neighbourhood at {tuple(st.center)}")
        return ls_normal_coeffs(st, normal, None, st.h)


def extrapolation_rules(
        spec: ProblemSpec,
        st: NeighborStencil,
        geom: CellGeometry,
        mode: str = "bias_slow"
) -> Tuple[ExtrapolationRule, ExtrapolationRule]:
    """
    Rules giving ``u^-`` and ``u^+`` at a node from its neighbourhood.

    The own-side rule is always the identity. On crossed cells the other
    side's value follows from the Taylor-expanded jump
    ``u^+ - u^- = alpha + delta (d_n u^+ - d_n u^-)`` at the projection point,
    with the flux jump eliminating one normal derivative and a least-squares
    fit on the approximated side's neighbours supplying the other.

    Returns
    -------
    tuple
        ``(rule_minus, rule_plus)``.
    """
    own = st.own_side
    identities = {side: ExtrapolationRule.identity(side, own) for side in SIDES}
    if not geom.crossed:
        return identities[MINUS], identities[PLUS]

    proj = geom.proj
    mu_m = float(spec.value("mu_minus", proj))
    mu_p = float(spec.value("mu_plus", proj))
    alpha = float(spec.value("alpha", proj))
    beta = float(spec.value("beta", proj))
    delta = geom.delta

    approx = approximated_side(mu_m, mu_p, mode)
    _, c_neighbors = _normal_coeffs_with_fallback(st, geom.normal, approx)
    zg = zeta_gamma(c_neighbors, delta, mu_m, mu_p, approx)

    target = other_side(own)
    if approx == MINUS:
        jump = alpha + delta * beta / mu_p
        if own == MINUS:
            rule = ExtrapolationRule(
                target, own, approx, 1.0 - zg.zeta_center, -zg.zeta_neighbors, jump
            )
        else:
            rule = ExtrapolationRule(
                target, own, approx, 1.0 + zg.gamma_center, zg.gamma_neighbors,
                -(1.0 + zg.gamma_center) * jump
            )
    else:
        jump = alpha + delta * beta / mu_m
        if own == PLUS:
            rule = ExtrapolationRule(
                target, own, approx, 1.0 + zg.zeta_center, zg.zeta_neighbors, -jump
            )
        else:
            rule = ExtrapolationRule(
                target, own, approx, 1.0 - zg.gamma_center, -zg.gamma_neighbors,
                (1.0 - zg.gamma_center) * jump
            )

    identities[target] = rule
    return identities[MINUS], identities[PLUS]


def neural_extrapolation_coeffs(spec: ProblemSpec, geom, known_side: str):
    """
    Coefficients ``(w_value, w_derivative, constant)`` of the unknown side's value.

    The unknown value is ``w_value * u_known + w_derivative * d_n u_known + constant``
    with the derivative taken at ``geom.proj`` along ``geom.normal``. ``geom``
    may be a :class:`CellGeometry` or an :class:`InterfaceFrame` of many points.
    """
    proj = geom.proj
    mu_m = spec.value("mu_minus", proj)
    mu_p = spec.value("mu_plus", proj)
    alpha = spec.value("alpha", proj)
    beta = spec.value("beta", proj)
    delta = geom.delta
    if known_side == MINUS:
        return 1.0, delta * (mu_m / mu_p - 1.0), alpha + delta * beta / mu_p
    return 1.0, -delta * (1.0 - mu_p / mu_m), -(alpha + delta * beta / mu_m)


def neural_extrapolation_pair(spec, geom, u_known, dnu_known, known_side):
    """Both sides' values at a node given the known side's value and normal derivative."""
    w_value, w_derivative, constant = neural_extrapolation_coeffs(spec, geom, known_side)
    unknown = w_value * u_known + w_derivative * dnu_known + constant
    return (u_known, unknown) if known_side == MINUS else (unknown, u_known)


def pinn_interface_residual(spec, geom, u_m, u_p, dnu, side_of_derivative):
    """
    Mismatch of the Taylor-expanded jump relation at a node.

    Works on floats or tensors; ``dnu`` is the normal derivative of the
    ``side_of_derivative`` solution at the projection point.
    """
    w_value, w_derivative, constant = neural_extrapolation_coeffs(spec, geom, side_of_derivative)
    if isinstance(u_m, torch.Tensor):
        w_derivative = torch.as_tensor(w_derivative)
        constant = torch.as_tensor(constant)
    if side_of_derivative == MINUS:
        return u_p - (w_value * u_m + w_derivative * dnu + constant)
    return (w_value * u_p + w_derivative * dnu + constant) - u_m


def interface_flux(spec: ProblemSpec, geom: CellGeometry) -> float:
    """Integral of beta over the interface patch, beta taken at projected vertices."""
    if not geom.interface_simplices:
        return 0.0
    vertices = np.concatenate([s.vertices for s in geom.interface_simplices])
    _, _, proj, degenerate = normals_and_deltas(spec.phi, spec.phi.clip(vertices), geom.h)
    proj = np.where(degenerate[:, None], vertices, proj)
    beta = spec.value("beta", proj).reshape(-1, 3)
    areas = np.array([s.volume for s in geom.interface_simplices])
    return float(np.sum(areas * beta.mean(axis=1)))


def sides_present(geom: CellGeometry):
    """Sides with a non-negligible share of the cell volume or any face."""
    present = []
    for side in SIDES:
        volume = geom.vol_minus if side == MINUS else geom.vol_plus
        areas = geom.face_area_minus if side == MINUS else geom.face_area_plus
        if volume > 1e-12 * geom.h ** 3 or np.any(areas > 1e-12 * geom.h ** 2):
            present.append(side)
    return present


def fv_form(spec: ProblemSpec, geom: CellGeometry, node_forms: Mapping[str, list]) -> Tuple[AffineForm, float]:
    """
    Finite-volume residual and Jacobi diagonal of one cell.

    Parameters
    ----------
    spec : ProblemSpec
        Problem data.
    geom : CellGeometry
        The cell.
    node_forms : mapping
        For each side present in the cell, seven forms for ``u^side`` at the
        centre followed by the six face neighbours in ``x-, x+, y-, y+, z-, z+``
        order.

    Returns
    -------
    tuple
        ``(residual_form, diag)`` where the residual is
        ``sum_s k^s u^s_c |V^s| - sum_s sum_f mu^s_f A^s_f (u^s_f - u^s_c) / h
        - sum_s f^s |V^s| + int_Gamma beta``.
    """
    h = geom.h
    center = geom.center
    faces = geom.face_centers()
    residual = AffineForm(constant=interface_flux(spec, geom))
    diag = 0.0

    for side in sides_present(geom):
        if side not in node_forms:
            raise FootprintError(center, side)
        forms = node_forms[side]
        volume = geom.vol_minus if side == MINUS else geom.vol_plus
        areas = geom.face_area_minus if side == MINUS else geom.face_area_plus
        k = float(spec.value("k", center, side))
        f = float(spec.value("f", center, side))
        mu_faces = spec.value("mu", faces, side)

        residual.add(forms[0], k * volume)
        residual.constant -= f * volume
        diag += k * volume
        for face in range(6):
            if areas[face] == 0.0:
                continue
            transmissibility = float(mu_faces[face]) * areas[face] / h
            residual.add(forms[face + 1], -transmissibility)
            residual.add(forms[0], transmissibility)
            diag += transmissibility
    return residual, diag


def fv_residual(spec, geom, node_forms, values: Mapping[Slot, float]) -> PointResidual:
    """Evaluate :func:`fv_form` on concrete footprint values."""
    form, diag = fv_form(spec, geom, node_forms)
    return PointResidual(form.evaluate(values), diag, form.slots)


def face_neighbors(center, h: float) -> np.ndarray:
    return np.asarray(center, dtype=np.float64) + h * FACE_OFFSETS
