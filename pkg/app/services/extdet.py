# app/services/extdet.py
import logging
import math
from typing import List, Optional, Sequence

import numpy as np

from app.core import locales
from app.core.errors import GeometryError
from app.models.conductivity import Conductivity
from app.models.extdet import ConcentratingSequence
from app.models.grid import GridFunction, GridSpec, RegionLayout
from app.models.kernel import KernelWeights
from app.models.operators import DnMatrix
from app.schemas.reports import ReconstructionRow, StabilityReport
from app.services.dnmap import dn_difference, dn_operator_norm, pairing
from app.services.forms import b_one, energy
from app.services.grid import ball_mask, nearest_node, norms

logger = logging.getLogger(__name__)

RESOLUTION_CELLS = 4


def max_resolvable_level(r0: float, spacing: float) -> int:
    """Наибольший N с r0 2^{-N} >= 4h; -1, если не разрешается даже r0."""
    limit = RESOLUTION_CELLS * spacing
    if r0 < limit:
        return -1
    return int(math.floor(math.log2(r0 / limit) + 1e-12))


def _bump(spec: GridSpec, center: np.ndarray, radius: float) -> np.ndarray:
    rho2 = np.sum((spec.coords - center) ** 2, axis=1) / radius ** 2
    values = np.zeros(spec.n_nodes)
    inside = rho2 < 1.0
    values[inside] = np.exp(-1.0 / (1.0 - rho2[inside]))
    return values


def _check_ball_in_window(layout: RegionLayout, window: str, center: np.ndarray, radius: float) -> None:
    mask = layout.require(window)
    box = layout.boxes.get(window)
    escapes = np.any(ball_mask(layout.spec, center, radius) & ~mask)
    if box is not None:
        for axis in range(layout.spec.dim):
            lo, hi = box[2 * axis], box[2 * axis + 1]
            escapes |= center[axis] - radius < lo or center[axis] + radius > hi
    if escapes:
        raise GeometryError(locales.ERROR_BALL_ESCAPES_WINDOW, radius=radius, window=window)


def build_sequence(
    spec: GridSpec,
    layout: RegionLayout,
    weights: KernelWeights,
    x0: Sequence[float],
    r0: float,
    n_max: int,
    window: str = "w1",
) -> ConcentratingSequence:
    """
    φ_N = c_N exp(-1 / (1 - |x - x0|² / r_N²)), r_N = r0 2^{-N}, N = 0..n_max,
    c_N из условия ‖φ_N‖²_{L²} + B1(φ_N, φ_N) = 1.
    """
    center = np.asarray(x0, dtype=float).reshape(-1)[: spec.dim]
    _check_ball_in_window(layout, window, center, r0)
    limit = RESOLUTION_CELLS * spec.spacing
    radii = tuple(r0 * 2.0 ** (-level) for level in range(n_max + 1))
    if radii[-1] < limit:
        raise GeometryError(locales.ERROR_RADIUS_UNDER_RESOLVED, radius=radii[-1], limit=limit, level=n_max)

    bumps = []
    for radius in radii:
        raw = GridFunction(spec, _bump(spec, center, radius))
        l2, _ = norms(raw)
        scale = 1.0 / math.sqrt(l2 ** 2 + b_one(weights, raw, raw))
        bumps.append(raw * scale)
    logger.info(f"Concentrating sequence at x0={tuple(center)}: {len(bumps)} levels, r_min={radii[-1]:.4g}")
    return ConcentratingSequence(
        center=tuple(float(c) for c in center),
        center_node=nearest_node(spec, center),
        window=window,
        radii=radii,
        bumps=tuple(bumps),
    )


def _check_support(dn: DnMatrix, seq: ConcentratingSequence) -> None:
    allowed = dn.layout.require(seq.window) & dn.layout.exterior
    for bump in seq.bumps:
        if np.any(bump.support() & ~allowed):
            raise GeometryError(locales.ERROR_SUPPORT_OUTSIDE_WINDOW, window=seq.window)


def reconstruct_point(dn: DnMatrix, seq: ConcentratingSequence) -> List[float]:
    """g_N = <Λ_γ φ_N, φ_N>."""
    _check_support(dn, seq)
    return [pairing(dn, bump, bump) for bump in seq.bumps]


def reconstruction_rows(dn: DnMatrix, seq: ConcentratingSequence) -> List[ReconstructionRow]:
    values = reconstruct_point(dn, seq)
    target = float(dn.cond.gamma.values[seq.center_node])
    rows = []
    for level, (radius, value, bump) in enumerate(zip(seq.radii, values, seq.bumps)):
        rows.append(
            ReconstructionRow(
                level=level,
                radius=radius,
                value=value,
                energy=energy(dn.weights, dn.cond, bump),
                l2_norm=norms(bump)[0],
                target=target,
            )
        )
    return rows


def energy_gap_trace(dn: DnMatrix, seq: ConcentratingSequence) -> List[float]:
    """|<Λ φ_N, φ_N> - E_γ(φ_N)| по уровням."""
    values = reconstruct_point(dn, seq)
    return [abs(value - energy(dn.weights, dn.cond, bump)) for value, bump in zip(values, seq.bumps)]


def locality_trace(dn1: DnMatrix, dn2: DnMatrix, seq: ConcentratingSequence) -> List[float]:
    """|g_N(γ) - g_N(γ')| для двух проводимостей."""
    return [abs(a - b) for a, b in zip(reconstruct_point(dn1, seq), reconstruct_point(dn2, seq))]


def is_non_increasing(values: Sequence[float], last: int = 3) -> bool:
    tail = list(values)[-last:]
    return all(later <= earlier for earlier, later in zip(tail, tail[1:]))


def stability_compare(
    dn1: DnMatrix,
    dn2: DnMatrix,
    cond1: Conductivity,
    cond2: Conductivity,
    layout: RegionLayout,
    weights: KernelWeights,
    window: str = "w1",
    slack: float = 0.05,
    norm: Optional[float] = None,
) -> StabilityReport:
    """lhs = max_W |γ1 - γ2|, rhs = 2^s ‖Λ1 - Λ2‖_{X -> X*}; holds iff lhs <= rhs (1 + slack)."""
    mask = layout.require(window)
    lhs = float(np.max(np.abs(cond1.gamma.values[mask] - cond2.gamma.values[mask])))
    if norm is None:
        norm = dn_operator_norm(dn_difference(dn1, dn2), weights, layout)
    rhs = 2.0 ** weights.s * norm
    holds = lhs <= rhs * (1.0 + slack)
    logger.info(f"Stability: lhs={lhs:.4e}, rhs={rhs:.4e}, holds={holds}")
    return StabilityReport(lhs=lhs, rhs=rhs, holds=holds, slack=slack)
