# app/services/forms.py
import logging
from functools import lru_cache
from typing import Optional

import numpy as np

from app.core import locales
from app.core.config import settings
from app.core.errors import ConductivityError, PreconditionError, SolverError
from app.models.conductivity import Conductivity
from app.models.grid import GridFunction
from app.models.kernel import KernelWeights
from app.models.operators import FormMatrix
from app.services.grid import outer_ring_mask

logger = logging.getLogger(__name__)

FRAME_TOLERANCE = 1e-12

# --- Проводимость ---


def make_conductivity(gamma: GridFunction, require_unit_frame: bool = True) -> Conductivity:
    """
    Строит Conductivity с проверкой инвариантов:
    γ конечна и строго положительна, γ = 1 на внешнем кольце ячеек.
    require_unit_frame=False нужен только для синтетических наборов весов без хвостов.
    """
    minimum = float(gamma.values.min())
    if not minimum > 0.0:
        raise ConductivityError(locales.ERROR_CONDUCTIVITY_NOT_POSITIVE, minimum=minimum)
    if require_unit_frame:
        ring = outer_ring_mask(gamma.spec)
        deviation = float(np.max(np.abs(gamma.values[ring] - 1.0)))
        if deviation > FRAME_TOLERANCE:
            raise ConductivityError(locales.ERROR_CONDUCTIVITY_FRAME, deviation=deviation)
    return Conductivity.from_gamma(gamma)


def unit_conductivity(spec) -> Conductivity:
    return Conductivity.from_gamma(GridFunction.ones(spec))


# --- Матрицы форм ---


def _laplacian_values(weights: KernelWeights) -> np.ndarray:
    w = weights.matrix
    matrix = -2.0 * w
    matrix[np.diag_indices_from(matrix)] = 2.0 * w.sum(axis=1) + weights.tau
    return matrix


def _conductivity_values(weights: KernelWeights, cond: Conductivity) -> np.ndarray:
    """K_ij = -2 w_ij a_i a_j, K_ii = Σ_j 2 w_ij a_i a_j + τ_i a_i, a = γ^{1/2}."""
    a = cond.sqrt_gamma.values
    w = weights.matrix
    matrix = -2.0 * w * a[:, None] * a[None, :]
    matrix[np.diag_indices_from(matrix)] = 2.0 * (w @ a) * a + weights.tau * a
    return matrix


@lru_cache(maxsize=6)
def _cached_form(weights: KernelWeights, cond: Optional[Conductivity], tag: str) -> np.ndarray:
    if tag == "laplacian":
        matrix = _laplacian_values(weights)
    elif tag == "conductivity":
        matrix = _conductivity_values(weights, cond)
    elif tag == "schrodinger":
        matrix = _laplacian_values(weights)
        matrix[np.diag_indices_from(matrix)] += potential_diagonal(weights, cond)
    else:
        raise SolverError(locales.ERROR_UNKNOWN_FORM, tag=tag)
    matrix.flags.writeable = False
    return matrix


def form_matrix(weights: KernelWeights, cond: Optional[Conductivity], tag: str) -> FormMatrix:
    """Матрица формы по тегу: laplacian (B1), conductivity (B_γ), schrodinger (B_q)."""
    if cond is not None:
        weights.spec.check_same(cond.spec)
    if tag == "laplacian":
        cond = None
    return FormMatrix(tag=tag, matrix=_cached_form(weights, cond, tag))


def laplacian_matrix(weights: KernelWeights) -> FormMatrix:
    return form_matrix(weights, None, "laplacian")


def conductivity_matrix(weights: KernelWeights, cond: Conductivity) -> FormMatrix:
    return form_matrix(weights, cond, "conductivity")


def schrodinger_matrix(weights: KernelWeights, cond: Conductivity) -> FormMatrix:
    return form_matrix(weights, cond, "schrodinger")


def potential_diagonal(weights: KernelWeights, cond: Conductivity) -> np.ndarray:
    """Диагональ матрицы потенциала: -(K1 m)_k / γ_k^{1/2}."""
    k1 = _cached_form(weights, None, "laplacian")
    return -(k1 @ cond.m.values) / cond.sqrt_gamma.values


def potential(weights: KernelWeights, cond: Conductivity) -> GridFunction:
    """Узловые значения q_γ = -(-Δ)^s m / γ^{1/2}."""
    return GridFunction(cond.spec, potential_diagonal(weights, cond) / cond.spec.cell_volume)


# --- Билинейные формы ---


def bilinear(matrix: np.ndarray, u: np.ndarray, v: np.ndarray, deterministic: Optional[bool] = None) -> float:
    """uᵀ K v; в детерминированном режиме - фиксированный порядок суммирования без BLAS."""
    deterministic = settings.DETERMINISTIC if deterministic is None else deterministic
    if deterministic:
        return float(np.einsum("i,ij,j->", u, matrix, v, optimize=False))
    return float(u @ (matrix @ v))


def _check_grids(weights: KernelWeights, *functions: GridFunction) -> None:
    for f in functions:
        weights.spec.check_same(f.spec)


def b_one(weights: KernelWeights, u: GridFunction, v: GridFunction) -> float:
    """B1(u, v): дискретное <(-Δ)^{s/2} u, (-Δ)^{s/2} v>."""
    _check_grids(weights, u, v)
    return bilinear(_cached_form(weights, None, "laplacian"), u.values, v.values)


def b_gamma(weights: KernelWeights, cond: Conductivity, u: GridFunction, v: GridFunction) -> float:
    """B_γ(u, v) = Σ_{i<j} 2 w_ij a_i a_j (u_i - u_j)(v_i - v_j) + Σ τ_i a_i u_i v_i."""
    _check_grids(weights, cond.gamma, u, v)
    return bilinear(conductivity_matrix(weights, cond).matrix, u.values, v.values)


def q_form(weights: KernelWeights, cond: Conductivity, a: GridFunction, b: GridFunction) -> float:
    """<q_γ a, b> = -B1(m, ψ), ψ = γ^{-1/2} a b."""
    _check_grids(weights, cond.gamma, a, b)
    psi = cond.inv_sqrt_gamma * a * b
    return -b_one(weights, cond.m, psi)


def schrodinger_form(weights: KernelWeights, cond: Conductivity, a: GridFunction, b: GridFunction) -> float:
    """B_q(a, b) = B1(a, b) + <q_γ a, b>."""
    return b_one(weights, a, b) + q_form(weights, cond, a, b)


def energy(weights: KernelWeights, cond: Conductivity, u: GridFunction) -> float:
    return b_gamma(weights, cond, u, u)


def liouville_residual(weights: KernelWeights, cond: Conductivity, u: GridFunction, phi: GridFunction) -> float:
    """
    |B_γ(u, φ) - B1(a u, a φ) - <q_γ(a u), a φ>| / (1 + |B_γ(u, φ)|).
    Попарно (a_i u_i - a_j u_j)(a_i φ_i - a_j φ_j) - a_i a_j (u_i - u_j)(φ_i - φ_j)
    = (m_i - m_j)(ψ_i - ψ_j), так что остаток - шум округления.
    """
    lhs = b_gamma(weights, cond, u, phi)
    au = cond.sqrt_gamma * u
    aphi = cond.sqrt_gamma * phi
    rhs = b_one(weights, au, aphi) + q_form(weights, cond, au, aphi)
    return abs(lhs - rhs) / (1.0 + abs(lhs))


def disjoint_support_residual(weights: KernelWeights, cond: Conductivity, f: GridFunction, phi: GridFunction) -> float:
    """Для f, φ с непересекающимися носителями B_γ(f, φ) = B1(a f, a φ)."""
    if np.any(f.support() & phi.support()):
        raise PreconditionError(locales.ERROR_REGION_OVERLAP, first="supp f", second="supp phi")
    lhs = b_gamma(weights, cond, f, phi)
    rhs = b_one(weights, cond.sqrt_gamma * f, cond.sqrt_gamma * phi)
    return abs(lhs - rhs) / (1.0 + abs(lhs))
