# app/services/liouville.py
import logging
import math
from typing import Optional

import numpy as np

from app.core import locales
from app.core.config import settings
from app.core.errors import PreconditionError
from app.models.conductivity import Conductivity
from app.models.grid import GridFunction, RegionLayout
from app.models.kernel import KernelWeights
from app.models.operators import DirichletProblem, DnMatrix, Solution
from app.schemas.reports import QFormDiagnostics, ReductionReport
from app.services.dnmap import assemble_dn, restrict
from app.services.forms import b_gamma, b_one, conductivity_matrix, liouville_residual, potential, q_form
from app.services.solve import dirichlet_solve

logger = logging.getLogger(__name__)


def _solve(form: str, weights: KernelWeights, cond: Conductivity, layout: RegionLayout, f: GridFunction, tol) -> Solution:
    problem = DirichletProblem(form=form, weights=weights, cond=cond, layout=layout, exterior_data=f)
    return dirichlet_solve(problem, tol=tol)


def _require_exterior(layout: RegionLayout, g: GridFunction) -> None:
    if np.any(g.values[layout.omega] != 0.0):
        raise PreconditionError(locales.ERROR_EXTERIOR_DATA_IN_OMEGA)


def _require_support_in(layout: RegionLayout, f: GridFunction, window: str) -> None:
    if np.any(f.support() & ~layout.require(window)):
        raise PreconditionError(locales.ERROR_SUPPORT_OUTSIDE_WINDOW, window=window)


def _require_equal_on(cond1: Conductivity, cond2: Conductivity, mask: np.ndarray, window: str) -> None:
    deviation = float(np.max(np.abs(cond1.gamma.values[mask] - cond2.gamma.values[mask]), initial=0.0))
    if deviation > 0.0:
        raise PreconditionError(locales.ERROR_CONDUCTIVITY_WINDOW_MISMATCH, window=window, deviation=deviation)


def identity_batch_residual(
    weights: KernelWeights,
    cond: Conductivity,
    batch_size: int = 8,
    seed: int = 0,
) -> float:
    """Максимум liouville_residual по пакету случайных пар (u, φ)."""
    rng = np.random.default_rng(seed)
    spec = weights.spec
    worst = 0.0
    for _ in range(batch_size):
        u = GridFunction(spec, rng.standard_normal(spec.n_nodes))
        phi = GridFunction(spec, rng.standard_normal(spec.n_nodes))
        worst = max(worst, liouville_residual(weights, cond, u, phi))
    return worst


def reduce(
    weights: KernelWeights,
    cond: Conductivity,
    layout: RegionLayout,
    g: GridFunction,
    tol: Optional[float] = None,
    batch_size: int = 8,
    seed: int = 0,
) -> ReductionReport:
    """
    Переход проводимость -> Шрёдингер: u_g решает задачу проводимости с данными g,
    v решает задачу Шрёдингера с данными γ^{1/2} g; ожидается v = γ^{1/2} u_g.
    """
    _require_exterior(layout, g)
    tol = settings.SOLVER_TOL if tol is None else tol

    # 1. Обе задачи
    u = _solve("conductivity", weights, cond, layout, g, tol).u
    v = _solve("schrodinger", weights, cond, layout, cond.sqrt_gamma * g, tol).u

    # 2. Соответствие в обе стороны
    correspondence = float(np.max(np.abs((cond.sqrt_gamma * u - v).values)))
    converse = float(np.max(np.abs((u - cond.inv_sqrt_gamma * v).values)))

    # 3. Тождество на пакете случайных функций
    identity = identity_batch_residual(weights, cond, batch_size=batch_size, seed=seed)

    # 4. Диагностика потенциала
    psi = cond.inv_sqrt_gamma * v * v
    bound = math.sqrt(max(b_one(weights, cond.m, cond.m), 0.0)) * math.sqrt(max(b_one(weights, psi, psi), 0.0))
    diagnostics = QFormDiagnostics(
        q_form_self=q_form(weights, cond, v, v),
        cauchy_schwarz_bound=bound,
        potential_max_abs=float(np.max(np.abs(potential(weights, cond).values))),
    )
    report = ReductionReport(
        identity_residual=identity,
        correspondence_residual=correspondence,
        converse_residual=converse,
        batch_size=batch_size,
        q_form_diagnostics=diagnostics,
    )
    logger.info(f"Liouville reduction: identity {identity:.2e}, correspondence {correspondence:.2e}")
    return report


def relation_of_solutions_check(
    weights: KernelWeights,
    cond1: Conductivity,
    cond2: Conductivity,
    layout: RegionLayout,
    f: GridFunction,
    tol: Optional[float] = None,
) -> float:
    """
    ‖γ1^{1/2} u¹_f - γ2^{1/2} u²_f‖_∞ для f с носителем в W1 при γ1 = γ2 на W2.
    Совпадение частичных данных W1 -> W2 проверяет вызывающий (partial_dn_precondition).
    """
    _require_support_in(layout, f, "w1")
    _require_equal_on(cond1, cond2, layout.require("w2"), "w2")
    u1 = _solve("conductivity", weights, cond1, layout, f, tol).u
    u2 = _solve("conductivity", weights, cond2, layout, f, tol).u
    return float(np.max(np.abs((cond1.sqrt_gamma * u1 - cond2.sqrt_gamma * u2).values)))


def partial_dn_precondition(
    weights: KernelWeights,
    cond1: Conductivity,
    cond2: Conductivity,
    layout: RegionLayout,
    f: GridFunction,
    tol: Optional[float] = None,
) -> float:
    """
    Относительное расхождение Λ_γ1 f|_W2 и Λ_γ2 f|_W2, посчитанное двумя решениями
    без сборки полной DN-матрицы.
    """
    _require_support_in(layout, f, "w1")
    w2 = layout.nodes("w2")
    measured = []
    for cond in (cond1, cond2):
        u = _solve("conductivity", weights, cond, layout, f, tol).u
        # B_γ(u, e_g) = (K_γ u)_g
        measured.append((conductivity_matrix(weights, cond).matrix @ u.values)[w2])
    scale = max(float(np.max(np.abs(measured[0]))), np.finfo(float).tiny)
    return float(np.max(np.abs(measured[0] - measured[1])) / scale)


def alessandrini_decomposition_residual(
    weights: KernelWeights,
    cond1: Conductivity,
    cond2: Conductivity,
    layout: RegionLayout,
    f: GridFunction,
    tol: Optional[float] = None,
) -> float:
    """
    |<(Λ1 - Λ2) f, f> - [B1(a1 u¹ - a2 u², a1 f) - B1(m1 - m2, a1 f²)]| при γ1 = γ2 на supp f.
    """
    _require_exterior(layout, f)
    _require_equal_on(cond1, cond2, f.support(), "supp f")
    u1 = _solve("conductivity", weights, cond1, layout, f, tol).u
    u2 = _solve("conductivity", weights, cond2, layout, f, tol).u

    lhs = b_gamma(weights, cond1, u1, f) - b_gamma(weights, cond2, u2, f)
    a1f = cond1.sqrt_gamma * f
    rhs = b_one(weights, cond1.sqrt_gamma * u1 - cond2.sqrt_gamma * u2, a1f) - b_one(
        weights, cond1.m - cond2.m, a1f * f
    )
    return abs(lhs - rhs)


def polarization_pair(f: GridFunction, phi: GridFunction) -> GridFunction:
    """g = φ - f; требуется φ = 1 на носителе f."""
    support = f.support()
    if np.any(phi.values[support] != 1.0):
        raise PreconditionError(locales.ERROR_POLARIZATION_CUTOFF)
    return phi - f


def polarization_residual(f: GridFunction, phi: GridFunction) -> float:
    """max |f² - g² - (2f - φ²)| для g = φ - f."""
    g = polarization_pair(f, phi)
    return float(np.max(np.abs((f * f - g * g - (2.0 * f - phi * phi)).values)))


def assemble_schrodinger_dn(
    weights: KernelWeights,
    cond: Conductivity,
    layout: RegionLayout,
    tol: Optional[float] = None,
    threads: Optional[int] = None,
) -> DnMatrix:
    """<Λ_q f, g> = B_q(v_f, g)."""
    return assemble_dn(weights, cond, layout, tol=tol, form="schrodinger", threads=threads)


def dn_relation_residual(
    dn_gamma: DnMatrix,
    dn_q: DnMatrix,
    window: str = "w1",
    reference: Optional[Conductivity] = None,
) -> float:
    """
    Для f, g с носителем в окне, где γ = Γ:
    <Λ_γ f, g> = <Λ_q(Γ^{1/2} f), Γ^{1/2} g>. Возвращает относительное max-расхождение блоков.
    """
    reference = reference or dn_gamma.cond
    mask = dn_gamma.layout.require(window)
    _require_equal_on(dn_gamma.cond, reference, mask, window)
    block_gamma = restrict(dn_gamma, window, window)
    block_q = restrict(dn_q, window, window)
    scale = reference.sqrt_gamma.values[block_gamma.row_nodes]
    transformed = scale[:, None] * block_q.matrix * scale[None, :]
    norm = max(float(np.max(np.abs(block_gamma.matrix))), np.finfo(float).tiny)
    return float(np.max(np.abs(block_gamma.matrix - transformed)) / norm)
