# app/services/counterex.py
import dataclasses
import logging
from typing import Optional

import numpy as np

from app.core import locales
from app.core.config import settings
from app.core.errors import GeometryError, KernelError
from app.models.counterexample import CounterexamplePair
from app.models.grid import GridFunction, RegionLayout
from app.models.kernel import KernelWeights
from app.models.operators import DirichletProblem
from app.schemas.reports import CounterexampleParams, NonuniquenessReport
from app.services.conductivities import bump_profile
from app.services.dnmap import assemble_dn, dn_difference, restrict
from app.services.forms import make_conductivity, schrodinger_matrix, unit_conductivity
from app.services.grid import dilate, has_gap, outer_ring_mask
from app.services.kernel import mollifier_stencil, mollify, require_range
from app.services.liouville import relation_of_solutions_check
from app.services.solve import dirichlet_solve

logger = logging.getLogger(__name__)

MODES = ("direct", "collar")
MIN_DIFFERENCE = 0.05


def _stencil_reach(weights: KernelWeights, radius: float) -> int:
    return (mollifier_stencil(weights.spec, radius).shape[0] - 1) // 2


def build_cutoff(weights: KernelWeights, layout: RegionLayout, radius: float, dilation: Optional[int] = None) -> GridFunction:
    """η = сглаженный индикатор ω, расширенного на dilation ячеек; η = 1 на ω."""
    spec = weights.spec
    omega_small = layout.require("omega_small")
    dilation = _stencil_reach(weights, radius) if dilation is None else dilation
    raw = GridFunction.indicator(spec, dilate(spec, omega_small, dilation))
    values = np.minimum(mollify(spec, raw, radius).values, 1.0)
    values[omega_small] = 1.0
    return GridFunction(spec, values)


def _check_cutoff_geometry(layout: RegionLayout, support: np.ndarray, forbidden: np.ndarray) -> None:
    spec = layout.spec
    windows = layout.require("w1") | layout.require("w2")
    if not has_gap(spec, support, forbidden):
        raise GeometryError(locales.ERROR_CUTOFF_GEOMETRY, reason="no one-cell gap to the solve domain")
    if not has_gap(spec, support, windows):
        raise GeometryError(locales.ERROR_CUTOFF_GEOMETRY, reason="no one-cell gap to W1/W2")
    if np.any(support & outer_ring_mask(spec)):
        raise GeometryError(locales.ERROR_CUTOFF_GEOMETRY, reason="reaches the outer cell ring")


def _harmonic_extension(weights: KernelWeights, layout: RegionLayout, domain: np.ndarray, data: GridFunction, tol) -> GridFunction:
    """Решение (-Δ)^s m = 0 в domain с внешними данными data."""
    solve_layout = RegionLayout(
        spec=layout.spec,
        omega=domain,
        w1=np.zeros_like(domain),
        w2=np.zeros_like(domain),
        omega_small=np.zeros_like(domain),
    )
    unit = unit_conductivity(layout.spec)
    problem = DirichletProblem(form="laplacian", weights=weights, cond=unit, layout=solve_layout, exterior_data=data)
    return dirichlet_solve(problem, tol=tol).u


def harmonicity_residual(weights: KernelWeights, layout: RegionLayout, m: GridFunction, cond2=None) -> float:
    """
    max_Ω |((-Δ)^s + q_γ2) m| / max_Ω |вклад внешних значений m|, в матричной форме
    |(S m)_Ω| / |S_ΩE m_E|; при нулевом вкладе - ненормированная величина.
    """
    cond2 = cond2 or unit_conductivity(layout.spec)
    matrix = schrodinger_matrix(weights, cond2).matrix
    interior = layout.nodes("omega")
    exterior = layout.exterior_nodes
    residual = float(np.max(np.abs(matrix[interior] @ m.values)))
    forcing = float(np.max(np.abs(matrix[np.ix_(interior, exterior)] @ m.values[exterior])))
    if forcing == 0.0:
        return residual
    return residual / forcing


def build_counterexample(
    weights: KernelWeights,
    layout: RegionLayout,
    tol: Optional[float] = None,
    cutoff_radius: Optional[float] = None,
    cutoff_dilation: Optional[int] = None,
    mode: str = "direct",
    collar_cells: int = 2,
    strict_range: bool = True,
) -> CounterexamplePair:
    """
    Пара γ1 = (1 + m1)², γ2 ≡ 1.
    direct: m̃ решает (-Δ)^s m̃ = 0 в Ω с внешними данными η, m1 = 0.5 m̃ / ‖m̃‖_∞.
    collar: m̃ решается в Ω, расширенной на 2ε ячеек, затем m1 = c (ρ_ε * m̃), ε = collar_cells h.
    """
    if strict_range:
        try:
            require_range(weights.params)
        except KernelError:
            upper = min(1.0, weights.params.n / 2.0)
            raise KernelError(locales.ERROR_COUNTEREXAMPLE_RANGE, upper=upper, s=weights.params.s)
    if mode not in MODES:
        raise GeometryError(locales.ERROR_CUTOFF_MODE, mode=mode)
    tol = settings.SOLVER_TOL if tol is None else tol
    spec = weights.spec
    h = spec.spacing
    cutoff_radius = 2.0 * h if cutoff_radius is None else cutoff_radius
    logger.info(f"--- Building counterexample pair (mode={mode}, s={weights.s}) ---")

    # 1. Срезающая функция η
    eta = build_cutoff(weights, layout, cutoff_radius, cutoff_dilation)
    dilation = _stencil_reach(weights, cutoff_radius) if cutoff_dilation is None else cutoff_dilation

    # 2. s-гармоническое продолжение и масштаб
    if mode == "direct":
        domain = layout.require("omega")
        _check_cutoff_geometry(layout, eta.support(), domain)
        m_tilde = _harmonic_extension(weights, layout, domain, eta, tol)
    else:
        epsilon = collar_cells * h
        domain = dilate(spec, layout.require("omega"), 2 * collar_cells)
        _check_cutoff_geometry(layout, eta.support(), domain)
        m_tilde = mollify(spec, _harmonic_extension(weights, layout, domain, eta, tol), epsilon)
        _check_cutoff_geometry(layout, m_tilde.support(), np.zeros(spec.n_nodes, dtype=bool))

    scale = 0.5 / float(np.max(np.abs(m_tilde.values)))
    m1 = m_tilde * scale

    # 3. Проводимости
    cond1 = make_conductivity(GridFunction(spec, (1.0 + m1.values) ** 2))
    cond2 = unit_conductivity(spec)
    residual = harmonicity_residual(weights, layout, cond1.m - cond2.m, cond2)

    params = CounterexampleParams(
        omega_small_box=layout.boxes.get("omega_small"),
        cutoff_radius=cutoff_radius,
        cutoff_dilation=dilation,
        scale=scale,
        mode=mode,
        collar_cells=collar_cells if mode == "collar" else 0,
    )
    d_gamma = float(np.max(np.abs(cond1.gamma.values - cond2.gamma.values)[layout.omega]))
    logger.info(f"Counterexample built: scale={scale:.4g}, d_gamma={d_gamma:.4g}, harmonicity residual={residual:.2e}")
    logger.info("--- Finished building counterexample pair ---")
    return CounterexamplePair(
        cond1=cond1, cond2=cond2, m1=m1, cutoff=eta, params=params, harmonicity_residual=residual
    )


def invariance_of_data_residual(
    pair: CounterexamplePair,
    weights: KernelWeights,
    layout: RegionLayout,
    tol: Optional[float] = None,
) -> float:
    """Нормированная внутренняя невязка ((-Δ)^s + q_γ2) m = 0 в Ω для m = m1 - m2."""
    m = pair.cond1.m - pair.cond2.m
    if not np.any(m.values):
        return 0.0
    return harmonicity_residual(weights, layout, m, pair.cond2)


def perturb_background(
    pair: CounterexamplePair,
    weights: KernelWeights,
    layout: RegionLayout,
    amplitude: float = 0.2,
) -> CounterexamplePair:
    """Пара с m1 + amplitude * бамп в Ω: фон перестаёт быть s-гармоническим."""
    spec = weights.spec
    box = layout.boxes.get("omega")
    center = [(box[2 * a] + box[2 * a + 1]) / 2.0 for a in range(spec.dim)]
    radius = min((box[2 * a + 1] - box[2 * a]) / 2.0 for a in range(spec.dim))
    bump = bump_profile(spec, center, radius) * layout.omega
    m1 = pair.m1 + GridFunction(spec, amplitude * bump)
    cond1 = make_conductivity(GridFunction(spec, (1.0 + m1.values) ** 2))
    residual = harmonicity_residual(weights, layout, cond1.m - pair.cond2.m, pair.cond2)
    return dataclasses.replace(pair, cond1=cond1, m1=m1, harmonicity_residual=residual)


def _relative_block_difference(diff, base, from_window: str, to_window: str) -> float:
    numerator = float(np.max(np.abs(restrict(diff, from_window, to_window).matrix)))
    denominator = float(np.max(np.abs(restrict(base, from_window, to_window).matrix)))
    return numerator / max(denominator, np.finfo(float).tiny)


def verify_nonuniqueness(
    pair: CounterexamplePair,
    weights: KernelWeights,
    layout: RegionLayout,
    tol: Optional[float] = None,
    threshold: Optional[float] = None,
    basis_count: int = 5,
    dn_maps: Optional[tuple] = None,
    threads: Optional[int] = None,
) -> NonuniquenessReport:
    """
    r_dn = ‖(Λ1 - Λ2)_{W1 -> W2}‖_max / ‖(Λ1)_{W1 -> W2}‖_max,
    r_sol = max по базисным f в W1 невязки соотношения решений, d_γ = max_Ω |γ1 - γ2|.
    """
    tol = settings.SOLVER_TOL if tol is None else tol
    threshold = 100.0 * tol if threshold is None else threshold
    logger.info("--- Verifying nonuniqueness ---")

    # 1. DN-отображения
    if dn_maps is None:
        dn1 = assemble_dn(weights, pair.cond1, layout, tol=tol, threads=threads)
        dn2 = assemble_dn(weights, pair.cond2, layout, tol=tol, threads=threads)
    else:
        dn1, dn2 = dn_maps
    diff = dn_difference(dn1, dn2)
    base = dn1.as_block()
    r_dn = _relative_block_difference(diff, base, "w1", "w2")
    r_same = _relative_block_difference(diff, base, "w1", "w1")

    # 2. Соотношение решений на базисных функциях W1
    w1_nodes = layout.nodes("w1")
    picks = np.unique(np.linspace(0, w1_nodes.size - 1, min(basis_count, w1_nodes.size)).round().astype(int))
    r_sol = 0.0
    for node in w1_nodes[picks]:
        f = GridFunction.basis(weights.spec, int(node))
        r_sol = max(r_sol, relation_of_solutions_check(weights, pair.cond1, pair.cond2, layout, f, tol))

    # 3. Различие проводимостей
    d_gamma = float(np.max(np.abs(pair.cond1.gamma.values - pair.cond2.gamma.values)[layout.omega]))

    passed = r_dn <= threshold and r_sol <= threshold and d_gamma >= MIN_DIFFERENCE
    report = NonuniquenessReport(
        r_dn=r_dn,
        r_sol=r_sol,
        d_gamma=d_gamma,
        r_same_window=r_same,
        harmonicity_residual=pair.harmonicity_residual,
        threshold=threshold,
        min_difference=MIN_DIFFERENCE,
        passed=passed,
    )
    logger.info(f"Nonuniqueness: r_dn={r_dn:.2e}, r_sol={r_sol:.2e}, d_gamma={d_gamma:.4f}, r_same={r_same:.2e}")
    logger.info("--- Finished verifying nonuniqueness ---")
    return report


def dn_maps_for(pair: CounterexamplePair, weights: KernelWeights, layout: RegionLayout, tol=None, threads=None) -> tuple:
    return (
        assemble_dn(weights, pair.cond1, layout, tol=tol, threads=threads),
        assemble_dn(weights, pair.cond2, layout, tol=tol, threads=threads),
    )
