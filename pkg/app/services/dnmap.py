# app/services/dnmap.py
import logging
import time
from typing import Optional, Tuple, Union

import numpy as np
from scipy import linalg

from app.core import locales
from app.core.errors import GridMismatchError, RegionError, SolverError
from app.models.conductivity import Conductivity
from app.models.grid import GridFunction, RegionLayout
from app.models.kernel import KernelWeights
from app.models.operators import DirichletProblem, DnBlock, DnMatrix, Solution
from app.services.forms import b_gamma, form_matrix, laplacian_matrix
from app.services.solve import InteriorSolver, dirichlet_solve

logger = logging.getLogger(__name__)

Window = Union[str, np.ndarray]


def symmetry_defect(matrix: np.ndarray) -> float:
    """max |D - Dᵀ| / max |D|."""
    scale = float(np.max(np.abs(matrix))) if matrix.size else 0.0
    if scale == 0.0:
        return 0.0
    return float(np.max(np.abs(matrix - matrix.T)) / scale)


def assemble_dn(
    weights: KernelWeights,
    cond: Conductivity,
    layout: RegionLayout,
    tol: Optional[float] = None,
    form: str = "conductivity",
    method: str = "auto",
    threads: Optional[int] = None,
) -> DnMatrix:
    """
    DN-матрица на узловом базисе внешности: D[g, f] = B(u_f, e_g).
    Столбцы решаются одной факторизацией: D = K_EE + K_EΩ U_Ω.
    """
    started = time.perf_counter()
    weights.spec.check_same(layout.spec)
    form_values = form_matrix(weights, cond, form)
    matrix = form_values.matrix
    solver = InteriorSolver(form_values, layout, method=method, tol=tol)
    exterior = solver.exterior

    interior_columns = solver.solve_columns(np.eye(exterior.size), threads=threads)
    k_ee = matrix[np.ix_(exterior, exterior)]
    k_ei = matrix[np.ix_(exterior, solver.interior)]
    dn = k_ee + k_ei @ interior_columns

    defect = symmetry_defect(dn)
    logger.info(
        f"Assembled {form} DN map: {exterior.size} exterior nodes, {solver.unknowns} unknowns, "
        f"symmetry defect {defect:.2e}, {time.perf_counter() - started:.2f}s"
    )
    return DnMatrix(form=form, matrix=dn, weights=weights, cond=cond, layout=layout, symmetry_defect=defect)


def _window_nodes(layout: RegionLayout, window: Window, name: str) -> np.ndarray:
    if isinstance(window, str):
        mask = layout.require(window)
        name = window
    else:
        mask = np.asarray(window, dtype=bool).reshape(-1)
    if np.any(mask & layout.omega):
        raise RegionError(locales.ERROR_REGION_NOT_EXTERIOR, name=name)
    return np.flatnonzero(mask)


def _positions(block_nodes: np.ndarray, nodes: np.ndarray, name: str) -> np.ndarray:
    pos = np.searchsorted(block_nodes, nodes)
    if np.any(pos >= block_nodes.size) or np.any(block_nodes[np.minimum(pos, block_nodes.size - 1)] != nodes):
        raise RegionError(locales.ERROR_WINDOW_OUTSIDE_BLOCK, window=name)
    return pos


def restrict(dn: Union[DnMatrix, DnBlock], from_window: Window, to_window: Window) -> DnBlock:
    """Блок (to, from): данные с носителем в from_window, измерение в to_window."""
    block = dn.as_block() if isinstance(dn, DnMatrix) else dn
    cols = _window_nodes(block.layout, from_window, "from")
    rows = _window_nodes(block.layout, to_window, "to")
    col_pos = _positions(block.col_nodes, cols, "from")
    row_pos = _positions(block.row_nodes, rows, "to")
    return DnBlock(block.layout, block.matrix[np.ix_(row_pos, col_pos)], rows, cols)


def _check_same_layout(first: DnMatrix, second: DnMatrix) -> None:
    same = (
        first.layout.spec.same_as(second.layout.spec)
        and np.array_equal(first.layout.omega, second.layout.omega)
        and first.form == second.form
    )
    if not same:
        raise GridMismatchError(locales.ERROR_LAYOUT_MISMATCH)


def dn_difference(dn1: DnMatrix, dn2: DnMatrix) -> DnBlock:
    _check_same_layout(dn1, dn2)
    return DnBlock(dn1.layout, dn1.matrix - dn2.matrix, dn1.nodes, dn1.nodes)


def pairing(dn: Union[DnMatrix, DnBlock], f: GridFunction, g: GridFunction) -> float:
    """<Λ f, g> на узлах блока."""
    block = dn.as_block() if isinstance(dn, DnMatrix) else dn
    return float(g.values[block.row_nodes] @ block.matrix @ f.values[block.col_nodes])


def _solve_for(dn: DnMatrix, f: GridFunction, tol: Optional[float]) -> Solution:
    problem = DirichletProblem(form=dn.form, weights=dn.weights, cond=dn.cond, layout=dn.layout, exterior_data=f)
    return dirichlet_solve(problem, tol=tol)


def alessandrini_gap(
    dn1: DnMatrix,
    dn2: DnMatrix,
    f: GridFunction,
    g: GridFunction,
    solutions: Optional[Tuple[Union[Solution, GridFunction], Union[Solution, GridFunction]]] = None,
    tol: Optional[float] = None,
) -> float:
    """|<(Λ1 - Λ2) f, g> - (B_γ1 - B_γ2)(u¹_f, u²_g)|."""
    _check_same_layout(dn1, dn2)
    if solutions is None:
        solutions = (_solve_for(dn1, f, tol), _solve_for(dn2, g, tol))
    u1, u2 = (s.u if isinstance(s, Solution) else s for s in solutions)

    lhs = pairing(dn1, f, g) - pairing(dn2, f, g)
    rhs = b_gamma(dn1.weights, dn1.cond, u1, u2) - b_gamma(dn2.weights, dn2.cond, u1, u2)
    return abs(lhs - rhs)


def generalized_spectral_norm(matrix: np.ndarray, gram_rows: np.ndarray, gram_cols: np.ndarray) -> float:
    """Наибольшее сингулярное число G_r^{-1/2} M G_c^{-1/2} через множители Холецкого."""
    if matrix.size == 0 or not np.any(matrix):
        return 0.0
    try:
        lower_rows = linalg.cholesky(gram_rows, lower=True)
        lower_cols = linalg.cholesky(gram_cols, lower=True)
    except linalg.LinAlgError:
        raise SolverError(locales.ERROR_GRAM_NOT_SPD)
    whitened = linalg.solve_triangular(lower_rows, matrix, lower=True)
    whitened = linalg.solve_triangular(lower_cols, whitened.T, lower=True).T
    return float(linalg.svdvals(whitened)[0])


def exterior_gram(weights: KernelWeights, nodes: np.ndarray) -> np.ndarray:
    """Грам дискретного H^s на узловом базисе: h^n I + K1[nodes, nodes]."""
    k1 = laplacian_matrix(weights).matrix
    return weights.spec.cell_volume * np.eye(nodes.size) + k1[np.ix_(nodes, nodes)]


def dn_operator_norm(
    dn_diff: Union[DnBlock, DnMatrix, np.ndarray],
    weights: KernelWeights,
    layout: RegionLayout,
) -> float:
    """Норма ‖M‖_{X -> X*} относительно дискретной H^s-нормы внешних функций."""
    if isinstance(dn_diff, DnMatrix):
        dn_diff = dn_diff.as_block()
    if isinstance(dn_diff, np.ndarray):
        nodes = layout.exterior_nodes
        dn_diff = DnBlock(layout, dn_diff, nodes, nodes)
    gram_rows = exterior_gram(weights, dn_diff.row_nodes)
    gram_cols = exterior_gram(weights, dn_diff.col_nodes)
    return generalized_spectral_norm(dn_diff.matrix, gram_rows, gram_cols)
