# app/services/solve.py
import logging
import math
import time
from typing import Optional, Tuple

import numpy as np
from joblib import Parallel, delayed
from scipy import linalg
from scipy.sparse.linalg import cg

from app.core import locales
from app.core.config import settings
from app.core.errors import ConvergenceError, GeometryError, IndefiniteFormError, PreconditionError, SolverError
from app.models.grid import GridFunction, RegionLayout
from app.models.kernel import KernelWeights
from app.models.operators import DirichletProblem, FormMatrix, Solution
from app.schemas.solver import SolverDiagnostics
from app.services.forms import b_one, form_matrix, laplacian_matrix
from app.services.grid import has_gap, norms

logger = logging.getLogger(__name__)

METHODS = ("auto", "cholesky", "cg")


def _relative_residual(k_ii: np.ndarray, u_interior: np.ndarray, rhs: np.ndarray) -> float:
    scale = np.linalg.norm(rhs)
    if scale == 0.0:
        return float(np.linalg.norm(k_ii @ u_interior))
    return float(np.linalg.norm(k_ii @ u_interior - rhs) / scale)


class InteriorSolver:
    """
    Факторизация внутреннего блока формы для задач с внешними данными.
    Одна факторизация обслуживает любое число столбцов внешних данных.
    """

    def __init__(self, form: FormMatrix, layout: RegionLayout, method: str = "auto", tol: Optional[float] = None):
        if method not in METHODS:
            raise SolverError(locales.ERROR_UNKNOWN_METHOD, method=method)
        self.form = form
        self.layout = layout
        self.tol = settings.SOLVER_TOL if tol is None else tol
        self.interior = layout.nodes("omega")
        self.exterior = layout.exterior_nodes
        matrix = form.matrix
        self.k_ii = matrix[np.ix_(self.interior, self.interior)]
        self.k_ie = matrix[np.ix_(self.interior, self.exterior)]

        if method == "auto":
            method = "cholesky" if self.interior.size <= settings.DENSE_SOLVER_LIMIT else "cg"
        self.method = method
        self.factor = None
        if method == "cholesky":
            try:
                self.factor = linalg.cho_factor(self.k_ii, lower=True)
            except linalg.LinAlgError:
                raise IndefiniteFormError(locales.ERROR_INDEFINITE_FORM, tag=form.tag)

    @property
    def unknowns(self) -> int:
        return int(self.interior.size)

    def rhs(self, exterior_values: np.ndarray) -> np.ndarray:
        return -(self.k_ie @ exterior_values)

    def _cg(self, rhs: np.ndarray, x0: Optional[np.ndarray]) -> Tuple[np.ndarray, int]:
        maxiter = int(settings.CG_MAXITER_FACTOR * math.sqrt(self.unknowns)) + 1
        iterations = 0
        previous = np.zeros_like(rhs) if x0 is None else np.array(x0, dtype=float)

        def count(xk):
            # Шаг CG коллинеарен направлению p: кривизна step^T K step <= 0 значит, что блок не положителен
            nonlocal iterations
            iterations += 1
            step = xk - previous
            if step.any():
                curvature = float(step @ (self.k_ii @ step))
                if not math.isfinite(curvature) or curvature <= 0.0:
                    raise IndefiniteFormError(locales.ERROR_INDEFINITE_FORM, tag=self.form.tag)
            previous[:] = xk

        solution, info = cg(self.k_ii, rhs, x0=x0, rtol=self.tol, atol=0.0, maxiter=maxiter, callback=count)
        if info != 0:
            residual = _relative_residual(self.k_ii, solution, rhs)
            raise ConvergenceError(locales.ERROR_CG_NOT_CONVERGED, maxiter=maxiter, residual=residual)
        return solution, iterations

    def solve_interior(self, exterior_values: np.ndarray, x0: Optional[np.ndarray] = None) -> Tuple[np.ndarray, int]:
        """Внутренние значения для одного столбца внешних данных."""
        rhs = self.rhs(exterior_values)
        if self.method == "cholesky":
            return linalg.cho_solve(self.factor, rhs), 1
        return self._cg(rhs, x0)

    def solve_columns(self, exterior_columns: np.ndarray, threads: Optional[int] = None) -> np.ndarray:
        """Внутренние значения для матрицы внешних данных (exterior, k) -> (interior, k)."""
        threads = threads or settings.THREADS
        rhs = self.rhs(exterior_columns)
        k = rhs.shape[1]
        if self.method == "cholesky":
            if threads <= 1 or k < 2 * threads:
                return linalg.cho_solve(self.factor, rhs)
            chunks = np.array_split(np.arange(k), threads)
            parts = Parallel(n_jobs=threads, prefer="threads")(
                delayed(linalg.cho_solve)(self.factor, rhs[:, chunk]) for chunk in chunks
            )
            return np.concatenate(parts, axis=1)
        columns = Parallel(n_jobs=threads, prefer="threads")(
            delayed(self._cg)(rhs[:, j], None) for j in range(k)
        )
        return np.stack([c[0] for c in columns], axis=1)


def dirichlet_solve(
    problem: DirichletProblem,
    tol: Optional[float] = None,
    method: str = "auto",
    x0: Optional[GridFunction] = None,
) -> Solution:
    """
    Решает задачу u = f во внешности, B(u, φ) = 0 для всех φ с носителем в Ω.
    Внешние значения задаются строго (узлово); неизвестные - только узлы Ω.
    """
    started = time.perf_counter()
    layout = problem.layout
    f = problem.exterior_data
    problem.weights.spec.check_same(f.spec)
    if np.any(f.values[layout.omega] != 0.0):
        raise PreconditionError(locales.ERROR_EXTERIOR_DATA_IN_OMEGA)

    cond = None if problem.form == "laplacian" else problem.cond
    form = form_matrix(problem.weights, cond, problem.form)
    solver = InteriorSolver(form, layout, method=method, tol=tol)

    guess = x0.values[solver.interior] if x0 is not None else None
    exterior_values = f.values[solver.exterior]
    interior_values, iterations = solver.solve_interior(exterior_values, guess)

    values = f.values.copy()
    values[solver.interior] = interior_values
    residual = _relative_residual(solver.k_ii, interior_values, solver.rhs(exterior_values))

    diagnostics = SolverDiagnostics(
        form=form.tag,
        method=solver.method,
        unknowns=solver.unknowns,
        iterations=iterations,
        relative_residual=residual,
        wall_time=time.perf_counter() - started,
    )
    logger.debug(diagnostics.model_dump_json())
    if residual > solver.tol:
        logger.warning(f"Dirichlet solve ({form.tag}) residual {residual:.3e} above tolerance {solver.tol:.1e}")
    return Solution(u=GridFunction(f.spec, values), diagnostics=diagnostics)


def elliptic_estimate_check(problem: DirichletProblem, solution: Solution) -> Tuple[float, float]:
    """
    lhs = (‖u - f‖²_{L²} + B1(u - f, u - f))^{1/2}, rhs_scale = ‖f‖_{L²}.
    Носитель f обязан отстоять от Ω хотя бы на одну ячейку.
    """
    f = problem.exterior_data
    spec = f.spec
    if not has_gap(spec, f.support(), problem.layout.omega):
        raise GeometryError(locales.ERROR_WINDOW_TOUCHES_OMEGA)
    correction = solution.u - f
    l2, _ = norms(correction)
    lhs = math.sqrt(l2 ** 2 + max(b_one(problem.weights, correction, correction), 0.0))
    rhs_scale, _ = norms(f)
    return lhs, rhs_scale


def estimate_ratio(lhs: float, rhs_scale: float) -> float:
    """Отношение lhs / rhs_scale; 0/0 считается нулём."""
    if rhs_scale == 0.0:
        return 0.0
    return lhs / rhs_scale


def poincare_constant(
    weights: KernelWeights,
    layout: RegionLayout,
    tol: Optional[float] = None,
    maxiter: Optional[int] = None,
) -> float:
    """
    C_h = max ‖u‖_{L²} / B1(u, u)^{1/2} по функциям с носителем в Ω,
    т.е. (h^n / λ_min(K1_ΩΩ))^{1/2}; λ_min - обратными степенными итерациями.
    """
    tol = settings.EIGEN_TOL if tol is None else tol
    maxiter = settings.EIGEN_MAXITER if maxiter is None else maxiter
    interior = layout.nodes("omega")
    k_ii = laplacian_matrix(weights).matrix[np.ix_(interior, interior)]
    try:
        factor = linalg.cho_factor(k_ii, lower=True)
    except linalg.LinAlgError:
        raise IndefiniteFormError(locales.ERROR_INDEFINITE_FORM, tag="laplacian")

    x = np.ones(interior.size) / math.sqrt(interior.size)
    eigenvalue = None
    for iteration in range(1, maxiter + 1):
        y = linalg.cho_solve(factor, x)
        estimate = float(y @ x) / float(y @ y)  # Rayleigh: K y = x
        x = y / np.linalg.norm(y)
        if eigenvalue is not None and abs(estimate - eigenvalue) <= tol * estimate:
            eigenvalue = estimate
            logger.debug(f"Inverse power iteration converged in {iteration} steps, lambda_min={eigenvalue:.6e}")
            return math.sqrt(weights.spec.cell_volume / eigenvalue)
        eigenvalue = estimate
    raise ConvergenceError(locales.ERROR_EIGEN_NOT_CONVERGED, maxiter=maxiter)
