import numpy as np
import pytest

from app.core.config import settings
from app.core.errors import ConvergenceError, GeometryError, IndefiniteFormError, PreconditionError, SolverError
from app.models.grid import GridFunction
from app.models.operators import DirichletProblem, FormMatrix
from app.services import solve
from app.services.forms import conductivity_matrix, laplacian_matrix


def _problem(weights, cond, layout, data, form="conductivity"):
    return DirichletProblem(form=form, weights=weights, cond=cond, layout=layout, exterior_data=data)


def _window_data(layout, rng):
    spec = layout.spec
    return GridFunction(spec, np.where(layout.w1, 1.0 + rng.random(spec.n_nodes), 0.0))


@pytest.mark.parametrize("suffix", ["1d", "2d"])
def test_dirichlet_solve_matches_full_system(suffix, request, rng):
    weights = request.getfixturevalue(f"weights_{suffix}")
    layout = request.getfixturevalue(f"layout_{suffix}")
    cond = request.getfixturevalue(f"random_cond_{suffix}")
    f = _window_data(layout, rng)

    solution = solve.dirichlet_solve(_problem(weights, cond, layout, f), tol=1e-12)

    # Полная система: строки Ω из формы, строки внешности - тождество
    system = conductivity_matrix(weights, cond).matrix.copy()
    rhs = f.values.copy()
    exterior = layout.exterior
    system[exterior] = 0.0
    system[exterior, exterior] = 1.0
    rhs[layout.omega] = 0.0
    expected = np.linalg.solve(system, rhs)

    np.testing.assert_allclose(solution.u.values, expected, atol=1e-10)
    np.testing.assert_array_equal(solution.u.values[exterior], f.values[exterior])
    assert solution.diagnostics.method == "cholesky"
    assert solution.diagnostics.relative_residual <= 1e-12


def test_cg_agrees_with_cholesky(weights_1d, layout_1d, random_cond_1d, rng):
    f = _window_data(layout_1d, rng)
    problem = _problem(weights_1d, random_cond_1d, layout_1d, f)
    direct = solve.dirichlet_solve(problem, tol=1e-12, method="cholesky")
    iterative = solve.dirichlet_solve(problem, tol=1e-12, method="cg")
    assert iterative.diagnostics.method == "cg"
    assert iterative.diagnostics.iterations >= 1
    np.testing.assert_allclose(iterative.u.values, direct.u.values, atol=1e-8 * np.max(np.abs(direct.u.values)))


def test_warm_start_is_accepted(weights_1d, layout_1d, random_cond_1d, rng):
    f = _window_data(layout_1d, rng)
    problem = _problem(weights_1d, random_cond_1d, layout_1d, f)
    direct = solve.dirichlet_solve(problem, method="cholesky")
    warm = solve.dirichlet_solve(problem, method="cg", x0=direct.u)
    assert warm.diagnostics.iterations <= 2


def test_exterior_data_must_vanish_in_omega(weights_1d, layout_1d, random_cond_1d):
    data = GridFunction.ones(weights_1d.spec)
    with pytest.raises(PreconditionError):
        solve.dirichlet_solve(_problem(weights_1d, random_cond_1d, layout_1d, data))


def test_unknown_method_and_indefinite_block(layout_1d):
    n = layout_1d.spec.n_nodes
    with pytest.raises(SolverError):
        solve.InteriorSolver(FormMatrix("laplacian", np.eye(n)), layout_1d, method="lu")
    with pytest.raises(IndefiniteFormError):
        solve.InteriorSolver(FormMatrix("schrodinger", -np.eye(n)), layout_1d, method="cholesky")


def test_cg_detects_indefinite_block(layout_1d):
    n = layout_1d.spec.n_nodes
    matrix = -np.eye(n)
    source = layout_1d.exterior_nodes[0]
    matrix[layout_1d.omega_nodes, source] = 1.0
    matrix[source, layout_1d.omega_nodes] = 1.0
    solver = solve.InteriorSolver(FormMatrix("schrodinger", matrix), layout_1d, method="cg")
    with pytest.raises(IndefiniteFormError):
        solver.solve_interior(np.ones(layout_1d.exterior_nodes.size))


def test_cg_reports_non_convergence(monkeypatch, weights_1d, layout_1d, random_cond_1d, rng):
    monkeypatch.setattr(settings, "CG_MAXITER_FACTOR", 0)
    problem = _problem(weights_1d, random_cond_1d, layout_1d, _window_data(layout_1d, rng))
    with pytest.raises(ConvergenceError):
        solve.dirichlet_solve(problem, tol=1e-14, method="cg")


def test_elliptic_estimate(weights_1d, layout_1d, random_cond_1d, rng):
    f = _window_data(layout_1d, rng)
    problem = _problem(weights_1d, random_cond_1d, layout_1d, f)
    solution = solve.dirichlet_solve(problem)
    lhs, rhs_scale = solve.elliptic_estimate_check(problem, solution)
    assert lhs > 0.0 and rhs_scale > 0.0
    assert solve.estimate_ratio(0.0, 0.0) == 0.0

    # Данные в соседнем с Ω узле
    touching = np.zeros(weights_1d.spec.n_nodes)
    touching[layout_1d.omega_nodes[-1] + 1] = 1.0
    problem = _problem(weights_1d, random_cond_1d, layout_1d, GridFunction(weights_1d.spec, touching))
    with pytest.raises(GeometryError):
        solve.elliptic_estimate_check(problem, solve.dirichlet_solve(problem))


def test_poincare_constant_matches_dense_eigenvalue(weights_1d, layout_1d):
    interior = layout_1d.omega_nodes
    k_ii = laplacian_matrix(weights_1d).matrix[np.ix_(interior, interior)]
    lam = np.linalg.eigvalsh(k_ii)[0]
    expected = np.sqrt(weights_1d.spec.cell_volume / lam)
    assert solve.poincare_constant(weights_1d, layout_1d) == pytest.approx(expected, rel=1e-5)


def test_poincare_constant_is_stable_under_refinement():
    from app.services.grid import build_grid, define_regions
    from app.services.kernel import build_weights, make_params

    values = []
    for nodes in (64, 128):
        spec = build_grid(1, 1.0, nodes)
        layout = define_regions(spec, (-0.5, 0.5), (0.6, 0.9))
        values.append(solve.poincare_constant(build_weights(spec, make_params(spec, 0.5)), layout))
    assert values[1] == pytest.approx(values[0], rel=1e-2)


def test_maximum_principle_for_window_indicator(weights_1d, layout_1d, random_cond_1d):
    spec = weights_1d.spec
    f = GridFunction(spec, layout_1d.w1.astype(float))
    u = solve.dirichlet_solve(_problem(weights_1d, random_cond_1d, layout_1d, f), tol=1e-12).u.values
    assert u.min() >= -1e-12
    assert u.max() <= 1.0 + 1e-12
    assert u[layout_1d.omega].max() > 0.0


def test_solution_is_linear_in_exterior_data(weights_1d, layout_1d, random_cond_1d, rng):
    spec = weights_1d.spec
    zero = solve.dirichlet_solve(_problem(weights_1d, random_cond_1d, layout_1d, GridFunction.zeros(spec)))
    np.testing.assert_array_equal(zero.u.values, 0.0)

    f = _window_data(layout_1d, rng)
    g = _window_data(layout_1d, rng)
    u_f = solve.dirichlet_solve(_problem(weights_1d, random_cond_1d, layout_1d, f)).u.values
    u_g = solve.dirichlet_solve(_problem(weights_1d, random_cond_1d, layout_1d, g)).u.values
    u_sum = solve.dirichlet_solve(_problem(weights_1d, random_cond_1d, layout_1d, f + g)).u.values
    np.testing.assert_allclose(u_sum, u_f + u_g, atol=1e-10 * np.max(np.abs(u_sum)))


def test_poincare_constant_grows_with_omega(weights_1d):
    from app.services.grid import define_regions

    spec = weights_1d.spec
    inner = define_regions(spec, (-0.3, 0.3), (0.6, 0.9))
    outer = define_regions(spec, (-0.5, 0.5), (0.6, 0.9))
    assert solve.poincare_constant(weights_1d, inner) <= solve.poincare_constant(weights_1d, outer)
