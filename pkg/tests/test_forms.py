import numpy as np
import pytest

from app.core.errors import ConductivityError, PreconditionError
from app.models.grid import GridFunction
from app.services import forms
from app.services.conductivities import constant, random_field
from app.services.grid import outer_ring_mask
from app.services.kernel import quadratic_form


def _dense_b_gamma(weights, cond, u, v):
    a = cond.sqrt_gamma.values
    total = 0.0
    n = weights.spec.n_nodes
    for i in range(n):
        total += weights.tau[i] * a[i] * u[i] * v[i]
        for j in range(i + 1, n):
            total += 2.0 * weights.pair(i, j) * a[i] * a[j] * (u[i] - u[j]) * (v[i] - v[j])
    return total


@pytest.mark.parametrize("suffix", ["1d", "2d"])
def test_conductivity_form_matches_dense_double_loop(suffix, request, rng):
    weights = request.getfixturevalue(f"weights_{suffix}")
    cond = request.getfixturevalue(f"random_cond_{suffix}")
    spec = weights.spec
    u, v = rng.standard_normal(spec.n_nodes), rng.standard_normal(spec.n_nodes)
    value = forms.b_gamma(weights, cond, GridFunction(spec, u), GridFunction(spec, v))
    assert value == pytest.approx(_dense_b_gamma(weights, cond, u, v), rel=1e-12)


def test_unit_conductivity_reduces_to_fractional_laplacian(weights_1d, rng):
    spec = weights_1d.spec
    unit = forms.unit_conductivity(spec)
    u = GridFunction(spec, rng.standard_normal(spec.n_nodes))
    v = GridFunction(spec, rng.standard_normal(spec.n_nodes))
    assert forms.b_gamma(weights_1d, unit, u, v) == pytest.approx(forms.b_one(weights_1d, u, v), rel=1e-13)
    assert forms.b_one(weights_1d, u, u) == pytest.approx(quadratic_form(weights_1d, u), rel=1e-12)
    np.testing.assert_array_equal(forms.potential(weights_1d, unit).values, 0.0)


@pytest.mark.parametrize("suffix", ["1d", "2d"])
def test_liouville_identity(suffix, request, rng):
    weights = request.getfixturevalue(f"weights_{suffix}")
    spec = weights.spec
    worst = 0.0
    for _ in range(10):
        cond = random_field(spec, rng, 0.5, 2.0)
        u = GridFunction(spec, rng.standard_normal(spec.n_nodes))
        phi = GridFunction(spec, rng.standard_normal(spec.n_nodes))
        worst = max(worst, forms.liouville_residual(weights, cond, u, phi))
    assert worst <= 1e-12


def test_schrodinger_matrix_represents_schrodinger_form(weights_1d, random_cond_1d, rng):
    spec = weights_1d.spec
    a = GridFunction(spec, rng.standard_normal(spec.n_nodes))
    b = GridFunction(spec, rng.standard_normal(spec.n_nodes))
    matrix = forms.schrodinger_matrix(weights_1d, random_cond_1d).matrix
    expected = forms.schrodinger_form(weights_1d, random_cond_1d, a, b)
    assert forms.bilinear(matrix, a.values, b.values) == pytest.approx(expected, rel=1e-11, abs=1e-12)


def test_disjoint_supports(weights_1d, random_cond_1d, layout_1d, rng):
    spec = weights_1d.spec
    f = GridFunction(spec, np.where(layout_1d.w1, rng.standard_normal(spec.n_nodes), 0.0))
    phi = GridFunction(spec, np.where(layout_1d.w2, rng.standard_normal(spec.n_nodes), 0.0))
    assert forms.disjoint_support_residual(weights_1d, random_cond_1d, f, phi) <= 1e-13
    with pytest.raises(PreconditionError):
        forms.disjoint_support_residual(weights_1d, random_cond_1d, f, f)


def test_make_conductivity_checks(spec_1d):
    with pytest.raises(ConductivityError):
        forms.make_conductivity(GridFunction.zeros(spec_1d))
    with pytest.raises(ConductivityError):
        forms.make_conductivity(GridFunction.constant(spec_1d, 2.0))
    relaxed = forms.make_conductivity(GridFunction.constant(spec_1d, 2.0), require_unit_frame=False)
    assert relaxed.gamma0 == 2.0
    np.testing.assert_allclose(relaxed.m.values, np.sqrt(2.0) - 1.0)


def test_constant_recipe_keeps_unit_frame(spec_1d):
    cond = constant(spec_1d, 3.0)
    ring = outer_ring_mask(spec_1d)
    np.testing.assert_array_equal(cond.gamma.values[ring], 1.0)
    np.testing.assert_array_equal(cond.gamma.values[~ring], 3.0)


def test_form_matrices_are_read_only(weights_1d, random_cond_1d):
    matrix = forms.conductivity_matrix(weights_1d, random_cond_1d).matrix
    with pytest.raises(ValueError):
        matrix[0, 0] = 0.0


def test_deterministic_summation_agrees(weights_2d, random_cond_2d, rng):
    spec = weights_2d.spec
    u, v = rng.standard_normal(spec.n_nodes), rng.standard_normal(spec.n_nodes)
    matrix = forms.conductivity_matrix(weights_2d, random_cond_2d).matrix
    fast = forms.bilinear(matrix, u, v, deterministic=False)
    fixed = forms.bilinear(matrix, u, v, deterministic=True)
    assert fixed == pytest.approx(fast, rel=1e-11, abs=1e-12)
    assert forms.bilinear(matrix, u, v, deterministic=True) == fixed


def test_q_form_is_weighted_potential_pairing(weights_1d, random_cond_1d, rng):
    spec = weights_1d.spec
    a = GridFunction(spec, rng.standard_normal(spec.n_nodes))
    b = GridFunction(spec, rng.standard_normal(spec.n_nodes))
    q = forms.potential(weights_1d, random_cond_1d).values
    expected = spec.cell_volume * float(np.sum(q * a.values * b.values))
    assert forms.q_form(weights_1d, random_cond_1d, a, b) == pytest.approx(expected, rel=1e-10, abs=1e-12)
    assert forms.q_form(weights_1d, forms.unit_conductivity(spec), a, b) == 0.0
