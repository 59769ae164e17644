import math

import numpy as np
import pytest

from app.core.errors import KernelError
from app.models.grid import GridFunction
from app.services import kernel
from app.services.grid import build_grid


def _dense_apply(weights, u):
    # Независимый двойной цикл по парам узлов
    spec = weights.spec
    out = np.zeros(spec.n_nodes)
    for i in range(spec.n_nodes):
        acc = weights.tau[i] * u[i]
        for j in range(spec.n_nodes):
            if i != j:
                acc += 2.0 * weights.pair(i, j) * (u[i] - u[j])
        out[i] = acc / spec.cell_volume
    return out


def _dense_quadratic(weights, u):
    spec = weights.spec
    total = 0.0
    for i in range(spec.n_nodes):
        total += weights.tau[i] * u[i] ** 2
        for j in range(spec.n_nodes):
            if i != j:
                total += weights.pair(i, j) * (u[i] - u[j]) ** 2
    return total


def test_frac_constant_known_values():
    assert kernel.frac_constant(1, 0.5) == pytest.approx(1.0 / math.pi, rel=1e-14)
    assert kernel.frac_constant(2, 0.5) == pytest.approx(1.0 / (2.0 * math.pi), rel=1e-14)
    with pytest.raises(KernelError):
        kernel.frac_constant(1, 1.0)


def test_require_range_uses_half_dimension():
    spec_1d = build_grid(1, 1.0, 16)
    spec_2d = build_grid(2, 1.0, 8)
    kernel.require_range(kernel.make_params(spec_1d, 0.45))
    kernel.require_range(kernel.make_params(spec_2d, 0.9))
    with pytest.raises(KernelError):
        kernel.require_range(kernel.make_params(spec_1d, 0.5))


def test_weights_are_symmetric_and_nonnegative(weights_1d, weights_2d):
    for weights in (weights_1d, weights_2d):
        w = weights.matrix
        np.testing.assert_array_equal(w, w.T)
        assert np.all(np.diag(w) == 0.0)
        assert np.all(w >= 0.0)
        assert np.all(weights.tau > 0.0)


def test_far_field_weight_is_midpoint_rule(weights_1d):
    spec = weights_1d.spec
    h, s, c = spec.spacing, weights_1d.s, weights_1d.params.c_ns
    expected = 0.5 * c * h * h * (5 * h) ** (-(1.0 + 2.0 * s))
    assert weights_1d.pair(3, 8) == pytest.approx(expected, rel=1e-14)
    assert weights_1d.pair(8, 3) == weights_1d.matrix[8, 3]


def test_translation_invariance_2d(weights_2d):
    n = weights_2d.spec.nodes_per_axis
    # (1,1)-(2,3) и (5,4)-(6,6): одинаковое смещение
    assert weights_2d.pair(1 * n + 1, 2 * n + 3) == weights_2d.pair(5 * n + 4, 6 * n + 6)


@pytest.mark.parametrize("fixture", ["weights_1d", "weights_2d"])
def test_operator_matches_dense_double_loop(fixture, request, rng):
    weights = request.getfixturevalue(fixture)
    u = rng.standard_normal(weights.spec.n_nodes)
    applied = kernel.apply_frac_laplacian(weights, GridFunction(weights.spec, u)).values
    expected = _dense_apply(weights, u)
    np.testing.assert_allclose(applied, expected, rtol=1e-12, atol=1e-12 * np.max(np.abs(expected)))

    form = kernel.quadratic_form(weights, GridFunction(weights.spec, u))
    assert form == pytest.approx(_dense_quadratic(weights, u), rel=1e-12)


def test_tail_weight_1d_closed_form(weights_1d):
    spec = weights_1d.spec
    h, s, c = spec.spacing, weights_1d.s, weights_1d.params.c_ns
    x = spec.axis_coords[10]
    expected = c * h * ((1.0 - x) ** (-2 * s) + (1.0 + x) ** (-2 * s)) / (2 * s)
    assert weights_1d.tau[10] == pytest.approx(expected, rel=1e-14)


def test_getoor_value():
    assert kernel.getoor_value(1, 0.5) == pytest.approx(1.0, rel=1e-14)
    # n = 2, s = 1/2: 2 Γ(3/2) Γ(3/2) / Γ(1) = π/2
    assert kernel.getoor_value(2, 0.5) == pytest.approx(math.pi / 2.0, rel=1e-14)


def _getoor_error(nodes):
    spec = build_grid(1, 1.0, nodes)
    weights = kernel.build_weights(spec, kernel.make_params(spec, 0.5))
    applied = kernel.apply_frac_laplacian(weights, kernel.getoor_profile(spec, 0.5))
    inside = np.abs(spec.axis_coords) < 0.9
    return float(np.max(np.abs(applied.values[inside] - 1.0)))


@pytest.mark.slow
def test_getoor_oracle_converges():
    errors = [_getoor_error(n) for n in (64, 128, 256, 512)]
    assert errors[-1] <= 0.05
    assert all(later < earlier for earlier, later in zip(errors, errors[1:]))


def test_mollifier_stencil():
    spec = build_grid(1, 1.0, 32)
    stencil = kernel.mollifier_stencil(spec, 3 * spec.spacing)
    assert stencil.shape == (5,)
    assert stencil.sum() == pytest.approx(1.0)
    np.testing.assert_allclose(stencil, stencil[::-1])
    with pytest.raises(KernelError):
        kernel.mollifier_stencil(spec, 0.5 * spec.spacing)


def test_mollify_preserves_constants_away_from_edges():
    spec = build_grid(1, 1.0, 32)
    smoothed = kernel.mollify(spec, GridFunction.ones(spec), 2 * spec.spacing)
    np.testing.assert_allclose(smoothed.values[2:-2], 1.0)
    assert smoothed.values[0] < 1.0
