# app/services/kernel.py
import logging
import math
import time

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy import ndimage
from scipy.special import gamma as gamma_fn

from app.core import locales
from app.core.config import settings
from app.core.errors import KernelError
from app.models.grid import GridFunction, GridSpec
from app.models.kernel import FracParams, KernelWeights
from app.storage import weights_cache

logger = logging.getLogger(__name__)

# Площадь единичной сферы в R^n
SPHERE_AREA = {1: 2.0, 2: 2.0 * math.pi}

# --- Константы и параметры ---


def frac_constant(n: int, s: float) -> float:
    """C_{n,s} = 4^s Γ(n/2 + s) / (π^{n/2} |Γ(-s)|)."""
    if n not in (1, 2):
        raise KernelError(locales.ERROR_GRID_DIM, dim=n)
    if not 0.0 < s < 1.0:
        raise KernelError(locales.ERROR_FRACTIONAL_ORDER, upper=1, s=s)
    return float(4.0 ** s * gamma_fn(n / 2.0 + s) / (math.pi ** (n / 2.0) * abs(gamma_fn(-s))))


def make_params(spec: GridSpec, s: float) -> FracParams:
    return FracParams(s=float(s), n=spec.dim, c_ns=frac_constant(spec.dim, s))


def require_range(params: FracParams) -> None:
    """Отклоняет s вне (0, min(1, n/2))."""
    upper = min(1.0, params.n / 2.0)
    if not 0.0 < params.s < upper:
        raise KernelError(locales.ERROR_FRACTIONAL_ORDER, upper=upper, s=params.s)


# --- Веса ближней и дальней зоны ---


def _offset_table_1d(spec: GridSpec, params: FracParams) -> np.ndarray:
    h, s, c = spec.spacing, params.s, params.c_ns
    alpha = 1.0 + 2.0 * s
    d = np.abs(np.arange(-(spec.nodes_per_axis - 1), spec.nodes_per_axis)).astype(float)
    table = np.zeros_like(d)
    far = d >= 2
    table[far] = 0.5 * c * h * h * (d[far] * h) ** (-alpha)
    # Соседние ячейки: точная первообразная степенного ядра на [h/2, 3h/2]
    adjacent = 0.5 * c * h * ((0.5 * h) ** (-2.0 * s) - (1.5 * h) ** (-2.0 * s)) / (2.0 * s)
    table[d == 1] = adjacent
    return table


def _offset_table_2d(spec: GridSpec, params: FracParams, gauss_points: int) -> np.ndarray:
    h, s, c = spec.spacing, params.s, params.c_ns
    alpha = 2.0 + 2.0 * s
    axis = np.arange(-(spec.nodes_per_axis - 1), spec.nodes_per_axis)
    dx, dy = np.meshgrid(axis, axis, indexing="ij")
    chebyshev = np.maximum(np.abs(dx), np.abs(dy))
    table = np.zeros(dx.shape)
    far = chebyshev >= 2
    dist = h * np.sqrt(dx[far] ** 2 + dy[far] ** 2)
    table[far] = 0.5 * c * h ** 4 * dist ** (-alpha)

    # Соседние ячейки: тензорная квадратура Гаусса по ячейке
    xi, wq = leggauss(gauss_points)
    for ox, oy in zip(*np.nonzero(chebyshev == 1)):
        cx, cy = dx[ox, oy], dy[ox, oy]
        px = (cx + 0.5 * xi) * h
        py = (cy + 0.5 * xi) * h
        r2 = px[:, None] ** 2 + py[None, :] ** 2
        integral = 0.25 * h * h * np.sum(wq[:, None] * wq[None, :] * r2 ** (-0.5 * alpha))
        table[ox, oy] = 0.5 * c * h * h * integral
    return table


def _tail_1d(spec: GridSpec, params: FracParams) -> np.ndarray:
    h, s, c, L = spec.spacing, params.s, params.c_ns, spec.half_width
    x = spec.coords[:, 0]
    return c * h * ((L - x) ** (-2.0 * s) + (L + x) ** (-2.0 * s)) / (2.0 * s)


def _exit_distance(points: np.ndarray, cos_t: np.ndarray, sin_t: np.ndarray, half_width: float) -> np.ndarray:
    """Расстояние от точек до границы коробки вдоль лучей, форма (points, angles)."""
    with np.errstate(divide="ignore", invalid="ignore"):
        bounds = []
        for coord, direction in ((points[:, 0:1], cos_t[None, :]), (points[:, 1:2], sin_t[None, :])):
            target = np.where(direction > 0, half_width, -half_width)
            t = (target - coord) / direction
            bounds.append(np.where(direction != 0, t, np.inf))
    return np.minimum(bounds[0], bounds[1])


def _tail_2d(spec: GridSpec, params: FracParams, angles: int, radius_factor: float, chunk: int = 256) -> np.ndarray:
    h, s, c, L = spec.spacing, params.s, params.c_ns, spec.half_width
    radius = radius_factor * L
    theta = (np.arange(angles) + 0.5) * (2.0 * math.pi / angles)
    cos_t, sin_t = np.cos(theta), np.sin(theta)
    dtheta = 2.0 * math.pi / angles
    closure = SPHERE_AREA[2] * radius ** (-2.0 * s) / (2.0 * s)

    tau = np.empty(spec.n_nodes)
    coords = spec.coords
    for start in range(0, spec.n_nodes, chunk):
        points = coords[start:start + chunk]
        rho = _exit_distance(points, cos_t, sin_t, L)
        # Радиальный интеграл ρ^{-1-2s} от выхода из коробки до R берётся точно
        shell = (rho ** (-2.0 * s) - radius ** (-2.0 * s)) / (2.0 * s)
        tau[start:start + chunk] = c * h * h * (dtheta * shell.sum(axis=1) + closure)
    return tau


def compute_weights(spec: GridSpec, params: FracParams) -> KernelWeights:
    if spec.dim == 1:
        table = _offset_table_1d(spec, params)
        tau = _tail_1d(spec, params)
    else:
        table = _offset_table_2d(spec, params, settings.NEAR_FIELD_GAUSS_POINTS)
        tau = _tail_2d(spec, params, settings.TAIL_ANGLES, settings.TAIL_RADIUS_FACTOR)
    return KernelWeights(spec=spec, params=params, offset_table=table, tau=tau)


def build_weights(spec: GridSpec, params: FracParams, use_cache: bool = True) -> KernelWeights:
    """
    Веса квадратуры сингулярного ядра и хвостовые веса.
    Сначала пробуем кэш, при промахе считаем и сохраняем.
    """
    # 1. Пытаемся получить из кэша
    if use_cache and settings.WEIGHTS_CACHE_ENABLED:
        cached = weights_cache.load_weights(spec, params)
        if cached is not None:
            logger.info(f"Kernel weights for dim={spec.dim} N={spec.nodes_per_axis} s={params.s} loaded from cache.")
            return cached

    # 2. Считаем
    started = time.perf_counter()
    weights = compute_weights(spec, params)
    logger.info(
        f"Kernel weights for dim={spec.dim} N={spec.nodes_per_axis} s={params.s} "
        f"computed in {time.perf_counter() - started:.3f}s."
    )

    # 3. Сохраняем в кэш
    if use_cache and settings.WEIGHTS_CACHE_ENABLED:
        weights_cache.save_weights(weights)
    return weights


# --- Операторы ---


def apply_frac_laplacian(weights: KernelWeights, u: GridFunction) -> GridFunction:
    """(Au)_i = h^{-n} [ Σ_{j≠i} 2 w_ij (u_i - u_j) + τ_i u_i ]."""
    weights.spec.check_same(u.spec)
    w = weights.matrix
    diagonal = 2.0 * w.sum(axis=1) + weights.tau
    values = (diagonal * u.values - 2.0 * (w @ u.values)) / u.spec.cell_volume
    return GridFunction(u.spec, values)


def quadratic_form(weights: KernelWeights, u: GridFunction) -> float:
    """Σ_{i≠j} w_ij (u_i - u_j)² + Σ τ_i u_i²."""
    weights.spec.check_same(u.spec)
    diff = u.values[:, None] - u.values[None, :]
    return float(np.sum(weights.matrix * diff * diff) + np.sum(weights.tau * u.values ** 2))


def getoor_profile(spec: GridSpec, s: float) -> GridFunction:
    """(1 - |x|²)_+^s."""
    r2 = np.sum(spec.coords ** 2, axis=1)
    return GridFunction(spec, np.where(r2 < 1.0, np.clip(1.0 - r2, 0.0, None) ** s, 0.0))


def getoor_value(n: int, s: float) -> float:
    """(-Δ)^s (1 - |x|²)_+^s на единичном шаре: 2^{2s} Γ(1+s) Γ(n/2+s) / Γ(n/2)."""
    return float(2.0 ** (2.0 * s) * gamma_fn(1.0 + s) * gamma_fn(n / 2.0 + s) / gamma_fn(n / 2.0))


# --- Сглаживание ---


def mollifier_stencil(spec: GridSpec, radius: float) -> np.ndarray:
    """Нормированный гладкий бамп exp(-1/(1 - |k h / radius|²)) на узлах |k| h < radius."""
    h = spec.spacing
    if radius < h * (1.0 - 1e-12):
        raise KernelError(locales.ERROR_MOLLIFIER_RADIUS, radius=radius, spacing=h)
    reach = max(int(math.ceil(radius / h - 1e-12)) - 1, 0)
    axis = np.arange(-reach, reach + 1)
    grids = np.meshgrid(*([axis] * spec.dim), indexing="ij")
    r = h * np.sqrt(sum(g.astype(float) ** 2 for g in grids)) / radius
    stencil = np.zeros(r.shape)
    inside = r < 1.0
    stencil[inside] = np.exp(-1.0 / (1.0 - r[inside] ** 2))
    return stencil / stencil.sum()


def mollify(spec: GridSpec, u: GridFunction, radius: float) -> GridFunction:
    """Дискретная свёртка с нормированным бампом радиуса radius (нули за коробкой)."""
    spec.check_same(u.spec)
    stencil = mollifier_stencil(spec, radius)
    smoothed = ndimage.convolve(u.as_array(), stencil, mode="constant", cval=0.0)
    return GridFunction(spec, smoothed.reshape(-1))
