# app/services/conductivities.py
import logging
from typing import Optional, Sequence

import numpy as np

from app.core import locales
from app.core.errors import ConductivityError
from app.models.conductivity import Conductivity
from app.models.grid import GridFunction, GridSpec, RegionLayout
from app.schemas.config import ConductivitySection
from app.services.forms import make_conductivity
from app.services.grid import outer_ring_mask, rasterize_box
from app.services.kernel import mollify
from app.storage import grid_functions

logger = logging.getLogger(__name__)


def smooth_step(t: np.ndarray) -> np.ndarray:
    """C^∞-переход: 1 при t <= 0, 0 при t >= 1."""
    t = np.clip(np.asarray(t, dtype=float), 0.0, 1.0)

    def f(x):
        out = np.zeros_like(x)
        positive = x > 0
        out[positive] = np.exp(-1.0 / x[positive])
        return out

    return f(1.0 - t) / (f(1.0 - t) + f(t))


def bump_profile(spec: GridSpec, center: Sequence[float], radius: float) -> np.ndarray:
    """exp(1 - 1/(1 - ρ²)) при ρ = |x - c| / radius < 1; максимум 1 в центре."""
    center = np.asarray(center, dtype=float).reshape(-1)[: spec.dim]
    rho2 = np.sum((spec.coords - center) ** 2, axis=1) / radius ** 2
    values = np.zeros(spec.n_nodes)
    inside = rho2 < 1.0
    values[inside] = np.exp(1.0 - 1.0 / (1.0 - rho2[inside]))
    return values


def plateau_profile(spec: GridSpec, box: Sequence[float], transition: float) -> np.ndarray:
    """1 на прямоугольнике box, гладкий спад до 0 на расстоянии transition (по каждой оси)."""
    profile = np.ones(spec.n_nodes)
    for axis in range(spec.dim):
        lo, hi = box[2 * axis], box[2 * axis + 1]
        x = spec.coords[:, axis]
        outside = np.maximum(lo - x, 0.0) + np.maximum(x - hi, 0.0)
        profile *= smooth_step(outside / transition)
    return profile


def _finish(spec: GridSpec, values: np.ndarray) -> Conductivity:
    values = np.array(values, dtype=float)
    values[outer_ring_mask(spec)] = 1.0
    return make_conductivity(GridFunction(spec, values))


def constant(spec: GridSpec, value: float) -> Conductivity:
    """γ ≡ value внутри коробки, 1 на внешнем кольце."""
    return _finish(spec, np.full(spec.n_nodes, float(value)))


def smooth_bump(spec: GridSpec, center: Sequence[float], radius: float, amplitude: float) -> Conductivity:
    """γ = 1 + amplitude * bump(center, radius)."""
    return _finish(spec, 1.0 + amplitude * bump_profile(spec, center, radius))


def plateau(spec: GridSpec, box: Sequence[float], value: float, transition: float) -> Conductivity:
    """γ = value на box, гладко спадает к 1 за полосой transition."""
    return _finish(spec, 1.0 + (value - 1.0) * plateau_profile(spec, box, transition))


def random_field(
    spec: GridSpec,
    rng: np.random.Generator,
    low: float = 0.5,
    high: float = 2.0,
    smoothing_radius: Optional[float] = None,
) -> Conductivity:
    """Случайная равномерно эллиптическая γ ∈ [low, high]; по желанию сглаженная."""
    values = rng.uniform(low, high, spec.n_nodes)
    if smoothing_radius:
        values = mollify(spec, GridFunction(spec, values), smoothing_radius).values
    return _finish(spec, values)


def scaled_on_window(
    cond: Conductivity,
    layout: RegionLayout,
    window: str,
    factor: float,
    transition: float,
) -> Conductivity:
    """γ' = γ (1 + (factor - 1) χ), χ - гладкая шапка на окне (1 на его прямоугольнике)."""
    box = layout.boxes.get(window)
    if box is None:
        layout.require(window)
    profile = plateau_profile(cond.spec, box, transition)
    return _finish(cond.spec, cond.gamma.values * (1.0 + (factor - 1.0) * profile))


def modified_in_omega(cond: Conductivity, layout: RegionLayout, amplitude: float) -> Conductivity:
    """γ' = γ (1 + amplitude * бамп), бамп с носителем строго внутри Ω."""
    box = layout.boxes.get("omega")
    spec = cond.spec
    center = [(box[2 * a] + box[2 * a + 1]) / 2.0 for a in range(spec.dim)]
    radius = min((box[2 * a + 1] - box[2 * a]) / 2.0 for a in range(spec.dim))
    profile = bump_profile(spec, center, radius) * layout.omega
    return _finish(spec, cond.gamma.values * (1.0 + amplitude * profile))


def from_recipe(
    spec: GridSpec,
    layout: RegionLayout,
    section: ConductivitySection,
    rng: np.random.Generator,
) -> Conductivity:
    """Собирает проводимость по секции конфигурации (кроме рецепта counterexample)."""
    recipe = section.recipe
    if recipe == "constant":
        cond = constant(spec, section.value)
    elif recipe == "smooth-bump":
        cond = smooth_bump(spec, section.center, section.radius, section.amplitude)
    elif recipe == "plateau":
        cond = plateau(spec, section.box, section.value, section.transition)
    elif recipe == "random":
        cond = random_field(spec, rng, section.low, section.high, section.smoothing_radius)
    elif recipe == "from-file":
        cond = make_conductivity(grid_functions.load_grid_function(section.path, spec))
    else:
        raise ConductivityError(locales.ERROR_UNKNOWN_RECIPE, recipe=recipe)
    logger.info(f"Conductivity '{recipe}': min={cond.gamma0:.4g}, max={float(cond.gamma.values.max()):.4g}")
    return cond
