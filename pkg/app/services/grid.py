# app/services/grid.py
import logging
from itertools import combinations
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy import ndimage

from app.core import locales
from app.core.errors import GridError, RegionError
from app.models.grid import GridFunction, GridSpec, RegionLayout

logger = logging.getLogger(__name__)

MIN_NODES_PER_AXIS = 8


def build_grid(dim: int, half_width: float, nodes_per_axis: int) -> GridSpec:
    """Строит решётку центров ячеек на [-L, L]^dim с шагом h = 2L/N."""
    if dim not in (1, 2):
        raise GridError(locales.ERROR_GRID_DIM, dim=dim)
    if not half_width > 0:
        raise GridError(locales.ERROR_GRID_HALF_WIDTH, half_width=half_width)
    if nodes_per_axis < MIN_NODES_PER_AXIS:
        raise GridError(locales.ERROR_GRID_NODES, nodes=nodes_per_axis)
    spec = GridSpec(dim=int(dim), half_width=float(half_width), nodes_per_axis=int(nodes_per_axis))
    logger.debug(f"Built grid dim={spec.dim} L={spec.half_width} N={spec.nodes_per_axis} h={spec.spacing}")
    return spec


def rasterize_box(spec: GridSpec, box: Sequence[float], name: str = "box") -> np.ndarray:
    """
    Маска узлов, лежащих строго внутри открытого прямоугольника.
    В 1D box = (lo, hi), в 2D box = (x_lo, x_hi, y_lo, y_hi).
    """
    box = tuple(float(b) for b in box)
    if len(box) != 2 * spec.dim:
        raise RegionError(locales.ERROR_BOX_SHAPE, name=name, expected=2 * spec.dim, actual=len(box))
    mask = np.ones(spec.n_nodes, dtype=bool)
    for axis in range(spec.dim):
        lo, hi = box[2 * axis], box[2 * axis + 1]
        if not lo < hi:
            raise RegionError(locales.ERROR_BOX_ORDER, name=name)
        x = spec.coords[:, axis]
        mask &= (x > lo) & (x < hi)
    return mask


def dilate(spec: GridSpec, mask: np.ndarray, cells: int = 1) -> np.ndarray:
    """Расширение маски на целое число ячеек в метрике Чебышёва."""
    if cells <= 0:
        return np.asarray(mask, dtype=bool).copy()
    structure = np.ones((3,) * spec.dim, dtype=bool)
    grown = ndimage.binary_dilation(np.asarray(mask, dtype=bool).reshape(spec.shape), structure, iterations=cells)
    return grown.reshape(-1)


def has_gap(spec: GridSpec, first: np.ndarray, second: np.ndarray, cells: int = 1) -> bool:
    """Истина, если между масками не меньше `cells` пустых ячеек."""
    return not np.any(dilate(spec, first, cells) & second)


def outer_ring_mask(spec: GridSpec) -> np.ndarray:
    """Внешнее кольцо ячеек коробки."""
    mi = spec.multi_index
    last = spec.nodes_per_axis - 1
    return np.any((mi == 0) | (mi == last), axis=1)


def define_regions(
    spec: GridSpec,
    omega_box: Sequence[float],
    w1_box: Sequence[float],
    w2_box: Optional[Sequence[float]] = None,
    omega_small_box: Optional[Sequence[float]] = None,
) -> RegionLayout:
    """
    Растеризует Ω, окна W1, W2 и множество ω.
    Проверки: непустота заданных областей, попарная непересекаемость,
    окна и ω во внешности, зазор хотя бы в одну ячейку между ω и W1 ∪ W2.
    """
    boxes = {"omega": omega_box, "w1": w1_box, "w2": w2_box, "omega_small": omega_small_box}
    masks = {}
    for name, box in boxes.items():
        if box is None:
            masks[name] = np.zeros(spec.n_nodes, dtype=bool)
            continue
        mask = rasterize_box(spec, box, name)
        if not mask.any():
            raise RegionError(locales.ERROR_REGION_EMPTY, name=name)
        masks[name] = mask

    for first, second in combinations(masks, 2):
        if np.any(masks[first] & masks[second]):
            if first == "omega":
                raise RegionError(locales.ERROR_REGION_NOT_EXTERIOR, name=second)
            raise RegionError(locales.ERROR_REGION_OVERLAP, first=first, second=second)

    if masks["omega_small"].any():
        windows = masks["w1"] | masks["w2"]
        if not has_gap(spec, masks["omega_small"], windows):
            raise RegionError(locales.ERROR_REGION_GAP, first="omega_small", second="w1/w2")

    layout = RegionLayout(
        spec=spec,
        boxes={k: (tuple(v) if v is not None else None) for k, v in boxes.items()},
        **masks,
    )
    logger.debug(
        "Regions: "
        + ", ".join(f"{name}={int(mask.sum())}" for name, mask in masks.items())
    )
    return layout


def norms(u: GridFunction) -> Tuple[float, float]:
    """Дискретные нормы (L², L∞): ‖u‖²_{L²} = h^n Σ u_i²."""
    l2 = float(np.sqrt(u.spec.cell_volume * np.sum(u.values * u.values)))
    linf = float(np.max(np.abs(u.values))) if u.values.size else 0.0
    return l2, linf


def l2_inner(u: GridFunction, v: GridFunction) -> float:
    u.spec.check_same(v.spec)
    return float(u.spec.cell_volume * np.sum(u.values * v.values))


def nearest_node(spec: GridSpec, point: Sequence[float]) -> int:
    point = np.asarray(point, dtype=float).reshape(-1)
    distances = np.sum((spec.coords - point[: spec.dim]) ** 2, axis=1)
    return int(np.argmin(distances))


def ball_mask(spec: GridSpec, center: Sequence[float], radius: float) -> np.ndarray:
    """Узлы строго внутри шара."""
    center = np.asarray(center, dtype=float).reshape(-1)[: spec.dim]
    distances = np.sqrt(np.sum((spec.coords - center) ** 2, axis=1))
    return distances < radius
