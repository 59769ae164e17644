# app/models/grid.py
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Dict, Optional, Tuple, Union

import numpy as np

from app.core import locales
from app.core.errors import GridError, GridMismatchError, RegionError

Box = Tuple[float, ...]

REGION_NAMES = ("omega", "w1", "w2", "omega_small")


@dataclass(frozen=True)
class GridSpec:
    """
    Усечённая вычислительная область [-L, L]^dim с узлами в центрах ячеек.
    Узел с индексами (i, j) имеет координаты (-L + (i + 1/2) h, -L + (j + 1/2) h);
    глобальный индекс - C-порядок по форме (N,) * dim, ось 0 - это x.
    """

    dim: int
    half_width: float
    nodes_per_axis: int

    @property
    def spacing(self) -> float:
        return 2.0 * self.half_width / self.nodes_per_axis

    @property
    def shape(self) -> Tuple[int, ...]:
        return (self.nodes_per_axis,) * self.dim

    @property
    def n_nodes(self) -> int:
        return self.nodes_per_axis ** self.dim

    @property
    def cell_volume(self) -> float:
        return self.spacing ** self.dim

    @cached_property
    def axis_coords(self) -> np.ndarray:
        idx = np.arange(self.nodes_per_axis, dtype=float)
        return -self.half_width + (idx + 0.5) * self.spacing

    @cached_property
    def multi_index(self) -> np.ndarray:
        """Целочисленные индексы узлов, форма (n_nodes, dim)."""
        grids = np.meshgrid(*([np.arange(self.nodes_per_axis)] * self.dim), indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=1)

    @cached_property
    def coords(self) -> np.ndarray:
        """Координаты узлов, форма (n_nodes, dim)."""
        return self.axis_coords[self.multi_index]

    def same_as(self, other: "GridSpec") -> bool:
        return (
            self.dim == other.dim
            and self.half_width == other.half_width
            and self.nodes_per_axis == other.nodes_per_axis
        )

    def check_same(self, other: "GridSpec") -> None:
        if not self.same_as(other):
            raise GridMismatchError(locales.ERROR_GRID_MISMATCH)


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Узловые значения на решётке; вне коробки функция считается нулём."""

    spec: GridSpec
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float).reshape(-1)
        if values.size != self.spec.n_nodes:
            raise GridError(locales.ERROR_VALUES_SHAPE, expected=self.spec.n_nodes, actual=values.size)
        if not np.all(np.isfinite(values)):
            raise GridError(locales.ERROR_NON_FINITE_VALUES)
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    # --- Конструкторы ---
    @classmethod
    def zeros(cls, spec: GridSpec) -> "GridFunction":
        return cls(spec, np.zeros(spec.n_nodes))

    @classmethod
    def ones(cls, spec: GridSpec) -> "GridFunction":
        return cls(spec, np.ones(spec.n_nodes))

    @classmethod
    def constant(cls, spec: GridSpec, value: float) -> "GridFunction":
        return cls(spec, np.full(spec.n_nodes, float(value)))

    @classmethod
    def indicator(cls, spec: GridSpec, mask: np.ndarray) -> "GridFunction":
        return cls(spec, np.asarray(mask, dtype=bool).astype(float))

    @classmethod
    def basis(cls, spec: GridSpec, node: int) -> "GridFunction":
        values = np.zeros(spec.n_nodes)
        values[node] = 1.0
        return cls(spec, values)

    @classmethod
    def from_callable(cls, spec: GridSpec, func: Callable[[np.ndarray], np.ndarray]) -> "GridFunction":
        """func получает координаты формы (n_nodes, dim) и возвращает значения."""
        return cls(spec, func(spec.coords))

    # --- Арифметика ---
    def _other_values(self, other: Union["GridFunction", float, int]) -> Union[np.ndarray, float]:
        if isinstance(other, GridFunction):
            self.spec.check_same(other.spec)
            return other.values
        return float(other)

    def __add__(self, other):
        return GridFunction(self.spec, self.values + self._other_values(other))

    __radd__ = __add__

    def __sub__(self, other):
        return GridFunction(self.spec, self.values - self._other_values(other))

    def __rsub__(self, other):
        return GridFunction(self.spec, self._other_values(other) - self.values)

    def __mul__(self, other):
        return GridFunction(self.spec, self.values * self._other_values(other))

    __rmul__ = __mul__

    def __neg__(self):
        return GridFunction(self.spec, -self.values)

    def restrict_to(self, mask: np.ndarray) -> "GridFunction":
        """Обнуляет значения вне маски."""
        return GridFunction(self.spec, np.where(mask, self.values, 0.0))

    def support(self) -> np.ndarray:
        return self.values != 0.0

    def as_array(self) -> np.ndarray:
        """Значения в форме решётки (N,) * dim."""
        return self.values.reshape(self.spec.shape)


@dataclass(frozen=True, eq=False)
class RegionLayout:
    """
    Растеризованные маски областей: omega (Ω), окна w1, w2 и множество omega_small (ω).
    w2 и omega_small могут отсутствовать - тогда маски пустые, а обращение к ним
    через require() даёт ошибку.
    """

    spec: GridSpec
    omega: np.ndarray
    w1: np.ndarray
    w2: np.ndarray
    omega_small: np.ndarray
    boxes: Dict[str, Optional[Box]] = field(default_factory=dict)

    def __post_init__(self):
        for name in REGION_NAMES:
            mask = np.asarray(getattr(self, name), dtype=bool).reshape(-1).copy()
            mask.flags.writeable = False
            object.__setattr__(self, name, mask)

    @property
    def exterior(self) -> np.ndarray:
        return ~self.omega

    @cached_property
    def omega_nodes(self) -> np.ndarray:
        return np.flatnonzero(self.omega)

    @cached_property
    def exterior_nodes(self) -> np.ndarray:
        return np.flatnonzero(self.exterior)

    def mask(self, name: str) -> np.ndarray:
        if name == "exterior":
            return self.exterior
        if name not in REGION_NAMES:
            raise RegionError(locales.ERROR_UNKNOWN_REGION, name=name)
        return getattr(self, name)

    def require(self, name: str) -> np.ndarray:
        mask = self.mask(name)
        if not mask.any():
            raise RegionError(locales.ERROR_REGION_EMPTY, name=name)
        return mask

    def nodes(self, name: str) -> np.ndarray:
        return np.flatnonzero(self.require(name))
