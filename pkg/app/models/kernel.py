# app/models/kernel.py
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from app.models.grid import GridSpec


@dataclass(frozen=True)
class FracParams:
    """Порядок s, размерность n и нормировочная константа C_{n,s}."""

    s: float
    n: int
    c_ns: float


@dataclass(frozen=True, eq=False)
class KernelWeights:
    """
    Веса квадратуры сингулярного ядра.

    Веса инвариантны относительно сдвигов решётки, поэтому хранится таблица по
    смещениям индексов: offset_table[d + (N-1)] = w(d), d in [-(N-1), N-1]^dim,
    с нулём в d = 0 (самоячейка не несёт веса). tau - хвостовой вес каждого узла.
    """

    spec: GridSpec
    params: FracParams
    offset_table: np.ndarray
    tau: np.ndarray

    def __post_init__(self):
        for name in ("offset_table", "tau"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    @property
    def s(self) -> float:
        return self.params.s

    def pair(self, i: int, j: int) -> float:
        """Вес пары узлов (i, j)."""
        if i == j:
            return 0.0
        mi = self.spec.multi_index
        offset = tuple(mi[i] - mi[j] + self.spec.nodes_per_axis - 1)
        return float(self.offset_table[offset])

    @cached_property
    def matrix(self) -> np.ndarray:
        """Плотная симметричная матрица весов w_ij с нулевой диагональю."""
        mi = self.spec.multi_index
        shift = self.spec.nodes_per_axis - 1
        index = tuple(mi[:, k][:, None] - mi[:, k][None, :] + shift for k in range(self.spec.dim))
        dense = self.offset_table[index]
        dense.flags.writeable = False
        return dense
