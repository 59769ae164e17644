# app/models/operators.py
from dataclasses import dataclass
from typing import Literal

import numpy as np

from app.models.conductivity import Conductivity
from app.models.grid import GridFunction, GridSpec, RegionLayout
from app.models.kernel import KernelWeights
from app.schemas.solver import SolverDiagnostics

FormTag = Literal["conductivity", "laplacian", "schrodinger"]


@dataclass(frozen=True, eq=False)
class FormMatrix:
    """Плотная симметричная матрица билинейной формы по всем узлам сетки."""

    tag: str
    matrix: np.ndarray


@dataclass(frozen=True, eq=False)
class DirichletProblem:
    """Задача с внешними данными: найти u = f вне Ω, B(u, φ) = 0 для φ с носителем в Ω."""

    form: FormTag
    weights: KernelWeights
    cond: Conductivity
    layout: RegionLayout
    exterior_data: GridFunction


@dataclass(frozen=True, eq=False)
class Solution:
    u: GridFunction
    diagnostics: SolverDiagnostics


@dataclass(frozen=True, eq=False)
class DnBlock:
    """Блок DN-матрицы: строки - узлы измерения (to), столбцы - узлы данных (from)."""

    layout: RegionLayout
    matrix: np.ndarray
    row_nodes: np.ndarray
    col_nodes: np.ndarray


@dataclass(frozen=True, eq=False)
class DnMatrix:
    """
    Дискретное внешнее DN-отображение на узловом базисе внешности:
    matrix[g, f] = B(u_f, e_g), где g, f пробегают layout.exterior_nodes.
    """

    form: FormTag
    matrix: np.ndarray
    weights: KernelWeights
    cond: Conductivity
    layout: RegionLayout
    symmetry_defect: float

    @property
    def nodes(self) -> np.ndarray:
        return self.layout.exterior_nodes

    @property
    def spec(self) -> GridSpec:
        return self.layout.spec

    def as_block(self) -> DnBlock:
        return DnBlock(self.layout, self.matrix, self.nodes, self.nodes)
