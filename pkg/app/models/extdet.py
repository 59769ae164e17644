# app/models/extdet.py
from dataclasses import dataclass
from typing import List, Tuple

from app.models.grid import GridFunction


@dataclass(frozen=True, eq=False)
class ConcentratingSequence:
    """Нормированные бампы φ_N с носителями в шарах радиуса r_N = r0 * 2^{-N} вокруг x0."""

    center: Tuple[float, ...]
    center_node: int
    window: str
    radii: Tuple[float, ...]
    bumps: Tuple[GridFunction, ...]

    @property
    def levels(self) -> List[int]:
        return list(range(len(self.bumps)))
