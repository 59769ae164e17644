# app/models/counterexample.py
from dataclasses import dataclass

from app.models.conductivity import Conductivity
from app.models.grid import GridFunction
from app.schemas.reports import CounterexampleParams


@dataclass(frozen=True, eq=False)
class CounterexamplePair:
    """Пара проводимостей γ1 = (1 + m1)^2, γ2 ≡ 1 с совпадающими частичными данными W1 -> W2."""

    cond1: Conductivity
    cond2: Conductivity
    m1: GridFunction
    cutoff: GridFunction
    params: CounterexampleParams
    harmonicity_residual: float
