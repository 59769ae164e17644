# app/models/conductivity.py
from dataclasses import dataclass

import numpy as np

from app.models.grid import GridFunction, GridSpec


@dataclass(frozen=True, eq=False)
class Conductivity:
    """
    Узловая проводимость γ и производные поля.
    m = γ^{1/2} - 1 - отклонение от фона, gamma0 - гарантированная нижняя граница.
    Проверки инвариантов живут в app.services.forms.make_conductivity.
    """

    gamma: GridFunction
    sqrt_gamma: GridFunction
    inv_sqrt_gamma: GridFunction
    m: GridFunction
    gamma0: float

    @property
    def spec(self) -> GridSpec:
        return self.gamma.spec

    @classmethod
    def from_gamma(cls, gamma: GridFunction) -> "Conductivity":
        sqrt_values = np.sqrt(gamma.values)
        return cls(
            gamma=gamma,
            sqrt_gamma=GridFunction(gamma.spec, sqrt_values),
            inv_sqrt_gamma=GridFunction(gamma.spec, 1.0 / sqrt_values),
            m=GridFunction(gamma.spec, sqrt_values - 1.0),
            gamma0=float(gamma.values.min()),
        )
