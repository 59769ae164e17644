# app/schemas/solver.py
from typing import Literal

from pydantic import BaseModel


class SolverDiagnostics(BaseModel):
    form: str
    method: Literal["cholesky", "cg"]
    unknowns: int
    iterations: int
    relative_residual: float
    wall_time: float  # секунды
