# app/schemas/reports.py
from typing import Any, Dict, List, Literal, Optional, Tuple

from pydantic import BaseModel, Field, computed_field


class QFormDiagnostics(BaseModel):
    q_form_self: float  # q_form(v, v) на решении задачи Шрёдингера
    cauchy_schwarz_bound: float  # B1(m,m)^{1/2} * B1(ψ,ψ)^{1/2}
    potential_max_abs: float  # max |q_γ| по узлам


class ReductionReport(BaseModel):
    identity_residual: float
    correspondence_residual: float
    converse_residual: float  # ‖u_g - γ^{-1/2} v‖_∞
    batch_size: int
    q_form_diagnostics: QFormDiagnostics

    def passes(self, tol: float) -> bool:
        return self.identity_residual <= 10 * tol and self.correspondence_residual <= 10 * tol


class ReconstructionRow(BaseModel):
    level: int
    radius: float
    value: float  # g_N = <Λ φ_N, φ_N>
    energy: float  # E_γ(φ_N)
    l2_norm: float
    target: float  # γ(x0)


class StabilityReport(BaseModel):
    lhs: float
    rhs: float
    holds: bool
    slack: float = 0.05


class CounterexampleParams(BaseModel):
    omega_small_box: Optional[Tuple[float, ...]] = None
    cutoff_radius: float
    cutoff_dilation: int
    scale: float
    mode: Literal["direct", "collar"] = "direct"
    collar_cells: int = 0


class NonuniquenessReport(BaseModel):
    r_dn: float
    r_sol: float
    d_gamma: float
    r_same_window: float
    harmonicity_residual: float
    threshold: float
    min_difference: float = 0.05
    passed: bool


class CriterionResult(BaseModel):
    name: str
    passed: bool
    value: Optional[float] = None
    threshold: Optional[float] = None
    error_code: Optional[str] = None
    detail: Optional[str] = None


class ExperimentReport(BaseModel):
    experiment: str
    parameters_hash: str
    seed: int
    config: Dict[str, Any]
    criteria: List[CriterionResult] = Field(default_factory=list)
    metrics: Dict[str, Any] = Field(default_factory=dict)
    artifacts: List[str] = Field(default_factory=list)
    wall_time: float = 0.0

    @computed_field
    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.criteria)

    @property
    def failed_criteria(self) -> List[str]:
        return [c.name for c in self.criteria if not c.passed]


class StabilityRow(BaseModel):
    nodes: int
    factor: float
    lhs: float
    rhs: float
    holds: bool


class ConvergenceRow(BaseModel):
    nodes: int
    spacing: float
    max_relative_error: float


class CounterexampleRow(BaseModel):
    s: float
    r_dn: float
    r_sol: float
    d_gamma: float
    r_same_window: float
    r_dn_perturbed: float
    harmonicity_residual: float
