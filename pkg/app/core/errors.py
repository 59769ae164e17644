# app/core/errors.py
from typing import Any, List, Optional


class LabError(Exception):
    """
    Базовая ошибка лаборатории.
    detail - человекочитаемый текст из app.core.locales, code - короткий машинный код.
    """

    code = "lab_error"

    def __init__(self, template: str, **kwargs: Any):
        self.detail = template.format(**kwargs) if kwargs else template
        self.params = kwargs
        super().__init__(self.detail)


class GridError(LabError):
    code = "grid_error"


class GridMismatchError(GridError):
    code = "grid_mismatch"


class RegionError(LabError):
    code = "region_error"


class KernelError(LabError):
    code = "kernel_error"


class ConductivityError(LabError):
    code = "conductivity_error"


class SolverError(LabError):
    code = "solver_error"


class IndefiniteFormError(SolverError):
    code = "indefinite_form"


class ConvergenceError(SolverError):
    code = "not_converged"


class GeometryError(LabError):
    code = "geometry_error"


class PreconditionError(LabError):
    code = "precondition_failed"


class StorageError(LabError):
    code = "storage_error"


class ConfigError(LabError):
    code = "config_error"

    def __init__(self, template: str, diagnostics: Optional[List[str]] = None, **kwargs: Any):
        self.diagnostics = diagnostics or []
        super().__init__(template, **kwargs)
