# app/schemas/config.py
import configparser
import json
import logging
from pathlib import Path
from typing import Dict, List, Literal, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from app.core import locales
from app.core.errors import ConfigError

logger = logging.getLogger(__name__)

ExperimentName = Literal[
    "forward-solve",
    "dn-assemble",
    "verify-identities",
    "reconstruct",
    "stability",
    "counterexample",
    "convergence-study",
]
Recipe = Literal["constant", "smooth-bump", "plateau", "random", "from-file", "counterexample"]
Window = Literal["w1", "w2"]


def _split_floats(v):
    # "a, b, c" -> [a, b, c]
    if isinstance(v, str):
        return [float(item) for item in v.replace(";", ",").split(",") if item.strip()]
    return v


def _split_ints(v):
    if isinstance(v, str):
        return [int(item) for item in v.replace(";", ",").split(",") if item.strip()]
    return v


class Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class ExperimentSection(Section):
    name: Optional[ExperimentName] = None
    seed: int = 0


class GridSection(Section):
    dim: Literal[1, 2]
    half_width: float = Field(default=1.0, gt=0)
    nodes: int = Field(ge=8)

    @field_validator("dim", mode="before")
    @classmethod
    def parse_dim(cls, v):
        # INI отдаёт строки, а Literal[1, 2] строку не приводит
        if isinstance(v, str) and v.strip().lstrip("+-").isdigit():
            return int(v)
        return v


class RegionsSection(Section):
    omega: Tuple[float, ...]
    w1: Tuple[float, ...]
    w2: Optional[Tuple[float, ...]] = None
    omega_small: Optional[Tuple[float, ...]] = None

    @field_validator("omega", "w1", "w2", "omega_small", mode="before")
    @classmethod
    def parse_box(cls, v):
        return _split_floats(v)


class KernelSection(Section):
    s: float = Field(gt=0.0, lt=1.0)


class ConductivitySection(Section):
    """Рецепт проводимости; неиспользуемые рецептом поля игнорируются."""

    recipe: Recipe = "constant"
    value: float = Field(default=1.0, gt=0.0)
    center: Tuple[float, ...] = (0.0,)
    radius: float = Field(default=0.5, gt=0.0)
    amplitude: float = 0.5
    box: Optional[Tuple[float, ...]] = None
    transition: float = Field(default=0.1, gt=0.0)
    low: float = Field(default=0.5, gt=0.0)
    high: float = Field(default=2.0, gt=0.0)
    smoothing_radius: Optional[float] = None
    path: Optional[str] = None

    @field_validator("center", "box", mode="before")
    @classmethod
    def parse_floats(cls, v):
        return _split_floats(v)

    @model_validator(mode="after")
    def check_recipe_fields(self):
        if self.recipe == "plateau" and self.box is None:
            raise ValueError("recipe 'plateau' needs 'box'")
        if self.recipe == "random" and self.low > self.high:
            raise ValueError("'low' must not exceed 'high'")
        if self.recipe == "from-file":
            if not self.path:
                raise ValueError("recipe 'from-file' needs 'path'")
            if not Path(self.path).is_file():
                raise ValueError(f"file not found: {self.path}")
        return self


class SequenceSection(Section):
    x0: Tuple[float, ...]
    r0: float = Field(gt=0.0)
    n_max: int = Field(default=3, ge=0)
    window: Window = "w1"
    target: Optional[float] = None

    @field_validator("x0", mode="before")
    @classmethod
    def parse_point(cls, v):
        return _split_floats(v)


class StabilitySection(Section):
    factors: List[float] = [1.02, 1.05, 1.1]
    window: Window = "w1"
    transition: float = Field(default=0.1, gt=0.0)
    nodes: List[int] = []

    @field_validator("factors", mode="before")
    @classmethod
    def parse_factors(cls, v):
        return _split_floats(v)

    @field_validator("nodes", mode="before")
    @classmethod
    def parse_nodes(cls, v):
        return _split_ints(v)


class CounterexampleSection(Section):
    cutoff_radius_cells: float = Field(default=2.0, gt=0.0)
    dilation: Optional[int] = Field(default=None, ge=0)
    mode: Literal["direct", "collar"] = "direct"
    collar_cells: int = Field(default=2, ge=1)
    strict_range: bool = True
    dn_match_threshold: float = Field(default=1e-8, gt=0.0)
    same_window_floor: float = Field(default=1e-4, ge=0.0)
    basis_count: int = Field(default=5, ge=1)
    perturb_amplitude: float = 0.2
    perturbed_floor: float = Field(default=1e-3, ge=0.0)
    s_values: List[float] = []

    @field_validator("s_values", mode="before")
    @classmethod
    def parse_s_values(cls, v):
        return _split_floats(v)


class TolerancesSection(Section):
    solver: float = Field(default=1e-12, gt=0.0)
    identity: float = 1e-12
    correspondence: float = 1e-10
    symmetry: float = 1e-10
    alessandrini: float = 1e-10
    reconstruction: float = 0.10
    stability_slack: float = 0.05
    getoor: float = 0.05
    samples: int = Field(default=50, ge=1)
    correspondence_samples: int = Field(default=10, ge=1)


class ConvergenceSection(Section):
    nodes: List[int] = [64, 128, 256, 512]
    interval: float = Field(default=0.9, gt=0.0, lt=1.0)
    s: float = Field(default=0.5, gt=0.0, lt=1.0)

    @field_validator("nodes", mode="before")
    @classmethod
    def parse_nodes(cls, v):
        return _split_ints(v)


class OutputSection(Section):
    directory: Optional[str] = None
    dump_grid_functions: bool = True


class ExperimentConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    experiment: ExperimentSection = ExperimentSection()
    grid: GridSection
    regions: Optional[RegionsSection] = None
    kernel: KernelSection
    conductivity: ConductivitySection = ConductivitySection()
    conductivity2: Optional[ConductivitySection] = None
    sequence: Optional[SequenceSection] = None
    stability: StabilitySection = StabilitySection()
    counterexample: CounterexampleSection = CounterexampleSection()
    tolerances: TolerancesSection = TolerancesSection()
    convergence: ConvergenceSection = ConvergenceSection()
    output: OutputSection = OutputSection()

    @model_validator(mode="after")
    def check_experiment_sections(self):
        name = self.experiment.name
        if name not in (None, "convergence-study") and self.regions is None:
            raise ValueError(f"experiment '{name}' needs a [regions] section")
        if name == "reconstruct" and self.sequence is None:
            raise ValueError("experiment 'reconstruct' needs a [sequence] section")
        return self

    def with_experiment(self, name: str) -> "ExperimentConfig":
        return self.model_copy(update={"experiment": self.experiment.model_copy(update={"name": name})})


# --- Загрузка ---
def _line_index(text: str) -> Dict[Tuple[str, Optional[str]], int]:
    """Номера строк заголовков секций и ключей: (section, key|None) -> line."""
    index: Dict[Tuple[str, Optional[str]], int] = {}
    section = None
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line[0] in "#;":
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            index[(section, None)] = number
        elif section is not None:
            for separator in ("=", ":"):
                if separator in line:
                    key = line.split(separator, 1)[0].strip().lower()
                    index.setdefault((section, key), number)
                    break
    return index


def _diagnostics(error: ValidationError, lines: Dict[Tuple[str, Optional[str]], int]) -> List[str]:
    messages = []
    for item in error.errors():
        loc = [str(part) for part in item["loc"]]
        section = loc[0] if loc else ""
        key = loc[1] if len(loc) > 1 else None
        number = lines.get((section, key)) or lines.get((section, None))
        where = ".".join(loc) or "<root>"
        position = f" (line {number})" if number else ""
        messages.append(f"{where}{position}: {item['msg']}")
    return messages


def parse_config(text: str, source: str = "<string>") -> ExperimentConfig:
    """Разбирает INI-текст в ExperimentConfig; ошибки - ConfigError с построчной диагностикой."""
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(locales.ERROR_CONFIG_SYNTAX, reason=str(exc))

    raw = {name: dict(parser.items(name)) for name in parser.sections()}
    lines = _line_index(text)
    try:
        return ExperimentConfig.model_validate(raw)
    except ValidationError as exc:
        diagnostics = _diagnostics(exc, lines)
        raise ConfigError(locales.ERROR_CONFIG_INVALID, diagnostics=diagnostics, details="\n".join(diagnostics))


def load_config(path: Union[str, Path]) -> ExperimentConfig:
    """
    Читает файл эксперимента. Файл .json трактуется как сохранённый report.json:
    из него берётся встроенная конфигурация (повтор эксперимента).
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigError(locales.ERROR_CONFIG_FILE_NOT_FOUND, path=path)
    text = path.read_text(encoding="utf-8")
    if path.suffix.lower() == ".json":
        try:
            return ExperimentConfig.model_validate(json.loads(text)["config"])
        except (KeyError, ValueError) as exc:
            raise ConfigError(locales.ERROR_CONFIG_SYNTAX, reason=str(exc))
    config = parse_config(text, source=str(path))
    logger.debug(f"Loaded experiment config from {path}")
    return config
