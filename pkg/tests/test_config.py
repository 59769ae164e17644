import json
from pathlib import Path

import pytest

from app.core.errors import ConfigError
from app.schemas.config import load_config, parse_config

CONFIGS = Path(__file__).resolve().parent.parent / "configs"

VALID = """
# прямая задача
[experiment]
name = forward-solve
seed = 7

[grid]
dim = 2
nodes = 16

[regions]
omega = -0.5, 0.5, -0.5, 0.5
w1 = 0.6, 0.9, -0.5, 0.5   ; окно справа

[kernel]
s = 0.6

[conductivity]
recipe = plateau
box = -0.3, 0.3, -0.3, 0.3
value = 2.5
"""


def test_parse_valid_config():
    config = parse_config(VALID)
    assert config.experiment.name == "forward-solve"
    assert config.experiment.seed == 7
    assert config.grid.half_width == 1.0
    assert config.regions.w1 == (0.6, 0.9, -0.5, 0.5)
    assert config.regions.w2 is None
    assert config.conductivity.box == (-0.3, 0.3, -0.3, 0.3)
    assert config.tolerances.solver == 1e-12
    assert config.stability.factors == [1.02, 1.05, 1.1]
    assert config.grid.dim == 2


@pytest.mark.parametrize("dim", ["1", " 2"])
def test_grid_dim_is_read_from_ini_text(dim):
    config = parse_config(f"[grid]\ndim = {dim}\nnodes = 32\n\n[kernel]\ns = 0.4\n")
    assert config.grid.dim == int(dim)


@pytest.mark.parametrize("dim", ["3", "one"])
def test_grid_dim_out_of_range(dim):
    with pytest.raises(ConfigError) as info:
        parse_config(f"[grid]\ndim = {dim}\nnodes = 32\n\n[kernel]\ns = 0.4\n")
    assert info.value.diagnostics[0].startswith("grid.dim (line 2)")


def test_missing_field_reports_location():
    text = VALID.replace("s = 0.6", "")
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    diagnostics = info.value.diagnostics
    assert len(diagnostics) == 1
    assert diagnostics[0].startswith("kernel.s (line 15)")
    assert "kernel.s" in info.value.detail


def test_unknown_key_and_bad_value():
    text = VALID.replace("nodes = 16", "nodes = 4\nspacing = 0.1")
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    joined = "\n".join(info.value.diagnostics)
    assert "grid.nodes (line 9)" in joined
    assert "grid.spacing (line 10)" in joined


def test_recipe_requirements(tmp_path):
    with pytest.raises(ConfigError):
        parse_config(VALID.replace("box = -0.3, 0.3, -0.3, 0.3", ""))
    missing = tmp_path / "gamma.csv"
    text = VALID.replace("recipe = plateau", f"recipe = from-file\npath = {missing}")
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    assert "file not found" in info.value.detail


def test_experiment_needs_sections():
    text = VALID.replace("name = forward-solve", "name = reconstruct")
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    assert "[sequence]" in info.value.detail
    convergence = parse_config("[experiment]\nname = convergence-study\n[grid]\ndim = 1\nnodes = 64\n[kernel]\ns = 0.5\n")
    assert convergence.regions is None
    assert convergence.convergence.nodes == [64, 128, 256, 512]


def test_syntax_error():
    with pytest.raises(ConfigError):
        parse_config("grid without a section header")


def test_load_config_from_file_and_report(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.ini")

    config = load_config(CONFIGS / "reconstruct_1d.ini")
    assert config.sequence.x0 == (0.4,)
    report = tmp_path / "report.json"
    report.write_text(json.dumps({"config": config.model_dump(mode="json")}), encoding="utf-8")
    assert load_config(report) == config

    report.write_text(json.dumps({"metrics": {}}), encoding="utf-8")
    with pytest.raises(ConfigError):
        load_config(report)


@pytest.mark.parametrize("path", sorted(CONFIGS.glob("*.ini")), ids=lambda p: p.stem)
def test_shipped_configs_are_valid(path):
    config = load_config(path)
    assert config.experiment.name is not None
