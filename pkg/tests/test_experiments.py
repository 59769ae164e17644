import json
import math
from pathlib import Path

import numpy as np
import pytest

from app.core.errors import ConfigError, GeometryError
from app.schemas.config import load_config
from app.services import experiments

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


@pytest.fixture
def unit_config():
    return load_config(CONFIGS / "verify_unit_1d.ini")


def test_verify_identities_on_unit_conductivity(unit_config, tmp_path):
    report = experiments.run(unit_config, out=str(tmp_path))
    assert report.passed, report.failed_criteria
    names = {c.name for c in report.criteria}
    assert {"liouville_identity", "solution_correspondence", "alessandrini_identity", "disjoint_support"} <= names

    saved = json.loads((tmp_path / "report.json").read_text(encoding="utf-8"))
    assert saved["experiment"] == "verify-identities"
    assert saved["passed"] is True
    assert saved["parameters_hash"] == experiments.parameters_hash(unit_config)
    assert saved["config"]["kernel"]["s"] == 0.5


def test_replay_gives_equal_metrics(unit_config, tmp_path):
    first = experiments.run(unit_config, out=str(tmp_path / "first"))
    replay = load_config(tmp_path / "first" / "report.json")
    second = experiments.run(replay, out=str(tmp_path / "second"))
    assert second.parameters_hash == first.parameters_hash
    assert second.metrics == first.metrics


def test_forward_solve_writes_grid_functions(tmp_path):
    config = load_config(CONFIGS / "forward_1d.ini")
    report = experiments.run(config, out=str(tmp_path))
    assert report.passed, report.failed_criteria
    assert (tmp_path / "solution.csv").exists()
    assert (tmp_path / "solution.bin").exists()
    assert report.metrics["poincare_constant"] > 0.0


def test_dn_assemble_exports_matrix(tmp_path):
    config = load_config(CONFIGS / "dn_1d.ini")
    report = experiments.run(config, out=str(tmp_path))
    assert report.passed, report.failed_criteria
    assert str(tmp_path / "dn.csv") in report.artifacts


def test_failing_step_becomes_named_failure(monkeypatch, unit_config, tmp_path):
    def broken(ctx):
        with ctx.step("inner"):
            raise GeometryError("ball escapes")
        ctx.check("after_failure", 0.0, 1.0)

    monkeypatch.setitem(experiments.EXPERIMENTS, "verify-identities", broken)
    report = experiments.run(unit_config, out=str(tmp_path))
    assert not report.passed
    failure = report.criteria[0]
    assert failure.name == "inner"
    assert failure.error_code == "geometry_error"
    assert failure.detail == "ball escapes"
    assert report.failed_criteria == ["inner"]


def test_unexpected_exception_is_recorded(monkeypatch, unit_config, tmp_path):
    def crash(ctx):
        raise ZeroDivisionError("boom")

    monkeypatch.setitem(experiments.EXPERIMENTS, "verify-identities", crash)
    report = experiments.run(unit_config, out=str(tmp_path))
    assert report.criteria[0].name == "verify-identities"
    assert report.criteria[0].error_code == "unexpected_error"


def test_unknown_experiment(unit_config):
    with pytest.raises(ConfigError):
        experiments.run(unit_config.with_experiment(None))


def test_check_rejects_non_finite(unit_config, tmp_path):
    ctx = experiments.RunContext(config=unit_config, out_dir=tmp_path, threads=1, rng=np.random.default_rng(0))
    assert not ctx.check("nan", math.nan, 1.0)
    assert ctx.check("floor", 2.0, 1.0, at_least=True)
    assert [c.passed for c in ctx.criteria] == [False, True]


def test_output_dir_precedence(unit_config, lab_settings, monkeypatch):
    monkeypatch.setattr(lab_settings, "OUTPUT_DIR", "results")
    assert experiments.output_dir(unit_config) == Path("results") / "verify-identities"
    assert experiments.output_dir(unit_config, "elsewhere") == Path("elsewhere")


@pytest.mark.slow
@pytest.mark.parametrize(
    "name",
    ["identities_1d", "identities_2d", "counterexample_1d", "reconstruct_1d", "stability_1d", "getoor_1d"],
)
def test_acceptance_configs_pass(name, tmp_path):
    report = experiments.run(load_config(CONFIGS / f"{name}.ini"), out=str(tmp_path))
    assert report.passed, report.failed_criteria
