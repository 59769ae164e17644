# app/cli.py
import logging
import sys
from typing import Optional

import click

from app.core import locales
from app.core.config import settings
from app.core.errors import ConfigError, LabError
from app.core.logging_config import setup_logging
from app.schemas.config import load_config
from app.services import experiments

logger = logging.getLogger(__name__)

# Подкоманда CLI -> имя эксперимента
COMMANDS = {
    "solve": "forward-solve",
    "dn": "dn-assemble",
    "verify": "verify-identities",
    "reconstruct": "reconstruct",
    "stability": "stability",
    "counterexample": "counterexample",
    "converge": "convergence-study",
}


@click.group()
@click.option("--log-level", default=None, help="Уровень логирования (по умолчанию LOG_LEVEL).")
@click.option("--log-file", default=None, help="Файл лога; пустая строка отключает запись в файл.")
def lab(log_level: Optional[str], log_file: Optional[str]) -> None:
    """Численная лаборатория для дробного уравнения проводимости."""
    setup_logging(level=log_level, log_file=log_file)


def run_experiment(
    experiment: str,
    config_path: str,
    out: Optional[str],
    threads: Optional[int],
    deterministic: bool,
) -> int:
    """Загружает конфигурацию, запускает эксперимент и возвращает код выхода."""
    try:
        config = load_config(config_path)
    except ConfigError as exc:
        click.echo(exc.detail, err=True)
        return 2

    if config.experiment.name not in (None, experiment):
        logger.warning(f"Config names experiment '{config.experiment.name}', running '{experiment}' instead")
    config = config.with_experiment(experiment)
    if deterministic:
        settings.DETERMINISTIC = True

    try:
        report = experiments.run(config, out=out, threads=threads)
    except LabError as exc:
        click.echo(exc.detail, err=True)
        return 2

    if report.passed:
        click.echo(locales.SUCCESS_ALL_CRITERIA_PASSED)
        return 0
    click.echo(locales.FAILURE_CRITERIA.format(names=", ".join(report.failed_criteria)), err=True)
    return 1


def _make_command(command: str, experiment: str) -> click.Command:
    @click.option("--config", "config_path", required=True, type=click.Path(dir_okay=False), help="Файл эксперимента (INI или report.json).")
    @click.option("--out", default=None, type=click.Path(file_okay=False), help="Каталог для отчёта и трасс.")
    @click.option("--threads", default=None, type=click.IntRange(min=1), help="Число потоков сборки DN.")
    @click.option("--deterministic", is_flag=True, help="Фиксированный порядок суммирования.")
    def command_fn(config_path: str, out: Optional[str], threads: Optional[int], deterministic: bool) -> None:
        sys.exit(run_experiment(experiment, config_path, out, threads, deterministic))

    command_fn.__doc__ = f"Эксперимент '{experiment}'."
    return click.command(name=command)(command_fn)


for _command, _experiment in COMMANDS.items():
    lab.add_command(_make_command(_command, _experiment))


def main() -> None:
    lab()
