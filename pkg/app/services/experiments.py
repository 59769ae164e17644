# app/services/experiments.py
import hashlib
import logging
import math
import time
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional

import numpy as np

from app.core import locales
from app.core.config import settings
from app.core.errors import ConfigError, LabError
from app.models.conductivity import Conductivity
from app.models.grid import GridFunction, GridSpec, RegionLayout
from app.models.kernel import KernelWeights
from app.models.operators import DirichletProblem
from app.schemas.config import ConductivitySection, ExperimentConfig
from app.schemas.reports import ConvergenceRow, CounterexampleRow, CriterionResult, ExperimentReport, StabilityRow
from app.services import conductivities, counterex, extdet, grid, kernel, liouville
from app.services.dnmap import alessandrini_gap, assemble_dn, pairing
from app.services.forms import b_gamma, disjoint_support_residual, liouville_residual
from app.services.solve import dirichlet_solve, elliptic_estimate_check, estimate_ratio, poincare_constant
from app.storage import exports, grid_functions

logger = logging.getLogger(__name__)


@dataclass
class RunContext:
    """Состояние одного запуска: конфигурация, выходной каталог, критерии и метрики."""

    config: ExperimentConfig
    out_dir: Path
    threads: int
    rng: np.random.Generator
    criteria: List[CriterionResult] = field(default_factory=list)
    metrics: Dict[str, Any] = field(default_factory=dict)
    artifacts: List[str] = field(default_factory=list)

    @property
    def tol(self) -> float:
        return self.config.tolerances.solver

    def check(self, name: str, value: float, threshold: float, at_least: bool = False) -> bool:
        """Записывает критерий value <= threshold (или >= при at_least)."""
        passed = bool(math.isfinite(value) and (value >= threshold if at_least else value <= threshold))
        self.criteria.append(CriterionResult(name=name, passed=passed, value=float(value), threshold=threshold))
        level = logging.INFO if passed else logging.WARNING
        logger.log(level, f"Criterion {name}: value={value:.3e}, threshold={threshold:.1e}, passed={passed}")
        return passed

    def flag(self, name: str, passed: bool, detail: Optional[str] = None) -> None:
        self.criteria.append(CriterionResult(name=name, passed=bool(passed), detail=detail))

    def artifact(self, path: Path) -> None:
        self.artifacts.append(str(path))

    @contextmanager
    def step(self, name: str):
        """Ошибка внутри шага становится проваленным критерием с кодом ошибки."""
        try:
            yield
        except LabError as exc:
            logger.error(f"Step '{name}' failed: {exc.detail}", exc_info=True)
            self.criteria.append(CriterionResult(name=name, passed=False, error_code=exc.code, detail=exc.detail))
        except Exception as exc:
            logger.error(f"Step '{name}' crashed: {exc}", exc_info=True)
            self.criteria.append(
                CriterionResult(name=name, passed=False, error_code="unexpected_error", detail=f"{type(exc).__name__}: {exc}")
            )


# --- Общая подготовка ---


def _spec(config: ExperimentConfig, nodes: Optional[int] = None) -> GridSpec:
    g = config.grid
    return grid.build_grid(g.dim, g.half_width, nodes or g.nodes)


def _layout(config: ExperimentConfig, spec: GridSpec) -> RegionLayout:
    r = config.regions
    return grid.define_regions(spec, r.omega, r.w1, r.w2, r.omega_small)


def _weights(spec: GridSpec, s: float) -> KernelWeights:
    return kernel.build_weights(spec, kernel.make_params(spec, s))


def _conductivity(
    ctx: RunContext,
    section: ConductivitySection,
    spec: GridSpec,
    layout: RegionLayout,
    weights: KernelWeights,
) -> Conductivity:
    if section.recipe == "counterexample":
        cx = ctx.config.counterexample
        pair = counterex.build_counterexample(
            weights,
            layout,
            tol=ctx.tol,
            cutoff_radius=cx.cutoff_radius_cells * spec.spacing,
            cutoff_dilation=cx.dilation,
            mode=cx.mode,
            collar_cells=cx.collar_cells,
            strict_range=cx.strict_range,
        )
        return pair.cond1
    return conductivities.from_recipe(spec, layout, section, ctx.rng)


def window_data(layout: RegionLayout, window: str = "w1") -> GridFunction:
    """Гладкий бамп в центре окна, обрезанный маской окна."""
    spec = layout.spec
    mask = layout.require(window)
    box = layout.boxes.get(window)
    if box is None:
        return GridFunction.indicator(spec, mask)
    center = [(box[2 * a] + box[2 * a + 1]) / 2.0 for a in range(spec.dim)]
    radius = 0.45 * min(box[2 * a + 1] - box[2 * a] for a in range(spec.dim))
    return GridFunction(spec, conductivities.bump_profile(spec, center, radius) * mask)


def _random_exterior(ctx: RunContext, layout: RegionLayout) -> GridFunction:
    values = ctx.rng.standard_normal(layout.spec.n_nodes)
    return GridFunction(layout.spec, np.where(layout.exterior, values, 0.0))


def _dump(ctx: RunContext, u: GridFunction, stem: str) -> None:
    if not ctx.config.output.dump_grid_functions:
        return
    ctx.artifact(grid_functions.write_csv(u, ctx.out_dir / f"{stem}.csv"))
    ctx.artifact(grid_functions.write_binary(u, ctx.out_dir / f"{stem}.bin"))


# --- Эксперименты ---


def forward_solve(ctx: RunContext) -> None:
    config = ctx.config
    spec = _spec(config)
    layout = _layout(config, spec)
    weights = _weights(spec, config.kernel.s)
    cond = _conductivity(ctx, config.conductivity, spec, layout, weights)
    _dump(ctx, cond.gamma, "gamma")

    g = window_data(layout, "w1")
    problem = DirichletProblem(form="conductivity", weights=weights, cond=cond, layout=layout, exterior_data=g)
    with ctx.step("dirichlet_solve"):
        solution = dirichlet_solve(problem, tol=ctx.tol)
        ctx.metrics["solver"] = solution.diagnostics.model_dump()
        ctx.check("solver_residual", solution.diagnostics.relative_residual, 10.0 * ctx.tol)
        _dump(ctx, solution.u, "solution")

        with ctx.step("elliptic_estimate"):
            lhs, rhs_scale = elliptic_estimate_check(problem, solution)
            ratio = estimate_ratio(lhs, rhs_scale)
            ctx.metrics["elliptic_estimate"] = {"lhs": lhs, "rhs_scale": rhs_scale, "ratio": ratio}
            ctx.flag("elliptic_estimate_finite", math.isfinite(ratio))

    with ctx.step("poincare_constant"):
        ctx.metrics["poincare_constant"] = poincare_constant(weights, layout)


def dn_assemble(ctx: RunContext) -> None:
    config = ctx.config
    spec = _spec(config)
    layout = _layout(config, spec)
    weights = _weights(spec, config.kernel.s)
    cond = _conductivity(ctx, config.conductivity, spec, layout, weights)

    with ctx.step("dn_assembly"):
        dn = assemble_dn(weights, cond, layout, tol=ctx.tol, threads=ctx.threads)
        ctx.metrics["exterior_nodes"] = int(dn.nodes.size)
        ctx.metrics["dn_max_abs"] = float(np.max(np.abs(dn.matrix)))
        ctx.check("dn_symmetry", dn.symmetry_defect, config.tolerances.symmetry)
        ctx.artifact(exports.write_dn_csv(dn, ctx.out_dir / "dn.csv"))


def verify_identities(ctx: RunContext) -> None:
    config = ctx.config
    tolerances = config.tolerances
    spec = _spec(config)
    layout = _layout(config, spec)
    weights = _weights(spec, config.kernel.s)
    cond1 = _conductivity(ctx, config.conductivity, spec, layout, weights)
    g = window_data(layout, "w1")

    # 1. Тождество Лиувилля: заданная γ и случайные
    with ctx.step("liouville_identity"):
        worst = 0.0
        for index in range(tolerances.samples):
            cond = cond1 if index == 0 else conductivities.random_field(spec, ctx.rng)
            u = GridFunction(spec, ctx.rng.standard_normal(spec.n_nodes))
            phi = GridFunction(spec, ctx.rng.standard_normal(spec.n_nodes))
            worst = max(worst, liouville_residual(weights, cond, u, phi))
        ctx.check("liouville_identity", worst, tolerances.identity)

    # 2. Соответствие решений проводимости и Шрёдингера
    with ctx.step("solution_correspondence"):
        worst_forward, worst_converse = 0.0, 0.0
        for index in range(tolerances.correspondence_samples):
            cond = cond1 if index == 0 else conductivities.random_field(spec, ctx.rng)
            report = liouville.reduce(weights, cond, layout, g, tol=ctx.tol, batch_size=1, seed=index)
            worst_forward = max(worst_forward, report.correspondence_residual)
            worst_converse = max(worst_converse, report.converse_residual)
            if index == 0:
                ctx.metrics["q_form_diagnostics"] = report.q_form_diagnostics.model_dump()
        ctx.metrics["converse_residual"] = worst_converse
        ctx.check("solution_correspondence", worst_forward, tolerances.correspondence)

    # 3. Симметрия DN и тождество Алессандрини
    with ctx.step("dn_identities"):
        if config.conductivity2 is not None:
            cond2 = _conductivity(ctx, config.conductivity2, spec, layout, weights)
        else:
            cond2 = conductivities.modified_in_omega(cond1, layout, amplitude=0.3)
        dn1 = assemble_dn(weights, cond1, layout, tol=ctx.tol, threads=ctx.threads)
        dn2 = assemble_dn(weights, cond2, layout, tol=ctx.tol, threads=ctx.threads)
        ctx.check("dn_symmetry", max(dn1.symmetry_defect, dn2.symmetry_defect), tolerances.symmetry)

        worst = 0.0
        for _ in range(3):
            f, h = _random_exterior(ctx, layout), _random_exterior(ctx, layout)
            scale = 1.0 + abs(pairing(dn1, f, h)) + abs(pairing(dn2, f, h))
            worst = max(worst, alessandrini_gap(dn1, dn2, f, h, tol=ctx.tol) / scale)
        ctx.check("alessandrini_identity", worst, tolerances.alessandrini)

        # DN-соотношение проводимость -> Шрёдингер
        dn_q = liouville.assemble_schrodinger_dn(weights, cond1, layout, tol=ctx.tol, threads=ctx.threads)
        ctx.check("dn_relation", liouville.dn_relation_residual(dn1, dn_q, window="w1"), tolerances.alessandrini)

    # 4. Разложение Алессандрини при γ1 = γ2 на носителе f
    with ctx.step("alessandrini_decomposition"):
        cond2 = conductivities.modified_in_omega(cond1, layout, amplitude=0.3)
        residual = liouville.alessandrini_decomposition_residual(weights, cond1, cond2, layout, g, tol=ctx.tol)
        scale = 1.0 + abs(b_gamma(weights, cond1, g, g))
        ctx.check("alessandrini_decomposition", residual / scale, tolerances.alessandrini)

    # 5. Поляризация и непересекающиеся носители
    with ctx.step("polarization"):
        phi = GridFunction.indicator(spec, layout.require("w1"))
        ctx.check("polarization", liouville.polarization_residual(g, phi), tolerances.identity)
    if layout.w2.any():
        with ctx.step("disjoint_support"):
            other = window_data(layout, "w2")
            ctx.check("disjoint_support", disjoint_support_residual(weights, cond1, g, other), tolerances.identity)


def reconstruct(ctx: RunContext) -> None:
    config = ctx.config
    seq_config = config.sequence
    spec = _spec(config)
    layout = _layout(config, spec)
    weights = _weights(spec, config.kernel.s)
    cond = _conductivity(ctx, config.conductivity, spec, layout, weights)

    resolvable = extdet.max_resolvable_level(seq_config.r0, spec.spacing)
    n_max = min(seq_config.n_max, resolvable)
    if n_max < seq_config.n_max:
        logger.warning(f"Level {seq_config.n_max} is not resolved on N={spec.nodes_per_axis}; using {n_max}")
    ctx.metrics["max_resolvable_level"] = resolvable

    with ctx.step("reconstruction"):
        seq = extdet.build_sequence(spec, layout, weights, seq_config.x0, seq_config.r0, n_max, window=seq_config.window)
        dn = assemble_dn(weights, cond, layout, tol=ctx.tol, threads=ctx.threads)
        rows = extdet.reconstruction_rows(dn, seq)
        target = seq_config.target if seq_config.target is not None else rows[-1].target
        errors = [abs(row.value - target) for row in rows]
        ctx.metrics["trace"] = [row.value for row in rows]
        ctx.metrics["target"] = target
        ctx.metrics["energy_gap"] = max(extdet.energy_gap_trace(dn, seq))
        ctx.artifact(exports.write_rows_csv(rows, ctx.out_dir / "reconstruction.csv"))

        ctx.check("reconstruction_error", errors[-1] / abs(target), config.tolerances.reconstruction)
        ctx.flag("reconstruction_monotone", extdet.is_non_increasing(errors, last=3))

        with ctx.step("locality"):
            altered = conductivities.modified_in_omega(cond, layout, amplitude=0.5)
            dn_altered = assemble_dn(weights, altered, layout, tol=ctx.tol, threads=ctx.threads)
            ctx.metrics["locality_trace"] = extdet.locality_trace(dn, dn_altered, seq)


def stability(ctx: RunContext) -> None:
    config = ctx.config
    st = config.stability
    grids = sorted(st.nodes) if st.nodes else [config.grid.nodes]
    finest = grids[-1]
    rows: List[StabilityRow] = []

    for nodes in grids:
        with ctx.step(f"stability[N={nodes}]"):
            spec = _spec(config, nodes)
            layout = _layout(config, spec)
            weights = _weights(spec, config.kernel.s)
            cond1 = _conductivity(ctx, config.conductivity, spec, layout, weights)
            dn1 = assemble_dn(weights, cond1, layout, tol=ctx.tol, threads=ctx.threads)
            for factor in st.factors:
                cond2 = conductivities.scaled_on_window(cond1, layout, st.window, factor, st.transition)
                dn2 = assemble_dn(weights, cond2, layout, tol=ctx.tol, threads=ctx.threads)
                report = extdet.stability_compare(
                    dn1, dn2, cond1, cond2, layout, weights, window=st.window, slack=config.tolerances.stability_slack
                )
                rows.append(StabilityRow(nodes=nodes, factor=factor, lhs=report.lhs, rhs=report.rhs, holds=report.holds))
                if nodes == finest:
                    ctx.flag(f"stability[factor={factor}]", report.holds, detail=f"lhs={report.lhs:.4e}, rhs={report.rhs:.4e}")

    ctx.metrics["stability"] = [row.model_dump() for row in rows]
    ctx.artifact(exports.write_rows_csv(rows, ctx.out_dir / "stability.csv"))


def counterexample(ctx: RunContext) -> None:
    config = ctx.config
    cx = config.counterexample
    spec = _spec(config)
    layout = _layout(config, spec)
    rows: List[CounterexampleRow] = []

    for s in cx.s_values or [config.kernel.s]:
        with ctx.step(f"counterexample[s={s}]"):
            weights = _weights(spec, s)
            pair = counterex.build_counterexample(
                weights,
                layout,
                tol=ctx.tol,
                cutoff_radius=cx.cutoff_radius_cells * spec.spacing,
                cutoff_dilation=cx.dilation,
                mode=cx.mode,
                collar_cells=cx.collar_cells,
                strict_range=cx.strict_range,
            )
            dn_maps = counterex.dn_maps_for(pair, weights, layout, tol=ctx.tol, threads=ctx.threads)
            report = counterex.verify_nonuniqueness(
                pair,
                weights,
                layout,
                tol=ctx.tol,
                threshold=cx.dn_match_threshold,
                basis_count=cx.basis_count,
                dn_maps=dn_maps,
            )
            ctx.check(f"r_dn[s={s}]", report.r_dn, cx.dn_match_threshold)
            ctx.check(f"r_sol[s={s}]", report.r_sol, cx.dn_match_threshold)
            ctx.check(f"d_gamma[s={s}]", report.d_gamma, report.min_difference, at_least=True)
            ctx.check(f"r_same_window[s={s}]", report.r_same_window, cx.same_window_floor, at_least=True)

            # Фон, не являющийся s-гармоническим, даёт различимые частичные данные
            perturbed = counterex.perturb_background(pair, weights, layout, amplitude=cx.perturb_amplitude)
            perturbed_maps = (assemble_dn(weights, perturbed.cond1, layout, tol=ctx.tol, threads=ctx.threads), dn_maps[1])
            r_dn_perturbed = counterex.verify_nonuniqueness(
                perturbed, weights, layout, tol=ctx.tol, threshold=cx.dn_match_threshold, basis_count=1, dn_maps=perturbed_maps
            ).r_dn
            ctx.check(f"r_dn_perturbed[s={s}]", r_dn_perturbed, cx.perturbed_floor, at_least=True)

            rows.append(
                CounterexampleRow(
                    s=s,
                    r_dn=report.r_dn,
                    r_sol=report.r_sol,
                    d_gamma=report.d_gamma,
                    r_same_window=report.r_same_window,
                    r_dn_perturbed=r_dn_perturbed,
                    harmonicity_residual=report.harmonicity_residual,
                )
            )
            _dump(ctx, pair.cond1.gamma, f"gamma1_s{s:g}")

    ctx.metrics["counterexample"] = [row.model_dump() for row in rows]
    ctx.artifact(exports.write_rows_csv(rows, ctx.out_dir / "counterexample.csv"))


def convergence_study(ctx: RunContext) -> None:
    config = ctx.config
    cs = config.convergence
    rows: List[ConvergenceRow] = []

    for nodes in sorted(cs.nodes):
        with ctx.step(f"getoor[N={nodes}]"):
            spec = _spec(config, nodes)
            weights = _weights(spec, cs.s)
            applied = kernel.apply_frac_laplacian(weights, kernel.getoor_profile(spec, cs.s))
            exact = kernel.getoor_value(spec.dim, cs.s)
            inside = np.sqrt(np.sum(spec.coords ** 2, axis=1)) < cs.interval
            error = float(np.max(np.abs(applied.values[inside] - exact)) / exact)
            rows.append(ConvergenceRow(nodes=nodes, spacing=spec.spacing, max_relative_error=error))
            logger.info(f"Getoor oracle N={nodes}: max relative error {error:.4e}")

    errors = [row.max_relative_error for row in rows]
    ctx.metrics["getoor_errors"] = errors
    ctx.artifact(exports.write_rows_csv(rows, ctx.out_dir / "convergence.csv"))
    if rows:
        ctx.check("getoor_finest", errors[-1], config.tolerances.getoor)
        ctx.flag("getoor_monotone", extdet.is_non_increasing(errors, last=len(errors)))


EXPERIMENTS: Dict[str, Callable[[RunContext], None]] = {
    "forward-solve": forward_solve,
    "dn-assemble": dn_assemble,
    "verify-identities": verify_identities,
    "reconstruct": reconstruct,
    "stability": stability,
    "counterexample": counterexample,
    "convergence-study": convergence_study,
}


def parameters_hash(config: ExperimentConfig) -> str:
    payload = config.model_dump_json(exclude={"output"})
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def output_dir(config: ExperimentConfig, out: Optional[str] = None) -> Path:
    if out:
        return Path(out)
    if config.output.directory:
        return Path(config.output.directory)
    return Path(settings.OUTPUT_DIR) / config.experiment.name


def run(config: ExperimentConfig, out: Optional[str] = None, threads: Optional[int] = None) -> ExperimentReport:
    """Запускает эксперимент, пишет report.json и возвращает отчёт."""
    name = config.experiment.name
    if name not in EXPERIMENTS:
        raise ConfigError(locales.ERROR_UNKNOWN_EXPERIMENT, name=name)

    started = time.perf_counter()
    out_dir = output_dir(config, out)
    out_dir.mkdir(parents=True, exist_ok=True)
    ctx = RunContext(
        config=config,
        out_dir=out_dir,
        threads=threads or settings.THREADS,
        rng=np.random.default_rng(config.experiment.seed),
    )
    logger.info(f"--- Starting experiment '{name}' (seed={config.experiment.seed}, out={out_dir}) ---")
    with ctx.step(name):
        EXPERIMENTS[name](ctx)

    report = ExperimentReport(
        experiment=name,
        parameters_hash=parameters_hash(config),
        seed=config.experiment.seed,
        config=config.model_dump(mode="json"),
        criteria=ctx.criteria,
        metrics=ctx.metrics,
        artifacts=ctx.artifacts,
        wall_time=time.perf_counter() - started,
    )
    exports.write_report(report, out_dir / "report.json")
    logger.info(f"--- Finished experiment '{name}' in {report.wall_time:.2f}s: passed={report.passed} ---")
    return report
