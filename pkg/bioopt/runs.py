"""One optimisation run per (config, seed): build the problem, run the engine, write the artifacts."""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING

import numpy as np
from loguru import logger

from bioopt.encoding import GenomeLayout, to_hex, uniform_layout, vessel_layout
from bioopt.fem import (
    PRINTED_ESTIMATE_Y,
    PRINTED_MEASURED_U,
    beam_model,
    fem_inverse,
    inverse_problem,
    solve_displacements,
)
from bioopt.ga import GaConfig, RealGaConfig, evolve, evolve_real
from bioopt.heat import (
    DiffusivityField,
    ErrorMetrics,
    error_kappa,
    grid_spacing,
    inverse_dt,
    ivbv_inverse,
    read_kappa_csv,
    simulate,
    step_counts,
    synthetic_kappa,
    write_kappa_csv,
)
from bioopt.helpers.extra_helpers.atomic_write import atomic_write_text
from bioopt.pa import PaConfig, pa_optimize
from bioopt.problems import DeJongSpec, Problem, bump_problem, dejong_problem, vessel_problem
from bioopt.rand_core import RandomSource
from bioopt.trace import RunTrace, format_value

if TYPE_CHECKING:
    from bioopt.cli import RunConfig


def ga_config(p: dict) -> GaConfig:
    return GaConfig(
        population_size=p["pop"],
        max_generations=p["generations"],
        crossover_prob=p["pc"],
        mutation_prob=p["pm"],
        inversion_prob=p["inversion"],
        crossover_points=p["points"],
        elitism_count=p["elitism"],
        penalty_coefficient=p["penalty"],
        max_evaluations=p["budget"],
    )


def real_ga_config(p: dict) -> RealGaConfig:
    return RealGaConfig(
        population_size=p["pop"],
        max_generations=p["generations"],
        blend=p["blend"],
        sigma=p["sigma"],
        sigma_final=p["sigma_final"],
        mutation_prob=p["pm"],
        elitism_count=p["elitism"],
        penalty_coefficient=p["penalty"],
        max_evaluations=p["budget"],
    )


def pa_config(p: dict) -> PaConfig:
    return PaConfig(
        v_max=p["vmax"],
        affinity=p["affinity"],
        light_low=p["light_low"],
        light_high=p["light_high"],
        string_bits=p["string_bits"],
        strings_per_parameter=p["strings_per_parameter"],
        max_iterations=p["iterations"],
        stall_window=p["stall"],
        penalty_coefficient=p["penalty"],
    )


ENGINE_CONFIGS = {"ga": ga_config, "ga-real": real_ga_config, "pa": pa_config}


@dataclass
class RunOutcome:
    seed: int
    trace: RunTrace
    wall_time: float
    notes: list[str] = field(default_factory=list)
    artifacts: list[Path] = field(default_factory=list)

    def metadata(self, cfg: RunConfig) -> dict:
        """Plain-typed summary for the run's pipeline document."""
        t = self.trace
        return {
            "subcommand": cfg.subcommand,
            "engine": cfg.engine,
            "seed": self.seed,
            "config": cfg.config_lines(self.seed),
            "best_objective": float(t.best_objective),
            "best_raw_objective": float(t.best_raw_objective),
            "best_vector": [float(v) for v in t.best_vector],
            "constraint_values": [float(v) for v in t.constraint_values],
            "feasible": bool(t.feasible),
            "evaluations": int(t.evaluations),
            "invalid_evaluations": int(t.invalid_evaluations),
            "degenerate_generations": int(t.degenerate_generations),
            "generations": t.generations,
            "stop_reason": t.stop_reason,
            "wall_time": round(self.wall_time, 3),
        }


def _dejong_spec(p: dict) -> DeJongSpec:
    return DeJongSpec(alpha=p["alpha"], half_length=p["half_length"], dimension=p["dim"])


def _fem_target(p: dict) -> np.ndarray:
    target = np.asarray(p["target"], dtype=float)
    if target.shape != (8,):
        raise ValueError(f"target needs 8 values (E, nu for each of 4 elements), got {target.size}")
    return target


def _ivbv_target(p: dict) -> DiffusivityField:
    if p.get("target_kappa") is not None:
        target = read_kappa_csv(p["target_kappa"])
        if target.n != p["grid"]:
            raise ValueError(f"target kappa is {target.n}x{target.n} but grid is {p['grid']}")
        return target
    return synthetic_kappa(p["grid"])


def check_config(cfg: RunConfig) -> None:
    """Build every engine and problem object once so bad values fail before the pipeline starts."""
    p = cfg.params
    ENGINE_CONFIGS[cfg.engine](p)
    if cfg.subcommand in ("dejong", "pa-demo"):
        _dejong_spec(p)
    elif cfg.subcommand == "vessel" and p["objective_variant"] not in ("kannan", "printed"):
        raise ValueError(f"objective_variant must be kannan or printed, got {p['objective_variant']!r}")
    elif cfg.subcommand == "fem-inverse":
        beam_model(_fem_target(p))
    elif cfg.subcommand == "ivbv":
        times = p["times"]
        if len(times) < 1 or any(t <= 0 for t in times) or any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError(f"times must be positive and increasing, got {times}")
        if p["grid"] < 1:
            raise ValueError(f"grid must be >= 1, got {p['grid']}")
        if not 0 < p["kappa_lo"] < p["kappa_hi"]:
            raise ValueError(f"need 0 < kappa_lo < kappa_hi, got {p['kappa_lo']}, {p['kappa_hi']}")
        # the solver steps at a dt dividing the first snapshot time; later ones must land on that grid too
        step_counts(times, inverse_dt(times[0], grid_spacing(p["grid"]), p["kappa_hi"]))
    if cfg.layout is not None:
        problem = build_problem(cfg)
        if len(cfg.layout) != problem.dimension:
            raise ValueError(f"layout has {len(cfg.layout)} fields but {cfg.subcommand} has dimension {problem.dimension}")


def default_layout(cfg: RunConfig) -> GenomeLayout:
    p = cfg.params
    if cfg.subcommand == "vessel":
        return vessel_layout()
    if cfg.subcommand == "bump":
        (lo, hi), _ = bump_problem().bounds
        return uniform_layout(2, p["bits"], lo, hi)
    r = p["half_length"]
    return uniform_layout(p["dim"], p["bits"], -r, r)


def build_problem(cfg: RunConfig) -> Problem:
    """Problem for the closed-form benchmarks; the inverse problems are built by their runners."""
    p = cfg.params
    if cfg.subcommand in ("dejong", "pa-demo"):
        return dejong_problem(_dejong_spec(p))
    if cfg.subcommand == "bump":
        return bump_problem()
    if cfg.subcommand == "vessel":
        layout = cfg.layout or vessel_layout()
        return vessel_problem(layout.bounds, p["objective_variant"])
    raise ValueError(f"{cfg.subcommand} has no closed-form problem")


def _run_benchmark(cfg: RunConfig, src: RandomSource) -> RunTrace:
    problem = build_problem(cfg)
    p = cfg.params
    if cfg.engine == "ga":
        return evolve(problem, cfg.layout or default_layout(cfg), ga_config(p), src)
    if cfg.engine == "ga-real":
        return evolve_real(problem, real_ga_config(p), src)
    fields = uniform_layout(problem.dimension, p["string_bits"], -p["half_length"], p["half_length"]).fields
    return pa_optimize(problem, fields, pa_config(p), src)


def _run_fem(cfg: RunConfig, src: RandomSource, run_dir: Path, header: list[str], notes: list[str], artifacts: list[Path]):
    p = cfg.params
    target = _fem_target(p)
    model = beam_model(target)
    if p["printed_measurements"]:
        measured = np.asarray(PRINTED_MEASURED_U)
        forward = solve_displacements(model)
        notes.append("measurements=printed")
        notes.append("printed_U=" + ",".join(format_value(v) for v in measured))
        notes.append("forward_U_at_target=" + ",".join(format_value(float(v)) for v in forward))
        notes.append("printed_estimate=" + ",".join(format_value(v) for v in PRINTED_ESTIMATE_Y))
    else:
        measured = solve_displacements(model)
        notes.append("measurements=synthetic")

    if cfg.engine == "pa":
        estimate, trace = fem_inverse(measured, pa_config(p), src, model=model)
    else:
        trace = evolve_real(inverse_problem(measured, model), real_ga_config(p), src)
        estimate = trace.best_vector

    rows = ["element,E,nu,target_E,target_nu,rel_error_E,abs_error_nu"]
    for i, (E, nu) in enumerate(np.asarray(estimate).reshape(-1, 2)):
        tE, tnu = target[2 * i], target[2 * i + 1]
        rows.append(
            f"{i + 1},{format_value(float(E))},{format_value(float(nu))},{format_value(tE)},{format_value(tnu)},"
            f"{format_value(abs(E - tE) / tE)},{format_value(abs(nu - tnu))}"
        )
    path = run_dir / "estimate.csv"
    atomic_write_text(path, "".join(f"# {line}\n" for line in header) + "\n".join(rows) + "\n")
    artifacts.append(path)
    return trace


def _run_ivbv(cfg: RunConfig, src: RandomSource, run_dir: Path, header: list[str], notes: list[str], artifacts: list[Path]):
    p = cfg.params
    n = p["grid"]
    h = grid_spacing(n)
    times = tuple(p["times"])
    dt = inverse_dt(times[0], h, p["kappa_hi"])
    target = _ivbv_target(p)
    measured = simulate(target, times, dt, h)
    notes.append(f"dt={format_value(dt)}")

    estimate, trace = ivbv_inverse(measured, real_ga_config(p), src, (p["kappa_lo"], p["kappa_hi"]), known=target)
    metrics = ErrorMetrics(e_u=trace.best_objective, e_kappa=error_kappa(target, estimate))
    notes.append(f"E_u={format_value(metrics.e_u)}")
    notes.append(f"E_kappa={format_value(metrics.e_kappa)}")
    initial = trace.records[0].extras.get("e_kappa")
    if initial is not None:
        notes.append(f"E_kappa_initial_best={format_value(initial)}")

    for name, field_ in (("kappa_estimate.csv", estimate), ("kappa_target.csv", target)):
        write_kappa_csv(run_dir / name, field_, header)
        artifacts.append(run_dir / name)
    return trace


def summary_text(cfg: RunConfig, outcome: RunOutcome) -> str:
    t = outcome.trace
    lines = [f"# {line}" for line in cfg.header_lines(outcome.seed)]
    lines.append(f"problem={cfg.subcommand}")
    lines.append(f"engine={cfg.engine}")
    lines.append(f"seed={outcome.seed}")
    lines.append(f"best_objective={format_value(t.best_objective)}")
    lines.append(f"best_raw_objective={format_value(t.best_raw_objective)}")
    lines.append("solution=" + ",".join(format_value(float(v)) for v in t.best_vector))
    if t.genome_kind == "bits" and t.best_genome is not None:
        lines.append(f"genome_hex={to_hex(t.best_genome)}")
    for i, g in enumerate(t.constraint_values, start=1):
        lines.append(f"g{i}={format_value(float(g))}")
    lines.append(f"feasible={'true' if t.feasible else 'false'}")
    lines.append(f"evaluations={t.evaluations}")
    lines.append(f"invalid_evaluations={t.invalid_evaluations}")
    lines.append(f"degenerate_generations={t.degenerate_generations}")
    lines.append(f"generations={t.generations}")
    lines.append(f"stop_reason={t.stop_reason}")
    lines += outcome.notes
    lines.append(f"wall_time_s={outcome.wall_time:.3f}")
    return "\n".join(lines) + "\n"


def execute_run(cfg: RunConfig, seed: int, run_dir: Path) -> RunOutcome:
    """Run one seed and write trace.csv, summary.txt and the problem's artifacts into ``run_dir``."""
    run_dir = Path(run_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    src = RandomSource(seed)
    header = cfg.header_lines(seed)
    notes: list[str] = []
    artifacts: list[Path] = []
    logger.info(f"{cfg.subcommand} with {cfg.engine}, seed {seed}, writing to {run_dir}")

    started = time.perf_counter()
    if cfg.subcommand == "fem-inverse":
        trace = _run_fem(cfg, src, run_dir, header, notes, artifacts)
    elif cfg.subcommand == "ivbv":
        trace = _run_ivbv(cfg, src, run_dir, header, notes, artifacts)
    else:
        trace = _run_benchmark(cfg, src)
    wall_time = time.perf_counter() - started

    trace.write_csv(run_dir / "trace.csv", header)
    outcome = RunOutcome(seed=seed, trace=trace, wall_time=wall_time, notes=notes, artifacts=artifacts)
    atomic_write_text(run_dir / "summary.txt", summary_text(cfg, outcome))
    outcome.artifacts += [run_dir / "trace.csv", run_dir / "summary.txt"]
    logger.info(f"seed {seed}: best {trace.best_objective:.6g}, feasible={trace.feasible}, {wall_time:.2f}s")
    return outcome
