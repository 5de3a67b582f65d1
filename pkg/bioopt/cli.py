"""Command-line entry point: resolve a run configuration and drive it through a datatrove pipeline.

Resolution order is built-in defaults, then a ``key=value`` file given
with ``--config``, then flags. File keys are long flag names without
the leading dashes; ``field.<i>.<key>`` lines describe a genome layout.
"""

from __future__ import annotations

import argparse
import statistics
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

from datatrove.executor import LocalPipelineExecutor
from datatrove.pipeline.writers.jsonl import JsonlWriter
from loguru import logger

from bioopt import __version__
from bioopt.encoding import GenomeLayout, LayoutError
from bioopt.helpers.extra_helpers.atomic_write import atomic_write_text
from bioopt.helpers.extra_helpers.read_jsonl import read_jsonl
from bioopt.helpers.extra_helpers.validateInputs import validate_inputs
from bioopt.helpers.filters.FeasibilityFilter import FeasibilityFilter
from bioopt.helpers.steps.OptimizationRun import OptimizationRun
from bioopt.rand_core import MAX_SEED
from bioopt.runs import check_config

RUNS_FOLDER = "runs"
REJECTED_FOLDER = "rejected"


class ConfigError(ValueError):
    pass


def _floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(v) for v in str(text).split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _flag(text) -> bool:
    if isinstance(text, bool):
        return text
    value = str(text).strip().lower()
    if value in ("1", "true", "yes", "on"):
        return True
    if value in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {text!r}")


def _optional_int(text) -> int | None:
    return None if str(text).lower() in ("", "none") else int(text)


def _optional_float(text) -> float | None:
    return None if str(text).lower() in ("", "none") else float(text)


# key -> (converter, help)
PARAMETERS: dict[str, tuple[Callable, str]] = {
    "pop": (int, "population size"),
    "generations": (int, "generation limit"),
    "pc": (float, "crossover probability"),
    "pm": (float, "per-gene mutation probability"),
    "inversion": (float, "inversion probability per child"),
    "points": (int, "crossover cut points"),
    "elitism": (int, "elites copied unchanged"),
    "penalty": (float, "initial penalty coefficient"),
    "bits": (int, "bits per variable"),
    "budget": (_optional_int, "objective evaluation budget"),
    "blend": (float, "blend crossover spread, beta in (1 - blend, 1]"),
    "sigma": (float, "gaussian step as a fraction of each gene's range"),
    "sigma_final": (_optional_float, "final gaussian step; sigma decays geometrically to it over the run"),
    "iterations": (int, "PA iteration limit"),
    "vmax": (float, "maximum CO2 fixation rate"),
    "affinity": (float, "CO2 affinity constant A"),
    "light_low": (float, "lower light intensity"),
    "light_high": (float, "upper light intensity"),
    "stall": (int, "stop after this many iterations without improvement, 0 disables"),
    "string_bits": (int, "bits per DHAP string"),
    "strings_per_parameter": (int, "DHAP strings per parameter"),
    "alpha": (int, "De Jong power alpha"),
    "dim": (int, "problem dimension"),
    "half_length": (float, "half side of the search box"),
    "objective_variant": (str, "vessel cost formula: kannan or printed"),
    "target": (_floats, "target material vector E1,nu1,...,E4,nu4"),
    "printed_measurements": (_flag, "invert the printed displacement vector"),
    "grid": (int, "interior grid points per side"),
    "times": (_floats, "snapshot times t1,t2,t3"),
    "kappa_lo": (float, "lower diffusivity bound"),
    "kappa_hi": (float, "upper diffusivity bound"),
    "target_kappa": (Path, "CSV matrix of the diffusivity used to synthesise measurements"),
}

ENGINE_KEYS = {
    "ga": ("pop", "generations", "pc", "pm", "inversion", "points", "elitism", "penalty", "bits", "budget"),
    "ga-real": ("pop", "generations", "blend", "sigma", "sigma_final", "pm", "elitism", "penalty", "budget"),
    "pa": (
        "iterations",
        "vmax",
        "affinity",
        "light_low",
        "light_high",
        "stall",
        "string_bits",
        "strings_per_parameter",
        "penalty",
    ),
}

PROBLEM_KEYS = {
    "dejong": ("alpha", "dim", "half_length"),
    "bump": (),
    "vessel": ("objective_variant",),
    "fem-inverse": ("target", "printed_measurements"),
    "ivbv": ("grid", "times", "kappa_lo", "kappa_hi", "target_kappa"),
    "pa-demo": ("alpha", "dim", "half_length"),
}

# first engine is the default
ENGINES = {
    "dejong": ("ga", "pa", "ga-real"),
    "bump": ("ga", "ga-real"),
    "vessel": ("ga",),
    "fem-inverse": ("pa", "ga-real"),
    "ivbv": ("ga-real",),
    "pa-demo": ("pa",),
}

ENGINE_DEFAULTS = {
    "ga": dict(
        pop=100, generations=200, pc=0.9, pm=0.01, inversion=0.05, points=1, elitism=2, penalty=1e3, bits=16, budget=None
    ),
    "ga-real": dict(
        pop=100, generations=200, blend=1.0, sigma=0.05, sigma_final=None, pm=0.1, elitism=2, penalty=1e3, budget=None
    ),
    "pa": dict(
        iterations=500,
        vmax=30.0,
        affinity=1e4,
        light_low=1e4,
        light_high=5e4,
        stall=200,
        string_bits=16,
        strings_per_parameter=1,
        penalty=1e3,
    ),
}

PROBLEM_DEFAULTS = {
    "dejong": dict(alpha=1, dim=2, half_length=5.12),
    "bump": dict(generations=1000, budget=100_000, bits=20),
    "vessel": dict(objective_variant="kannan", generations=1000, budget=100_000, pm=0.02),
    "fem-inverse": dict(
        target=(600.0, 0.25, 400.0, 0.35, 450.0, 0.30, 350.0, 0.32),
        printed_measurements=False,
        strings_per_parameter=32,
        stall=0,
    ),
    "ivbv": dict(
        grid=8,
        times=(0.01, 0.02, 0.04),
        kappa_lo=0.1,
        kappa_hi=5.0,
        target_kappa=None,
        pop=30,
        generations=2000,
        budget=40_000,
        sigma=0.5,
        sigma_final=0.005,
        pm=0.03,
    ),
    "pa-demo": dict(alpha=1, dim=2, half_length=5.12, iterations=300, stall=0),
}

COMMON_KEYS = ("engine", "seed", "out", "repeat")


def allowed_keys(subcommand: str, engine: str) -> tuple[str, ...]:
    return ENGINE_KEYS[engine] + PROBLEM_KEYS[subcommand]


def defaults_for(subcommand: str, engine: str) -> dict[str, object]:
    keys = allowed_keys(subcommand, engine)
    merged = {**ENGINE_DEFAULTS[engine], **PROBLEM_DEFAULTS[subcommand]}
    return {k: v for k, v in merged.items() if k in keys}


def format_config_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (tuple, list)):
        return ",".join(format_config_value(v) for v in value)
    return str(value)


@dataclass
class RunConfig:
    """Fully resolved run: every engine and problem parameter has a concrete value."""

    subcommand: str
    engine: str
    seed: int = 0
    out: Path = Path("output")
    repeat: int = 1
    params: dict[str, object] = field(default_factory=dict)
    layout: GenomeLayout | None = None

    def __post_init__(self):
        if self.subcommand not in ENGINES:
            raise ConfigError(f"unknown subcommand {self.subcommand!r}")
        if self.engine not in ENGINES[self.subcommand]:
            raise ConfigError(
                f"engine {self.engine!r} cannot run {self.subcommand}; choose one of {', '.join(ENGINES[self.subcommand])}"
            )
        if not 0 <= self.seed <= MAX_SEED:
            raise ConfigError(f"seed must lie in [0, 2**64), got {self.seed}")
        if self.repeat < 1:
            raise ConfigError(f"repeat must be >= 1, got {self.repeat}")
        if self.seed + self.repeat - 1 > MAX_SEED:
            raise ConfigError(f"seeds {self.seed}..{self.seed + self.repeat - 1} run past 2**64 - 1")
        if self.layout is not None and self.engine != "ga":
            raise ConfigError(f"field.* layout lines only apply to the ga engine, not {self.engine}")
        self.out = Path(self.out)

    def run_dir(self, seed: int) -> Path:
        return self.out if self.repeat == 1 else self.out / f"seed_{seed}"

    def config_lines(self, seed: int | None = None) -> list[str]:
        """``key=value`` lines that replay this run when fed back through ``--config``."""
        lines = [f"engine={self.engine}", f"seed={self.seed if seed is None else seed}"]
        for key in sorted(self.params):
            if self.params[key] is not None:
                lines.append(f"{key}={format_config_value(self.params[key])}")
        if self.layout is not None:
            lines += self.layout.to_config()
        return lines

    def header_lines(self, seed: int) -> list[str]:
        return [f"bioopt {__version__}", f"command: bioopt {self.subcommand}", *self.config_lines(seed)]

    def to_dict(self) -> dict:
        return {
            "subcommand": self.subcommand,
            "engine": self.engine,
            "seed": self.seed,
            "out": str(self.out),
            "repeat": self.repeat,
            "params": {k: (str(v) if isinstance(v, Path) else list(v) if isinstance(v, tuple) else v) for k, v in self.params.items()},
            "layout": self.layout.to_config() if self.layout is not None else None,
        }

    @classmethod
    def from_dict(cls, data: dict) -> RunConfig:
        params = {}
        for key, value in data["params"].items():
            params[key] = value if value is None else PARAMETERS[key][0](format_config_value(value))
        layout = None
        if data.get("layout"):
            _, entries = _split_layout(dict(line.split("=", 1) for line in data["layout"]))
            layout = GenomeLayout.from_config(entries)
        return cls(
            subcommand=data["subcommand"],
            engine=data["engine"],
            seed=int(data["seed"]),
            out=Path(data["out"]),
            repeat=int(data["repeat"]),
            params=params,
            layout=layout,
        )


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="bioopt", description="Genetic and photosynthetic optimisation benchmarks")
    parser.add_argument("--version", action="version", version=f"bioopt {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True, metavar="subcommand")
    for name, engines in ENGINES.items():
        p = sub.add_parser(name, help=f"run the {name} benchmark")
        p.add_argument("--engine", choices=engines, default=None, help=f"optimiser (default {engines[0]})")
        p.add_argument("--seed", type=int, default=None, help="root seed (default 0)")
        p.add_argument("--out", type=Path, default=None, help=f"output directory (default output/{name})")
        p.add_argument("--repeat", type=int, default=None, help="run seeds seed..seed+k-1 one after another")
        p.add_argument("--config", type=Path, default=None, help="key=value configuration file")
        keys = dict.fromkeys(k for e in engines for k in ENGINE_KEYS[e])
        keys.update(dict.fromkeys(PROBLEM_KEYS[name]))
        for key in keys:
            convert, help_text = PARAMETERS[key]
            flag = "--" + key.replace("_", "-")
            if convert is _flag:
                p.add_argument(flag, dest=key, action="store_const", const=True, default=None, help=help_text)
            else:
                p.add_argument(flag, dest=key, type=convert, default=None, help=help_text)
    return parser


def _split_layout(entries: dict[str, str]) -> tuple[dict[str, str], dict[int, dict[str, str]]]:
    plain, layout = {}, {}
    for key, value in entries.items():
        if key.startswith("field."):
            parts = key.split(".")
            if len(parts) != 3 or not parts[1].isdigit():
                raise ConfigError(f"malformed layout key {key!r}, expected field.<i>.<key>")
            layout.setdefault(int(parts[1]), {})[parts[2]] = value
        else:
            plain[key] = value
    return plain, layout


def read_config_file(path: Path) -> dict[str, str]:
    """Parse ``key=value`` lines; ``#`` starts a comment, keys take hyphens or underscores."""
    entries = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"cannot read config file {path}: {e}") from None
    for n, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{n}: expected key=value, got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        entries[key.replace("-", "_")] = value
    return entries


def parse_config(argv: Sequence[str], config_file: Path | None = None) -> RunConfig:
    args = vars(build_parser().parse_args(list(argv)))
    subcommand = args.pop("subcommand")
    config_file = config_file or args.pop("config", None)
    args.pop("config", None)

    file_values, layout_entries = _split_layout(read_config_file(config_file)) if config_file else ({}, {})
    known = set(COMMON_KEYS) | {k for e in ENGINES[subcommand] for k in ENGINE_KEYS[e]} | set(PROBLEM_KEYS[subcommand])
    for key in file_values:
        if key not in known:
            raise ConfigError(f"unknown key {key!r} for {subcommand}")

    # common keys never reach the parameter checks below, whichever side sets them
    file_common = {key: file_values.pop(key) for key in COMMON_KEYS if key in file_values}
    engine = args.pop("engine") or file_common.get("engine") or ENGINES[subcommand][0]
    if engine not in ENGINES[subcommand]:
        raise ConfigError(f"engine {engine!r} cannot run {subcommand}; choose one of {', '.join(ENGINES[subcommand])}")
    common = {}
    for key, convert, default in (
        ("seed", int, 0),
        ("repeat", int, 1),
        ("out", Path, Path("output") / subcommand),
    ):
        flag_value = args.pop(key)
        if flag_value is not None:
            common[key] = flag_value
        elif key in file_common:
            try:
                common[key] = convert(file_common[key])
            except ValueError as e:
                raise ConfigError(f"bad value for {key!r}: {e}") from None
        else:
            common[key] = default

    params = defaults_for(subcommand, engine)
    allowed = allowed_keys(subcommand, engine)
    for key, value in file_values.items():
        if key not in allowed:
            raise ConfigError(f"key {key!r} does not apply to the {engine} engine")
        try:
            params[key] = PARAMETERS[key][0](value)
        except (ValueError, argparse.ArgumentTypeError) as e:
            raise ConfigError(f"bad value for {key!r}: {e}") from None
    for key, value in args.items():
        if value is None:
            continue
        if key not in allowed:
            raise ConfigError(f"--{key.replace('_', '-')} does not apply to the {engine} engine")
        params[key] = value

    try:
        layout = GenomeLayout.from_config(layout_entries) if layout_entries else None
    except LayoutError as e:
        raise ConfigError(str(e)) from None
    cfg = RunConfig(subcommand=subcommand, engine=engine, params=params, layout=layout, **common)

    try:
        check_config(cfg)
    except ValueError as e:
        raise ConfigError(str(e)) from None
    return cfg


def build_pipeline(cfg: RunConfig) -> list:
    return [
        OptimizationRun(cfg.to_dict()),
        FeasibilityFilter(
            exclusion_writer=JsonlWriter(f"{cfg.out}/{REJECTED_FOLDER}/infeasible"),
        ),
        JsonlWriter(
            output_folder=f"{cfg.out}/{RUNS_FOLDER}",
        ),
    ]


def write_repeat_summary(cfg: RunConfig) -> Path:
    docs = read_jsonl(cfg.out / RUNS_FOLDER) + read_jsonl(cfg.out / REJECTED_FOLDER / "infeasible")
    # an older, larger repeat into the same folder leaves its extra rank files behind
    docs = [d for d in docs if cfg.seed <= d["metadata"]["seed"] < cfg.seed + cfg.repeat]
    docs.sort(key=lambda d: d["metadata"]["seed"])
    lines = [f"# {line}" for line in cfg.header_lines(cfg.seed)]
    lines.append("seed,best_objective,feasible,evaluations")
    for d in docs:
        m = d["metadata"]
        lines.append(f"{m['seed']},{m['best_objective']!r},{str(m['feasible']).lower()},{m['evaluations']}")
    bests = [d["metadata"]["best_objective"] for d in docs if d["metadata"]["best_objective"] is not None]
    if bests:
        lines.append(f"median_best_objective={statistics.median(bests)!r}")
    path = cfg.out / "repeat_summary.txt"
    atomic_write_text(path, "\n".join(lines) + "\n")
    return path


def run(cfg: RunConfig) -> int:
    validate_inputs(cfg.out, cfg.params.get("target_kappa"))
    executor = LocalPipelineExecutor(
        pipeline=build_pipeline(cfg),
        logging_dir=f"{cfg.out}/log",
        tasks=cfg.repeat,
        workers=1,
        skip_completed=False,
    )
    executor.run()
    if cfg.repeat > 1:
        path = write_repeat_summary(cfg)
        logger.info(f"wrote {path}")
    return 0


def main(argv: Sequence[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        cfg = parse_config(argv)
    except ConfigError as e:
        print(f"bioopt: error: {e}", file=sys.stderr)
        return 1
    except SystemExit as e:  # --help / --version
        return int(e.code or 0)
    try:
        return run(cfg)
    except Exception as e:
        logger.exception(f"run failed: {e}")
        return 2


if __name__ == "__main__":
    sys.exit(main())
