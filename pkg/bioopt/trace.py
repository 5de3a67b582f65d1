"""Per-generation run records and their CSV form."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal, Sequence

import numpy as np

from bioopt.encoding import to_hex
from bioopt.helpers.extra_helpers.atomic_write import atomic_write_text
from bioopt.problems import Sense

GenomeKind = Literal["bits", "real"]


def format_value(value) -> str:
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return str(value)


def format_genome(genome: np.ndarray, kind: GenomeKind) -> str:
    if kind == "bits":
        return to_hex(genome)
    return ",".join(repr(float(v)) for v in genome)


@dataclass
class GenerationRecord:
    generation: int
    best_objective: float
    mean_objective: float
    best_genome: np.ndarray
    extras: dict[str, object] = field(default_factory=dict)


@dataclass
class RunTrace:
    """Everything a run reports: one record per completed generation plus the final best."""

    sense: Sense
    genome_kind: GenomeKind
    extra_columns: tuple[str, ...] = ()
    records: list[GenerationRecord] = field(default_factory=list)
    best_genome: np.ndarray | None = None
    best_vector: np.ndarray | None = None
    best_objective: float = float("nan")
    best_raw_objective: float = float("nan")
    constraint_values: np.ndarray = field(default_factory=lambda: np.zeros(0))
    feasible: bool = True
    evaluations: int = 0
    invalid_evaluations: int = 0
    degenerate_generations: int = 0
    stop_reason: str = ""

    def append(self, record: GenerationRecord) -> None:
        if record.generation != len(self.records):
            raise ValueError(f"record for generation {record.generation} after {len(self.records)} records")
        self.records.append(record)

    @property
    def generations(self) -> int:
        return len(self.records)

    def best_series(self) -> np.ndarray:
        return np.array([r.best_objective for r in self.records])

    def mean_series(self) -> np.ndarray:
        return np.array([r.mean_objective for r in self.records])

    def extra_series(self, column: str) -> list:
        return [r.extras.get(column) for r in self.records]

    def columns(self) -> list[str]:
        genome_column = "best_genome_hex" if self.genome_kind == "bits" else "best_genome"
        return ["generation", "best_objective", "mean_objective", genome_column, *self.extra_columns]

    def to_csv(self, header_lines: Sequence[str] = ()) -> str:
        buf = io.StringIO()
        for line in header_lines:
            buf.write(f"# {line}\n")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.columns())
        for r in self.records:
            writer.writerow(
                [
                    r.generation,
                    format_value(r.best_objective),
                    format_value(r.mean_objective),
                    format_genome(r.best_genome, self.genome_kind),
                    *(format_value(r.extras.get(c, "")) for c in self.extra_columns),
                ]
            )
        return buf.getvalue()

    def write_csv(self, path: Path, header_lines: Sequence[str] = ()) -> None:
        atomic_write_text(path, self.to_csv(header_lines))
