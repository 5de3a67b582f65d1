"""Variable-diffusivity heat equation on the unit square and its inverse problem.

The grid holds N x N interior points at (i h, j h), i, j = 1..N, with
h = 1 / (N + 1). The surrounding ring of boundary points stays at 0 and
is never stored; the face diffusivity towards it is the point's own
kappa. Time stepping is forward Euler on the flux form
``du/dt = div(kappa grad u)`` with arithmetic-mean face diffusivities.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from loguru import logger

from bioopt.ga import RealGaConfig, evolve_real
from bioopt.helpers.extra_helpers.atomic_write import atomic_write_text
from bioopt.problems import Problem
from bioopt.rand_core import RandomSource
from bioopt.trace import RunTrace

ERROR_SCALE = 100.0
DEFAULT_TIMES = (0.01, 0.02, 0.04)
KAPPA_BOUNDS = (0.1, 5.0)
DT_SAFETY = 0.9


class StabilityError(ValueError):
    def __init__(self, dt: float, admissible: float):
        super().__init__(f"time step {dt!r} exceeds the explicit stability bound {admissible!r}")
        self.dt = dt
        self.admissible = admissible


@dataclass(frozen=True)
class DiffusivityField:
    values: np.ndarray  # (N, N)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2 or values.shape[0] != values.shape[1] or values.size == 0:
            raise ValueError(f"diffusivity must be a non-empty square grid, got shape {values.shape}")
        if not np.all(values > 0):
            raise ValueError("diffusivity must be positive everywhere")
        object.__setattr__(self, "values", values)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @classmethod
    def from_vector(cls, vector: Sequence[float]) -> DiffusivityField:
        vector = np.asarray(vector, dtype=float)
        n = math.isqrt(vector.size)
        if n * n != vector.size:
            raise ValueError(f"{vector.size} genes do not form a square grid")
        return cls(vector.reshape(n, n))


@dataclass(frozen=True)
class TemperatureField:
    values: np.ndarray
    time: float = 0.0


@dataclass(frozen=True)
class MeasurementSet:
    """Snapshots of u at increasing times, all produced with one time step ``dt``."""

    times: tuple[float, ...]
    snapshots: np.ndarray  # (len(times), N, N)
    dt: float

    def __post_init__(self):
        snapshots = np.asarray(self.snapshots, dtype=float)
        if snapshots.ndim != 3 or snapshots.shape[0] != len(self.times) or snapshots.shape[1] != snapshots.shape[2]:
            raise ValueError(f"snapshots of shape {snapshots.shape} do not match {len(self.times)} square grids")
        object.__setattr__(self, "snapshots", snapshots)
        object.__setattr__(self, "times", tuple(float(t) for t in self.times))

    @property
    def n(self) -> int:
        return self.snapshots.shape[1]

    def fields(self) -> list[TemperatureField]:
        return [TemperatureField(s, t) for t, s in zip(self.times, self.snapshots)]


@dataclass(frozen=True)
class ErrorMetrics:
    e_u: float
    e_kappa: float | None = None
    scale: float = ERROR_SCALE


def grid_spacing(n: int) -> float:
    return 1.0 / (n + 1)


def admissible_dt(kappa_max: float, h: float) -> float:
    return h * h / (4.0 * kappa_max)


def inverse_dt(t1: float, h: float, kappa_hi: float) -> float:
    """Largest dt below the safety-scaled bound for kappa_hi that divides t1 exactly."""
    return t1 / math.ceil(t1 / (DT_SAFETY * admissible_dt(kappa_hi, h)))


def _check_stable(kappa: np.ndarray, dt: float, h: float) -> None:
    bound = admissible_dt(float(np.max(kappa)), h)
    if dt > bound * (1.0 + 1e-12):
        raise StabilityError(dt, bound)


def _faces(kappa: np.ndarray) -> tuple[np.ndarray, ...]:
    """Face diffusivities (west, east, south, north) over the last two axes."""
    pad = [(0, 0)] * (kappa.ndim - 2) + [(1, 1), (1, 1)]
    k = np.pad(kappa, pad, mode="edge")
    c = k[..., 1:-1, 1:-1]
    return (
        (c + k[..., :-2, 1:-1]) / 2.0,
        (c + k[..., 2:, 1:-1]) / 2.0,
        (c + k[..., 1:-1, :-2]) / 2.0,
        (c + k[..., 1:-1, 2:]) / 2.0,
    )


def _advance(u: np.ndarray, faces: tuple[np.ndarray, ...], ratio: float) -> np.ndarray:
    pad = [(0, 0)] * (u.ndim - 2) + [(1, 1), (1, 1)]
    p = np.pad(u, pad)
    kw, ke, ks, kn = faces
    flux = (
        kw * (p[..., :-2, 1:-1] - u)
        + ke * (p[..., 2:, 1:-1] - u)
        + ks * (p[..., 1:-1, :-2] - u)
        + kn * (p[..., 1:-1, 2:] - u)
    )
    return u + ratio * flux


def step(u: TemperatureField, kappa: DiffusivityField, dt: float, h: float) -> TemperatureField:
    if u.values.shape != kappa.values.shape:
        raise ValueError(f"temperature grid {u.values.shape} does not match diffusivity grid {kappa.values.shape}")
    _check_stable(kappa.values, dt, h)
    return TemperatureField(_advance(np.asarray(u.values, dtype=float), _faces(kappa.values), dt / (h * h)), u.time + dt)


def step_counts(times: Sequence[float], dt: float) -> list[int]:
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    if not times or times[0] <= 0 or any(b <= a for a, b in zip(times, times[1:])):
        raise ValueError(f"times must be positive and increasing, got {tuple(times)}")
    counts = []
    for t in times:
        k = round(t / dt)
        if abs(k * dt - t) > 1e-9 * t:
            raise ValueError(f"time {t} is not an integer multiple of dt {dt}")
        counts.append(k)
    return counts


def simulate_batch(kappas: np.ndarray, times: Sequence[float], dt: float, h: float) -> np.ndarray:
    """Snapshots for a stack of diffusivity grids: (P, N, N) -> (P, len(times), N, N)."""
    kappas = np.asarray(kappas, dtype=float)
    _check_stable(kappas, dt, h)
    counts = step_counts(times, dt)
    faces = _faces(kappas)
    ratio = dt / (h * h)
    u = np.ones_like(kappas)
    out = np.empty((kappas.shape[0], len(counts), *kappas.shape[1:]))
    done = 0
    for i, k in enumerate(counts):
        for _ in range(k - done):
            u = _advance(u, faces, ratio)
        done = k
        out[:, i] = u
    return out


def simulate(kappa: DiffusivityField, times: Sequence[float], dt: float, h: float) -> MeasurementSet:
    snapshots = simulate_batch(kappa.values[np.newaxis], times, dt, h)[0]
    return MeasurementSet(tuple(times), snapshots, dt)


def _relative_l1(reference: np.ndarray, other: np.ndarray, axes=None) -> np.ndarray:
    denom = np.sum(np.abs(reference), axis=axes)
    if np.any(denom == 0):
        raise ValueError("reference field is identically zero")
    return ERROR_SCALE * np.sum(np.abs(reference - other), axis=axes) / denom


def error_u(measured: MeasurementSet, computed: MeasurementSet) -> float:
    """A * sum |u_measured - u_computed| / sum |u_measured| over every point and snapshot."""
    if measured.snapshots.shape != computed.snapshots.shape or not np.allclose(measured.times, computed.times):
        raise ValueError("measurement sets differ in grid or times")
    return float(_relative_l1(measured.snapshots, computed.snapshots))


def error_kappa(known: DiffusivityField, predicted: DiffusivityField) -> float:
    if known.values.shape != predicted.values.shape:
        raise ValueError(f"grids {known.values.shape} and {predicted.values.shape} differ")
    return float(_relative_l1(known.values, predicted.values))


def synthetic_kappa(n: int) -> DiffusivityField:
    """Smooth two-bump target in [0.5, 2.0] used for self-consistent runs."""
    x = np.arange(1, n + 1) * grid_spacing(n)
    X, Y = np.meshgrid(x, x, indexing="ij")
    bumps = np.exp(-((X - 0.3) ** 2 + (Y - 0.35) ** 2) / 0.02) + 0.8 * np.exp(-((X - 0.7) ** 2 + (Y - 0.65) ** 2) / 0.03)
    return DiffusivityField(0.5 + 1.5 * bumps / bumps.max())


def ivbv_problem(measured: MeasurementSet, kappa_bounds: tuple[float, float] = KAPPA_BOUNDS) -> Problem:
    lo, hi = kappa_bounds
    if not 0 < lo < hi:
        raise ValueError(f"need 0 < kappa_lo < kappa_hi, got {kappa_bounds}")
    n, h = measured.n, grid_spacing(measured.n)
    _check_stable(np.array([hi]), measured.dt, h)

    def batch(vectors: np.ndarray) -> np.ndarray:
        computed = simulate_batch(vectors.reshape(-1, n, n), measured.times, measured.dt, h)
        return _relative_l1(measured.snapshots[np.newaxis], computed, axes=(1, 2, 3))

    return Problem(
        name="ivbv",
        dimension=n * n,
        sense="minimize",
        objective=lambda v: float(batch(np.asarray(v)[np.newaxis])[0]),
        bounds=tuple((lo, hi) for _ in range(n * n)),
        batch_objective=batch,
    )


def ivbv_inverse(
    measured: MeasurementSet,
    cfg: RealGaConfig,
    src: RandomSource,
    kappa_bounds: tuple[float, float] = KAPPA_BOUNDS,
    known: DiffusivityField | None = None,
) -> tuple[DiffusivityField, RunTrace]:
    """Recover kappa from the snapshots with the real-vector GA, minimising E_u.

    With ``known`` the trace also carries E_kappa of each generation's best.
    """
    problem = ivbv_problem(measured, kappa_bounds)
    columns = ("e_u", "e_kappa") if known is not None else ("e_u",)

    def observe(best: np.ndarray) -> dict:
        extras = {"e_u": problem.evaluate(best)}
        if known is not None:
            extras["e_kappa"] = float(_relative_l1(known.values, best.reshape(known.values.shape)))
        return extras

    trace = evolve_real(problem, cfg, src, observer=observe, extra_columns=columns)
    estimate = DiffusivityField.from_vector(trace.best_vector)
    if known is not None:
        logger.info(f"ivbv: E_u {trace.best_objective:.4f}, E_kappa {error_kappa(known, estimate):.4f}")
    else:
        logger.info(f"ivbv: E_u {trace.best_objective:.4f}")
    return estimate, trace


def kappa_to_csv(kappa: DiffusivityField, header_lines: Sequence[str] = ()) -> str:
    lines = [f"# {line}" for line in header_lines]
    lines += [",".join(repr(float(v)) for v in row) for row in kappa.values]
    return "\n".join(lines) + "\n"


def write_kappa_csv(path: Path, kappa: DiffusivityField, header_lines: Sequence[str] = ()) -> None:
    atomic_write_text(path, kappa_to_csv(kappa, header_lines))


def read_kappa_csv(path: Path) -> DiffusivityField:
    return DiffusivityField(np.loadtxt(path, delimiter=",", comments="#", ndmin=2))
