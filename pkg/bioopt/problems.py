"""Closed-form benchmark objectives: generalised De Jong, Keane's bump, pressure vessel.

Constraints are always expressed as ``g(x) <= 0`` feasible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Literal, Sequence

import numpy as np

Sense = Literal["minimize", "maximize"]

FEASIBILITY_TOL = 1e-9

# reference points quoted with the vessel benchmark
VESSEL_BEST_X = (1.125, 0.625, 58.2906, 43.6926)
VESSEL_BEST_F = 7197.9912
KANNAN_KRAMER_X = (1.125, 0.625, 28.291, 43.690)  # x3 as printed; not a feasible design
KANNAN_KRAMER_F = 7198.0428

# constrained maximum of the bump formula, from a 1e-4 search along xy = 3/4
BUMP_START = (5.0, 5.0)
BUMP_REPORTED_X = (1.593, 0.471)
BUMP_REPORTED_F = 0.365
BUMP_ORACLE_X = (1.587, 0.4726)
BUMP_ORACLE_F = 0.37933
BUMP_MARGIN = 1e-4


@dataclass(frozen=True)
class Problem:
    """Objective, constraints and box of one optimisation task."""

    name: str
    dimension: int
    sense: Sense
    objective: Callable[[np.ndarray], float]
    bounds: tuple[tuple[float, float], ...]
    constraints: tuple[Callable[[np.ndarray], float], ...] = ()
    batch_objective: Callable[[np.ndarray], np.ndarray] | None = field(default=None, compare=False)
    batch_constraints: Callable[[np.ndarray], np.ndarray] | None = field(default=None, compare=False)
    start: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.dimension < 1:
            raise ValueError(f"dimension must be >= 1, got {self.dimension}")
        if len(self.bounds) != self.dimension:
            raise ValueError(f"{self.name}: {len(self.bounds)} bounds for dimension {self.dimension}")
        if self.sense not in ("minimize", "maximize"):
            raise ValueError(f"unknown sense {self.sense!r}")

    @property
    def lower(self) -> np.ndarray:
        return np.array([b[0] for b in self.bounds], dtype=float)

    @property
    def upper(self) -> np.ndarray:
        return np.array([b[1] for b in self.bounds], dtype=float)

    def evaluate(self, x) -> float:
        return float(self.objective(np.asarray(x, dtype=float)))

    def evaluate_batch(self, xs: np.ndarray) -> np.ndarray:
        """Objective of every row, in row order. Failing rows come back as NaN."""
        xs = np.asarray(xs, dtype=float)
        if self.batch_objective is not None:
            return np.asarray(self.batch_objective(xs), dtype=float)
        out = np.empty(len(xs))
        for i, x in enumerate(xs):
            try:
                out[i] = self.objective(x)
            except (ValueError, ArithmeticError):
                out[i] = np.nan
        return out

    def constraint_values(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.array([g(x) for g in self.constraints], dtype=float)

    def constraint_batch(self, xs: np.ndarray) -> np.ndarray:
        xs = np.asarray(xs, dtype=float)
        if not self.constraints:
            return np.zeros((len(xs), 0))
        if self.batch_constraints is not None:
            return np.asarray(self.batch_constraints(xs), dtype=float)
        return np.array([[g(x) for g in self.constraints] for x in xs], dtype=float)

    def is_feasible(self, x, tol: float = FEASIBILITY_TOL) -> bool:
        return bool(np.all(self.constraint_values(x) <= tol))


@dataclass(frozen=True)
class DeJongSpec:
    alpha: int = 1
    half_length: float = 5.12
    dimension: int = 2

    def __post_init__(self):
        if self.alpha < 1:
            raise ValueError(f"alpha must be a positive integer, got {self.alpha}")
        if not self.half_length > 0:
            raise ValueError(f"half_length must be positive, got {self.half_length}")
        if self.dimension < 1:
            raise ValueError(f"dimension must be >= 1, got {self.dimension}")


def dejong(x: Sequence[float], alpha: int, half_length: float | None = None) -> float:
    """Generalised De Jong power function, sum of x_i ** (2 alpha); minimum 0 at the origin."""
    x = np.asarray(x, dtype=float)
    if half_length is not None and np.any(np.abs(x) > half_length):
        raise ValueError(f"point outside the box |x_i| <= {half_length}")
    return float(np.sum(x ** (2 * alpha)))


def dejong_problem(spec: DeJongSpec) -> Problem:
    r = spec.half_length

    def batch(xs: np.ndarray) -> np.ndarray:
        return np.sum(xs ** (2 * spec.alpha), axis=1)

    return Problem(
        name="dejong",
        dimension=spec.dimension,
        sense="minimize",
        objective=lambda x: dejong(x, spec.alpha, r),
        bounds=tuple((-r, r) for _ in range(spec.dimension)),
        batch_objective=batch,
    )


def keane_bump(x: float, y: float) -> float:
    """sin^2(x - y) sin^2(x + y) / sqrt(x^2 + y^2) on the open box 0 < x, y < 10."""
    if not (0 < x < 10 and 0 < y < 10):
        raise ValueError(f"({x}, {y}) outside 0 < x, y < 10")
    return math.sin(x - y) ** 2 * math.sin(x + y) ** 2 / math.sqrt(x * x + y * y)


def bump_constraints(x: float, y: float) -> tuple[float, float]:
    """x + y <= 15 and xy >= 3/4, as g <= 0."""
    return x + y - 15.0, 0.75 - x * y


def bump_problem() -> Problem:
    lo, hi = BUMP_MARGIN, 10.0 - BUMP_MARGIN

    def batch(xs: np.ndarray) -> np.ndarray:
        x, y = xs[:, 0], xs[:, 1]
        return np.sin(x - y) ** 2 * np.sin(x + y) ** 2 / np.sqrt(x * x + y * y)

    return Problem(
        name="bump",
        dimension=2,
        sense="maximize",
        objective=lambda v: keane_bump(v[0], v[1]),
        bounds=((lo, hi), (lo, hi)),
        constraints=(
            lambda v: bump_constraints(v[0], v[1])[0],
            lambda v: bump_constraints(v[0], v[1])[1],
        ),
        batch_objective=batch,
        batch_constraints=lambda xs: np.column_stack((xs[:, 0] + xs[:, 1] - 15.0, 0.75 - xs[:, 0] * xs[:, 1])),
        start=BUMP_START,
    )


VesselVariant = Literal["kannan", "printed"]


def vessel_objective(x: Sequence[float], variant: VesselVariant = "kannan") -> float:
    """Vessel cost in dollars.

    ``kannan`` uses 0.6224 x1 x3 x4 for the first term and reproduces the
    reported optimum; ``printed`` keeps the 0.6224 x1 x2 x3 form.
    """
    x1, x2, x3, x4 = (float(v) for v in x)
    if variant == "kannan":
        first = 0.6224 * x1 * x3 * x4
    elif variant == "printed":
        first = 0.6224 * x1 * x2 * x3
    else:
        raise ValueError(f"unknown vessel variant {variant!r}")
    return first + 1.7781 * x2 * x3**2 + 3.1611 * x1**2 * x4 + 19.84 * x1**2 * x3


def vessel_constraints(x: Sequence[float]) -> tuple[float, float, float, float]:
    x1, x2, x3, x4 = (float(v) for v in x)
    g1 = -x1 + 0.0193 * x3
    g2 = -x2 + 0.00954 * x3
    g3 = -math.pi * x3**2 * x4 - 4.0 * math.pi * x3**3 / 3.0 + 1296000.0
    g4 = x4 - 240.0
    return g1, g2, g3, g4


def vessel_problem(bounds: np.ndarray, variant: VesselVariant = "kannan") -> Problem:
    """Vessel problem over the box of a genome layout (see ``encoding.vessel_layout``)."""

    def batch(xs: np.ndarray) -> np.ndarray:
        x1, x2, x3, x4 = xs.T
        first = 0.6224 * x1 * x3 * x4 if variant == "kannan" else 0.6224 * x1 * x2 * x3
        return first + 1.7781 * x2 * x3**2 + 3.1611 * x1**2 * x4 + 19.84 * x1**2 * x3

    return Problem(
        name="vessel",
        dimension=4,
        sense="minimize",
        objective=lambda x: vessel_objective(x, variant),
        bounds=tuple((float(lo), float(hi)) for lo, hi in bounds),
        constraints=tuple((lambda x, i=i: vessel_constraints(x)[i]) for i in range(4)),
        batch_objective=batch,
        batch_constraints=_vessel_constraint_batch,
    )


def _vessel_constraint_batch(xs: np.ndarray) -> np.ndarray:
    x1, x2, x3, x4 = xs.T
    return np.column_stack(
        (
            -x1 + 0.0193 * x3,
            -x2 + 0.00954 * x3,
            -np.pi * x3**2 * x4 - 4.0 * np.pi * x3**3 / 3.0 + 1296000.0,
            x4 - 240.0,
        )
    )
