"""Binary-chromosome and real-vector genetic algorithms.

Both engines run the same loop: evaluate, penalise constraint violations,
shape fitness, copy elites, breed the rest of the next population.
Constraint handling is a quadratic exterior penalty whose coefficient
doubles every ``penalty_growth_interval`` generations while the best
member of the current generation is infeasible. Traces record the run
incumbent scored with the initial coefficient.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Sequence

import numpy as np
from loguru import logger

from bioopt.encoding import Chromosome, EncodingError, GenomeLayout, decode_many, encode
from bioopt.problems import FEASIBILITY_TOL, Problem, Sense
from bioopt.rand_core import RandomSource
from bioopt.trace import GenerationRecord, RunTrace

Observer = Callable[[np.ndarray], dict]


def _check_prob(name: str, value: float) -> None:
    if not 0.0 <= value <= 1.0:
        raise ValueError(f"{name} must lie in [0, 1], got {value}")


@dataclass
class GaConfig:
    population_size: int = 100
    max_generations: int = 200
    crossover_prob: float = 0.9
    mutation_prob: float = 0.01
    inversion_prob: float = 0.05
    crossover_points: int = 1
    elitism_count: int = 2
    fitness_shift: float | None = None  # constant A; None recomputes it every generation
    penalty_coefficient: float = 1e3
    penalty_growth_interval: int = 50
    max_evaluations: int | None = None

    def __post_init__(self):
        if self.population_size < 1:
            raise ValueError(f"population_size must be >= 1, got {self.population_size}")
        if self.max_generations < 0:
            raise ValueError(f"max_generations must be >= 0, got {self.max_generations}")
        _check_prob("crossover_prob", self.crossover_prob)
        _check_prob("mutation_prob", self.mutation_prob)
        _check_prob("inversion_prob", self.inversion_prob)
        if self.crossover_points < 1:
            raise ValueError(f"crossover_points must be >= 1, got {self.crossover_points}")
        if not 0 <= self.elitism_count < self.population_size:
            raise ValueError(f"elitism_count must lie in [0, population_size), got {self.elitism_count}")
        if self.penalty_coefficient < 0:
            raise ValueError("penalty_coefficient must be non-negative")
        if self.max_evaluations is not None and self.max_evaluations < self.population_size:
            raise ValueError(f"max_evaluations {self.max_evaluations} cannot cover one population")


@dataclass
class RealGaConfig:
    population_size: int = 100
    max_generations: int = 200
    blend: float = 1.0  # beta is drawn from (1 - blend, 1]
    sigma: float = 0.05  # gaussian step as a fraction of each gene's range
    sigma_final: float | None = None  # geometric decay from sigma to this value over the run
    mutation_prob: float = 0.1
    elitism_count: int = 2
    penalty_coefficient: float = 1e3
    penalty_growth_interval: int = 50
    max_evaluations: int | None = None

    def __post_init__(self):
        if self.population_size < 2:
            raise ValueError(f"population_size must be >= 2, got {self.population_size}")
        if self.max_generations < 0:
            raise ValueError(f"max_generations must be >= 0, got {self.max_generations}")
        if not 0.0 < self.blend <= 1.0:
            raise ValueError(f"blend must lie in (0, 1], got {self.blend}")
        if not self.sigma > 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if self.sigma_final is not None and not self.sigma_final > 0:
            raise ValueError(f"sigma_final must be positive, got {self.sigma_final}")
        _check_prob("mutation_prob", self.mutation_prob)
        if not 0 <= self.elitism_count < self.population_size:
            raise ValueError(f"elitism_count must lie in [0, population_size), got {self.elitism_count}")
        if self.max_evaluations is not None and self.max_evaluations < self.population_size:
            raise ValueError(f"max_evaluations {self.max_evaluations} cannot cover one population")

    def sigma_at(self, progress: float) -> float:
        """Mutation step after ``progress`` in [0, 1] of the run."""
        if self.sigma_final is None:
            return self.sigma
        progress = min(max(progress, 0.0), 1.0)
        return self.sigma * (self.sigma_final / self.sigma) ** progress


@dataclass
class Population:
    """Evaluated members of one generation.

    ``objectives`` are penalised and NaN for members whose evaluation failed;
    ``fitness`` is the non-negative selection weight.
    """

    genomes: np.ndarray
    objectives: np.ndarray
    fitness: np.ndarray
    generation: int = 0

    def __len__(self) -> int:
        return len(self.genomes)

    @cached_property
    def probabilities(self) -> np.ndarray:
        return fitness_proportionate(self.fitness)

    @cached_property
    def _wheel(self) -> np.ndarray:
        return np.cumsum(self.probabilities)


def fitness_shift(y: float, A: float) -> float:
    """F = A - y, clamped at zero."""
    return max(A - y, 0.0)


def fitness_proportionate(values: Sequence[float]) -> np.ndarray:
    """Roulette-wheel probabilities; an all-zero input yields the uniform distribution."""
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise ValueError("fitness_proportionate needs at least one value")
    if np.any(values < 0) or not np.all(np.isfinite(values)):
        raise ValueError("fitness values must be finite and non-negative")
    total = values.sum()
    if total <= 0:
        return np.full(values.size, 1.0 / values.size)
    return values / total


def select_parent(pop: Population, src: RandomSource) -> Chromosome:
    if len(pop) == 0:
        raise ValueError("cannot select from an empty population")
    i = int(np.searchsorted(pop._wheel, src.next_unit(), side="right"))
    return pop.genomes[min(i, len(pop) - 1)]


def crossover_at(p1: Chromosome, p2: Chromosome, cuts: Sequence[int]) -> tuple[Chromosome, Chromosome]:
    """Swap the segments between alternate cut points; a cut k splits before bit k."""
    p1, p2 = np.asarray(p1), np.asarray(p2)
    if p1.shape != p2.shape:
        raise ValueError(f"parents differ in length: {p1.size} vs {p2.size}")
    swap = np.zeros(p1.size, dtype=bool)
    bounds = sorted(cuts) + [p1.size]
    for start, stop in zip(bounds[0::2], bounds[1::2]):
        swap[start:stop] = True
    return np.where(swap, p2, p1), np.where(swap, p1, p2)


def crossover(p1: Chromosome, p2: Chromosome, points: int, src: RandomSource) -> tuple[Chromosome, Chromosome]:
    if len(p1) != len(p2):
        raise ValueError(f"parents differ in length: {len(p1)} vs {len(p2)}")
    if points < 1:
        raise ValueError(f"points must be >= 1, got {points}")
    if len(p1) < 2:
        return np.array(p1), np.array(p2)
    cuts = 1 + src.sample(len(p1) - 1, min(points, len(p1) - 1))
    return crossover_at(p1, p2, cuts.tolist())


def mutate(c: Chromosome, p_m: float, src: RandomSource) -> Chromosome:
    flips = src.units(len(c)) < p_m
    return np.bitwise_xor(c, flips.astype(np.uint8))


def invert_between(c: Chromosome, start: int, stop: int) -> Chromosome:
    out = np.array(c, dtype=np.uint8)
    out[start:stop] ^= 1
    return out


def invert_segment(c: Chromosome, src: RandomSource) -> Chromosome:
    """Complement the bits of one segment with uniformly random endpoints."""
    a, b = src.next_index(len(c) + 1), src.next_index(len(c) + 1)
    return invert_between(c, min(a, b), max(a, b))


def penalized_objective(
    raw: float, constraint_values: Sequence[float], penalty_coefficient: float, sense: Sense = "minimize"
) -> float:
    """raw +/- coefficient * sum(max(0, g_i)^2), the sign worsening the objective."""
    violation = np.maximum(np.asarray(constraint_values, dtype=float), 0.0)
    penalty = penalty_coefficient * float(np.sum(violation**2))
    return raw + penalty if sense == "minimize" else raw - penalty


def shape_fitness(objectives: np.ndarray, sense: Sense, A: float | None = None) -> np.ndarray:
    """Selection weights from penalised objectives; NaN members get zero.

    Minimisation uses F = A - y with A the generation's worst value plus a
    5% spread margin unless a constant A is given. Maximisation uses the
    objective itself clamped at zero.
    """
    finite = np.isfinite(objectives)
    fitness = np.zeros(objectives.size)
    if not finite.any():
        return fitness
    y = objectives[finite]
    if sense == "minimize":
        if A is None:
            spread = y.max() - y.min()
            A = y.max() + (0.05 * spread if spread > 0 else 1.0)
        fitness[finite] = np.maximum(A - y, 0.0)
    else:
        fitness[finite] = np.maximum(y, 0.0)
    return fitness


class Scorer:
    """Evaluates candidates, applies penalties and keeps the run's best members."""

    def __init__(self, problem: Problem, coefficient: float, trace: RunTrace):
        self.problem = problem
        self.coefficient = coefficient
        self.base_coefficient = coefficient
        self.trace = trace
        self.best_cost = np.inf
        self.best_feasible_cost = np.inf
        self.incumbent: tuple[float, np.ndarray] | None = None
        self.incumbent_cost = np.inf

    def cost(self, objectives: np.ndarray) -> np.ndarray:
        """Objectives turned into lower-is-better costs, NaN mapped to +inf."""
        c = objectives if self.problem.sense == "minimize" else -objectives
        return np.where(np.isfinite(c), c, np.inf)

    def evaluate(self, vectors: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        raw = self.problem.evaluate_batch(vectors)
        g = self.problem.constraint_batch(vectors)
        bad = ~np.isfinite(raw)
        if bad.any():
            self.trace.invalid_evaluations += int(bad.sum())
            logger.warning(f"{self.problem.name}: {int(bad.sum())} non-finite evaluations")
        self.trace.evaluations += len(vectors)
        return raw, g

    def penalise(self, raw: np.ndarray, g: np.ndarray, coefficient: float | None = None) -> np.ndarray:
        if g.shape[1] == 0:
            return raw.copy()
        c = self.coefficient if coefficient is None else coefficient
        penalty = c * np.sum(np.maximum(g, 0.0) ** 2, axis=1)
        return raw + penalty if self.problem.sense == "minimize" else raw - penalty

    def track(self, genomes, raw: np.ndarray, g: np.ndarray) -> tuple[float, np.ndarray]:
        """Run incumbent scored with the initial coefficient, so escalation never moves it."""
        objectives = self.penalise(raw, g, self.base_coefficient)
        cost = self.cost(objectives)
        i = int(np.argmin(cost))
        if self.incumbent is None or cost[i] < self.incumbent_cost:
            self.incumbent = (float(objectives[i]), np.array(genomes[i]))
            self.incumbent_cost = cost[i]
        return self.incumbent

    def consider(self, genomes, vectors, raw, g, objectives) -> None:
        cost = self.cost(objectives)
        feasible = np.all(g <= FEASIBILITY_TOL, axis=1) if g.shape[1] else np.ones(len(cost), dtype=bool)
        i = int(np.argmin(cost))
        if cost[i] < self.best_cost and self.best_feasible_cost == np.inf:
            self.best_cost = cost[i]
            self._store(genomes[i], vectors[i], raw[i], g[i], objectives[i], bool(feasible[i]))
        feasible_cost = np.where(feasible, cost, np.inf)
        j = int(np.argmin(feasible_cost))
        if feasible_cost[j] < self.best_feasible_cost:
            self.best_feasible_cost = feasible_cost[j]
            self._store(genomes[j], vectors[j], raw[j], g[j], objectives[j], True)

    def _store(self, genome, vector, raw, g, objective, feasible) -> None:
        self.trace.best_genome = np.array(genome)
        self.trace.best_vector = np.array(vector, dtype=float)
        self.trace.best_raw_objective = float(raw)
        self.trace.best_objective = float(objective)
        self.trace.constraint_values = np.array(g, dtype=float)
        self.trace.feasible = feasible

    def maybe_escalate(self, generation: int, interval: int, best_g: np.ndarray) -> None:
        if best_g.size == 0 or interval <= 0 or generation == 0 or generation % interval:
            return
        if np.all(best_g <= FEASIBILITY_TOL):
            return
        self.coefficient *= 2.0
        logger.warning(f"{self.problem.name}: best member infeasible at generation {generation}, penalty -> {self.coefficient:g}")


def _record(trace: RunTrace, generation: int, objectives, incumbent: tuple[float, np.ndarray], extras: dict | None = None) -> None:
    finite = np.isfinite(objectives)
    best, genome = incumbent
    trace.append(
        GenerationRecord(
            generation=generation,
            best_objective=best,
            mean_objective=float(objectives[finite].mean()) if finite.any() else float("nan"),
            best_genome=genome.copy(),
            extras=extras or {},
        )
    )
    if generation % 10 == 0:
        logger.debug(f"generation {generation}: best {best:.6g}")


def _elite_order(cost: np.ndarray) -> np.ndarray:
    return np.argsort(cost, kind="stable")


def evolve(problem: Problem, layout: GenomeLayout, cfg: GaConfig, src: RandomSource) -> RunTrace:
    """Generational binary GA with roulette selection, crossover, mutation, inversion and elitism."""
    if len(layout) != problem.dimension:
        raise ValueError(f"layout has {len(layout)} fields, {problem.name} has dimension {problem.dimension}")
    trace = RunTrace(sense=problem.sense, genome_kind="bits")
    scorer = Scorer(problem, cfg.penalty_coefficient, trace)
    n = cfg.population_size

    genomes = src.bits((n, layout.total_bits))
    if problem.start is not None:
        try:
            genomes[0] = encode(problem.start, layout)
        except EncodingError as e:
            logger.warning(f"start point {problem.start} not encodable, ignored: {e}")

    vectors = decode_many(genomes, layout)
    raw, g = scorer.evaluate(vectors)
    logger.info(f"GA on {problem.name}: {n} members x {layout.total_bits} bits, up to {cfg.max_generations} generations")

    generation = 0
    while True:
        objectives = scorer.penalise(raw, g)
        cost = scorer.cost(objectives)
        scorer.consider(genomes, vectors, raw, g, objectives)
        _record(trace, generation, objectives, scorer.track(genomes, raw, g))
        best = int(np.argmin(cost))
        if generation >= cfg.max_generations:
            trace.stop_reason = "max_generations"
            break
        if cfg.max_evaluations is not None and trace.evaluations + n - cfg.elitism_count > cfg.max_evaluations:
            trace.stop_reason = "budget"
            break
        scorer.maybe_escalate(generation, cfg.penalty_growth_interval, g[best])
        objectives = scorer.penalise(raw, g)

        fitness = shape_fitness(objectives, problem.sense, cfg.fitness_shift)
        if fitness.sum() <= 0:
            trace.degenerate_generations += 1
            logger.warning(f"generation {generation}: all fitness zero, selecting uniformly")
        pop = Population(genomes, objectives, fitness, generation)

        elite = _elite_order(scorer.cost(objectives))[: cfg.elitism_count]
        children = []
        while len(children) < n - len(elite):
            a, b = select_parent(pop, src), select_parent(pop, src)
            if src.next_unit() < cfg.crossover_prob:
                a, b = crossover(a, b, cfg.crossover_points, src)
            for child in (a, b):
                child = mutate(child, cfg.mutation_prob, src)
                if cfg.inversion_prob > 0 and src.next_unit() < cfg.inversion_prob:
                    child = invert_segment(child, src)
                children.append(child)
        children = np.array(children[: n - len(elite)], dtype=np.uint8).reshape(-1, layout.total_bits)

        child_vectors = decode_many(children, layout)
        child_raw, child_g = scorer.evaluate(child_vectors)
        genomes = np.concatenate([genomes[elite], children])
        vectors = np.concatenate([vectors[elite], child_vectors])
        raw = np.concatenate([raw[elite], child_raw])
        g = np.concatenate([g[elite], child_g])
        generation += 1

    logger.info(
        f"GA on {problem.name} finished after {generation} generations ({trace.stop_reason}): "
        f"best {trace.best_objective:.6g}, feasible={trace.feasible}"
    )
    return trace


def blend_crossover(a: np.ndarray, b: np.ndarray, beta: float) -> tuple[np.ndarray, np.ndarray]:
    return beta * a + (1.0 - beta) * b, beta * b + (1.0 - beta) * a


def gaussian_mutation(
    x: np.ndarray, lower: np.ndarray, upper: np.ndarray, p: float, sigma: float, src: RandomSource
) -> np.ndarray:
    """Add N(0, (sigma * range)^2) noise to each gene with probability p, clamped to the box."""
    hit = src.units(x.size) < p
    noise = src.normals(x.size) * sigma * (upper - lower)
    return np.clip(np.where(hit, x + noise, x), lower, upper)


def evolve_real(
    problem: Problem,
    cfg: RealGaConfig,
    src: RandomSource,
    observer: Observer | None = None,
    extra_columns: Sequence[str] = (),
) -> RunTrace:
    """Floating-point GA: truncation to the better half, blend crossover, gaussian mutation, elitism.

    ``observer`` receives the best vector of each generation and returns
    values for ``extra_columns``.
    """
    trace = RunTrace(sense=problem.sense, genome_kind="real", extra_columns=tuple(extra_columns))
    scorer = Scorer(problem, cfg.penalty_coefficient, trace)
    n, lower, upper = cfg.population_size, problem.lower, problem.upper

    vectors = src.uniform(lower, upper, (n, problem.dimension))
    if problem.start is not None:
        vectors[0] = np.clip(np.asarray(problem.start, dtype=float), lower, upper)
    raw, g = scorer.evaluate(vectors)
    logger.info(f"real GA on {problem.name}: {n} members x {problem.dimension} genes, up to {cfg.max_generations} generations")

    generation = 0
    while True:
        objectives = scorer.penalise(raw, g)
        cost = scorer.cost(objectives)
        scorer.consider(vectors, vectors, raw, g, objectives)
        best = int(np.argmin(cost))
        extras = observer(vectors[best]) if observer else None
        _record(trace, generation, objectives, scorer.track(vectors, raw, g), extras)
        if generation >= cfg.max_generations:
            trace.stop_reason = "max_generations"
            break
        if cfg.max_evaluations is not None and trace.evaluations + n - cfg.elitism_count > cfg.max_evaluations:
            trace.stop_reason = "budget"
            break
        scorer.maybe_escalate(generation, cfg.penalty_growth_interval, g[best])

        order = _elite_order(scorer.cost(scorer.penalise(raw, g)))
        elite = order[: cfg.elitism_count]
        pool = vectors[order[: max(2, n // 2)]]
        if cfg.max_evaluations is not None:
            progress = trace.evaluations / cfg.max_evaluations
        else:
            progress = generation / max(cfg.max_generations, 1)
        sigma = cfg.sigma_at(progress)
        children = []
        while len(children) < n - len(elite):
            i = src.next_index(len(pool))
            j = (i + 1 + src.next_index(len(pool) - 1)) % len(pool)
            beta = 1.0 - cfg.blend * src.next_unit()
            for child in blend_crossover(pool[i], pool[j], beta):
                children.append(gaussian_mutation(child, lower, upper, cfg.mutation_prob, sigma, src))
        children = np.array(children[: n - len(elite)])

        child_raw, child_g = scorer.evaluate(children)
        vectors = np.concatenate([vectors[elite], children])
        raw = np.concatenate([raw[elite], child_raw])
        g = np.concatenate([g[elite], child_g])
        generation += 1

    logger.info(
        f"real GA on {problem.name} finished after {generation} generations ({trace.stop_reason}): "
        f"best {trace.best_objective:.6g}, feasible={trace.feasible}"
    )
    return trace
