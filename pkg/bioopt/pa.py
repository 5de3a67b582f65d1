"""Photosynthetic algorithm over fixed-width DHAP strings.

Each iteration draws a light intensity L, turns it into a CO2 fixation
rate r = V_max / (1 + A / L) and picks the Benson-Calvin cycle with
probability r / V_max, photorespiration otherwise. Benson-Calvin pulls
the working strings towards the incumbent by swapping segments whose
lengths rotate through the pathway's carbon numbers; photorespiration
complements a short segment and flips scattered bits. The incumbent only
changes when a candidate beats it.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np
from loguru import logger

from bioopt.encoding import FieldSpec, GenomeLayout, decode_many
from bioopt.ga import Scorer
from bioopt.problems import Problem
from bioopt.rand_core import RandomSource
from bioopt.trace import GenerationRecord, RunTrace

CARBON_SCHEDULE = (3, 5, 6, 7)
TRACE_COLUMNS = ("L", "r", "cycle")


class Cycle(str, Enum):
    BENSON_CALVIN = "benson_calvin"
    PHOTORESPIRATION = "photorespiration"


@dataclass
class PaConfig:
    v_max: float = 30.0
    affinity: float = 1e4
    light_low: float = 1e4
    light_high: float = 5e4
    string_bits: int = 16
    strings_per_parameter: int = 1
    max_iterations: int = 500
    stall_window: int = 200  # 0 runs every iteration
    complement_max: int = 4
    flip_prob: float | None = None  # defaults to 2 / string_bits
    penalty_coefficient: float = 1e3

    def __post_init__(self):
        if not self.v_max > 0:
            raise ValueError(f"v_max must be positive, got {self.v_max}")
        if not self.affinity > 0:
            raise ValueError(f"affinity must be positive, got {self.affinity}")
        if not 0 < self.light_low <= self.light_high:
            raise ValueError(f"need 0 < light_low <= light_high, got [{self.light_low}, {self.light_high}]")
        if self.string_bits < 1 or self.strings_per_parameter < 1:
            raise ValueError("string_bits and strings_per_parameter must be >= 1")
        if self.max_iterations < 0 or self.stall_window < 0:
            raise ValueError("max_iterations and stall_window must be >= 0")
        if self.complement_max < 0:
            raise ValueError("complement_max must be >= 0")
        if self.flip_prob is not None and not 0.0 <= self.flip_prob <= 1.0:
            raise ValueError(f"flip_prob must lie in [0, 1], got {self.flip_prob}")

    @property
    def bit_flip_prob(self) -> float:
        return 2.0 / self.string_bits if self.flip_prob is None else self.flip_prob


@dataclass
class PaState:
    working: np.ndarray  # (parameters, strings_per_parameter, string_bits)
    incumbent: np.ndarray  # (parameters, string_bits)
    incumbent_vector: np.ndarray
    incumbent_cost: float
    iteration: int = 0
    light: float = float("nan")
    rate: float = float("nan")
    cycle: Cycle | None = None
    bc_turn: int = 0
    last_improvement: int = 0


def light_intensity(cfg: PaConfig, src: RandomSource) -> float:
    return cfg.light_low + (cfg.light_high - cfg.light_low) * src.next_unit()


def fixation_rate(L: float, cfg: PaConfig) -> float:
    if L <= 0:
        raise ValueError(f"light intensity must be positive, got {L}")
    return cfg.v_max / (1.0 + cfg.affinity / L)


def choose_cycle(r: float, cfg: PaConfig, src: RandomSource) -> Cycle:
    if src.next_unit() < r / cfg.v_max:
        return Cycle.BENSON_CALVIN
    return Cycle.PHOTORESPIRATION


def benson_calvin_shuffle(strings: np.ndarray, src: RandomSource, turn: int = 0) -> np.ndarray:
    """Strings 2i and 2i+1 swap one segment whose length is CARBON_SCHEDULE[turn % 4].

    An unpaired last string is left alone.
    """
    strings = np.array(strings, dtype=np.uint8)
    if strings.ndim != 2 or len(strings) < 2:
        raise ValueError("benson_calvin_shuffle needs at least two strings")
    width = strings.shape[1]
    length = min(CARBON_SCHEDULE[turn % len(CARBON_SCHEDULE)], width)
    for a in range(0, len(strings) - 1, 2):
        start = src.next_index(width - length + 1)
        seg = slice(start, start + length)
        strings[a, seg], strings[a + 1, seg] = strings[a + 1, seg].copy(), strings[a, seg].copy()
    return strings


def photorespiration_shuffle(
    strings: np.ndarray, src: RandomSource, complement_max: int = 4, flip_prob: float | None = None
) -> np.ndarray:
    """Complement one segment of 1..complement_max bits per string, then flip bits independently."""
    strings = np.array(strings, dtype=np.uint8)
    if strings.ndim != 2 or len(strings) < 1:
        raise ValueError("photorespiration_shuffle needs at least one string")
    width = strings.shape[1]
    p = 2.0 / width if flip_prob is None else flip_prob
    for s in strings:
        if complement_max > 0:
            length = 1 + src.next_index(min(complement_max, width))
            start = src.next_index(width - length + 1)
            s[start : start + length] ^= 1
        if p > 0:
            s ^= (src.units(width) < p).astype(np.uint8)
    return strings


def _candidates(working: np.ndarray) -> np.ndarray:
    """(parameters, s, bits) -> (s, parameters * bits): candidate k joins the k-th string of each parameter."""
    return working.transpose(1, 0, 2).reshape(working.shape[1], -1)


def pa_optimize(problem: Problem, fields: Sequence[FieldSpec], cfg: PaConfig, src: RandomSource) -> RunTrace:
    if len(fields) != problem.dimension:
        raise ValueError(f"{len(fields)} fields for {problem.name} of dimension {problem.dimension}")
    for f in fields:
        if f.kind != "continuous" or f.bit_width != cfg.string_bits:
            raise ValueError(f"PA needs continuous {cfg.string_bits}-bit fields, got {f}")
    layout = GenomeLayout(tuple(fields))
    trace = RunTrace(sense=problem.sense, genome_kind="bits", extra_columns=TRACE_COLUMNS)
    scorer = Scorer(problem, cfg.penalty_coefficient, trace)
    n_params, s = len(fields), cfg.strings_per_parameter

    def evaluate(working: np.ndarray):
        genomes = _candidates(working)
        vectors = decode_many(genomes, layout)
        raw, g = scorer.evaluate(vectors)
        objectives = scorer.penalise(raw, g)
        scorer.consider(genomes, vectors, raw, g, objectives)
        return genomes, vectors, objectives

    working = src.bits((n_params, s, cfg.string_bits))
    _, vectors, objectives = evaluate(working)
    cost = scorer.cost(objectives)
    k = int(np.argmin(cost))
    state = PaState(
        working=working,
        incumbent=working[:, k, :].copy(),
        incumbent_vector=vectors[k],
        incumbent_cost=float(cost[k]),
    )
    logger.info(f"PA on {problem.name}: {n_params} strings x {cfg.string_bits} bits, {s} candidates per iteration")

    def record(objectives: np.ndarray) -> None:
        finite = np.isfinite(objectives)
        best = state.incumbent_cost if problem.sense == "minimize" else -state.incumbent_cost
        trace.append(
            GenerationRecord(
                generation=state.iteration,
                best_objective=best,
                mean_objective=float(objectives[finite].mean()) if finite.any() else float("nan"),
                best_genome=state.incumbent.reshape(-1).copy(),
                extras=(
                    {"L": state.light, "r": state.rate, "cycle": state.cycle.value}
                    if state.cycle is not None
                    else {}
                ),
            )
        )

    record(objectives)
    trace.stop_reason = "max_iterations"
    while state.iteration < cfg.max_iterations:
        state.iteration += 1
        state.light = light_intensity(cfg, src)
        state.rate = fixation_rate(state.light, cfg)
        state.cycle = choose_cycle(state.rate, cfg, src)
        if state.cycle is Cycle.BENSON_CALVIN:
            for p in range(n_params):
                for j in range(s):
                    pair = benson_calvin_shuffle(np.stack([state.incumbent[p], state.working[p, j]]), src, state.bc_turn)
                    state.working[p, j] = pair[1]
            state.bc_turn += 1
        else:
            for p in range(n_params):
                state.working[p] = photorespiration_shuffle(state.working[p], src, cfg.complement_max, cfg.bit_flip_prob)

        _, vectors, objectives = evaluate(state.working)
        cost = scorer.cost(objectives)
        k = int(np.argmin(cost))
        if cost[k] < state.incumbent_cost:
            state.incumbent = state.working[:, k, :].copy()
            state.incumbent_vector = vectors[k]
            state.incumbent_cost = float(cost[k])
            state.last_improvement = state.iteration
        record(objectives)
        if state.iteration % 50 == 0:
            logger.debug(f"iteration {state.iteration}: L={state.light:.0f} r={state.rate:.3f} best {state.incumbent_cost:.6g}")
        if cfg.stall_window and state.iteration - state.last_improvement >= cfg.stall_window:
            trace.stop_reason = "stalled"
            logger.warning(f"PA on {problem.name}: no improvement for {cfg.stall_window} iterations, stopping at {state.iteration}")
            break

    logger.info(f"PA on {problem.name} finished after {state.iteration} iterations: best {trace.best_objective:.6g}")
    return trace
