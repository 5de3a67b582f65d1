"""Multi-seed benchmark campaigns. Run with ``pytest -m slow``."""

import numpy as np
import pytest

from bioopt.encoding import uniform_layout, vessel_layout
from bioopt.fem import BEAM_TARGET_Y, beam_model, fem_inverse, solve_displacements
from bioopt.ga import GaConfig, RealGaConfig, evolve
from bioopt.heat import DEFAULT_TIMES, grid_spacing, inverse_dt, ivbv_inverse, simulate, synthetic_kappa
from bioopt.pa import PaConfig
from bioopt.problems import (
    BUMP_ORACLE_F,
    DeJongSpec,
    bump_constraints,
    bump_problem,
    dejong_problem,
    vessel_problem,
)
from bioopt.rand_core import new_source

pytestmark = pytest.mark.slow

SEEDS = range(5)


def test_dejong_power_function_converges():
    problem = dejong_problem(DeJongSpec(alpha=3, half_length=256.0, dimension=40))
    layout = uniform_layout(40, 16, -256.0, 256.0)
    # about one flipped bit per four 640-bit children; two-point crossover keeps long runs of good genes
    cfg = GaConfig(population_size=100, max_generations=200, mutation_prob=1 / 640, crossover_points=2, elitism_count=10)
    ratios = []
    for seed in SEEDS:
        best = evolve(problem, layout, cfg, new_source(seed)).best_series()
        ratios.append(best[-1] / best[0])
    assert np.median(ratios) <= 1e-3


def test_bump_reaches_the_constrained_maximum():
    problem = bump_problem()
    layout = uniform_layout(2, 20, *problem.bounds[0])
    cfg = GaConfig(population_size=100, max_generations=1000, max_evaluations=100_000)
    hits = 0
    for seed in SEEDS:
        trace = evolve(problem, layout, cfg, new_source(seed))
        assert trace.evaluations <= 100_000
        g = bump_constraints(*trace.best_vector)
        if max(g) <= 1e-6 and trace.best_raw_objective >= max(0.36, 0.98 * BUMP_ORACLE_F):
            hits += 1
    assert hits >= 3


def test_vessel_finds_a_cheap_feasible_design():
    layout = vessel_layout()
    problem = vessel_problem(layout.bounds)
    cfg = GaConfig(population_size=100, max_generations=1000, mutation_prob=0.02, max_evaluations=100_000)
    hits = 0
    for seed in SEEDS:
        trace = evolve(problem, layout, cfg, new_source(seed))
        if trace.feasible and trace.best_raw_objective <= 7350.0:
            hits += 1
    assert hits >= 3


@pytest.mark.xfail(reason="six free displacements cannot pin down eight material parameters", strict=False)
def test_fem_inverse_recovers_the_materials():
    target = np.array(BEAM_TARGET_Y)
    measured = solve_displacements(beam_model(target))
    cfg = PaConfig(max_iterations=500, strings_per_parameter=32, stall_window=0)
    passes = 0
    for seed in SEEDS:
        estimate, _ = fem_inverse(measured, cfg, new_source(seed))
        e_ok = np.all(np.abs(estimate[0::2] - target[0::2]) <= 0.1 * target[0::2])
        nu_ok = np.all(np.abs(estimate[1::2] - target[1::2]) <= 0.06)
        passes += bool(e_ok and nu_ok)
    assert passes >= 3


def test_ivbv_recovers_a_smooth_diffusivity():
    n = 8
    h = grid_spacing(n)
    target = synthetic_kappa(n)
    measured = simulate(target, DEFAULT_TIMES, inverse_dt(DEFAULT_TIMES[0], h, 5.0), h)
    cfg = RealGaConfig(
        population_size=30,
        max_generations=2000,
        sigma=0.5,
        sigma_final=0.005,
        mutation_prob=0.03,
        max_evaluations=40_000,
    )
    hits = 0
    for seed in SEEDS:
        _, trace = ivbv_inverse(measured, cfg, new_source(seed), known=target)
        assert trace.evaluations <= 40_000
        e_kappa = trace.extra_series("e_kappa")
        if trace.best_objective <= 5.0 and e_kappa[-1] <= e_kappa[0] / 5.0:
            hits += 1
    assert hits >= 3
