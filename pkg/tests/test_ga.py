import numpy as np
import pytest

from bioopt.encoding import uniform_layout
from bioopt.ga import (
    GaConfig,
    Population,
    RealGaConfig,
    blend_crossover,
    crossover,
    crossover_at,
    evolve,
    evolve_real,
    fitness_proportionate,
    fitness_shift,
    gaussian_mutation,
    invert_between,
    invert_segment,
    mutate,
    penalized_objective,
    select_parent,
    shape_fitness,
)
from bioopt.problems import DeJongSpec, Problem, bump_problem, dejong_problem
from bioopt.rand_core import new_source


def test_single_point_crossover_swaps_the_tail():
    p1, p2 = np.zeros(8, dtype=np.uint8), np.ones(8, dtype=np.uint8)
    c1, c2 = crossover_at(p1, p2, [3])
    assert c1.tolist() == [0, 0, 0, 1, 1, 1, 1, 1]
    assert c2.tolist() == [1, 1, 1, 0, 0, 0, 0, 0]


def test_two_point_crossover_swaps_the_middle():
    p1, p2 = np.zeros(8, dtype=np.uint8), np.ones(8, dtype=np.uint8)
    c1, _ = crossover_at(p1, p2, [2, 5])
    assert c1.tolist() == [0, 0, 1, 1, 1, 0, 0, 0]


@pytest.mark.parametrize("points", [1, 2, 3])
def test_crossover_conserves_each_position(points):
    src = new_source(points)
    for _ in range(50):
        p1, p2 = src.bits(20), src.bits(20)
        c1, c2 = crossover(p1, p2, points, src)
        for i in range(20):
            assert sorted((c1[i], c2[i])) == sorted((p1[i], p2[i]))


def test_mutation_identities():
    src = new_source(0)
    c = src.bits(32)
    np.testing.assert_array_equal(mutate(c, 0.0, src), c)
    np.testing.assert_array_equal(mutate(c, 1.0, src), 1 - c)


def test_inversion_is_an_involution():
    c = new_source(1).bits(16)
    once = invert_between(c, 3, 9)
    assert (once != c).sum() == 6
    np.testing.assert_array_equal(invert_between(once, 3, 9), c)
    assert invert_segment(c, new_source(2)).shape == c.shape


def test_fitness_shift_and_proportions():
    assert fitness_shift(3.0, 10.0) == 7.0
    assert fitness_shift(12.0, 10.0) == 0.0
    np.testing.assert_allclose(fitness_proportionate([1.0, 3.0]), [0.25, 0.75])
    np.testing.assert_allclose(fitness_proportionate([0.0, 0.0, 0.0, 0.0]), [0.25] * 4)
    with pytest.raises(ValueError):
        fitness_proportionate([1.0, -1.0])


def test_roulette_never_picks_zero_fitness_members():
    genomes = np.array([[0, 0], [1, 1], [0, 1]], dtype=np.uint8)
    pop = Population(genomes, np.zeros(3), np.array([0.0, 1.0, 0.0]))
    src = new_source(3)
    for _ in range(200):
        assert select_parent(pop, src).tolist() == [1, 1]


def test_shape_fitness_zeroes_failed_members():
    fitness = shape_fitness(np.array([1.0, np.nan, 3.0]), "minimize")
    assert fitness[1] == 0.0
    assert fitness[0] > fitness[2] > 0.0
    np.testing.assert_array_equal(shape_fitness(np.array([-1.0, 2.0]), "maximize"), [0.0, 2.0])


def test_penalty_worsens_in_both_senses():
    assert penalized_objective(1.0, [2.0, -1.0], 10.0) == 41.0
    assert penalized_objective(1.0, [2.0, -1.0], 10.0, "maximize") == -39.0
    assert penalized_objective(1.0, [-2.0], 10.0) == 1.0


def test_config_validation():
    with pytest.raises(ValueError):
        GaConfig(mutation_prob=1.5)
    with pytest.raises(ValueError):
        GaConfig(population_size=10, elitism_count=10)
    with pytest.raises(ValueError):
        RealGaConfig(blend=0.0)


def _dejong_run(seed: int):
    problem = dejong_problem(DeJongSpec(alpha=1, dimension=2))
    cfg = GaConfig(population_size=30, max_generations=30)
    return evolve(problem, uniform_layout(2, 16, -5.12, 5.12), cfg, new_source(seed))


def test_evolve_with_elitism_never_loses_its_best():
    trace = _dejong_run(1)
    assert trace.generations == 31
    assert np.all(np.diff(trace.best_series()) <= 0)
    assert trace.best_objective <= trace.best_series()[0]
    assert trace.stop_reason == "max_generations"


def test_evolve_is_deterministic():
    assert _dejong_run(5).to_csv() == _dejong_run(5).to_csv()
    assert _dejong_run(5).to_csv() != _dejong_run(6).to_csv()


def test_evolve_respects_the_budget():
    problem = dejong_problem(DeJongSpec())
    cfg = GaConfig(population_size=50, max_generations=1000, max_evaluations=500)
    trace = evolve(problem, uniform_layout(2, 12, -5.12, 5.12), cfg, new_source(0))
    assert trace.evaluations <= 500
    assert trace.stop_reason == "budget"


def test_bump_run_keeps_a_feasible_best():
    problem = bump_problem()
    layout = uniform_layout(2, 16, *problem.bounds[0])
    trace = evolve(problem, layout, GaConfig(population_size=40, max_generations=20), new_source(2))
    assert trace.feasible
    assert problem.is_feasible(trace.best_vector)
    assert trace.best_raw_objective == pytest.approx(problem.evaluate(trace.best_vector))


def test_blend_crossover_conserves_the_sum():
    a, b = np.array([1.0, 2.0]), np.array([3.0, -1.0])
    c1, c2 = blend_crossover(a, b, 0.3)
    np.testing.assert_allclose(c1 + c2, a + b)
    np.testing.assert_array_equal(blend_crossover(a, b, 1.0)[0], a)


def test_gaussian_mutation_stays_in_the_box():
    lower, upper = np.zeros(5), np.ones(5)
    src = new_source(4)
    for _ in range(50):
        x = gaussian_mutation(np.full(5, 0.5), lower, upper, 1.0, 10.0, src)
        assert np.all((x >= 0) & (x <= 1))


def test_evolve_real_improves_monotonically():
    problem = dejong_problem(DeJongSpec(alpha=1, dimension=3))
    trace = evolve_real(problem, RealGaConfig(population_size=30, max_generations=40), new_source(8))
    best = trace.best_series()
    assert np.all(np.diff(best) <= 0)
    assert best[-1] < best[0]
    assert trace.genome_kind == "real"
    assert trace.columns()[3] == "best_genome"


def test_evolve_real_observer_fills_extra_columns():
    problem = dejong_problem(DeJongSpec())
    trace = evolve_real(
        problem,
        RealGaConfig(population_size=10, max_generations=3),
        new_source(0),
        observer=lambda best: {"norm": float(np.linalg.norm(best))},
        extra_columns=("norm",),
    )
    assert trace.columns()[-1] == "norm"
    assert all(v is not None for v in trace.extra_series("norm"))


def test_roulette_frequency_follows_fitness():
    genomes = np.array([[0], [1]], dtype=np.uint8)
    pop = Population(genomes, np.zeros(2), np.array([3.0, 1.0]))
    src = new_source(11)
    draws = 100_000
    first = sum(select_parent(pop, src)[0] == 0 for _ in range(draws))
    assert first / draws == pytest.approx(0.75, abs=0.01)


def test_mutation_flip_count_is_binomial():
    src = new_source(12)
    c = np.zeros(1000, dtype=np.uint8)
    flips = [int(mutate(c, 0.01, src).sum()) for _ in range(1000)]
    assert np.mean(flips) == pytest.approx(10.0, abs=1.0)


def test_zero_generations_records_only_the_initial_population():
    problem = dejong_problem(DeJongSpec())
    trace = evolve(problem, uniform_layout(2, 16, -5.12, 5.12), GaConfig(population_size=20, max_generations=0), new_source(0))
    assert trace.generations == 1
    assert trace.evaluations == 20
    assert trace.stop_reason == "max_generations"


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_evolve_converges_on_the_sphere(seed):
    problem = dejong_problem(DeJongSpec(alpha=1, dimension=2))
    cfg = GaConfig(population_size=50, max_generations=100)
    trace = evolve(problem, uniform_layout(2, 16, -5.12, 5.12), cfg, new_source(seed))
    best = trace.best_series()
    assert best[-1] < 1e-2 * best[0]


def _never_feasible() -> Problem:
    return Problem(
        "never-feasible",
        1,
        "minimize",
        lambda x: float(x[0] ** 2),
        ((-1.0, 1.0),),
        constraints=(lambda x: 1.0 + x[0] ** 2,),
        batch_constraints=lambda xs: (1.0 + xs[:, :1] ** 2),
    )


def test_penalty_escalation_keeps_the_best_series_monotone():
    cfg = GaConfig(population_size=20, max_generations=120)
    trace = evolve(_never_feasible(), uniform_layout(1, 12, -1.0, 1.0), cfg, new_source(4))
    best, mean = trace.best_series(), trace.mean_series()
    assert not trace.feasible
    assert np.all(np.diff(best) <= 0)
    # coefficient 1e3 doubles at generations 50 and 100; every squared violation is at least 1
    assert mean[51] >= 2e3
    assert mean[101] >= 4e3
    assert best[-1] < 2e3


def test_real_penalty_escalation_keeps_the_best_series_monotone():
    cfg = RealGaConfig(population_size=20, max_generations=60)
    trace = evolve_real(_never_feasible(), cfg, new_source(5))
    assert np.all(np.diff(trace.best_series()) <= 0)
    assert trace.mean_series()[51] >= 2e3


def test_evolve_real_finds_the_one_gene_minimum():
    problem = Problem("sphere-1", 1, "minimize", lambda x: float(x[0] ** 2), ((-1.0, 1.0),))
    trace = evolve_real(problem, RealGaConfig(population_size=40, max_generations=100), new_source(6))
    assert abs(trace.best_vector[0]) < 0.05


def test_evolve_real_genes_stay_in_bounds():
    seen = []

    def objective(x):
        seen.append(np.array(x))
        return float(np.sum(x))

    problem = Problem("tilted", 3, "minimize", objective, ((0.0, 1.0), (-2.0, 2.0), (5.0, 6.0)))
    evolve_real(problem, RealGaConfig(population_size=20, max_generations=30, sigma=2.0, mutation_prob=0.5), new_source(7))
    xs = np.array(seen)
    assert len(xs) == 20 + 30 * 18
    assert np.all(xs >= problem.lower) and np.all(xs <= problem.upper)


def test_sigma_decays_geometrically():
    cfg = RealGaConfig(sigma=0.5, sigma_final=0.005)
    assert cfg.sigma_at(0.0) == pytest.approx(0.5)
    assert cfg.sigma_at(0.5) == pytest.approx(0.05)
    assert cfg.sigma_at(1.0) == pytest.approx(0.005)
    assert cfg.sigma_at(2.0) == pytest.approx(0.005)
    assert RealGaConfig(sigma=0.5).sigma_at(0.7) == 0.5
    with pytest.raises(ValueError):
        RealGaConfig(sigma_final=0.0)
