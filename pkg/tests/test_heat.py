import numpy as np
import pytest

from bioopt.ga import RealGaConfig
from bioopt.heat import (
    DEFAULT_TIMES,
    DiffusivityField,
    MeasurementSet,
    StabilityError,
    TemperatureField,
    admissible_dt,
    error_kappa,
    error_u,
    grid_spacing,
    inverse_dt,
    ivbv_inverse,
    ivbv_problem,
    read_kappa_csv,
    simulate,
    simulate_batch,
    step,
    synthetic_kappa,
    write_kappa_csv,
)
from bioopt.rand_core import new_source


def _uniform(n: int, value: float = 1.0) -> DiffusivityField:
    return DiffusivityField(np.full((n, n), value))


def test_zero_field_stays_zero():
    h = grid_spacing(4)
    u = step(TemperatureField(np.zeros((4, 4))), synthetic_kappa(4), admissible_dt(2.0, h), h)
    np.testing.assert_array_equal(u.values, 0.0)


def test_hot_cell_spreads_evenly_to_its_neighbours():
    n, h = 5, grid_spacing(5)
    u0 = np.zeros((n, n))
    u0[2, 2] = 1.0
    dt = admissible_dt(1.0, h)
    u = step(TemperatureField(u0), _uniform(n), dt, h).values
    neighbours = [u[1, 2], u[3, 2], u[2, 1], u[2, 3]]
    assert neighbours[0] > 0
    assert neighbours == pytest.approx([neighbours[0]] * 4, rel=1e-14)
    assert neighbours[0] == pytest.approx(dt / h**2)


def test_constant_kappa_is_the_five_point_stencil():
    n, h, c = 4, grid_spacing(4), 1.7
    u = new_source(0).units((n, n))
    dt = 0.5 * admissible_dt(c, h)
    p = np.pad(u, 1)
    expected = u + c * dt / h**2 * (p[:-2, 1:-1] + p[2:, 1:-1] + p[1:-1, :-2] + p[1:-1, 2:] - 4 * u)
    got = step(TemperatureField(u), _uniform(n, c), dt, h).values
    np.testing.assert_allclose(got, expected, rtol=1e-13, atol=1e-15)


def test_unstable_step_is_rejected_with_the_admissible_dt():
    h = grid_spacing(4)
    bound = admissible_dt(2.0, h)
    with pytest.raises(StabilityError) as info:
        step(TemperatureField(np.ones((4, 4))), _uniform(4, 2.0), 1.5 * bound, h)
    assert info.value.admissible == pytest.approx(bound)
    assert isinstance(info.value, ValueError)


def test_first_snapshot_at_dt_is_one_step():
    n, h = 6, grid_spacing(6)
    kappa = synthetic_kappa(n)
    dt = inverse_dt(0.01, h, 5.0)
    measured = simulate(kappa, (dt, 2 * dt, 3 * dt), dt, h)
    one = step(TemperatureField(np.ones((n, n))), kappa, dt, h)
    np.testing.assert_allclose(measured.snapshots[0], one.values, rtol=1e-15)


def test_snapshots_obey_the_maximum_principle_and_lose_heat():
    n, h = 8, grid_spacing(8)
    dt = inverse_dt(DEFAULT_TIMES[0], h, 5.0)
    measured = simulate(synthetic_kappa(n), DEFAULT_TIMES, dt, h)
    assert measured.snapshots.shape == (3, n, n)
    assert np.all(measured.snapshots >= 0.0) and np.all(measured.snapshots <= 1.0)
    totals = measured.snapshots.sum(axis=(1, 2))
    assert n * n > totals[0] > totals[1] > totals[2]


def test_uniform_kappa_keeps_rotational_symmetry():
    n, h = 6, grid_spacing(6)
    dt = inverse_dt(0.01, h, 1.0)
    for snap in simulate(_uniform(n), (0.01, 0.02, 0.03), dt, h).snapshots:
        np.testing.assert_allclose(snap, np.rot90(snap), rtol=1e-12)


def test_times_must_be_multiples_of_dt():
    h = grid_spacing(4)
    with pytest.raises(ValueError):
        simulate(_uniform(4), (0.01, 0.0155), 0.001, h)
    with pytest.raises(ValueError):
        simulate(_uniform(4), (0.02, 0.01), 0.001, h)


def test_batch_simulation_matches_single_runs():
    n, h = 4, grid_spacing(4)
    kappas = new_source(1).uniform(0.5, 2.0, (3, n, n))
    dt = inverse_dt(0.01, h, 2.0)
    batch = simulate_batch(kappas, (0.01, 0.02), dt, h)
    for k, snaps in zip(kappas, batch):
        np.testing.assert_allclose(snaps, simulate(DiffusivityField(k), (0.01, 0.02), dt, h).snapshots, rtol=1e-14)


def _measurements(n: int) -> MeasurementSet:
    h = grid_spacing(n)
    return simulate(synthetic_kappa(n), DEFAULT_TIMES, inverse_dt(DEFAULT_TIMES[0], h, 5.0), h)


def test_error_u_properties():
    m = _measurements(4)
    zero = MeasurementSet(m.times, np.zeros_like(m.snapshots), m.dt)
    other = MeasurementSet(m.times, 0.9 * m.snapshots, m.dt)
    assert error_u(m, m) == 0.0
    assert error_u(m, zero) == pytest.approx(100.0)
    assert error_u(m, other) == pytest.approx(10.0)
    scaled_m = MeasurementSet(m.times, 3.0 * m.snapshots, m.dt)
    scaled_other = MeasurementSet(m.times, 3.0 * other.snapshots, m.dt)
    assert error_u(scaled_m, scaled_other) == pytest.approx(error_u(m, other))
    with pytest.raises(ValueError):
        error_u(zero, m)


def test_error_kappa_properties():
    known = synthetic_kappa(5)
    assert error_kappa(known, known) == 0.0
    assert error_kappa(known, DiffusivityField(2 * known.values)) == pytest.approx(100.0)
    a = DiffusivityField(known.values * 1.1)
    assert error_kappa(DiffusivityField(4 * known.values), DiffusivityField(4 * a.values)) == pytest.approx(error_kappa(known, a))


def test_diffusivity_must_be_positive():
    with pytest.raises(ValueError):
        DiffusivityField(np.zeros((3, 3)))
    with pytest.raises(ValueError):
        DiffusivityField(np.ones((3, 4)))


def test_synthetic_target_range():
    k = synthetic_kappa(8).values
    assert k.min() >= 0.5 and k.max() == pytest.approx(2.0)


def test_true_kappa_is_a_perfect_fit():
    m = _measurements(5)
    problem = ivbv_problem(m)
    assert problem.dimension == 25
    assert problem.evaluate(synthetic_kappa(5).values.ravel()) == pytest.approx(0.0, abs=1e-12)
    xs = new_source(2).uniform(problem.lower, problem.upper, (4, 25))
    np.testing.assert_allclose(problem.evaluate_batch(xs), [problem.evaluate(x) for x in xs], rtol=1e-12)


def test_ivbv_rejects_a_dt_unstable_for_the_gene_bounds():
    n, h = 4, grid_spacing(4)
    dt = inverse_dt(0.01, h, 1.0)
    m = simulate(_uniform(n), (0.01,), dt, h)
    with pytest.raises(StabilityError):
        ivbv_problem(m, (0.1, 5.0))


def test_ivbv_inverse_short_run_logs_both_errors():
    m = _measurements(4)
    estimate, trace = ivbv_inverse(m, RealGaConfig(population_size=20, max_generations=10, sigma=0.02), new_source(4), known=synthetic_kappa(4))
    assert estimate.values.shape == (4, 4)
    assert trace.columns()[-2:] == ["e_u", "e_kappa"]
    best = trace.best_series()
    assert np.all(np.diff(best) <= 0)
    np.testing.assert_allclose(trace.extra_series("e_u"), best, rtol=1e-10)
    assert all(e >= 0 for e in trace.extra_series("e_kappa"))


def test_kappa_csv_round_trip(tmp_path):
    kappa = synthetic_kappa(3)
    path = tmp_path / "kappa.csv"
    write_kappa_csv(path, kappa, ["bioopt 0.1.0", "seed=1"])
    assert path.read_text().startswith("# bioopt 0.1.0\n# seed=1\n")
    np.testing.assert_array_equal(read_kappa_csv(path).values, kappa.values)
