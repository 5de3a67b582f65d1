import numpy as np
import pytest

from bioopt.encoding import uniform_layout
from bioopt.pa import (
    CARBON_SCHEDULE,
    Cycle,
    PaConfig,
    _candidates,
    benson_calvin_shuffle,
    choose_cycle,
    fixation_rate,
    light_intensity,
    pa_optimize,
    photorespiration_shuffle,
)
from bioopt.problems import DeJongSpec, Problem, dejong_problem
from bioopt.rand_core import new_source


def test_fixation_rate_is_half_vmax_at_the_affinity():
    cfg = PaConfig()
    assert fixation_rate(cfg.affinity, cfg) == pytest.approx(cfg.v_max / 2)


def test_fixation_rate_grows_with_light():
    cfg = PaConfig()
    rates = [fixation_rate(L, cfg) for L in np.linspace(1e3, 1e5, 50)]
    assert np.all(np.diff(rates) > 0)
    assert rates[-1] < cfg.v_max


def test_fixation_rate_needs_light():
    with pytest.raises(ValueError):
        fixation_rate(0.0, PaConfig())


def test_light_stays_in_range():
    cfg, src = PaConfig(), new_source(0)
    for _ in range(200):
        assert cfg.light_low <= light_intensity(cfg, src) <= cfg.light_high


def test_cycle_choice_extremes():
    cfg, src = PaConfig(), new_source(1)
    assert all(choose_cycle(cfg.v_max, cfg, src) is Cycle.BENSON_CALVIN for _ in range(50))
    assert all(choose_cycle(0.0, cfg, src) is Cycle.PHOTORESPIRATION for _ in range(50))


@pytest.mark.parametrize("turn", range(5))
def test_benson_calvin_swaps_a_schedule_length_segment(turn):
    pair = np.stack([np.zeros(16, dtype=np.uint8), np.ones(16, dtype=np.uint8)])
    out = benson_calvin_shuffle(pair, new_source(turn), turn)
    length = CARBON_SCHEDULE[turn % len(CARBON_SCHEDULE)]
    assert out[0].sum() == length
    ones = np.flatnonzero(out[0])
    assert ones[-1] - ones[0] == length - 1
    np.testing.assert_array_equal(out[0] + out[1], np.ones(16))


def test_benson_calvin_needs_a_pair():
    with pytest.raises(ValueError):
        benson_calvin_shuffle(np.zeros((1, 8), dtype=np.uint8), new_source(0))


def test_photorespiration_complements_a_short_run():
    strings = new_source(2).bits((6, 16))
    out = photorespiration_shuffle(strings, new_source(3), complement_max=4, flip_prob=0.0)
    for before, after in zip(strings, out):
        changed = np.flatnonzero(before != after)
        assert 1 <= changed.size <= 4
        assert changed[-1] - changed[0] == changed.size - 1


def test_photorespiration_can_be_a_no_op():
    strings = new_source(4).bits((3, 16))
    np.testing.assert_array_equal(photorespiration_shuffle(strings, new_source(5), 0, 0.0), strings)


def test_candidates_join_the_kth_string_of_each_parameter():
    working = np.arange(24).reshape(2, 3, 4)
    cands = _candidates(working)
    assert cands.shape == (3, 8)
    np.testing.assert_array_equal(cands[1], np.concatenate([working[0, 1], working[1, 1]]))


def test_config_validation():
    with pytest.raises(ValueError):
        PaConfig(light_low=5e4, light_high=1e4)
    with pytest.raises(ValueError):
        PaConfig(v_max=0.0)
    assert PaConfig(string_bits=8).bit_flip_prob == 0.25


def _dejong_pa(seed: int, iterations: int = 100):
    problem = dejong_problem(DeJongSpec())
    fields = uniform_layout(2, 16, -5.12, 5.12).fields
    cfg = PaConfig(max_iterations=iterations, stall_window=0, strings_per_parameter=4)
    return pa_optimize(problem, fields, cfg, new_source(seed))


def test_pa_incumbent_never_worsens():
    trace = _dejong_pa(0)
    best = trace.best_series()
    assert trace.generations == 101
    assert np.all(np.diff(best) <= 0)
    assert best[-1] < best[0]
    assert trace.stop_reason == "max_iterations"


def test_pa_trace_carries_light_rate_and_cycle():
    trace = _dejong_pa(1, iterations=20)
    assert trace.columns()[-3:] == ["L", "r", "cycle"]
    assert trace.extra_series("L")[0] is None
    cycles = set(trace.extra_series("cycle")[1:])
    assert cycles <= {"benson_calvin", "photorespiration"}
    for L, r in zip(trace.extra_series("L")[1:], trace.extra_series("r")[1:]):
        assert r == pytest.approx(fixation_rate(L, PaConfig()))


def test_pa_is_deterministic():
    assert _dejong_pa(7, 30).to_csv() == _dejong_pa(7, 30).to_csv()


def test_pa_stops_when_stalled():
    flat = Problem("flat", 1, "minimize", lambda x: 1.0, ((0.0, 1.0),))
    fields = uniform_layout(1, 16, 0.0, 1.0).fields
    trace = pa_optimize(flat, fields, PaConfig(stall_window=5), new_source(0))
    assert trace.stop_reason == "stalled"
    assert trace.generations == 6


def test_pa_needs_matching_string_fields():
    problem = dejong_problem(DeJongSpec())
    with pytest.raises(ValueError):
        pa_optimize(problem, uniform_layout(2, 8, -5.12, 5.12).fields, PaConfig(string_bits=16), new_source(0))


def test_light_draws_average_the_interval_midpoint():
    cfg, src = PaConfig(), new_source(40)
    draws = [light_intensity(cfg, src) for _ in range(100_000)]
    assert np.mean(draws) == pytest.approx((cfg.light_low + cfg.light_high) / 2, abs=500.0)


def test_half_rate_picks_each_cycle_half_the_time():
    cfg, src = PaConfig(), new_source(41)
    picks = [choose_cycle(15.0, cfg, src) is Cycle.BENSON_CALVIN for _ in range(100_000)]
    assert np.mean(picks) == pytest.approx(0.5, abs=0.01)


def test_photorespiration_flip_count_matches_the_rate():
    strings = np.zeros((10_000, 16), dtype=np.uint8)
    out = photorespiration_shuffle(strings, new_source(42), complement_max=0, flip_prob=0.1)
    n = strings.size
    sigma = np.sqrt(n * 0.1 * 0.9)
    assert abs(int(out.sum()) - 0.1 * n) <= 4 * sigma
    assert out.shape == strings.shape


@pytest.mark.parametrize("turn", range(4))
def test_benson_calvin_conserves_each_position_pair(turn):
    strings = new_source(43).bits((20_000, 16))
    out = benson_calvin_shuffle(strings, new_source(44), turn)
    assert out.shape == strings.shape
    np.testing.assert_array_equal(out[0::2] + out[1::2], strings[0::2] + strings[1::2])
    np.testing.assert_array_equal(out[0::2] * out[1::2], strings[0::2] * strings[1::2])


def test_benson_calvin_leaves_identical_strings_alone():
    s = new_source(45).bits(16)
    np.testing.assert_array_equal(benson_calvin_shuffle(np.stack([s, s]), new_source(46)), np.stack([s, s]))


def test_zero_iterations_records_the_initial_evaluation():
    trace = _dejong_pa(0, iterations=0)
    assert trace.generations == 1
    assert trace.extra_series("cycle") == [None]


def test_pa_converges_on_the_sphere():
    problem = dejong_problem(DeJongSpec(alpha=1, dimension=2))
    fields = uniform_layout(2, 16, -5.12, 5.12).fields
    trace = pa_optimize(problem, fields, PaConfig(max_iterations=2000, stall_window=0), new_source(47))
    best = trace.best_series()
    assert best[-1] < 1e-2 * best[0]
