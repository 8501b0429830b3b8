import math

import numpy as np
import pytest
from scipy import stats

from adaptive_em.errors import ConfigInvalid, StepBoundViolation
from adaptive_em.noise import NoiseMode, NoiseSource
from adaptive_em import simulator
from adaptive_em.simulator import (
    Scheme,
    SimConfig,
    Verdict,
    em_step,
    normalized_step,
    run_trajectory,
    simulate_batch,
    simulate_ensemble,
    trajectory_source,
)
from adaptive_em.stepper import StepKind, StepRule

from conftest import poly


def cfg_for(nu=2.0, sigma=2.0, h_bar=1.0, kind=StepKind.FLOORED, **kw):
    return SimConfig(poly(nu, sigma), StepRule(kind, h_bar), **kw)


def test_em_step_examples():
    assert em_step(1.0, 0.5, 1.0, 2.0, 0.0) == 1.5
    assert em_step(2.0, 0.25, 1.0, 1.0, -1.0) == 0.5
    assert em_step(0.0, 1.0, 5.0, 5.0, 3.0) == 0.0


def test_normalized_step_examples():
    assert normalized_step(1.0, 1.0, 1 / 3, 1 / math.sqrt(3), 0.0) == pytest.approx(4 / 3)
    assert normalized_step(2.0, 0.25, 0.5, 1.0, 2.0) == pytest.approx(2 * (1 + 0.125 + 1.0))


def test_zero_initial_value_is_absorbing():
    cfg = cfg_for(initial=0.0, zero_window=100)
    rec = run_trajectory(cfg, NoiseSource(1))
    assert rec.verdict is Verdict.CONVERGED
    assert rec.step_count == 100
    assert np.all(rec.states == 0)
    assert np.all(rec.h == 1.0)


def test_recorded_steps_follow_the_rule_exactly():
    cfg = cfg_for(sigma=3.0, h_bar=0.1, max_steps=2000)
    rec = run_trajectory(cfg, NoiseSource(4))
    f = np.abs(rec.x) ** 2
    g = 3.0 * np.abs(rec.x)
    assert np.array_equal(rec.h, 0.1 / (1 + np.floor(f) + np.floor(g * g)))
    assert np.array_equal(rec.states[1:], rec.x * (1 + rec.h * f + g * rec.dW))


def test_times_are_cumulative_step_sums():
    rec = run_trajectory(cfg_for(max_steps=500), NoiseSource(2))
    assert rec.t[0] == 0
    assert np.array_equal(rec.times[1:], np.cumsum(rec.h))


def test_increments_are_scaled_stream_draws():
    rec = run_trajectory(cfg_for(max_steps=300), NoiseSource(6))
    z = NoiseSource(6).normals(rec.step_count)
    assert np.array_equal(rec.dW, np.sqrt(rec.h) * z)


def test_first_nonpositive_bookkeeping():
    cfg = cfg_for(sigma=3.0, h_bar=1.0, max_steps=10_000)
    res = simulate_ensemble(cfg, 7, 50)
    records = simulate_batch(cfg, [trajectory_source(cfg, 7, i) for i in range(50)], record=True).records
    seen = 0
    for i, rec in enumerate(records):
        expected = rec.first_nonpositive_index
        assert res.first_nonpositive[i] == (-1 if expected is None else expected)
        if expected is not None:
            seen += 1
            assert rec.states[expected] <= 0 and np.all(rec.states[:expected] > 0)
    assert seen > 0


def test_batch_matches_single_runs_bit_for_bit():
    cfg = cfg_for(sigma=2.0, max_steps=3000)
    batch = simulate_batch(cfg, [trajectory_source(cfg, 99, i) for i in range(20)], record=True)
    for i in (0, 7, 19):
        single = run_trajectory(cfg, trajectory_source(cfg, 99, i))
        rec = batch.records[i]
        assert single.verdict is rec.verdict
        for name in ("n", "t", "h", "x", "dW"):
            assert np.array_equal(getattr(single, name), getattr(rec, name))
        assert single.final_x == rec.final_x


def test_ensemble_independent_of_chunking_and_workers():
    cfg = cfg_for(sigma=1.5, max_steps=2000)
    a = simulate_ensemble(cfg, 3, 60, chunk_size=60)
    b = simulate_ensemble(cfg, 3, 60, chunk_size=7)
    c = simulate_ensemble(cfg, 3, 60, chunk_size=16, workers=2)
    for other in (b, c):
        for name in ("verdict", "steps", "final_time", "final_x", "h_sum", "x_min", "x_max"):
            assert np.array_equal(getattr(a, name), getattr(other, name))


def test_ode_explosion_small_step():
    rec = run_trajectory(cfg_for(sigma=0.0, h_bar=0.01), NoiseSource(0))
    assert rec.verdict is Verdict.EXPLODED
    assert 0.48 <= rec.final_time <= 0.51


def test_ode_explosion_time_improves_as_step_shrinks():
    t = {h: run_trajectory(cfg_for(sigma=0.0, h_bar=h), NoiseSource(0)).final_time for h in (1.0, 0.1)}
    assert abs(t[0.1] - 0.5) < abs(t[1.0] - 0.5)


def test_step_overflow_verdict():
    cfg = cfg_for(nu=60.0, sigma=1.0, initial=3.0, explosion_threshold=1e300)
    rec = run_trajectory(cfg, NoiseSource(0))
    assert rec.verdict is Verdict.OVERFLOW
    assert rec.step_count == 0


def test_horizon_by_time():
    rec = run_trajectory(cfg_for(sigma=3.0, h_bar=0.1, max_time=2.0), NoiseSource(0))
    assert rec.verdict is Verdict.HORIZON
    assert rec.final_time >= 2.0 and rec.t[-1] < 2.0


def test_converged_needs_full_window_below_threshold():
    cfg = cfg_for(sigma=2.0, zero_threshold=1e-2, zero_window=25, max_steps=20_000)
    rec = run_trajectory(cfg, NoiseSource(5))
    assert rec.verdict is Verdict.CONVERGED
    assert np.all(np.abs(rec.states[-25:]) < 1e-2)
    assert abs(rec.states[-26]) >= 1e-2


def test_step_sizes_approach_h_bar_near_equilibrium():
    cfg = cfg_for(sigma=2.0, h_bar=1.0, zero_threshold=1e-2)
    res = simulate_ensemble(cfg, 11, 200)
    conv = res.verdict == list(Verdict).index(Verdict.CONVERGED)
    assert conv.sum() > 150
    assert np.mean(res.h_tail_mean[conv]) >= 0.95


def test_bound_violation_is_raised(monkeypatch):
    def always_h_bar(rule, f, g):
        return np.full(np.shape(f), rule.h_bar), np.zeros(np.shape(f), dtype=bool)

    monkeypatch.setattr(simulator, "step_sizes", always_h_bar)
    with pytest.raises(StepBoundViolation):
        run_trajectory(cfg_for(sigma=3.0, initial=2.0), NoiseSource(0))


def test_fixed_rule_counts_but_tolerates_violations():
    cfg = cfg_for(sigma=3.0, h_bar=0.5, kind=StepKind.FIXED, max_steps=50)
    res = simulate_ensemble(cfg, 1, 5)
    assert res.bound_violations.sum() > 0


def test_scheme_and_source_modes_must_match():
    with pytest.raises(ConfigInvalid):
        run_trajectory(cfg_for(scheme=Scheme.NORMALIZED), NoiseSource(1, NoiseMode.WIENER))


def test_normalized_scheme_has_same_one_step_law():
    # From a fixed state, X_1/X_0 - 1 under both schemes is Gaussian with mean
    # h_bar*Phi and standard deviation sqrt(h_bar)*Gamma when the unfloored rule is used.
    n = 100_000
    x0, h_bar, sigma = 1.3, 0.5, 2.0
    strong = cfg_for(sigma=sigma, h_bar=h_bar, kind=StepKind.UNFLOORED, initial=x0, max_steps=1)
    norm = cfg_for(sigma=sigma, h_bar=h_bar, kind=StepKind.UNFLOORED, initial=x0, max_steps=1,
                   scheme=Scheme.NORMALIZED)
    a = simulate_ensemble(strong, 21, n).final_x
    b = simulate_ensemble(norm, 22, n).final_x
    assert stats.ks_2samp(a, b).pvalue > 1e-3
    f, g = x0**2, sigma * x0
    d = 1 + f + g * g
    assert stats.kstest(b, "norm", args=(x0 * (1 + h_bar * f / d), x0 * math.sqrt(h_bar) * g / math.sqrt(d))).pvalue > 1e-3


def test_csv_format(tmp_path):
    rec = run_trajectory(cfg_for(sigma=0.0, h_bar=0.1), NoiseSource(0))
    path = tmp_path / "t.csv"
    text = rec.to_csv(path)
    raw = path.read_bytes()
    assert b"\r" not in raw and raw.decode() == text
    lines = text.splitlines()
    assert lines[0] == "n,t,h,x,dW"
    assert len(lines) == rec.step_count + 2
    first = lines[1].split(",")
    assert first[0] == "0" and float(first[3]) == 1.0
    last = lines[-1].split(",")
    assert last[2] == "" and last[4] == "" and float(last[3]) == rec.final_x
    assert float(lines[5].split(",")[3]) == rec.x[4]


@pytest.mark.parametrize("kw", [
    dict(initial=-1.0), dict(initial=math.nan), dict(max_steps=0), dict(zero_window=0),
    dict(max_time=0.0), dict(zero_threshold=2.0), dict(explosion_threshold=0.5),
])
def test_config_validation(kw):
    with pytest.raises(ConfigInvalid):
        cfg_for(**kw)
