import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from adaptive_em.errors import ConfigInvalid, NonPositiveStep, OutOfDomain
from adaptive_em.noise import (
    ABS_THIRD_MOMENT,
    NoiseMode,
    NoiseSource,
    SplicedSource,
    conditional_moment_check,
    normal_cdf,
    normal_cdf_inv,
    open_uniforms,
    parse_seed,
)

mpmath.mp.dps = 50

# Oracle values from mpmath at 50 digits (quantile by bisection on ncdf).
QUANTILE_0_998947 = 3.0748619628100070768
UPPER_TAIL_AT_8 = 6.2209605742717841e-16


def test_cdf_at_zero():
    assert normal_cdf(0.0) == 0.5


def test_cdf_tail_against_oracle():
    assert 1 - normal_cdf(8.0) == pytest.approx(float(1 - mpmath.ncdf(8)), rel=0.2)
    assert normal_cdf(-8.0) == pytest.approx(UPPER_TAIL_AT_8, rel=1e-12)


def test_cdf_matches_mpmath_on_grid():
    xs = np.linspace(-8, 8, 801)
    ours = normal_cdf(xs)
    ref = np.array([float(mpmath.ncdf(mpmath.mpf(float(x)))) for x in xs])
    assert np.max(np.abs(ours - ref)) < 1e-15


def test_cdf_symmetry():
    x = np.random.default_rng(3).uniform(-8, 8, 10_000)
    assert np.max(np.abs(normal_cdf(x) + normal_cdf(-x) - 1)) < 1e-12


def test_inverse_at_reference_point():
    assert normal_cdf_inv(0.998947) == pytest.approx(QUANTILE_0_998947, abs=1e-12)


def test_inverse_round_trip():
    x = np.linspace(-6, 6, 12_001)
    assert np.max(np.abs(normal_cdf_inv(normal_cdf(x)) - x)) < 1e-7


@given(st.floats(1e-300, 1 - 1e-16, exclude_max=False))
def test_inverse_against_mpmath(p):
    if p >= 1:
        return
    ref = mpmath.findroot(lambda z: mpmath.ncdf(z) - p, 0 if 0.01 < p < 0.99 else float(normal_cdf_inv(p)))
    assert normal_cdf_inv(p) == pytest.approx(float(ref), rel=1e-9, abs=1e-9)


@given(st.floats(0.5, 1.0, exclude_max=True))
def test_inverse_is_odd(q):
    # 1 - q is exact for q >= 0.5, so the reflection is exact too.
    assert normal_cdf_inv(1 - q) == -normal_cdf_inv(q)


@pytest.mark.parametrize("p", [0.0, 1.0, -0.1, 1.5, math.nan])
def test_inverse_out_of_domain(p):
    with pytest.raises(OutOfDomain):
        normal_cdf_inv(p)


def test_open_uniforms_strictly_inside():
    raw = np.array([0.0, np.nextafter(1.0, 0.0), 0.5, 2.0**-60])
    u = open_uniforms(raw)
    assert np.all((u > 0) & (u < 1))
    assert np.all(np.isfinite(normal_cdf_inv(u)))


def test_same_seed_same_draws():
    a = NoiseSource(42).normals(5000)
    b = NoiseSource(42).normals(5000)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, NoiseSource(43).normals(5000))
    assert not np.array_equal(a, NoiseSource(42, stream=1).normals(5000))


@settings(max_examples=30)
@given(st.lists(st.integers(1, 2500), min_size=1, max_size=8))
def test_draws_do_not_depend_on_request_sizes(sizes):
    total = sum(sizes)
    whole = NoiseSource(9).normals(total)
    src = NoiseSource(9)
    parts = np.concatenate([src.normals(k) for k in sizes])
    assert np.array_equal(whole, parts)
    assert src.draw_count == total


def test_wiener_increment_scales_the_same_draw():
    z = NoiseSource(5).normals(1)[0]
    assert NoiseSource(5).wiener_increment(0.25) == float(np.sqrt(0.25) * z)


def test_wiener_increment_moments():
    dw = NoiseSource(11).wiener_increments(0.25, 1_000_000)
    n = dw.size
    assert abs(dw.mean()) < 4 * math.sqrt(0.25 / n)
    assert abs(np.mean(dw**2) - 0.25) < 4 * math.sqrt(2 * 0.25**2 / n)
    assert np.mean(np.abs(dw) ** 3) <= ABS_THIRD_MOMENT * 1.03 * 0.25**1.5


def test_iid_innovation_moments():
    src = NoiseSource(12, NoiseMode.IID)
    chi = np.array([src.iid_innovation() for _ in range(20_000)])
    assert abs(chi.mean()) < 4 / math.sqrt(chi.size)
    assert abs(chi.var() - 1) < 4 * math.sqrt(2 / chi.size)


def test_mode_mismatch_and_bad_step():
    with pytest.raises(ConfigInvalid):
        NoiseSource(1, NoiseMode.IID).wiener_increment(0.1)
    with pytest.raises(ConfigInvalid):
        NoiseSource(1).iid_innovation()
    with pytest.raises(NonPositiveStep):
        NoiseSource(1).wiener_increment(0.0)


def test_spliced_source_switches_after_index():
    head, tail = NoiseSource(1).normals(10), NoiseSource(2).normals(10)
    s = SplicedSource(NoiseSource(1), NoiseSource(2), after=3)
    got = np.concatenate([s.normals(2), s.normals(5), s.normals(3)])
    assert np.array_equal(got[:4], head[:4])
    assert np.array_equal(got[4:], tail[:6])


@pytest.mark.parametrize("text,value", [("17", 17), ("0x10", 16), ("0", 0), (str(2**64 - 1), 2**64 - 1)])
def test_parse_seed(text, value):
    assert parse_seed(text) == value


@pytest.mark.parametrize("text", ["-1", str(2**64), "abc"])
def test_parse_seed_rejects(text):
    with pytest.raises((ConfigInvalid, ValueError)):
        parse_seed(text)


def test_moment_check_passes_and_third_moment_law():
    report = conditional_moment_check(NoiseSource(2024), [4.0, 1.0], 200_000)
    assert report.passed
    ratio, se, expected = report.third_moment_ratio(4.0, 1.0)
    assert expected == 8.0
    assert abs(ratio - expected) < 4 * se


def test_moment_check_detects_wrong_variance():
    class Scaled(NoiseSource):
        def wiener_increments(self, h, k):
            return super().wiener_increments(1.1 * h, k)

    report = conditional_moment_check(Scaled(1), [1.0], 200_000)
    assert not report.for_h(1.0).second_ok
    assert not report.passed
