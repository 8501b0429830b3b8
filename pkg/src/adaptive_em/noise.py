"""Seedable Gaussian noise and the standard normal distribution function.

Every sample is produced by pushing one open-interval uniform through the
inverse normal CDF, so draw ``k`` of a stream depends only on (seed, stream, k)
and never on how many samples were requested at once.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import erfc

from .errors import ConfigInvalid, NonPositiveStep, OutOfDomain

SQRT2 = math.sqrt(2.0)
INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)
ABS_THIRD_MOMENT = 2.0 * math.sqrt(2.0 / math.pi)  # E|Z|^3 for Z ~ N(0, 1)

# Rational approximation of the normal quantile (P. J. Acklam), relative
# error about 1.2e-9 before polishing.
_A = (-3.969683028665376e01, 2.209460984245205e02, -2.759285104469687e02,
      1.383577518672690e02, -3.066479806614716e01, 2.506628277459239e00)
_B = (-5.447609879822406e01, 1.615858368580409e02, -1.556989798598866e02,
      6.680131188771972e01, -1.328068155288572e01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e00,
      -2.549671010429570e00, 4.374664141464968e00, 2.938163982698783e00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e00,
      3.754408661907416e00)
_P_LOW = 0.02425


def normal_cdf(x):
    """Standard normal CDF; accepts scalars or arrays."""
    out = 0.5 * erfc(-np.asarray(x, dtype=float) / SQRT2)
    return float(out) if np.ndim(out) == 0 else out


def normal_pdf(x):
    x = np.asarray(x, dtype=float)
    return INV_SQRT_2PI * np.exp(-0.5 * x * x)


def _horner(coeffs, t):
    acc = np.full_like(t, coeffs[0])
    for c in coeffs[1:]:
        acc = acc * t + c
    return acc


def _lower_quantile(p: np.ndarray) -> np.ndarray:
    """Quantile for 0 < p <= 0.5, polished by two Newton steps against normal_cdf."""
    x = np.empty_like(p)
    tail = p < _P_LOW
    if np.any(tail):
        q = np.sqrt(-2.0 * np.log(p[tail]))
        x[tail] = _horner(_C, q) / (_horner(_D, q) * q + 1.0)
    mid = ~tail
    if np.any(mid):
        q = p[mid] - 0.5
        r = q * q
        x[mid] = _horner(_A, r) * q / (_horner(_B, r) * r + 1.0)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        for _ in range(2):
            dens = normal_pdf(x)
            step = (0.5 * erfc(-x / SQRT2) - p) / dens
            x = np.where(dens > 0, x - step, x)
    return x


def normal_cdf_inv(p):
    """Inverse of :func:`normal_cdf` on the open interval (0, 1)."""
    arr = np.asarray(p, dtype=float)
    if np.any(~((arr > 0) & (arr < 1))):
        raise OutOfDomain("normal_cdf_inv needs 0 < p < 1")
    flat = arr.ravel()
    out = np.empty_like(flat)
    upper = flat > 0.5
    out[~upper] = _lower_quantile(flat[~upper])
    # 1 - p is exact for p in [0.5, 1], so reflect instead of working near 1.
    out[upper] = -_lower_quantile(1.0 - flat[upper])
    out = out.reshape(arr.shape)
    return float(out) if out.ndim == 0 else out


def open_uniforms(raw: np.ndarray) -> np.ndarray:
    """Map [0, 1) doubles onto the midpoints of a 2**-52 grid, strictly inside (0, 1)."""
    return (np.floor(raw * 2.0**52) + 0.5) * 2.0**-52


class NoiseMode(enum.Enum):
    WIENER = "WienerIncrements"
    IID = "IidInnovations"


def parse_seed(text) -> int:
    """Accept decimal or 0x-hex; the result must fit in 64 unsigned bits."""
    seed = int(text, 0) if isinstance(text, str) else int(text)
    if not 0 <= seed < 2**64:
        raise ConfigInvalid(f"seed {text!r} is not a 64-bit unsigned integer")
    return seed


class NoiseSource:
    """A single-owner stream of standard normal draws.

    ``stream`` selects an independent sub-stream of ``seed``; ensembles use the
    trajectory index so each path has its own reproducible source.
    """

    def __init__(self, seed: int, mode: NoiseMode = NoiseMode.WIENER, stream: int = 0):
        self.seed = parse_seed(seed)
        self.mode = NoiseMode(mode)
        self.stream = int(stream)
        seq = np.random.SeedSequence(self.seed, spawn_key=(self.stream,))
        self._gen = np.random.Generator(np.random.PCG64(seq))
        self.draw_count = 0

    @classmethod
    def for_trajectory(cls, master_seed: int, index: int, mode: NoiseMode = NoiseMode.WIENER) -> "NoiseSource":
        return cls(master_seed, mode, stream=index)

    def __repr__(self):
        return f"NoiseSource(seed={self.seed:#x}, mode={self.mode.value}, stream={self.stream}, draws={self.draw_count})"

    def uniforms(self, k: int) -> np.ndarray:
        """Next ``k`` open-interval uniforms; normals(k) is their image under the inverse CDF.

        Each raw double is one 64-bit generator output, so the values never
        depend on how requests are split.  Batches transform many streams'
        uniforms in one call.
        """
        self.draw_count += k
        return open_uniforms(self._gen.random(k))

    def normals(self, k: int) -> np.ndarray:
        """Next ``k`` standard normal draws of the stream."""
        return normal_cdf_inv(self.uniforms(k)) if k else np.empty(0)

    def wiener_increment(self, h: float) -> float:
        if self.mode is not NoiseMode.WIENER:
            raise ConfigInvalid("wiener_increment needs a WienerIncrements source")
        if not h > 0:
            raise NonPositiveStep(f"step must be > 0, got {h!r}")
        return float(np.sqrt(h) * self.normals(1)[0])

    def wiener_increments(self, h: float, k: int) -> np.ndarray:
        if self.mode is not NoiseMode.WIENER:
            raise ConfigInvalid("wiener_increments needs a WienerIncrements source")
        if not h > 0:
            raise NonPositiveStep(f"step must be > 0, got {h!r}")
        return np.sqrt(h) * self.normals(k)

    def iid_innovation(self) -> float:
        if self.mode is not NoiseMode.IID:
            raise ConfigInvalid("iid_innovation needs an IidInnovations source")
        return float(self.normals(1)[0])


class SplicedSource:
    """Replays draws 0..after of ``head`` and continues with ``tail``.

    Used to show that steps chosen up to draw ``after`` never look at later
    noise.
    """

    def __init__(self, head, tail, after: int):
        self.head = head
        self.tail = tail
        self.after = after
        self.mode = head.mode
        self.draw_count = 0

    def uniforms(self, k: int) -> np.ndarray:
        from_head = max(0, min(k, self.after + 1 - self.draw_count))
        parts = [self.head.uniforms(from_head), self.tail.uniforms(k - from_head)]
        self.draw_count += k
        return np.concatenate(parts)

    def normals(self, k: int) -> np.ndarray:
        return normal_cdf_inv(self.uniforms(k)) if k else np.empty(0)


@dataclass
class MomentStats:
    h: float
    samples: int
    mean: float
    se_mean: float
    second: float
    se_second: float
    abs_third: float
    se_abs_third: float
    third_bound: float
    n_se: float

    @property
    def mean_ok(self) -> bool:
        return abs(self.mean) <= self.n_se * self.se_mean

    @property
    def second_ok(self) -> bool:
        return abs(self.second - self.h) <= self.n_se * self.se_second

    @property
    def third_bound_ok(self) -> bool:
        return self.abs_third <= self.third_bound

    @property
    def third_scaling_ok(self) -> bool:
        expected = ABS_THIRD_MOMENT * self.h**1.5
        return abs(self.abs_third - expected) <= self.n_se * self.se_abs_third

    @property
    def passed(self) -> bool:
        return self.mean_ok and self.second_ok and self.third_bound_ok and self.third_scaling_ok


@dataclass
class MomentReport:
    stats: list[MomentStats] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(s.passed for s in self.stats)

    def for_h(self, h: float) -> MomentStats:
        return next(s for s in self.stats if s.h == h)

    def third_moment_ratio(self, h_hi: float, h_lo: float) -> tuple[float, float, float]:
        """(observed ratio, its standard error, (h_hi/h_lo)**1.5)."""
        a, b = self.for_h(h_hi), self.for_h(h_lo)
        ratio = a.abs_third / b.abs_third
        rel = math.hypot(a.se_abs_third / a.abs_third, b.se_abs_third / b.abs_third)
        return ratio, ratio * rel, (h_hi / h_lo) ** 1.5

    def lines(self) -> list[str]:
        out = []
        for s in self.stats:
            out.append(
                f"h = {s.h:g}: mean {s.mean:.3e} (se {s.se_mean:.1e}) {'ok' if s.mean_ok else 'FAIL'}; "
                f"E dW^2 {s.second:.6g} (se {s.se_second:.1e}) {'ok' if s.second_ok else 'FAIL'}; "
                f"E|dW|^3 {s.abs_third:.6g} <= {s.third_bound:.6g} {'ok' if s.third_bound_ok else 'FAIL'}, "
                f"h^1.5 law {'ok' if s.third_scaling_ok else 'FAIL'}"
            )
        return out


def conditional_moment_check(src: NoiseSource, h_sequence: Sequence[float], samples: int,
                             n_se: float = 4.0, margin: float = 0.03) -> MomentReport:
    """Empirical first three moments of increments drawn over each step in ``h_sequence``.

    Checks E dW = 0 and E dW^2 = h to ``n_se`` standard errors, E|dW|^3 against
    K h^1.5 with K = 2 sqrt(2/pi) (1 + margin), and the h^1.5 law itself.
    """
    report = MomentReport()
    for h in h_sequence:
        dw = src.wiener_increments(h, samples)
        sq = dw * dw
        cube = sq * np.abs(dw)
        report.stats.append(MomentStats(
            h=h,
            samples=samples,
            mean=float(dw.mean()),
            se_mean=float(dw.std(ddof=1) / math.sqrt(samples)),
            second=float(sq.mean()),
            se_second=float(sq.std(ddof=1) / math.sqrt(samples)),
            abs_third=float(cube.mean()),
            se_abs_third=float(cube.std(ddof=1) / math.sqrt(samples)),
            third_bound=ABS_THIRD_MOMENT * (1 + margin) * h**1.5,
            n_se=n_se,
        ))
    return report
