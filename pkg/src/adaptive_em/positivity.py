"""Step-scale bounds that keep the first N iterates positive with probability >= 1 - eps.

On the event that X_0..X_i are positive, X_{i+1} > 0 whenever the normalised
increment dW/sqrt(h_i) exceeds -1/sqrt(h_bar), so

    P[X_0 > 0, ..., X_N > 0] >= Phi(1/sqrt(h_bar))**N.

Requiring the right side to be at least 1 - eps gives the exact bound
h_bar <= 1/Phi^{-1}(p)**2 with p = (1 - eps)**(1/N).  The lower Sasvari-Chen
estimate Phi(x) > 1/2 + sqrt(1 - exp(-x**2/2))/2 gives a bound that needs no
quantile: h_bar <= 1/(2 ln(1/(1 - q**2))) with q = 2p - 1.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .errors import ConfigInvalid, OutOfDomain
from .noise import normal_cdf, normal_cdf_inv
from .simulator import SimConfig, simulate_ensemble


class _Unconstrained:
    """Every h_bar > 0 meets the requested guarantee."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "Unconstrained"

    __str__ = __repr__


UNCONSTRAINED = _Unconstrained()

WILSON_Z = 1.959963984540054  # two-sided 95%


def _per_step_target(epsilon: float, n_steps: int) -> tuple[float, float]:
    """(p, 1 - p) for p = (1 - eps)**(1/N), with 1 - p computed without cancellation."""
    if not 0 < epsilon < 1:
        raise OutOfDomain(f"epsilon must lie in (0, 1), got {epsilon!r}")
    if int(n_steps) != n_steps or n_steps < 1:
        raise OutOfDomain(f"n_steps must be a positive integer, got {n_steps!r}")
    log_p = math.log1p(-epsilon) / n_steps
    return math.exp(log_p), -math.expm1(log_p)


def exact_step_bound(epsilon: float, n_steps: int):
    p, tail = _per_step_target(epsilon, n_steps)
    if p <= 0.5:
        return UNCONSTRAINED
    return 1.0 / normal_cdf_inv(tail) ** 2


def sasvari_chen_step_bound(epsilon: float, n_steps: int):
    p, tail = _per_step_target(epsilon, n_steps)
    if 2 * p - 1 <= 0:
        return UNCONSTRAINED
    # 1 - q^2 = 4 p (1 - p) for q = 2p - 1.
    return 1.0 / (-2.0 * math.log(4.0 * p * tail))


def per_step_floor(h_bar: float) -> float:
    """Lower bound Phi(1/sqrt(h_bar)) on each one-step survival probability."""
    return normal_cdf(1.0 / math.sqrt(h_bar))


def wilson_interval(successes: int, trials: int, z: float = WILSON_Z) -> tuple[float, float]:
    if trials < 1:
        raise ConfigInvalid("wilson_interval needs at least one trial")
    phat = successes / trials
    denom = 1 + z * z / trials
    centre = (phat + z * z / (2 * trials)) / denom
    half = z * math.sqrt(phat * (1 - phat) / trials + z * z / (4 * trials * trials)) / denom
    return max(0.0, centre - half), min(1.0, centre + half)


@dataclass
class PositivityReport:
    epsilon: float
    n_steps: int
    h_exact: object
    h_sasvari_chen: object
    h_bar: Optional[float] = None
    per_step_floor: Optional[float] = None
    guaranteed_probability: Optional[float] = None
    mc_frequency: Optional[float] = None
    mc_trials: Optional[int] = None
    wilson_low: Optional[float] = None
    wilson_high: Optional[float] = None

    @property
    def wilson_half_width(self) -> Optional[float]:
        if self.wilson_low is None:
            return None
        return (self.wilson_high - self.wilson_low) / 2

    def as_dict(self) -> dict:
        return {
            "epsilon": self.epsilon,
            "n_steps": self.n_steps,
            "h_exact": self.h_exact,
            "h_sasvari_chen": self.h_sasvari_chen,
            "h_bar": self.h_bar,
            "per_step_floor": self.per_step_floor,
            "guaranteed_probability": self.guaranteed_probability,
            "mc_frequency": self.mc_frequency,
            "mc_trials": self.mc_trials,
            "wilson_low": self.wilson_low,
            "wilson_high": self.wilson_high,
        }


def positivity_bounds(epsilon: float, n_steps: int, h_bar: Optional[float] = None) -> PositivityReport:
    report = PositivityReport(epsilon, n_steps, exact_step_bound(epsilon, n_steps),
                              sasvari_chen_step_bound(epsilon, n_steps))
    if h_bar is not None:
        report.h_bar = h_bar
        report.per_step_floor = per_step_floor(h_bar)
        report.guaranteed_probability = report.per_step_floor ** n_steps
    return report


def mc_positivity(cfg: SimConfig, trials: int, master_seed: int, epsilon: float = 0.1,
                  workers: int = 1) -> PositivityReport:
    """Fraction of ``trials`` paths with X_0, ..., X_N all positive, N = cfg.max_steps.

    Paths run the full N steps without stopping near zero.  A path that blows
    up to +inf before step N while staying positive counts as positive.
    """
    if not cfg.initial > 0:
        raise ConfigInvalid("positivity runs need initial > 0")
    run_cfg = replace(cfg, stop_at_zero=False)
    result = simulate_ensemble(run_cfg, master_seed, trials, workers=workers)
    positive = int(np.count_nonzero(result.first_nonpositive < 0))
    report = positivity_bounds(epsilon, cfg.max_steps, cfg.rule.h_bar)
    report.mc_frequency = positive / trials
    report.mc_trials = trials
    report.wilson_low, report.wilson_high = wilson_interval(positive, trials)
    return report
