"""State-dependent timestep rules.

The adaptive rules shrink the step so that the per-step drift response
h*f(x) and diffusion response sqrt(h)*g(x) stay below h_bar and sqrt(h_bar):

    floored:    h = h_bar / (1 + floor(f(x)) + floor(g(x)**2))
    unfloored:  h = h_bar / (1 + f(x) + g(x)**2)
    fixed:      h = h_bar

The floored variant makes every step h_bar / m for a positive integer m, which
keeps each t_n a stopping time of the driving Wiener process.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .coeffs import CoefficientModel
from .errors import ConfigInvalid, NonFiniteState, StepOverflowError

# Largest f or g**2 whose floor is still taken as a 64-bit integer.
FLOOR_LIMIT = 2.0**63

# Relative slack on the step-bound comparisons: a few ulps absorb the rounding
# of h_bar/d and of the product h*f, nothing more.
BOUND_RTOL = 4 * np.finfo(float).eps


class StepKind(enum.Enum):
    FLOORED = "floored"
    UNFLOORED = "unfloored"
    FIXED = "fixed"


@dataclass(frozen=True)
class StepRule:
    kind: StepKind
    h_bar: float

    def __post_init__(self):
        if not isinstance(self.h_bar, (int, float)) or not (math.isfinite(self.h_bar) and self.h_bar > 0):
            raise ConfigInvalid(f"h_bar must be a finite real > 0, got {self.h_bar!r}")

    @property
    def adaptive(self) -> bool:
        return self.kind is not StepKind.FIXED


def step_denominators(rule: StepRule, f: np.ndarray, g2: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Return (denominator, overflow) arrays; h = h_bar / denominator where not overflowed."""
    f = np.asarray(f, dtype=float)
    g2 = np.asarray(g2, dtype=float)
    if rule.kind is StepKind.FIXED:
        return np.ones_like(f), np.zeros(f.shape, dtype=bool)
    overflow = ~(np.isfinite(f) & np.isfinite(g2)) | (f >= FLOOR_LIMIT) | (g2 >= FLOOR_LIMIT)
    f = np.where(overflow, 0.0, f)
    g2 = np.where(overflow, 0.0, g2)
    if rule.kind is StepKind.FLOORED:
        return 1.0 + np.floor(f) + np.floor(g2), overflow
    return 1.0 + f + g2, overflow


def step_sizes(rule: StepRule, f: np.ndarray, g: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised step rule from f(x) and g(x).  Overflowed entries hold NaN."""
    g = np.asarray(g, dtype=float)
    d, overflow = step_denominators(rule, f, g * g)
    h = rule.h_bar / d
    h[overflow] = np.nan
    return h, overflow


def compute_step(rule: StepRule, model: CoefficientModel, x: float) -> float:
    if not math.isfinite(x):
        raise NonFiniteState(f"state {x!r} is not finite")
    xs = np.array([x], dtype=float)
    h, overflow = step_sizes(rule, model.f_array(xs), model.g_array(xs))
    if overflow[0]:
        raise StepOverflowError(f"f or g^2 at x={x!r} exceeds {FLOOR_LIMIT:g}")
    return float(h[0])


def step_bounds_hold(h: np.ndarray, h_bar: float, f: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Element-wise check of 0 < h <= h_bar, h f <= h_bar, sqrt(h) g <= sqrt(h_bar)."""
    h = np.asarray(h, dtype=float)
    slack = 1.0 + BOUND_RTOL
    return (
        (h > 0)
        & (h <= h_bar)
        & (h * f <= h_bar * slack)
        & (np.sqrt(h) * g <= np.sqrt(h_bar) * slack)
    )


def check_step_bounds(rule: StepRule, model: CoefficientModel, x: float, h: float) -> bool:
    xs = np.array([x], dtype=float)
    return bool(step_bounds_hold(np.array([h]), rule.h_bar, model.f_array(xs), model.g_array(xs))[0])


def normalized_arrays(f: np.ndarray, g: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    d = 1.0 + f + g * g
    return f / d, g / np.sqrt(d)


def normalized_coefficients(model: CoefficientModel, u: float) -> tuple[float, float]:
    """(f/(1+f+g^2), g/sqrt(1+f+g^2)) at u; both lie in [0, 1]."""
    if not math.isfinite(u):
        raise NonFiniteState(f"state {u!r} is not finite")
    xs = np.array([u], dtype=float)
    phi, gamma = normalized_arrays(model.f_array(xs), model.g_array(xs))
    return float(phi[0]), float(gamma[0])
