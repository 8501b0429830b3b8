"""Coefficient models for dX = X f(X) dt + X g(X) dW and their stability classification.

Both coefficients must be non-negative, and the diffusion multiplier must not
vanish away from the equilibrium.  The stability of X = 0 is governed by the
ratio 2 f(u) / g(u)**2: uniformly below one the diffusion wins and paths
collapse onto zero, above one near zero it cannot hold the drift back.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import (
    ConfigInvalid,
    NonNegativityViolation,
    NonPositiveInitial,
    ZeroDiffusionAtNonzero,
)

BOUNDARY_TOL = 1e-12


class ModelKind(enum.Enum):
    POLYNOMIAL = "Polynomial"
    CUSTOM = "Custom"


@dataclass(frozen=True)
class CoefficientModel:
    """The pair (f, g).

    Use :meth:`polynomial` for f(u) = |u|**nu, g(u) = sigma |u|**(nu/2), or
    :meth:`custom` for arbitrary callables.  Custom callables are applied
    element-wise unless ``vectorized`` is set, in which case they receive the
    whole state array.
    """

    kind: ModelKind
    nu: float = 0.0
    sigma: float = 0.0
    f_eval: Optional[Callable] = field(default=None, compare=False)
    g_eval: Optional[Callable] = field(default=None, compare=False)
    vectorized: bool = False

    def __post_init__(self):
        if self.kind is ModelKind.POLYNOMIAL:
            if not (math.isfinite(self.nu) and self.nu >= 0):
                raise ConfigInvalid(f"nu must be finite and >= 0, got {self.nu!r}")
            if not (math.isfinite(self.sigma) and self.sigma >= 0):
                raise ConfigInvalid(f"sigma must be finite and >= 0, got {self.sigma!r}")
        elif self.f_eval is None or self.g_eval is None:
            raise ConfigInvalid("custom models need both f_eval and g_eval")

    @classmethod
    def polynomial(cls, nu: float, sigma: float) -> "CoefficientModel":
        return cls(ModelKind.POLYNOMIAL, nu=float(nu), sigma=float(sigma))

    @classmethod
    def custom(cls, f: Callable, g: Callable, vectorized: bool = False) -> "CoefficientModel":
        return cls(ModelKind.CUSTOM, f_eval=f, g_eval=g, vectorized=vectorized)

    def describe(self) -> str:
        if self.kind is ModelKind.POLYNOMIAL:
            return f"Polynomial(nu={self.nu:g}, sigma={self.sigma:g})"
        return "Custom"

    # Array evaluation is the single code path; the scalar helpers below
    # wrap it so that recomputing a step from a recorded state is bit-exact.

    def f_array(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.kind is ModelKind.POLYNOMIAL:
            return np.abs(x) ** self.nu
        out = self._apply(self.f_eval, x)
        if np.any(out < 0):
            bad = x[out < 0][0]
            raise NonNegativityViolation(f"f({bad!r}) < 0")
        return out

    def g_array(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.kind is ModelKind.POLYNOMIAL:
            return self.sigma * np.abs(x) ** (self.nu / 2)
        out = self._apply(self.g_eval, x)
        if np.any(out < 0):
            bad = x[out < 0][0]
            raise NonNegativityViolation(f"g({bad!r}) < 0")
        vanishing = (out == 0) & (x != 0)
        if np.any(vanishing):
            raise ZeroDiffusionAtNonzero(f"g({x[vanishing][0]!r}) == 0")
        return out

    def _apply(self, fn: Callable, x: np.ndarray) -> np.ndarray:
        if self.vectorized:
            return np.asarray(fn(x), dtype=float).reshape(x.shape)
        return np.array([fn(float(u)) for u in x.ravel()], dtype=float).reshape(x.shape)


def eval_f(model: CoefficientModel, u: float) -> float:
    return float(model.f_array(np.array([u]))[0])


def eval_g(model: CoefficientModel, u: float) -> float:
    return float(model.g_array(np.array([u]))[0])


class StabilityClass(enum.Enum):
    STABLE = "AlmostSureStable"
    UNSTABLE = "AlmostSureUnstable"
    BOUNDARY = "Boundary"
    INDETERMINATE = "Indeterminate"


# Human-readable names of the two sufficient conditions.
STABLE_CONDITION = "sup_{u!=0} 2f(u)/g(u)^2 < 1"
UNSTABLE_CONDITION = "liminf_{u->0} 2f(u)/g(u)^2 > 1"


@dataclass(frozen=True)
class StabilityVerdict:
    ratio_sup: float
    ratio_liminf_at_zero: float
    stability_class: StabilityClass
    degenerate: bool = False

    @property
    def governing_condition(self) -> Optional[str]:
        if self.stability_class is StabilityClass.STABLE:
            return STABLE_CONDITION
        if self.stability_class is StabilityClass.UNSTABLE:
            return UNSTABLE_CONDITION
        return None

    def render(self) -> str:
        ratio = self.ratio_sup
        if self.ratio_sup != self.ratio_liminf_at_zero:
            ratio_text = f"ratio sup {self.ratio_sup:g}, ratio at zero {self.ratio_liminf_at_zero:g}"
        else:
            ratio_text = f"ratio {ratio:g}"
        line = f"{self.stability_class.value}, {ratio_text}"
        if self.governing_condition:
            line += f" (condition: {self.governing_condition})"
        if self.degenerate:
            line += " [no diffusion: deterministic explosion regime]"
        return line


def _classify(sup: float, at_zero: float) -> StabilityClass:
    if sup < 1 - BOUNDARY_TOL:
        return StabilityClass.STABLE
    if at_zero > 1 + BOUNDARY_TOL:
        return StabilityClass.UNSTABLE
    if abs(sup - 1) <= BOUNDARY_TOL or abs(at_zero - 1) <= BOUNDARY_TOL:
        return StabilityClass.BOUNDARY
    return StabilityClass.INDETERMINATE


def classify_stability(model: CoefficientModel, probe_grid: Sequence[float] = ()) -> StabilityVerdict:
    """Classify X = 0 from the ratio 2f/g**2.

    Polynomial models have the constant ratio 2/sigma**2 and ignore the grid.
    For custom models the supremum is estimated by the grid maximum and the
    limit at zero by the ratio at the grid point closest to zero.  When the
    two estimates sit on opposite sides of one the result is Indeterminate.
    """
    if model.kind is ModelKind.POLYNOMIAL:
        if model.sigma == 0:
            return StabilityVerdict(math.inf, math.inf, StabilityClass.UNSTABLE, degenerate=True)
        ratio = 2.0 / model.sigma**2
        return StabilityVerdict(ratio, ratio, _classify(ratio, ratio))

    grid = np.asarray(probe_grid, dtype=float)
    if grid.size == 0 or np.any(grid == 0) or not np.all(np.isfinite(grid)):
        raise ConfigInvalid("probe_grid must be non-empty, finite and exclude 0")
    f = model.f_array(grid)
    g = model.g_array(grid)
    ratios = 2.0 * f / (g * g)
    sup = float(np.max(ratios))
    at_zero = float(ratios[np.argmin(np.abs(grid))])
    return StabilityVerdict(sup, at_zero, _classify(sup, at_zero))


def ode_explosion_time(model: CoefficientModel, initial: float) -> float:
    """Blow-up time of x' = x**(1+nu), x(0) = initial > 0; infinite when nu = 0.

    Only the drift is used, so this is the sigma = 0 reference for polynomial
    models regardless of the stored sigma.
    """
    if model.kind is not ModelKind.POLYNOMIAL:
        raise ConfigInvalid("closed-form explosion time needs a Polynomial model")
    if not initial > 0:
        raise NonPositiveInitial(f"initial value must be > 0, got {initial!r}")
    if model.nu == 0:
        return math.inf
    return initial ** (-model.nu) / model.nu
