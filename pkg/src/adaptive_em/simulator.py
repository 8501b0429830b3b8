"""Trajectories of the adaptive Euler-Maruyama scheme and of the normalised discrete model.

Strong scheme (Wiener increments over the adaptive mesh)::

    X_{n+1} = X_n (1 + h_n f(X_n) + g(X_n) dW_{n+1}),   dW_{n+1} ~ N(0, h_n)

Normalised model (unit innovations, coefficients divided by 1 + f + g^2)::

    X_{n+1} = X_n (1 + h_bar Phi(X_n) + sqrt(h_bar) Gamma(X_n) chi_{n+1})

A batch of trajectories is advanced in lockstep, one step per iteration, with
every trajectory reading its own noise stream.  A single trajectory is a batch
of one, so both paths share every floating-point operation.
"""
from __future__ import annotations

import csv
import enum
import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from .coeffs import CoefficientModel
from .errors import ConfigInvalid, StepBoundViolation
from .noise import NoiseMode, NoiseSource, normal_cdf_inv
from .stepper import StepKind, StepRule, normalized_arrays, step_bounds_hold, step_sizes

TAIL_WINDOW = 50


class Scheme(enum.Enum):
    STRONG = "strong"
    NORMALIZED = "normalized"

    @property
    def noise_mode(self) -> NoiseMode:
        return NoiseMode.WIENER if self is Scheme.STRONG else NoiseMode.IID


class Verdict(enum.Enum):
    CONVERGED = "ConvergedToZero"
    EXPLODED = "Exploded"
    HORIZON = "HorizonReached"
    OVERFLOW = "StepOverflow"


VERDICTS = list(Verdict)


@dataclass(frozen=True)
class SimConfig:
    model: CoefficientModel
    rule: StepRule
    initial: float = 1.0
    scheme: Scheme = Scheme.STRONG
    max_steps: int = 10_000
    max_time: float = math.inf
    explosion_threshold: float = 1e8
    zero_threshold: float = 1e-8
    zero_window: int = 100
    stop_at_zero: bool = True
    check_bounds: bool = True

    def __post_init__(self):
        if not (isinstance(self.max_steps, (int, np.integer)) and self.max_steps >= 1):
            raise ConfigInvalid(f"max_steps must be an integer >= 1, got {self.max_steps!r}")
        if not self.max_time > 0:
            raise ConfigInvalid(f"max_time must be > 0, got {self.max_time!r}")
        if not (isinstance(self.zero_window, (int, np.integer)) and self.zero_window >= 1):
            raise ConfigInvalid(f"zero_window must be an integer >= 1, got {self.zero_window!r}")
        if not (math.isfinite(self.initial) and self.initial >= 0):
            raise ConfigInvalid(f"initial value must be finite and >= 0, got {self.initial!r}")
        if not 0 < self.zero_threshold < self.explosion_threshold:
            raise ConfigInvalid("need 0 < zero_threshold < explosion_threshold")
        if self.initial > 0 and not self.zero_threshold < self.initial < self.explosion_threshold:
            raise ConfigInvalid("need zero_threshold < initial < explosion_threshold")

    @property
    def asserts_bounds(self) -> bool:
        # The step bounds are guaranteed by the adaptive rules only.
        return self.check_bounds and self.rule.kind is not StepKind.FIXED


def em_step(x: float, h: float, f_x: float, g_x: float, dW: float) -> float:
    return x * (1.0 + h * f_x + g_x * dW)


def normalized_step(x: float, h_bar: float, phi: float, gamma: float, chi: float) -> float:
    return x * (1.0 + h_bar * phi + math.sqrt(h_bar) * gamma * chi)


@dataclass
class TrajectoryRecord:
    """Per-step history.  Row n holds (t_n, h_n, x_n, dW_{n+1}); the terminal
    state x_K at t_K is kept separately in ``final_x`` / ``final_time``."""

    n: np.ndarray
    t: np.ndarray
    h: np.ndarray
    x: np.ndarray
    dW: np.ndarray
    final_x: float
    final_time: float
    verdict: Verdict

    @property
    def step_count(self) -> int:
        return int(self.n.size)

    @property
    def states(self) -> np.ndarray:
        return np.append(self.x, self.final_x)

    @property
    def times(self) -> np.ndarray:
        return np.append(self.t, self.final_time)

    @property
    def first_nonpositive_index(self) -> Optional[int]:
        hits = np.flatnonzero(~(self.states > 0))
        return int(hits[0]) if hits.size else None

    def summary(self) -> dict:
        states = self.states
        return {
            "verdict": self.verdict.value,
            "final_time": self.final_time,
            "step_count": self.step_count,
            "x_min": float(np.min(states)),
            "x_max": float(np.max(states)),
            "first_nonpositive_index": self.first_nonpositive_index,
        }

    def to_csv(self, dest=None) -> str:
        """Write ``n,t,h,x,dW`` rows (17 significant digits, LF endings).

        The last row is the terminal state, with h and dW left empty.
        """
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n", "t", "h", "x", "dW"])
        for row in zip(self.n, self.t, self.h, self.x, self.dW):
            w.writerow([int(row[0])] + [f"{v:.17g}" for v in row[1:]])
        w.writerow([self.step_count, f"{self.final_time:.17g}", "", f"{self.final_x:.17g}", ""])
        text = buf.getvalue()
        if dest is not None:
            Path(dest).write_text(text, newline="")
        return text


@dataclass
class BatchResult:
    """Per-trajectory outcomes of a batch, indexed like the input sources."""

    verdict: np.ndarray  # index into VERDICTS
    steps: np.ndarray
    final_time: np.ndarray
    final_x: np.ndarray
    first_nonpositive: np.ndarray  # -1 when every state stayed positive
    h_sum: np.ndarray
    h_tail_mean: np.ndarray  # mean of the last TAIL_WINDOW steps
    x_min: np.ndarray
    x_max: np.ndarray
    bound_violations: np.ndarray
    records: list = field(default_factory=list)

    def verdicts(self) -> list[Verdict]:
        return [VERDICTS[i] for i in self.verdict]


class _Batch:
    """Mutable state of the active trajectories, compacted as they finish."""

    def __init__(self, cfg: SimConfig, count: int):
        self.idx = np.arange(count)
        self.x = np.full(count, float(cfg.initial))
        self.t = np.zeros(count)
        self.below = np.zeros(count, dtype=np.int64)
        self.h_sum = np.zeros(count)
        self.tail = np.full((count, TAIL_WINDOW), np.nan)
        self.x_min = self.x.copy()
        self.x_max = self.x.copy()
        self.first_np = np.where(self.x > 0, -1, 0)
        self.violations = np.zeros(count, dtype=np.int64)
        self.noise = np.empty((count, 0))

    def keep(self, mask: np.ndarray):
        for name in ("idx", "x", "t", "below", "h_sum", "tail", "x_min", "x_max",
                     "first_np", "violations", "noise"):
            setattr(self, name, getattr(self, name)[mask])


def simulate_batch(cfg: SimConfig, sources: Sequence, record: bool = False,
                   observer: Optional[Callable] = None, noise_block: int = 256) -> BatchResult:
    """Run one trajectory per source under ``cfg``.

    Each iteration computes h_n from X_n, checks the step bounds, takes the
    n-th draw of each trajectory's own source and applies the step map.  The
    draw consumed at step n is fixed by the stream position alone, so h_n and
    X_n never depend on draws n, n+1, ...

    ``observer(idx, n, t, h, x, f, g, dW)`` is called with the active arrays
    before each update, for independent checks that must not store history.
    """
    count = len(sources)
    mode = cfg.scheme.noise_mode
    for src in sources:
        if src.mode is not mode:
            raise ConfigInvalid(f"scheme {cfg.scheme.value} needs {mode.value} noise, got {src.mode.value}")

    out = BatchResult(
        verdict=np.zeros(count, dtype=np.int64),
        steps=np.zeros(count, dtype=np.int64),
        final_time=np.zeros(count),
        final_x=np.zeros(count),
        first_nonpositive=np.full(count, -1, dtype=np.int64),
        h_sum=np.zeros(count),
        h_tail_mean=np.full(count, np.nan),
        x_min=np.zeros(count),
        x_max=np.zeros(count),
        bound_violations=np.zeros(count, dtype=np.int64),
    )
    rows: list[tuple] = []
    b = _Batch(cfg, count)
    h_bar = cfg.rule.h_bar
    sqrt_h_bar = math.sqrt(h_bar)

    def finish(mask: np.ndarray, verdict: Verdict, steps: int):
        ids = b.idx[mask]
        out.verdict[ids] = VERDICTS.index(verdict)
        out.steps[ids] = steps
        out.final_time[ids] = b.t[mask]
        out.final_x[ids] = b.x[mask]
        out.first_nonpositive[ids] = b.first_np[mask]
        out.h_sum[ids] = b.h_sum[mask]
        tail = b.tail[mask]
        with np.errstate(invalid="ignore"):
            filled = np.sum(~np.isnan(tail), axis=1)
            out.h_tail_mean[ids] = np.where(filled > 0, np.nansum(tail, axis=1) / np.maximum(filled, 1), np.nan)
        out.x_min[ids] = b.x_min[mask]
        out.x_max[ids] = b.x_max[mask]
        out.bound_violations[ids] = b.violations[mask]
        b.keep(~mask)

    for n in range(cfg.max_steps):
        if b.idx.size == 0:
            break
        if n % noise_block == 0:
            k = min(noise_block, cfg.max_steps - n)
            b.noise = normal_cdf_inv(np.stack([sources[i].uniforms(k) for i in b.idx]))
        f = cfg.model.f_array(b.x)
        g = cfg.model.g_array(b.x)
        h, overflow = step_sizes(cfg.rule, f, g)
        if np.any(overflow):
            finish(overflow, Verdict.OVERFLOW, n)
            if b.idx.size == 0:
                break
            live = ~overflow
            f, g, h = f[live], g[live], h[live]

        ok = step_bounds_hold(h, h_bar, f, g)
        if not np.all(ok):
            b.violations += ~ok
            if cfg.asserts_bounds:
                bad = np.flatnonzero(~ok)[0]
                raise StepBoundViolation(
                    f"step {n} of trajectory {b.idx[bad]}: x={b.x[bad]!r}, h={h[bad]!r}, "
                    f"f={f[bad]!r}, g={g[bad]!r}, h_bar={h_bar!r}")

        z = b.noise[:, n % noise_block]
        if cfg.scheme is Scheme.STRONG:
            dw = np.sqrt(h) * z
            x_new = b.x * (1.0 + h * f + g * dw)
        else:
            dw = z
            phi, gamma = normalized_arrays(f, g)
            x_new = b.x * (1.0 + h_bar * phi + sqrt_h_bar * gamma * dw)

        if observer is not None:
            observer(b.idx, n, b.t, h, b.x, f, g, dw)
        if record:
            rows.append((b.idx.copy(), n, b.t.copy(), h, b.x.copy(), dw))

        with np.errstate(invalid="ignore"):
            b.t = b.t + h
            b.h_sum += h
            b.tail[:, n % TAIL_WINDOW] = h
            b.x = x_new
            b.x_min = np.fmin(b.x_min, x_new)
            b.x_max = np.fmax(b.x_max, x_new)
            b.first_np = np.where((b.first_np < 0) & ~(x_new > 0), n + 1, b.first_np)
            b.below = np.where(np.abs(x_new) < cfg.zero_threshold, b.below + 1, 0)
            exploded = ~np.isfinite(x_new) | (np.abs(x_new) >= cfg.explosion_threshold)

        status = np.full(b.idx.size, -1)
        horizon = (n + 1 == cfg.max_steps) | (b.t >= cfg.max_time)
        status[horizon] = VERDICTS.index(Verdict.HORIZON)
        if cfg.stop_at_zero:
            status[b.below >= cfg.zero_window] = VERDICTS.index(Verdict.CONVERGED)
        status[exploded] = VERDICTS.index(Verdict.EXPLODED)
        for code in np.unique(status[status >= 0]):
            # finish() compacts the batch, so status is compacted alongside.
            mask = status == code
            finish(mask, VERDICTS[code], n + 1)
            status = status[~mask]
    if record:
        out.records = _assemble_records(rows, out, count)
    return out


def _assemble_records(rows: list, out: BatchResult, count: int) -> list[TrajectoryRecord]:
    if rows:
        idx = np.concatenate([r[0] for r in rows])
        ns = np.concatenate([np.full(r[0].size, r[1]) for r in rows])
        cols = [np.concatenate([r[j] for r in rows]) for j in (2, 3, 4, 5)]
        order = np.argsort(idx, kind="stable")
        idx, ns = idx[order], ns[order]
        cols = [c[order] for c in cols]
        bounds = np.searchsorted(idx, np.arange(count + 1))
    else:
        idx = ns = np.empty(0, dtype=np.int64)
        cols = [np.empty(0)] * 4
        bounds = np.zeros(count + 1, dtype=np.int64)
    records = []
    for i in range(count):
        s = slice(bounds[i], bounds[i + 1])
        records.append(TrajectoryRecord(
            n=ns[s], t=cols[0][s], h=cols[1][s], x=cols[2][s], dW=cols[3][s],
            final_x=float(out.final_x[i]), final_time=float(out.final_time[i]),
            verdict=VERDICTS[out.verdict[i]],
        ))
    return records


def run_trajectory(cfg: SimConfig, src) -> TrajectoryRecord:
    """Simulate one path with full step history."""
    return simulate_batch(cfg, [src], record=True).records[0]


def trajectory_source(cfg: SimConfig, seed: int, index: int = 0) -> NoiseSource:
    return NoiseSource.for_trajectory(seed, index, cfg.scheme.noise_mode)


def _run_chunk(args) -> BatchResult:
    cfg, master_seed, start, stop = args
    sources = [trajectory_source(cfg, master_seed, i) for i in range(start, stop)]
    return simulate_batch(cfg, sources)


def _concat(parts: list[BatchResult]) -> BatchResult:
    names = [f for f in BatchResult.__dataclass_fields__ if f != "records"]
    return BatchResult(**{name: np.concatenate([getattr(p, name) for p in parts]) for name in names})


def simulate_ensemble(cfg: SimConfig, master_seed: int, trials: int, chunk_size: int = 1000,
                      workers: int = 1, observer: Optional[Callable] = None) -> BatchResult:
    """Run ``trials`` trajectories; trajectory i always uses stream i of ``master_seed``.

    Results do not depend on ``chunk_size`` or ``workers``: every trajectory
    owns its stream and the batch arithmetic is element-wise.
    """
    if trials < 1:
        raise ConfigInvalid(f"trials must be >= 1, got {trials!r}")
    bounds = [(s, min(s + chunk_size, trials)) for s in range(0, trials, chunk_size)]
    if workers > 1 and observer is None and len(bounds) > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_run_chunk, [(cfg, master_seed, s, e) for s, e in bounds]))
    else:
        parts = []
        for s, e in bounds:
            sources = [trajectory_source(cfg, master_seed, i) for i in range(s, e)]
            if observer is None:
                parts.append(simulate_batch(cfg, sources))
            else:
                parts.append(simulate_batch(
                    cfg, sources,
                    observer=lambda idx, *rest, _s=s: observer(idx + _s, *rest)))
    return _concat(parts)
