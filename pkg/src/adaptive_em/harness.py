"""Ensemble runs, summary statistics, figure data and flat key = value files."""
from __future__ import annotations

import configparser
import math
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional

import numpy as np

from .coeffs import CoefficientModel, ModelKind
from .errors import ConfigInvalid
from .noise import parse_seed
from .simulator import (
    VERDICTS,
    BatchResult,
    SimConfig,
    Verdict,
    run_trajectory,
    simulate_batch,
    simulate_ensemble,
    trajectory_source,
)
from .stepper import StepKind, StepRule

DEFAULT_SEED = 20190517
FIGURE_STEP_PREVIEW = 100
RECORD_CHUNK = 200  # trajectories recorded per batch when writing CSVs

# (sigma, h_bar) of the reference runs for nu = 2, initial value 1.
UNSTABLE_RUNS = ((0.0, 1.0), (0.0, 0.1), (1.0, 1.0))
STABLE_RUNS = ((2.0, 1.0), (3.0, 1.0), (3.0, 0.1))


@dataclass
class ExperimentConfig:
    sim: SimConfig
    trials: int = 1000
    master_seed: int = DEFAULT_SEED
    trajectory_csv: bool = False
    summary: bool = True
    plot_data: bool = False
    output_dir: Optional[Path] = None
    workers: int = 1

    def __post_init__(self):
        if self.trials < 1:
            raise ConfigInvalid(f"trials must be >= 1, got {self.trials!r}")
        self.master_seed = parse_seed(self.master_seed)
        if self.output_dir is not None:
            self.output_dir = Path(self.output_dir)


@dataclass
class EnsembleSummary:
    trials: int
    verdict_counts: dict
    stability_fraction: float
    positivity_fraction: float
    mean_step_size: float
    mean_final_time: float
    explosion_time_quantiles: Optional[tuple]
    tail_step_mean_converged: Optional[float] = None
    total_steps: int = 0
    bound_violations: int = 0

    def fraction(self, verdict: Verdict) -> float:
        return self.verdict_counts[verdict.value] / self.trials

    def as_dict(self) -> dict:
        return {
            "trials": self.trials,
            "verdict_counts": ",".join(f"{k}:{v}" for k, v in self.verdict_counts.items()),
            "stability_fraction": self.stability_fraction,
            "positivity_fraction": self.positivity_fraction,
            "mean_step_size": self.mean_step_size,
            "mean_final_time": self.mean_final_time,
            "explosion_time_quantiles": self.explosion_time_quantiles,
            "tail_step_mean_converged": self.tail_step_mean_converged,
            "total_steps": self.total_steps,
            "bound_violations": self.bound_violations,
        }


def summarize(result: BatchResult) -> EnsembleSummary:
    trials = result.verdict.size
    counts = np.bincount(result.verdict, minlength=len(VERDICTS))
    exploded = result.verdict == VERDICTS.index(Verdict.EXPLODED)
    converged = result.verdict == VERDICTS.index(Verdict.CONVERGED)
    quantiles = None
    if np.any(exploded):
        times = np.sort(result.final_time[exploded])
        quantiles = tuple(float(q) for q in np.quantile(times, [0.1, 0.5, 0.9]))
    total_steps = int(result.steps.sum())
    return EnsembleSummary(
        trials=trials,
        verdict_counts={v.value: int(c) for v, c in zip(VERDICTS, counts)},
        stability_fraction=float(counts[VERDICTS.index(Verdict.CONVERGED)] / trials),
        positivity_fraction=float(np.count_nonzero(result.first_nonpositive < 0) / trials),
        mean_step_size=float(result.h_sum.sum() / total_steps) if total_steps else math.nan,
        mean_final_time=float(result.final_time.mean()),
        explosion_time_quantiles=quantiles,
        tail_step_mean_converged=float(result.h_tail_mean[converged].mean()) if np.any(converged) else None,
        total_steps=total_steps,
        bound_violations=int(result.bound_violations.sum()),
    )


def format_value(value) -> str:
    if value is None:
        return "absent"
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, float):
        return f"{value:.17g}"
    if isinstance(value, tuple):
        return ",".join(format_value(v) for v in value)
    return str(value)


def render_key_values(values: dict) -> str:
    return "".join(f"{key} = {format_value(val)}\n" for key, val in values.items())


def sim_metadata(sim: SimConfig) -> dict:
    meta = {"model": sim.model.describe()}
    if sim.model.kind is ModelKind.POLYNOMIAL:
        meta.update(nu=sim.model.nu, sigma=sim.model.sigma)
    meta.update(
        rule=sim.rule.kind.value,
        hbar=float(sim.rule.h_bar),
        scheme=sim.scheme.value,
        initial=float(sim.initial),
        max_steps=sim.max_steps,
        max_time=float(sim.max_time),
        explosion_threshold=float(sim.explosion_threshold),
        zero_threshold=float(sim.zero_threshold),
        zero_window=sim.zero_window,
        stop_at_zero=sim.stop_at_zero,
    )
    return meta


def ensure_writable(directory: Path) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    with tempfile.NamedTemporaryFile(dir=directory):
        pass
    return directory


def write_series(path: Path, header: tuple, columns: Iterable) -> Path:
    lines = [",".join(header)]
    for row in zip(*columns):
        lines.append(",".join(str(int(v)) if isinstance(v, (int, np.integer)) else f"{v:.17g}" for v in row))
    Path(path).write_text("\n".join(lines) + "\n", newline="")
    return Path(path)


def run_ensemble(cfg: ExperimentConfig) -> EnsembleSummary:
    """Run the ensemble and write whichever outputs are enabled.

    Summaries depend only on the configuration and master seed: trajectory i
    always reads stream i, whatever the chunking or worker count.
    """
    out_dir = ensure_writable(cfg.output_dir) if cfg.output_dir is not None else None
    result = simulate_ensemble(cfg.sim, cfg.master_seed, cfg.trials, workers=cfg.workers)
    summary = summarize(result)
    if out_dir is None:
        return summary

    if cfg.summary:
        meta = dict(sim_metadata(cfg.sim), master_seed=cfg.master_seed)
        (out_dir / "summary.txt").write_text(render_key_values(summary.as_dict()), newline="")
        (out_dir / "metadata.txt").write_text(render_key_values(meta), newline="")
    if cfg.trajectory_csv or cfg.plot_data:
        width = len(str(cfg.trials - 1))
        needed = cfg.trials if cfg.trajectory_csv else 1
        for start in range(0, needed, RECORD_CHUNK):
            stop = min(start + RECORD_CHUNK, needed)
            sources = [trajectory_source(cfg.sim, cfg.master_seed, i) for i in range(start, stop)]
            for i, rec in enumerate(simulate_batch(cfg.sim, sources, record=True).records, start):
                if cfg.trajectory_csv:
                    rec.to_csv(out_dir / f"trajectory_{i:0{width}d}.csv")
                if cfg.plot_data and i == 0:
                    write_series(out_dir / "plot_trajectory.csv", ("t", "x"), (rec.times, rec.states))
                    write_series(out_dir / "plot_steps.csv", ("n", "h"), (rec.n, rec.h))
    return summary


def figure_config(sigma: float, h_bar: float) -> SimConfig:
    return SimConfig(CoefficientModel.polynomial(2, sigma), StepRule(StepKind.FLOORED, h_bar), initial=1.0)


def reproduce_reference_figures(which: str, output_dir, master_seed: int = DEFAULT_SEED) -> list[Path]:
    """Trajectory (t, x) and step-size (n, h) series for the nu = 2 reference runs.

    ``which`` is "unstab" (sigma = 0, 0, 1) or "stab" (sigma = 2, 3, 3).  The
    unstable step series keep only the first 100 steps.  Run i of the six uses
    stream i of ``master_seed``; settings go to ``<which>_meta.txt``.
    """
    which = which.lower()
    if which not in ("unstab", "stab"):
        raise ConfigInvalid(f"which must be 'unstab' or 'stab', got {which!r}")
    out_dir = ensure_writable(output_dir)
    runs = UNSTABLE_RUNS if which == "unstab" else STABLE_RUNS
    offset = 0 if which == "unstab" else len(UNSTABLE_RUNS)
    paths, meta_lines = [], [f"master_seed = {master_seed}\n"]
    for k, (sigma, h_bar) in enumerate(runs):
        sim = figure_config(sigma, h_bar)
        rec = run_trajectory(sim, trajectory_source(sim, master_seed, offset + k))
        stem = f"{which}_sigma{sigma:g}_hbar{h_bar:g}"
        n, h = rec.n, rec.h
        if which == "unstab":
            n, h = n[:FIGURE_STEP_PREVIEW], h[:FIGURE_STEP_PREVIEW]
        paths.append(write_series(out_dir / f"{stem}_trajectory.csv", ("t", "x"), (rec.times, rec.states)))
        paths.append(write_series(out_dir / f"{stem}_steps.csv", ("n", "h"), (n, h)))
        info = dict(sim_metadata(sim), stream=offset + k, verdict=rec.verdict.value,
                    final_time=rec.final_time, step_count=rec.step_count,
                    mean_step_size=float(rec.h.mean()) if rec.step_count else math.nan)
        meta_lines.append(f"\n[{stem}]\n" + render_key_values(info))
    (out_dir / f"{which}_meta.txt").write_text("".join(meta_lines), newline="")
    return paths


# Keys accepted in a config file; they mirror the long CLI flags.
CONFIG_KEYS = {
    "nu": float, "sigma": float, "initial": float, "hbar": float, "rule": str,
    "scheme": str, "steps": int, "max_time": float, "trials": int, "seed": parse_seed,
    "epsilon": float, "out": str, "zero_threshold": float, "zero_window": int,
    "explosion_threshold": float, "workers": int,
}


def load_config_file(path) -> dict:
    """Read a flat ``key = value`` file.  '#' starts a comment; dashes in keys become underscores."""
    parser = configparser.ConfigParser(comment_prefixes=("#", ";"), inline_comment_prefixes=("#",))
    text = Path(path).read_text()
    try:
        parser.read_string("[run]\n" + text)
    except configparser.Error as exc:
        raise ConfigInvalid(f"{path}: {exc}") from exc
    values = {}
    for key, raw in parser["run"].items():
        key = key.replace("-", "_")
        if key not in CONFIG_KEYS:
            raise ConfigInvalid(f"{path}: unknown key {key!r}")
        try:
            values[key] = CONFIG_KEYS[key](raw.strip())
        except ValueError as exc:
            raise ConfigInvalid(f"{path}: bad value for {key}: {raw!r}") from exc
    return values
