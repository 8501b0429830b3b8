"""Command-line entry point.

Exit codes: 0 success, 1 configuration error, 2 I/O error, 3 invariant
violation (a step broke the step bounds, or moments-check failed).
"""
from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

from .coeffs import CoefficientModel, classify_stability
from .errors import AdaptiveEMError, StepBoundViolation
from .harness import (
    DEFAULT_SEED,
    ExperimentConfig,
    ensure_writable,
    load_config_file,
    render_key_values,
    reproduce_reference_figures,
    run_ensemble,
    sim_metadata,
)
from .noise import NoiseMode, NoiseSource, conditional_moment_check, parse_seed
from .positivity import (
    UNCONSTRAINED,
    exact_step_bound,
    mc_positivity,
    positivity_bounds,
    sasvari_chen_step_bound,
)
from .simulator import Scheme, SimConfig, run_trajectory, trajectory_source
from .stepper import StepKind, StepRule

DEFAULTS = {
    "nu": 2.0, "sigma": 2.0, "initial": 1.0, "hbar": 1.0, "rule": "floored",
    "scheme": "strong", "steps": 10_000, "max_time": math.inf, "trials": 1000,
    "seed": DEFAULT_SEED, "epsilon": 0.1, "out": None, "zero_threshold": 1e-8,
    "zero_window": 100, "explosion_threshold": 1e8, "workers": 1,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        # Usage errors are configuration errors; 2 is reserved for I/O.
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _common(parser: argparse.ArgumentParser):
    # default=None everywhere so that unset flags fall through to the config file.
    parser.add_argument("--config", type=Path, help="flat key = value file; flags override it")
    parser.add_argument("--nu", type=float)
    parser.add_argument("--sigma", type=float)
    parser.add_argument("--initial", type=float)
    parser.add_argument("--hbar", type=float)
    parser.add_argument("--rule", choices=[k.value for k in StepKind])
    parser.add_argument("--scheme", choices=[s.value for s in Scheme])
    parser.add_argument("--steps", type=int)
    parser.add_argument("--max-time", dest="max_time", type=float)
    parser.add_argument("--trials", type=int)
    parser.add_argument("--seed", type=parse_seed, help="64-bit unsigned, decimal or 0x-hex")
    parser.add_argument("--epsilon", type=float)
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--zero-threshold", dest="zero_threshold", type=float)
    parser.add_argument("--zero-window", dest="zero_window", type=int)
    parser.add_argument("--explosion-threshold", dest="explosion_threshold", type=float)
    parser.add_argument("--workers", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="adaptive-em",
                     description="Adaptive-step Euler-Maruyama runs for dX = X f(X) dt + X g(X) dW, f = |x|^nu, g = sigma |x|^(nu/2).",
                     epilog="Exit codes: 0 ok, 1 configuration error, 2 I/O error, 3 invariant violation.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="one trajectory")
    _common(p)
    p.add_argument("--index", type=int, default=0, help="stream index under --seed")

    p = sub.add_parser("ensemble", help="many trajectories and their summary")
    _common(p)
    p.add_argument("--trajectory-csv", action="store_true", help="write every trajectory")
    p.add_argument("--plot-data", action="store_true", help="write (t, x) and (n, h) series of trajectory 0")

    p = sub.add_parser("classify", help="stability class from 2f/g^2")
    _common(p)

    p = sub.add_parser("positivity-bound", help="step bounds for positivity with probability 1 - eps")
    _common(p)

    p = sub.add_parser("positivity-mc", help="Monte Carlo positivity frequency")
    _common(p)
    p.add_argument("--bound", choices=["exact", "sasvari-chen"], default="exact",
                   help="h_bar to use when --hbar is not given")

    p = sub.add_parser("figures", help="trajectory and step-size series of the nu = 2 reference runs")
    _common(p)
    p.add_argument("--which", choices=["unstab", "stab", "all"], default="all")

    p = sub.add_parser("moments-check", help="empirical moments of adaptive Wiener increments")
    _common(p)
    p.add_argument("--h", type=float, nargs="+", default=[1.0, 0.1, 0.01])
    p.add_argument("--samples", type=int, default=1_000_000)
    return parser


def resolve(args: argparse.Namespace) -> dict:
    values = dict(DEFAULTS)
    if args.config is not None:
        values.update(load_config_file(args.config))
    values.update({k: v for k, v in vars(args).items() if k in DEFAULTS and v is not None})
    return values


def sim_config(v: dict, **overrides) -> SimConfig:
    kwargs = dict(
        model=CoefficientModel.polynomial(v["nu"], v["sigma"]),
        rule=StepRule(StepKind(v["rule"]), v["hbar"]),
        initial=v["initial"],
        scheme=Scheme(v["scheme"]),
        max_steps=v["steps"],
        max_time=v["max_time"],
        explosion_threshold=v["explosion_threshold"],
        zero_threshold=v["zero_threshold"],
        zero_window=v["zero_window"],
    )
    kwargs.update(overrides)
    return SimConfig(**kwargs)


def _simulate(args, v, out):
    cfg = sim_config(v)
    rec = run_trajectory(cfg, trajectory_source(cfg, v["seed"], args.index))
    text = render_key_values(rec.summary())
    if v["out"]:
        d = ensure_writable(Path(v["out"]))
        rec.to_csv(d / "trajectory.csv")
        (d / "summary.txt").write_text(text, newline="")
        meta = dict(sim_metadata(cfg), master_seed=v["seed"], stream=args.index)
        (d / "metadata.txt").write_text(render_key_values(meta), newline="")
    out.write(text)
    return 0


def _ensemble(args, v, out):
    cfg = ExperimentConfig(sim_config(v), trials=v["trials"], master_seed=v["seed"],
                           trajectory_csv=args.trajectory_csv, plot_data=args.plot_data,
                           output_dir=v["out"], workers=v["workers"])
    out.write(render_key_values(run_ensemble(cfg).as_dict()))
    return 0


def _classify(args, v, out):
    verdict = classify_stability(CoefficientModel.polynomial(v["nu"], v["sigma"]))
    out.write(verdict.render() + "\n")
    return 0


def _positivity_bound(args, v, out):
    report = positivity_bounds(v["epsilon"], v["steps"], args.hbar)
    out.write(render_key_values(report.as_dict()))
    return 0


def _positivity_mc(args, v, out):
    h_bar = args.hbar
    if h_bar is None:
        pick = exact_step_bound if args.bound == "exact" else sasvari_chen_step_bound
        h_bar = pick(v["epsilon"], v["steps"])
        if h_bar is UNCONSTRAINED:
            h_bar = DEFAULTS["hbar"]
    cfg = sim_config(v, rule=StepRule(StepKind(v["rule"]), h_bar))
    report = mc_positivity(cfg, v["trials"], v["seed"], v["epsilon"], workers=v["workers"])
    out.write(render_key_values(report.as_dict()))
    return 0


def _figures(args, v, out):
    if not v["out"]:
        raise argparse.ArgumentTypeError("figures needs --out DIR")
    sets = ["unstab", "stab"] if args.which == "all" else [args.which]
    for which in sets:
        for path in reproduce_reference_figures(which, v["out"], v["seed"]):
            out.write(f"{path}\n")
    return 0


def _moments_check(args, v, out):
    src = NoiseSource(v["seed"], NoiseMode.WIENER)
    report = conditional_moment_check(src, args.h, args.samples)
    for line in report.lines():
        out.write(line + "\n")
    out.write(f"passed = {str(report.passed).lower()}\n")
    return 0 if report.passed else 3


COMMANDS = {
    "simulate": _simulate,
    "ensemble": _ensemble,
    "classify": _classify,
    "positivity-bound": _positivity_bound,
    "positivity-mc": _positivity_mc,
    "figures": _figures,
    "moments-check": _moments_check,
}


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        values = resolve(args)
        return COMMANDS[args.command](args, values, out)
    except StepBoundViolation as exc:
        print(f"error: step bound violated: {exc}", file=sys.stderr)
        return 3
    except (AdaptiveEMError, ValueError, argparse.ArgumentTypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
