"""Positivity step bounds over an (eps, N) grid, with optional Monte Carlo checks.

    python scripts/positivity_table.py [--mc-trials 10000] [--sigma 3]

For each pair the table lists both bounds, the guaranteed probability
Phi(1/sqrt(h))^N at each, and (with --mc-trials > 0) the observed fraction of
paths that stay positive for N steps at the exact bound.
"""
import argparse

from adaptive_em.coeffs import CoefficientModel
from adaptive_em.harness import DEFAULT_SEED
from adaptive_em.positivity import (
    UNCONSTRAINED,
    exact_step_bound,
    mc_positivity,
    per_step_floor,
    sasvari_chen_step_bound,
)
from adaptive_em.simulator import SimConfig
from adaptive_em.stepper import StepKind, StepRule


def guarantee(h, n):
    return "-" if h is UNCONSTRAINED else f"{per_step_floor(h) ** n:.6f}"


def fmt(h):
    return f"{h!s:>12}" if h is UNCONSTRAINED else f"{h:12.8f}"


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--eps", type=float, nargs="+", default=[0.01, 0.05, 0.1, 0.2])
    ap.add_argument("--n", type=int, nargs="+", default=[10, 100, 1000])
    ap.add_argument("--mc-trials", type=int, default=0)
    ap.add_argument("--sigma", type=float, default=3.0)
    ap.add_argument("--seed", type=int, default=DEFAULT_SEED)
    args = ap.parse_args()

    print(f"{'eps':>5} {'N':>5} {'exact':>12} {'P(exact)':>9} {'sasvari-chen':>12} {'P(sc)':>9} {'MC':>16}")
    model = CoefficientModel.polynomial(2, args.sigma)
    for eps in args.eps:
        for n in args.n:
            exact, sc = exact_step_bound(eps, n), sasvari_chen_step_bound(eps, n)
            mc = ""
            if args.mc_trials and exact is not UNCONSTRAINED:
                cfg = SimConfig(model, StepRule(StepKind.FLOORED, exact), max_steps=n)
                r = mc_positivity(cfg, args.mc_trials, args.seed, eps)
                mc = f"{r.mc_frequency:.4f}+-{r.wilson_half_width:.4f}"
            print(f"{eps:5g} {n:5d} {fmt(exact)} {guarantee(exact, n):>9} {fmt(sc)} {guarantee(sc, n):>9} {mc:>16}")


if __name__ == "__main__":
    main()
