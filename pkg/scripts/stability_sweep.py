"""Verdict fractions and mean step size over a grid of sigma and h_bar (nu = 2).

    python scripts/stability_sweep.py [--trials 1000] [--zero-threshold 1e-8]

With the default zero threshold no stable path is declared converged within
10^4 steps: X decays only like 1/sqrt(t) for this model.  A threshold of
1e-2 makes convergence visible and shows the residual explosions at h_bar = 1
that vanish once h_bar is halved.
"""
import argparse
import time

from adaptive_em.coeffs import CoefficientModel, classify_stability
from adaptive_em.harness import DEFAULT_SEED, ExperimentConfig, run_ensemble
from adaptive_em.simulator import SimConfig, Verdict
from adaptive_em.stepper import StepKind, StepRule


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--trials", type=int, default=1000)
    ap.add_argument("--steps", type=int, default=10_000)
    ap.add_argument("--zero-threshold", type=float, default=1e-8)
    ap.add_argument("--sigma", type=float, nargs="+", default=[1.0, 2.0, 3.0])
    ap.add_argument("--hbar", type=float, nargs="+", default=[1.0, 0.5, 0.25, 0.1])
    ap.add_argument("--seed", type=int, default=DEFAULT_SEED)
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()

    print(f"{'sigma':>6} {'h_bar':>6} {'class':>20} {'conv':>6} {'expl':>6} {'horiz':>6} "
          f"{'mean h':>8} {'secs':>6}")
    for sigma in args.sigma:
        model = CoefficientModel.polynomial(2, sigma)
        cls = classify_stability(model).stability_class.value
        for h_bar in args.hbar:
            sim = SimConfig(model, StepRule(StepKind.FLOORED, h_bar), max_steps=args.steps,
                            zero_threshold=args.zero_threshold)
            start = time.perf_counter()
            s = run_ensemble(ExperimentConfig(sim, trials=args.trials, master_seed=args.seed,
                                              workers=args.workers))
            print(f"{sigma:6g} {h_bar:6g} {cls:>20} {s.fraction(Verdict.CONVERGED):6.3f} "
                  f"{s.fraction(Verdict.EXPLODED):6.3f} {s.fraction(Verdict.HORIZON):6.3f} "
                  f"{s.mean_step_size:8.4f} {time.perf_counter() - start:6.1f}")


if __name__ == "__main__":
    main()
