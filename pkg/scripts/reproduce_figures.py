"""Write the trajectory and step-size series for the six nu = 2 reference runs.

    python scripts/reproduce_figures.py --out figures/ [--seed N] [--png]

With --png (needs matplotlib) each set is also drawn as a 2x3 panel.
"""
import argparse
from pathlib import Path

import numpy as np

from adaptive_em.harness import DEFAULT_SEED, STABLE_RUNS, UNSTABLE_RUNS, reproduce_reference_figures


def draw(out: Path, which: str, runs):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, axes = plt.subplots(2, 3, figsize=(12, 6))
    for col, (sigma, h_bar) in enumerate(runs):
        stem = out / f"{which}_sigma{sigma:g}_hbar{h_bar:g}"
        tx = np.loadtxt(f"{stem}_trajectory.csv", delimiter=",", skiprows=1, ndmin=2)
        nh = np.loadtxt(f"{stem}_steps.csv", delimiter=",", skiprows=1, ndmin=2)
        axes[0, col].plot(tx[:, 0], tx[:, 1], lw=0.8)
        axes[0, col].set_title(f"sigma={sigma:g}, h_bar={h_bar:g}")
        axes[0, col].set_xlabel("t")
        axes[1, col].plot(nh[:, 0], nh[:, 1], lw=0.8)
        axes[1, col].set_xlabel("n")
    axes[0, 0].set_ylabel("X")
    axes[1, 0].set_ylabel("h")
    fig.tight_layout()
    fig.savefig(out / f"{which}.png", dpi=120)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", type=Path, default=Path("figures"))
    ap.add_argument("--seed", type=int, default=DEFAULT_SEED)
    ap.add_argument("--png", action="store_true")
    args = ap.parse_args()
    for which, runs in (("unstab", UNSTABLE_RUNS), ("stab", STABLE_RUNS)):
        for path in reproduce_reference_figures(which, args.out, args.seed):
            print(path)
        if args.png:
            draw(args.out, which, runs)
    print((args.out / "stab_meta.txt").read_text())


if __name__ == "__main__":
    main()
