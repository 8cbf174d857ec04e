#!/usr/bin/env python3
"""Decay rates of crowded dark states: Monte Carlo against the analytic series.

Builds a small version of the decay-rate figure: for each circuit size M and
quasiparticle number N, draw Haar orthogonal circuits, place N quasiparticles
on random distinct ports, and average the squared collective-channel
remainder. Rates are in units of the per-qubit emission rate gamma.

Run:  python demos/decay_rates.py [--samples 100] [--plot out.png]
"""

import argparse

from spinsampler.darkstates import analytic_rate, monte_carlo_decay
from spinsampler.linalg import RngStream

M_GRID = (10, 20, 30)
N_GRID = (2, 3, 4, 5)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--samples", type=int, default=100)
    parser.add_argument("--seed", type=int, default=7)
    parser.add_argument("--plot", default=None, help="optional PNG path")
    args = parser.parse_args()

    print(f"{'M':>4} {'N':>3} {'MC mean':>10} {'stderr':>9} {'analytic':>10} {'rel dev':>8}")
    results = {}
    point = 0
    for n in N_GRID:
        for m in M_GRID:
            est = monte_carlo_decay(m, n, args.samples, RngStream(args.seed, point))
            point += 1
            rel = abs(est.mean - est.analytic) / est.analytic
            results[(m, n)] = est
            print(
                f"{m:>4} {n:>3} {est.mean:>10.5f} {est.stderr:>9.5f} "
                f"{est.analytic:>10.5f} {rel:>8.3f}"
            )

    print("\nSingle quasiparticles are exact dark states:")
    for m in M_GRID:
        print(f"  M={m}: analytic rate {analytic_rate(m, 1)} (exactly zero)")

    if args.plot:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt

        fig, ax = plt.subplots(figsize=(5, 4))
        for n in N_GRID:
            ms = list(M_GRID)
            ax.errorbar(
                ms,
                [results[(m, n)].mean for m in ms],
                yerr=[results[(m, n)].stderr for m in ms],
                fmt="o",
                label=f"N = {n} (MC)",
            )
            ax.plot(ms, [analytic_rate(m, n) for m in ms], "--", color="gray")
        ax.set_xlabel("circuit size M")
        ax.set_ylabel("decay rate [gamma]")
        ax.set_yscale("log")
        ax.legend()
        fig.tight_layout()
        fig.savefig(args.plot, dpi=150)
        print(f"\nwrote {args.plot}")


if __name__ == "__main__":
    main()
