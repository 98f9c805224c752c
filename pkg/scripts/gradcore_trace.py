"""Per-step shot counts and variance thresholds of one SGD-GradCoRe run.

Writes ``step,cumulative_shots,shots,kappa_sq,delta_energy`` rows to stdout
or ``--out``.
"""
import argparse
import csv
import sys

import numpy as np

from bayespsr import harness, simulator as sim
from bayespsr.optimizers import OptimizerConfig, Problem, run_gradcore


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--budget", type=int, default=10**6)
    ap.add_argument("--trial", type=int, default=0)
    ap.add_argument("--out")
    args = ap.parse_args()
    cfg = harness.ExperimentConfig(method="gradcore", budget=args.budget)
    h, c = cfg.hamiltonian(), cfg.circuit()
    cal = harness.calibrate(cfg)
    rng, x0 = harness.initial_point(cfg.base_seed, args.trial, c.n_params)
    state = run_gradcore(Problem(h, c, cal.sigma_bar_sq), OptimizerConfig(budget=args.budget), x0, rng)
    de, _ = harness.compute_metrics_batch([r.x_hat for r in state.history], h, c, sim.ground_truth(h))
    fh = open(args.out, "w", newline="") if args.out else sys.stdout
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["step", "cumulative_shots", "shots", "kappa_sq", "delta_energy"])
    for r, e in zip(state.history, de):
        w.writerow([r.step, r.cumulative_shots, r.shots, repr(r.kappa_sq), repr(float(e))])
    if args.out:
        fh.close()
    shots = np.array([r.shots for r in state.history])
    print(f"{state.step} steps; shots/step first 10% median {np.median(shots[:len(shots) // 10 or 1]):.0f}, "
          f"last 10% median {np.median(shots[-(len(shots) // 10 or 1):]):.0f}", file=sys.stderr)


if __name__ == "__main__":
    main()
