"""Compare all optimizers on the 5-qubit critical Ising chain (L=3 ansatz).

Writes one records CSV per method, a combined aggregate CSV and two SVG plots
into ``--out``.  The defaults reproduce the acceptance setting (1e7 shots, 10
trials); expect about half an hour per method-set on one core.
"""
import argparse
from dataclasses import replace
from pathlib import Path

from bayespsr import harness
from bayespsr.plotting import emit_plot

RUNS = {
    "sgd-psr-1024": dict(method="sgd-psr", n_shots=1024),
    "bayes-sgd-128": dict(method="bayes-sgd", n_shots=128),
    "bayes-sgd-256": dict(method="bayes-sgd", n_shots=256),
    "bayes-sgd-512": dict(method="bayes-sgd", n_shots=512),
    "bayes-sgd-1024": dict(method="bayes-sgd", n_shots=1024),
    "gradcore": dict(method="gradcore"),
    "nft-1024": dict(method="nft", n_shots=1024),
    "bayes-nft-1024": dict(method="bayes-nft", n_shots=1024),
}


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--budget", type=int, default=10**7)
    ap.add_argument("--trials", type=int, default=10)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", type=Path, default=Path("results/ising"))
    ap.add_argument("--only", nargs="*", choices=sorted(RUNS), help="subset of runs")
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)

    cal = None
    rows = []
    for name in args.only or RUNS:
        cfg = harness.ExperimentConfig(budget=args.budget, n_trials=args.trials, base_seed=args.seed,
                                       output=str(args.out / f"{name}.csv"), **RUNS[name])
        cal = cal or harness.calibrate(cfg)
        records = harness.run_experiment(cfg, calibration=cal)
        harness.write_records(records, cfg.output)
        # label rows by run name so fixed-shot variants stay distinct
        agg = harness.aggregate(records, budget=args.budget)
        rows += [replace(r, method=name) for r in agg]
        final = harness.final_medians(records, args.budget)[cfg.method]
        print(f"{name:16s} median dEnergy at budget: {final:.4g}", flush=True)
    harness.write_calibration(cal, args.out / "calibration.json")
    harness.write_aggregate(rows, args.out / "aggregate.csv")
    for metric in ("energy", "fidelity"):
        emit_plot(rows, metric, args.out / f"{metric}.svg")


if __name__ == "__main__":
    main()
