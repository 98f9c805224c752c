"""Tabulate the Bayesian shift-rule closed forms against direct GP inference.

For each multiplicity and noise ratio, prints the largest discrepancy of the
derivative posterior mean and variance over a grid of evaluation offsets, and
the optimal two-point shift found by grid search.
"""
import numpy as np

from bayespsr import gp, psr
from bayespsr.gp import Dataset, KernelParams


def gp_derivative(y, v, sigma_sq, sigma0_sq, gamma_sq, alpha_prime):
    p = KernelParams(gamma_sq, sigma0_sq, (v,))
    ds = Dataset.empty(1).append(psr.equidistant_offsets(v)[:, None], y, sigma_sq)
    post = gp.posterior(ds, np.array([[alpha_prime]]), p, tags=[0])
    return post.mean[0], post.var[0]


def main():
    rng = np.random.default_rng(0)
    grid = np.linspace(-np.pi, np.pi, 64, endpoint=False)
    print(f"{'V':>2} {'gamma2':>6} {'ratio':>7} {'max|dmean|':>11} {'max|dvar|':>11} {'var(0)':>9} {'asym':>9}")
    for v in (1, 2, 3):
        for gamma_sq in (1.0, 9.0):
            for ratio in (1e-4, 1e-2, 1e-1):
                y = rng.normal(size=2 * v)
                dm = dv = 0.0
                for ap in grid:
                    m, s = psr.bpsr_closed_form(y, v, ratio, 1.0, gamma_sq, ap)
                    gm, gs = gp_derivative(y, v, ratio, 1.0, gamma_sq, ap)
                    dm, dv = max(dm, abs(m - gm)), max(dv, abs(s - gs))
                s0 = psr.bpsr_center_var(v, ratio, 1.0, gamma_sq)
                sa = psr.bpsr_asymptotic(y, v, ratio, 1.0, gamma_sq)[1]
                print(f"{v:>2} {gamma_sq:>6g} {ratio:>7g} {dm:>11.2e} {dv:>11.2e} {s0:>9.3g} {sa:>9.3g}")
    shifts = np.linspace(0, np.pi, 1025)[1:-1]
    var = [psr.bpsr_first_closed_form(0, 0, a, 0.1, 100.0, 9.0)[1] for a in shifts]
    print(f"optimal two-point shift: {shifts[int(np.argmin(var))]:.6f} (pi/2 = {np.pi / 2:.6f})")


if __name__ == "__main__":
    main()
