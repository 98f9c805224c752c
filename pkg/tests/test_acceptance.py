"""Acceptance criteria, one test each, with a PASS/FAIL line printed per criterion.

Run with ``pytest tests/test_acceptance.py -s`` to see the summary lines.
The end-to-end ordering check runs 50 full-budget trials and takes tens of
minutes on a single core.
"""
import time

import numpy as np
import pytest
from scipy.stats import spearmanr

from bayespsr import gp, harness, psr, simulator as sim
from bayespsr.gp import Dataset, KernelParams
from bayespsr.optimizers import OptimizerConfig, Problem, fit_1d_trig, run_gradcore, trig_eval


def report(n, ok, detail, elapsed):
    print(f"\ncriterion {n}: {'PASS' if ok else 'FAIL'} ({detail}; {elapsed:.1f}s)")
    assert ok, detail


def gp_derivative_1d(y, v, sigma_sq, sigma0_sq, gamma_sq, alpha_prime):
    p = KernelParams(gamma_sq, sigma0_sq, (v,))
    ds = Dataset.empty(1).append(psr.equidistant_offsets(v)[:, None], y, sigma_sq)
    post = gp.posterior(ds, np.array([[alpha_prime]]), p, tags=[0])
    return post.mean[0], post.var[0]


def test_criterion_1_closed_form_matches_gp():
    t0 = time.perf_counter()
    rng = np.random.default_rng(1)
    sigma0_sq = 1.0
    worst = 0.0
    for v in (1, 2, 3):
        for gamma_sq in (1.0, 3.0, 9.0):
            for ratio in (1e-4, 1e-2, 1e-1):
                for ap in np.linspace(-np.pi, np.pi, 16, endpoint=False):
                    y = rng.normal(size=2 * v)
                    m, s = psr.bpsr_closed_form(y, v, ratio * sigma0_sq, sigma0_sq, gamma_sq, ap)
                    gm, gs = gp_derivative_1d(y, v, ratio * sigma0_sq, sigma0_sq, gamma_sq, ap)
                    # V=1 means vanish identically at alpha' = +-pi/2; floor the scale there
                    scale = max(abs(gm), 1e-6 * np.abs(y).max())
                    worst = max(worst, abs(m - gm) / scale, abs(s - gs) / abs(gs))
    elapsed = time.perf_counter() - t0
    report(1, worst <= 1e-8 and elapsed < 10, f"max relative error {worst:.2e}", elapsed)


def test_criterion_2_noiseless_limit():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2)
    worst = 0.0
    for v in (1, 2, 3, 4):
        for gamma_sq in (1.0, 3.0, 9.0):
            for _ in range(5):
                y = rng.normal(size=2 * v)
                ref = psr.psr_general(y, v)
                m, _ = psr.bpsr_closed_form(y, v, 1e-12, 1.0, gamma_sq)
                gm, _ = gp_derivative_1d(y, v, 1e-12, 1.0, gamma_sq, 0.0)
                worst = max(worst, abs(m - ref) / (1 + abs(ref)), abs(gm - ref) / (1 + abs(ref)))
    elapsed = time.perf_counter() - t0
    report(2, worst <= 1e-6 and elapsed < 1, f"max scaled gap {worst:.2e}", elapsed)


def test_criterion_3_optimal_shift():
    t0 = time.perf_counter()
    grid = np.linspace(0, np.pi, 257)[1:-1]
    cell = np.pi / 256
    misses = 0
    for gamma_sq in (1.0, 3.0, 9.0):
        for sigma_sq in (0.01, 0.3, 5.0):
            for sigma0_sq in (1.0, 10.0, 100.0):
                var = [psr.bpsr_first_closed_form(0.0, 0.0, a, sigma_sq, sigma0_sq, gamma_sq)[1] for a in grid]
                if abs(grid[int(np.argmin(var))] - np.pi / 2) > cell:
                    misses += 1
    elapsed = time.perf_counter() - t0
    report(3, misses == 0 and elapsed < 1, f"{27 - misses}/27 combinations at pi/2", elapsed)


def test_criterion_4_psr_exact_on_circuit():
    t0 = time.perf_counter()
    h, c = sim.build_ising(3), sim.build_efficient_su2(3, 1)
    rng = np.random.default_rng(4)
    eps, worst = 1e-6, 0.0
    for _ in range(20):
        x = rng.uniform(0, 2 * np.pi, c.n_params)
        eye = np.eye(c.n_params)
        shifted = np.vstack([x - np.pi / 2 * eye, x + np.pi / 2 * eye, x - eps * eye, x + eps * eye])
        e = sim.exact_energies(h, sim.prepare_states(c, shifted)).reshape(4, c.n_params)
        shift = np.array([psr.psr_first(e[0, d], e[1, d], np.pi / 2) for d in range(c.n_params)])
        fd = (e[3] - e[2]) / (2 * eps)
        worst = max(worst, np.abs(shift - fd).max())
    elapsed = time.perf_counter() - t0
    report(4, worst <= 1e-5 and elapsed < 5, f"max |PSR - FD| {worst:.2e}", elapsed)


def test_criterion_5_trigonometric_structure():
    t0 = time.perf_counter()
    h, c = sim.build_ising(5), sim.build_efficient_su2(5, 3)
    rng = np.random.default_rng(5)
    theta = np.linspace(0, 2 * np.pi, 33, endpoint=False)
    worst = 0.0
    for _ in range(10):
        x = rng.uniform(0, 2 * np.pi, c.n_params)
        d = int(rng.integers(c.n_params))
        xs = np.tile(x, (theta.size, 1))
        xs[:, d] = theta
        e = sim.exact_energies(h, sim.prepare_states(c, xs))
        fit = fit_1d_trig(theta, e, 1.0, c.multiplicities[d])
        worst = max(worst, np.abs(trig_eval(fit, theta) - e).max())
    elapsed = time.perf_counter() - t0
    report(5, worst < 1e-8 and elapsed < 5, f"max residual {worst:.2e}", elapsed)


def test_criterion_6_shot_noise_law():
    t0 = time.perf_counter()
    h, c = sim.build_ising(5), sim.build_efficient_su2(5, 3)
    x = np.random.default_rng(6).uniform(0, 2 * np.pi, c.n_params)
    sigma_bar_sq = sim.calibrate_sigma_bar(h, c, 30, np.random.default_rng(20240101))
    exact_var = sim.energy_variance(h, sim.prepare_state(c, x))
    worst = 0.0
    for n in (128, 1024):
        for mode, single in (("calibrated", sigma_bar_sq), ("exact-variance", exact_var)):
            rng = np.random.default_rng(n)
            y, reported = sim.observe_batch(h, c, np.tile(x, (10_000, 1)), n, mode, sigma_bar_sq, rng)
            worst = max(worst, abs(np.var(y, ddof=1) / (single / n) - 1))
            assert reported[0] == pytest.approx(sigma_bar_sq / n)
    elapsed = time.perf_counter() - t0
    report(6, worst <= 0.05 and elapsed < 10, f"max relative variance error {worst:.3f}", elapsed)


def test_criterion_7_gradcore_constraint():
    t0 = time.perf_counter()
    h, c = sim.build_ising(5), sim.build_efficient_su2(5, 3)
    sigma_bar_sq = sim.calibrate_sigma_bar(h, c, 30, np.random.default_rng(20240101))
    rng, x0 = harness.initial_point(0, 0, c.n_params)
    state = run_gradcore(Problem(h, c, sigma_bar_sq), OptimizerConfig(budget=10**9, max_steps=200), x0, rng)
    checked = [r for r in state.history if not r.constraint_miss]
    bad = sum(np.any(r.grad_var > r.kappa_sq * (1 + 1e-6)) for r in checked)
    elapsed = time.perf_counter() - t0
    ok = state.step == 200 and bad == 0 and elapsed < 120
    report(7, ok, f"{len(checked)} unflagged steps, {bad} violations", elapsed)


E2E_BUDGET = 10**7
E2E_RUNS = {
    "gradcore": dict(method="gradcore"),
    "bayes-sgd-128": dict(method="bayes-sgd", n_shots=128),
    "bayes-sgd-1024": dict(method="bayes-sgd", n_shots=1024),
    "nft": dict(method="nft", n_shots=1024),
    "bayes-nft": dict(method="bayes-nft", n_shots=1024),
}


@pytest.fixture(scope="module")
def e2e():
    t0 = time.perf_counter()
    out = {}
    for key, kw in E2E_RUNS.items():
        cfg = harness.ExperimentConfig(budget=E2E_BUDGET, n_trials=10, base_seed=0, **kw)
        out[key] = harness.run_experiment(cfg)
    return out, time.perf_counter() - t0


def _median_at_budget(records):
    return harness.final_medians(records, E2E_BUDGET)[records[0].method]


@pytest.mark.slow
def test_criterion_8_end_to_end_orderings(e2e):
    runs, elapsed = e2e
    med = {k: _median_at_budget(v) for k, v in runs.items()}
    a = med["gradcore"] < med["bayes-sgd-128"] and med["gradcore"] < med["bayes-sgd-1024"]
    b = med["bayes-nft"] <= med["nft"]
    rhos = []
    for t in range(10):
        recs = [r for r in runs["gradcore"] if r.trial == t]
        rhos.append(spearmanr([r.step for r in recs], [r.shots_this_step for r in recs])[0])
    c = float(np.median(rhos)) > 0.5
    detail = (f"medians {', '.join(f'{k}={v:.4f}' for k, v in med.items())}; "
              f"shots/step Spearman median {np.median(rhos):.2f}; (a)={a} (b)={b} (c)={c}")
    report(8, a and b and c and elapsed < 3600, detail, elapsed)


def test_criterion_9_determinism(tmp_path):
    t0 = time.perf_counter()
    same = True
    for method, n_shots in (("gradcore", None), ("bayes-sgd", 256), ("sgd-psr", 256), ("nft", 256),
                            ("bayes-nft", 256)):
        cfg = harness.ExperimentConfig(method=method, budget=10**5, n_shots=n_shots, n_trials=4, base_seed=11)
        blobs = []
        for i, workers in enumerate((1, 1, 4)):
            path = tmp_path / f"{method}-{i}.csv"
            harness.write_records(harness.run_experiment(cfg, workers=workers), path)
            blobs.append(path.read_bytes())
        same &= blobs[0] == blobs[1] == blobs[2]
    elapsed = time.perf_counter() - t0
    report(9, same and elapsed < 300, "CSV bytes identical across reruns and worker counts" if same
           else "CSV bytes differ", elapsed)
