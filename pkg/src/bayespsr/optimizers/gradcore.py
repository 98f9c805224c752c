"""SGD-GradCoRe: choose shots per step so the gradient posterior meets a variance target."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..gp import SGD_WINDOW, VALUE, Dataset, KernelParams, grad_posterior, posterior, retain_window
from .common import AdamState, OptimizerConfig, Problem, TrialState, adam_update, axis_sweep, out_of_budget


@dataclass(frozen=True)
class KappaSchedule:
    c0: float
    c1: float
    t_initial: int
    kappa0_sq: float

    def __post_init__(self):
        if self.c0 <= 0 or self.c1 <= 0 or self.t_initial < 0 or self.kappa0_sq <= 0:
            raise ValueError("invalid kappa schedule")

    @classmethod
    def from_config(cls, cfg: OptimizerConfig, sigma_bar_sq: float, dim: int) -> "KappaSchedule":
        # thresholds are quoted as equivalent shot counts of the single-shot variance
        t0 = dim if cfg.t_initial is None else cfg.t_initial
        return cls(sigma_bar_sq / cfg.coremin_scale, cfg.corethresh_scale, t0, sigma_bar_sq / cfg.corethresh)


def kappa_update(sched: KappaSchedule, grad_mean, t: int) -> np.ndarray:
    """Per-axis variance thresholds for the step after ``t``."""
    grad_mean = np.asarray(grad_mean, dtype=float)
    dim = grad_mean.shape[0]
    if t < sched.t_initial:
        return np.full(dim, sched.kappa0_sq)
    return np.full(dim, max(sched.c0, sched.c1 / dim * float(grad_mean @ grad_mean)))


@dataclass
class Selection:
    points: np.ndarray
    shots: np.ndarray
    axes: np.ndarray
    miss: np.ndarray
    noise_grid_choice: np.ndarray


def _pair_variance(block: np.ndarray, noise: np.ndarray) -> np.ndarray:
    """Derivative variance after conditioning on the block's value points at each noise level.

    ``block`` is the joint posterior covariance with the derivative last.
    """
    s_vals = block[:-1, :-1]
    c = block[:-1, -1]
    lam, q = np.linalg.eigh(s_vals)
    proj = (q.T @ c) ** 2
    return block[-1, -1] - (proj[None, :] / (np.maximum(lam, 0.0)[None, :] + noise[:, None])).sum(axis=1)


def gradcore_select(ds: Dataset, x_hat, kappa_sq, sigma_bar_sq: float, alpha_hat: float,
                    p: KernelParams, n_grid: int = 64, uniform: bool = False) -> Selection:
    """Cheapest equal-shot design per axis that puts ``x_hat`` in the gradient confident region.

    For each axis the largest hypothetical noise on a geometric grid over
    ``[2 kappa_d^2, sigma_bar^2]`` is kept whose derivative variance after
    conditioning is at most ``kappa_d^2``.  Variances do not depend on the
    observed values, so none are needed.
    """
    x_hat = np.asarray(x_hat, dtype=float)
    kappa_sq = np.broadcast_to(np.asarray(kappa_sq, dtype=float), x_hat.shape)
    if np.any(kappa_sq <= 0) or sigma_bar_sq <= 0:
        raise ValueError("thresholds and single-shot variance must be positive")
    dim = x_hat.shape[0]
    pts, axes = axis_sweep(x_hat, p.multiplicities, alpha_hat)
    queries = np.vstack([pts, np.tile(x_hat, (dim, 1))])
    tags = np.concatenate([np.full(len(pts), VALUE), np.arange(dim)])
    cov = posterior(ds, queries, p, tags=tags).cov
    shots = np.empty(len(pts), dtype=np.int64)
    miss = np.zeros(dim, dtype=bool)
    chosen = np.empty(dim)
    for d in range(dim):
        idx = np.concatenate([np.flatnonzero(axes == d), [len(pts) + d]])
        block = cov[np.ix_(idx, idx)]
        lo = 2.0 * kappa_sq[d]
        grid = np.geomspace(lo, sigma_bar_sq, n_grid) if sigma_bar_sq > lo else np.array([sigma_bar_sq])
        ok = _pair_variance(block, grid) <= kappa_sq[d]
        if ok.any():
            noise = grid[np.flatnonzero(ok)[-1]]
        else:
            noise, miss[d] = lo, True
        chosen[d] = noise
        shots[axes == d] = max(1, int(np.ceil(sigma_bar_sq / noise - 1e-9)))
    if uniform:
        shots[:] = shots.max()
    return Selection(pts, shots, axes, miss, chosen)


def run_gradcore(problem: Problem, cfg: OptimizerConfig, x0, rng) -> TrialState:
    """SGD-GradCoRe: adaptive shots, Bayesian-PSR gradient, ADAM step, kappa schedule."""
    mult = problem.multiplicities
    p = cfg.kernel("gradcore", mult)
    alpha = cfg.shift("sgd")
    sched = KappaSchedule.from_config(cfg, problem.sigma_bar_sq, problem.dim)
    limit = cfg.window_r * 2 * sum(mult)
    state = TrialState(
        x_hat=np.mod(np.asarray(x0, dtype=float), 2 * np.pi), rng=rng,
        dataset=Dataset.empty(problem.dim),
        adam=AdamState.fresh(problem.dim, cfg.lr, cfg.beta1, cfg.beta2, cfg.eps),
    )
    kappa = np.full(problem.dim, sched.kappa0_sq)
    t = 0
    while True:
        sel = gradcore_select(state.dataset, state.x_hat, kappa, problem.sigma_bar_sq, alpha, p,
                              cfg.n_grid, cfg.uniform_shots)
        cost = int(sel.shots.sum())
        if out_of_budget(state, cost, cfg):
            break
        y, noise = problem.observe(sel.points, sel.shots, rng)
        state.dataset = state.dataset.append(sel.points, y, noise)
        grad, var = grad_posterior(state.dataset, state.x_hat, p)
        n_train = len(state.dataset)
        state.adam, state.x_hat = adam_update(state.adam, grad, state.x_hat)
        state.record(cost, n_train=n_train, kappa_sq=float(kappa[0]), grad_var=var,
                     constraint_miss=bool(sel.miss.any()))
        kappa = kappa_update(sched, grad, t)
        state.dataset = retain_window(state.dataset, SGD_WINDOW, limit)
        t += 1
    return state
