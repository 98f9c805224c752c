"""SGD with the classical shift rule and with Bayesian PSR (observation reuse)."""
from __future__ import annotations

import numpy as np

from ..gp import SGD_WINDOW, Dataset, grad_posterior, retain_window
from ..psr import psr_general
from .common import AdamState, OptimizerConfig, Problem, TrialState, adam_update, axis_sweep, out_of_budget


def _fresh_state(problem, cfg, x0, rng) -> TrialState:
    adam = AdamState.fresh(problem.dim, cfg.lr, cfg.beta1, cfg.beta2, cfg.eps)
    return TrialState(x_hat=np.mod(np.asarray(x0, dtype=float), 2 * np.pi), rng=rng, adam=adam)


def run_sgd_psr(problem: Problem, cfg: OptimizerConfig, x0, rng) -> TrialState:
    """ADAM on general-PSR gradients from a fresh equidistant sweep each step."""
    state = _fresh_state(problem, cfg, x0, rng)
    mult = problem.multiplicities
    n_points = 2 * sum(mult)
    while not out_of_budget(state, n_points * cfg.n_shots, cfg):
        pts, axes = axis_sweep(state.x_hat, mult, None)
        y, _ = problem.observe(pts, cfg.n_shots, rng)
        grad = np.array([psr_general(y[axes == d], v) for d, v in enumerate(mult)])
        state.adam, state.x_hat = adam_update(state.adam, grad, state.x_hat)
        state.record(n_points * cfg.n_shots)
    return state


def run_bayes_sgd(problem: Problem, cfg: OptimizerConfig, x0, rng) -> TrialState:
    """ADAM on Bayesian-PSR gradients over a window of the latest ``R * 2V * D`` observations."""
    state = _fresh_state(problem, cfg, x0, rng)
    mult = problem.multiplicities
    p = cfg.kernel("bayes-sgd", mult)
    alpha = cfg.shift("sgd")
    limit = cfg.window_r * 2 * sum(mult)
    n_points = 2 * sum(mult)
    state.dataset = Dataset.empty(problem.dim)
    while not out_of_budget(state, n_points * cfg.n_shots, cfg):
        pts, _ = axis_sweep(state.x_hat, mult, alpha)
        y, noise = problem.observe(pts, cfg.n_shots, rng)
        state.dataset = state.dataset.append(pts, y, noise)
        grad, var = grad_posterior(state.dataset, state.x_hat, p)
        n_train = len(state.dataset)
        state.adam, state.x_hat = adam_update(state.adam, grad, state.x_hat)
        state.dataset = retain_window(state.dataset, SGD_WINDOW, limit)
        state.record(n_points * cfg.n_shots, n_train=n_train, grad_var=var)
    return state
