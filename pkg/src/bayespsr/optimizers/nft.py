"""Sequential minimal optimization (NFT) and its GP-backed variant."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from ..gp import NFT_INDUCER, Dataset, posterior, retain_window
from .common import TWO_PI, OptimizerConfig, Problem, TrialState, out_of_budget

_GRID = 256


@dataclass(frozen=True)
class TrigCoeffs:
    """Coefficients in the basis ``(1, sqrt2 cos k t, ..., sqrt2 sin k t, ...)``, ``k = 1..V``."""

    b: np.ndarray

    @property
    def order(self) -> int:
        return (self.b.size - 1) // 2


def _basis(thetas, v: int) -> np.ndarray:
    thetas = np.asarray(thetas, dtype=float)
    k = np.arange(1, v + 1)
    ang = np.multiply.outer(thetas, k)
    return np.concatenate([np.ones(thetas.shape + (1,)), np.sqrt(2) * np.cos(ang), np.sqrt(2) * np.sin(ang)], axis=-1)


def fit_1d_trig(thetas, ys, sigmas, v: int) -> TrigCoeffs:
    """Weighted least squares fit of an order-``v`` trigonometric polynomial.

    ``sigmas`` are noise variances; weights are their inverse square roots.
    """
    thetas = np.asarray(thetas, dtype=float)
    ys = np.asarray(ys, dtype=float)
    sigmas = np.broadcast_to(np.asarray(sigmas, dtype=float), thetas.shape)
    if thetas.size < 2 * v + 1:
        raise ValueError(f"need at least {2 * v + 1} points")
    if np.any(sigmas <= 0):
        raise ValueError("noise variances must be positive")
    w = 1.0 / np.sqrt(sigmas)
    a = _basis(thetas, v) * w[:, None]
    b, _, rank, _ = np.linalg.lstsq(a, ys * w, rcond=None)
    if rank < 2 * v + 1:
        raise np.linalg.LinAlgError("rank-deficient design (coincident angles?)")
    return TrigCoeffs(b)


def trig_eval(c: TrigCoeffs, thetas) -> np.ndarray:
    return _basis(thetas, c.order) @ c.b


def argmin_1d_trig(c: TrigCoeffs, v: int) -> float:
    """Global minimizer in [0, 2pi)."""
    if c.b.size != 2 * v + 1:
        raise ValueError("coefficient length does not match order")
    if v == 1:
        # a cos t + b sin t is minimal opposite to (a, b)
        return float(np.mod(np.arctan2(-c.b[2], -c.b[1]), TWO_PI))
    grid = np.arange(_GRID) * TWO_PI / _GRID
    i = int(np.argmin(trig_eval(c, grid)))
    h = TWO_PI / _GRID
    res = minimize_scalar(lambda t: float(trig_eval(c, t)), bounds=(grid[i] - h, grid[i] + h),
                          method="bounded", options={"xatol": 1e-10})
    t = res.x if res.fun <= trig_eval(c, grid[i]) else grid[i]
    return float(np.mod(t, TWO_PI))


def nft_offsets(v: int, alpha: float) -> np.ndarray:
    """Shifted offsets measured per step: ``+/- alpha`` for ``V = 1``, else the ``2V+1`` equispaced design minus 0."""
    if v == 1:
        return np.array([-alpha, alpha])
    return np.arange(1, 2 * v + 1) * TWO_PI / (2 * v + 1)


def _shifted(x_hat, d, offs):
    pts = np.tile(x_hat, (offs.size, 1))
    pts[:, d] += offs
    return np.mod(pts, TWO_PI)


def _stabilize(t: int, dim: int, cfg: OptimizerConfig) -> bool:
    every = cfg.stabilize_interval if cfg.stabilize_interval is not None else dim + 1
    return every > 0 and t >= 1 and t % every == 0


def run_nft(problem: Problem, cfg: OptimizerConfig, x0, rng) -> TrialState:
    """NFT: per step, refit one axis from fresh shifted points plus the carried best score."""
    mult = problem.multiplicities
    alpha = cfg.shift("smo")
    state = TrialState(x_hat=np.mod(np.asarray(x0, dtype=float), TWO_PI), rng=rng)
    if out_of_budget(state, cfg.n_shots, cfg):
        return state
    y, s = problem.observe(state.x_hat[None, :], cfg.n_shots, rng)
    y_best, s_best = float(y[0]), float(s[0])
    state.cumulative_shots += cfg.n_shots
    t = 0
    while True:
        d = t % problem.dim
        offs = nft_offsets(mult[d], alpha)
        stab = _stabilize(t, problem.dim, cfg)
        n_obs = offs.size + int(stab)
        if out_of_budget(state, n_obs * cfg.n_shots, cfg):
            break
        if stab:
            y, s = problem.observe(state.x_hat[None, :], cfg.n_shots, rng)
            y_best, s_best = float(y[0]), float(s[0])
        y, s = problem.observe(_shifted(state.x_hat, d, offs), cfg.n_shots, rng)
        c = fit_1d_trig(np.concatenate([[0.0], offs]), np.concatenate([[y_best], y]),
                        np.concatenate([[s_best], s]), mult[d])
        theta = argmin_1d_trig(c, mult[d])
        y_best = float(trig_eval(c, theta))
        state.x_hat = state.x_hat.copy()
        state.x_hat[d] = np.mod(state.x_hat[d] + theta, TWO_PI)
        state.record(n_obs * cfg.n_shots)
        t += 1
    return state


def run_bayes_nft(problem: Problem, cfg: OptimizerConfig, x0, rng) -> TrialState:
    """NFT where the 1D model is the GP posterior mean given all retained observations."""
    mult = problem.multiplicities
    alpha = cfg.shift("smo")
    p = cfg.kernel("bayes-nft", mult)
    limit = cfg.window_r * 2 * sum(mult)
    state = TrialState(x_hat=np.mod(np.asarray(x0, dtype=float), TWO_PI), rng=rng,
                       dataset=Dataset.empty(problem.dim))
    if out_of_budget(state, cfg.n_shots, cfg):
        return state
    y, s = problem.observe(state.x_hat[None, :], cfg.n_shots, rng)
    state.dataset = state.dataset.append(state.x_hat[None, :], y, s)
    state.cumulative_shots += cfg.n_shots
    t = 0
    while True:
        d = t % problem.dim
        v = mult[d]
        offs = nft_offsets(v, alpha)
        stab = _stabilize(t, problem.dim, cfg)
        n_obs = offs.size + int(stab)
        if out_of_budget(state, n_obs * cfg.n_shots, cfg):
            break
        pts = _shifted(state.x_hat, d, offs)
        if stab:
            pts = np.vstack([state.x_hat[None, :], pts])
        y, s = problem.observe(pts, cfg.n_shots, rng)
        state.dataset = state.dataset.append(pts, y, s)
        # the posterior mean along one axis is an order-V trig polynomial, so 2V+1 nodes pin it down
        grid = np.arange(2 * v + 1) * TWO_PI / (2 * v + 1)
        mu = posterior(state.dataset, _shifted(state.x_hat, d, grid), p).mean
        c = fit_1d_trig(grid, mu, 1.0, v)
        theta = argmin_1d_trig(c, v)
        n_train = len(state.dataset)
        state.x_hat = state.x_hat.copy()
        state.x_hat[d] = np.mod(state.x_hat[d] + theta, TWO_PI)
        state.dataset = retain_window(state.dataset, NFT_INDUCER, limit, state.x_hat, p)
        state.record(n_obs * cfg.n_shots, n_train=n_train)
        t += 1
    return state
