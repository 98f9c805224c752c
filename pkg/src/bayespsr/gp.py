"""Gaussian-process regression with the VQE kernel and first-derivative outputs.

Every training or test output carries a tag: ``VALUE`` (-1) for ``f(x)`` or an
axis index ``d`` (0-based) for ``df/dx_d``.  Kernel entries are dispatched on
the pair of tags by differentiating the product kernel factor-wise.

Datasets are immutable.  ``Dataset.append`` and ``Dataset.tail`` propagate
cached Gram matrices and Cholesky factors so that the optimizer loops, which
add a handful of points per step to a window of a few hundred, never pay for
a full rebuild.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.linalg import cho_solve, cholesky, solve_triangular

VALUE = -1
NOISE_FLOOR = 1e-12  # relative to sigma0_sq
_JITTERS = (0.0,) + tuple(10.0**e for e in range(-12, -5))
_ROW_CHUNK = 64


class FactorizationError(np.linalg.LinAlgError):
    pass


@dataclass(frozen=True)
class KernelParams:
    gamma_sq: float
    sigma0_sq: float
    multiplicities: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "multiplicities", tuple(int(v) for v in self.multiplicities))
        if self.gamma_sq <= 0 or self.sigma0_sq <= 0:
            raise ValueError("gamma_sq and sigma0_sq must be positive")
        if any(v < 1 for v in self.multiplicities):
            raise ValueError("multiplicities must be >= 1")

    @classmethod
    def uniform(cls, gamma_sq, sigma0_sq, dim, v=1):
        return cls(gamma_sq, sigma0_sq, (v,) * dim)

    @property
    def dim(self) -> int:
        return len(self.multiplicities)


# ---------------------------------------------------------------------------
# per-axis kernel factors


def _v_table(p: KernelParams, axes):
    v = np.asarray(p.multiplicities)[axes]
    return v, p.gamma_sq + 2.0 * v


def _value_factor(delta, vs, den, vmax):
    if vmax == 1:
        return (den - 2.0 + 2.0 * np.cos(delta)) / den
    acc = np.zeros_like(delta)
    for k in range(1, vmax + 1):
        acc += np.where(k <= vs, np.cos(k * delta), 0.0)
    return (den - 2.0 * vs + 2.0 * acc) / den


def _first_factor(delta, vs, den, vmax):
    # d/d(x2) of the value factor, delta = x1 - x2
    acc = np.zeros_like(delta)
    for k in range(1, vmax + 1):
        acc += np.where(k <= vs, k * np.sin(k * delta), 0.0)
    return 2.0 * acc / den


def _second_factor(delta, vs, den, vmax):
    # d^2/(dx1 dx2) of the value factor
    acc = np.zeros_like(delta)
    for k in range(1, vmax + 1):
        acc += np.where(k <= vs, k * k * np.cos(k * delta), 0.0)
    return 2.0 * acc / den


def vqe_kernel(x, x2, p: KernelParams) -> float:
    """``sigma0^2 prod_d (gamma^2 + 2 sum_v cos(v (x_d - x2_d))) / (gamma^2 + 2 V_d)``."""
    return float(kernel_matrix(np.atleast_2d(x), None, np.atleast_2d(x2), None, p)[0, 0])


def kernel_deriv_cross(x, x2, d: int, p: KernelParams) -> float:
    """Covariance of ``f(x)`` with ``df/dx_d`` at ``x2``."""
    return float(kernel_matrix(np.atleast_2d(x), [VALUE], np.atleast_2d(x2), [d], p)[0, 0])


def kernel_deriv_both(x, d: int, x2, d2: int, p: KernelParams) -> float:
    """Covariance of ``df/dx_d`` at ``x`` with ``df/dx_d2`` at ``x2``."""
    return float(kernel_matrix(np.atleast_2d(x), [d], np.atleast_2d(x2), [d2], p)[0, 0])


def kernel_matrix(x1, tags1, x2, tags2, p: KernelParams) -> np.ndarray:
    """Kernel matrix between tagged point sets; ``None`` tags mean all values."""
    x1 = np.atleast_2d(np.asarray(x1, dtype=float))
    x2 = np.atleast_2d(np.asarray(x2, dtype=float))
    if x1.shape[1] != p.dim or x2.shape[1] != p.dim:
        raise ValueError("point dimension does not match kernel parameters")
    n, m = x1.shape[0], x2.shape[0]
    t1 = np.full(n, VALUE) if tags1 is None else np.asarray(tags1, dtype=int)
    t2 = np.full(m, VALUE) if tags2 is None else np.asarray(tags2, dtype=int)
    out = np.empty((n, m))
    if n == 0 or m == 0:
        return out
    vs_all, den_all = _v_table(p, slice(None))
    vmax = int(vs_all.max())
    a1 = _axis_structure(x1, t1)
    if a1 is not None:
        a2 = _axis_structure(x2, t2)
        if a2 is not None and np.array_equal(a1, a2):
            return _axis_pairs(x1, t1, x2, t2, a1, p, vmax)
    if np.all(t2 < 0):
        anchor = a1
        if anchor is not None:
            return _axis_rows(x1, t1, anchor, x2, p, vmax)
    if np.all(t1 < 0):
        anchor = _axis_structure(x2, t2)
        if anchor is not None:
            return _axis_rows(x2, t2, anchor, x1, p, vmax).T.copy()
    for start in range(0, n, _ROW_CHUNK):
        sl = slice(start, min(n, start + _ROW_CHUNK))
        delta = x1[sl, None, :] - x2[None, :, :]
        fac = _value_factor(delta, vs_all, den_all, vmax)
        ta = t1[sl]
        if np.any(ta >= 0) or np.any(t2 >= 0):
            _apply_derivative_tags(fac, delta, ta, t2, p, vmax)
        out[sl] = p.sigma0_sq * np.prod(fac, axis=-1)
    return out


def _axis_structure(x, tags):
    """Anchor point if every row differs from it in at most one coordinate, else ``None``.

    Derivative tags must sit on that coordinate (or on any axis for an unshifted row).
    """
    if x.shape[1] < 3:
        return None
    anchor = np.median(x, axis=0)
    diff = x != anchor
    count = diff.sum(axis=1)
    if np.any(count > 1):
        return None
    axis = np.argmax(diff, axis=1)
    if np.any((count == 1) & (tags >= 0) & (tags != axis)):
        return None
    return anchor


def _axis_rows(xq, tq, anchor, x2, p, vmax):
    """Kernel rows for points on axis lines through ``anchor`` against value points ``x2``.

    Uses leave-one-axis-out products so the cost is linear in the dimension.
    """
    vs_all, den_all = _v_table(p, slice(None))
    fac = _value_factor(anchor[None, :] - x2, vs_all, den_all, vmax)
    ones = np.ones((fac.shape[0], 1))
    prefix = np.cumprod(np.hstack([ones, fac[:, :-1]]), axis=1)
    suffix = np.cumprod(np.hstack([ones, fac[:, :0:-1]]), axis=1)[:, ::-1]
    loo = prefix * suffix
    full = prefix[:, -1] * fac[:, -1]
    diff = xq != anchor
    shifted = diff.any(axis=1)
    axis = np.where(shifted, np.argmax(diff, axis=1), tq)
    out = np.empty((xq.shape[0], x2.shape[0]))
    plain = axis < 0
    out[plain] = full
    rows = np.flatnonzero(~plain)
    if rows.size:
        ks = axis[rows]
        v, den = _v_table(p, ks)
        delta = xq[rows, ks][:, None] - x2[:, ks].T
        deriv = tq[rows] >= 0
        f = np.where(deriv[:, None],
                     -_first_factor(delta, v[:, None], den[:, None], vmax),
                     _value_factor(delta, v[:, None], den[:, None], vmax))
        out[rows] = loo[:, ks].T * f
    return p.sigma0_sq * out


def _line_axis(x, tags, anchor):
    diff = x != anchor
    return np.where(diff.any(axis=1), np.argmax(diff, axis=1), tags)


def _axis_factor(delta, k, d1, d2, p, vmax):
    """Per-axis kernel factor with optional derivatives on either argument."""
    v, den = _v_table(p, k)
    val = _value_factor(delta, v, den, vmax)
    first = _first_factor(delta, v, den, vmax)
    second = _second_factor(delta, v, den, vmax)
    return np.select([d1 & d2, d1, d2], [second, -first, first], val)


def _axis_pairs(x1, t1, x2, t2, anchor, p, vmax):
    """Kernel between two sets of axis-line points sharing ``anchor``.

    Only the (at most two) shifted or differentiated axes contribute; every
    other factor is exactly one.
    """
    k1 = _line_axis(x1, t1, anchor)[:, None]
    k2 = _line_axis(x2, t2, anchor)[None, :]
    t1, t2 = t1[:, None], t2[None, :]
    out = np.ones((k1.shape[0], k2.shape[1]))
    for k, other in ((k1, k2), (k2, k1)):
        kk = np.broadcast_to(k, out.shape)
        use = kk >= 0
        if k is k2:
            use &= kk != np.broadcast_to(k1, out.shape)
        i, j = np.nonzero(use)
        if i.size == 0:
            continue
        ax = kk[i, j]
        delta = x1[i, ax] - x2[j, ax]
        d1 = np.broadcast_to(t1, out.shape)[i, j] == ax
        d2 = np.broadcast_to(t2, out.shape)[i, j] == ax
        out[i, j] *= _axis_factor(delta, ax, d1, d2, p, vmax)
    return p.sigma0_sq * out


def _apply_derivative_tags(fac, delta, ta, tb, p, vmax):
    rows = np.arange(ta.shape[0])
    cols = np.arange(tb.shape[0])
    # derivative on the second argument
    ii, jj = np.meshgrid(rows, cols[tb >= 0], indexing="ij")
    if ii.size:
        dd = tb[jj]
        v, den = _v_table(p, dd)
        fac[ii, jj, dd] = _first_factor(delta[ii, jj, dd], v, den, vmax)
    # derivative on the first argument
    ii, jj = np.meshgrid(rows[ta >= 0], cols, indexing="ij")
    if ii.size:
        dd = ta[ii]
        v, den = _v_table(p, dd)
        fac[ii, jj, dd] = -_first_factor(delta[ii, jj, dd], v, den, vmax)
        same = ta[ii] == tb[jj]
        ii, jj, dd = ii[same], jj[same], dd[same]
        if ii.size:
            v, den = _v_table(p, dd)
            fac[ii, jj, dd] = _second_factor(delta[ii, jj, dd], v, den, vmax)


# ---------------------------------------------------------------------------
# data


@dataclass(frozen=True)
class Observation:
    location: np.ndarray
    tag: int
    value: float
    noise_var: float


@dataclass(frozen=True, eq=False)
class Dataset:
    """Training set ``(X, tags, y, noise)``; treat as immutable."""

    X: np.ndarray
    tags: np.ndarray
    y: np.ndarray
    noise: np.ndarray
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        n = self.X.shape[0]
        if self.X.ndim != 2 or self.tags.shape != (n,) or self.y.shape != (n,) or self.noise.shape != (n,):
            raise ValueError("inconsistent dataset arrays")
        if np.any(self.noise < 0):
            raise ValueError("noise variances must be non-negative")

    @classmethod
    def empty(cls, dim: int) -> "Dataset":
        return cls(np.zeros((0, dim)), np.zeros(0, dtype=int), np.zeros(0), np.zeros(0))

    @classmethod
    def from_observations(cls, obs, dim: int) -> "Dataset":
        obs = list(obs)
        if not obs:
            return cls.empty(dim)
        return cls(
            np.array([o.location for o in obs], dtype=float).reshape(len(obs), dim),
            np.array([o.tag for o in obs], dtype=int),
            np.array([o.value for o in obs], dtype=float),
            np.array([o.noise_var for o in obs], dtype=float),
        )

    def __len__(self) -> int:
        return self.X.shape[0]

    @property
    def dim(self) -> int:
        return self.X.shape[1]

    def observations(self) -> list[Observation]:
        return [Observation(self.X[i].copy(), int(self.tags[i]), float(self.y[i]), float(self.noise[i]))
                for i in range(len(self))]

    def append(self, X, y, noise, tags=None) -> "Dataset":
        X = np.atleast_2d(np.asarray(X, dtype=float)).reshape(-1, self.dim)
        k = X.shape[0]
        y = np.broadcast_to(np.asarray(y, dtype=float), (k,)).copy()
        noise = np.broadcast_to(np.asarray(noise, dtype=float), (k,)).copy()
        tags = np.full(k, VALUE) if tags is None else np.broadcast_to(np.asarray(tags, dtype=int), (k,)).copy()
        new = Dataset(np.vstack([self.X, X]), np.concatenate([self.tags, tags]),
                      np.concatenate([self.y, y]), np.concatenate([self.noise, noise]))
        for p, gram in list(self._grams()):
            cross = kernel_matrix(self.X, self.tags, X, tags, p)
            block = kernel_matrix(X, tags, X, tags, p)
            full = np.block([[gram, cross], [cross.T, block]])
            new._cache[("gram", p)] = full
            chol = self._cache.get(("chol", p))
            if chol is not None:
                ext = _extend_cholesky(chol, cross, block, _floored(noise, p))
                if ext is not None:
                    new._cache[("chol", p)] = ext
        return new

    def tail(self, n: int) -> "Dataset":
        n = max(0, min(n, len(self)))
        start = len(self) - n
        new = Dataset(self.X[start:].copy(), self.tags[start:].copy(), self.y[start:].copy(),
                      self.noise[start:].copy())
        for p, gram in list(self._grams()):
            new._cache[("gram", p)] = gram[start:, start:].copy()
        return new

    def _grams(self):
        for key, val in self._cache.items():
            if key[0] == "gram":
                yield key[1], val

    def gram(self, p: KernelParams) -> np.ndarray:
        key = ("gram", p)
        if key not in self._cache:
            self._cache[key] = kernel_matrix(self.X, self.tags, self.X, self.tags, p)
        return self._cache[key]

    def factor(self, p: KernelParams):
        """Lower Cholesky factor of ``K + diag(noise)`` and the jitter it needed."""
        key = ("chol", p)
        if key not in self._cache:
            self._cache[key] = _factorize(self.gram(p), _floored(self.noise, p), p.sigma0_sq)
        return self._cache[key]

    def weights(self, p: KernelParams) -> np.ndarray:
        key = ("alpha", p)
        if key not in self._cache:
            low, _ = self.factor(p)
            self._cache[key] = cho_solve((low, True), self.y)
        return self._cache[key]


def _floored(noise, p):
    return np.maximum(noise, NOISE_FLOOR * p.sigma0_sq)


def _factorize(gram, noise, sigma0_sq):
    base = gram + np.diag(noise)
    for j in _JITTERS:
        try:
            low = cholesky(base + j * sigma0_sq * np.eye(len(noise)), lower=True, check_finite=False)
            return low, j * sigma0_sq
        except np.linalg.LinAlgError:
            continue
    raise FactorizationError("kernel matrix is not positive definite even with maximal jitter")


def _extend_cholesky(chol, cross, block, noise):
    low, jitter = chol
    b = solve_triangular(low, cross, lower=True, check_finite=False)
    schur = block + np.diag(noise + jitter) - b.T @ b
    try:
        low22 = cholesky(schur, lower=True, check_finite=False)
    except np.linalg.LinAlgError:
        return None
    n, k = low.shape[0], low22.shape[0]
    out = np.zeros((n + k, n + k))
    out[:n, :n] = low
    out[n:, :n] = b.T
    out[n:, n:] = low22
    return out, jitter


# ---------------------------------------------------------------------------
# inference


@dataclass(frozen=True)
class GpPosterior:
    mean: np.ndarray
    cov: np.ndarray

    @property
    def var(self) -> np.ndarray:
        return np.diag(self.cov).copy()


def posterior(ds: Dataset, xq, p: KernelParams, tags=None) -> GpPosterior:
    """Joint posterior of the tagged outputs at ``xq`` given ``ds``."""
    xq = np.atleast_2d(np.asarray(xq, dtype=float))
    tq = np.full(xq.shape[0], VALUE) if tags is None else np.broadcast_to(np.asarray(tags, dtype=int), (xq.shape[0],))
    prior = kernel_matrix(xq, tq, xq, tq, p)
    if len(ds) == 0:
        return GpPosterior(np.zeros(xq.shape[0]), prior)
    low, _ = ds.factor(p)
    cross = kernel_matrix(ds.X, ds.tags, xq, tq, p)
    mean = cross.T @ ds.weights(p)
    v = solve_triangular(low, cross, lower=True, check_finite=False)
    cov = prior - v.T @ v
    cov = 0.5 * (cov + cov.T)
    idx = np.diag_indices_from(cov)
    cov[idx] = np.maximum(cov[idx], 0.0)
    return GpPosterior(mean, cov)


def grad_posterior(ds: Dataset, x_hat, p: KernelParams) -> tuple[np.ndarray, np.ndarray]:
    """Per-axis derivative posterior mean and variance at ``x_hat``."""
    x_hat = np.asarray(x_hat, dtype=float)
    dim = x_hat.shape[0]
    post = posterior(ds, np.tile(x_hat, (dim, 1)), p, tags=np.arange(dim))
    return post.mean, post.var


SGD_WINDOW = "sgd-window"
NFT_INDUCER = "nft-inducer"


def retain_window(ds: Dataset, policy: str, limit: int, current_opt=None,
                  p: Optional[KernelParams] = None) -> Dataset:
    """Bound the training set size.

    ``sgd-window`` keeps the latest ``limit`` observations.  ``nft-inducer``
    triggers once the set exceeds ``limit - 1 + D`` and keeps the latest
    ``limit - 1`` observations plus one pseudo-observation at ``current_opt``
    carrying the posterior mean and variance of the full set.
    """
    if limit < 0:
        raise ValueError("limit must be non-negative")
    if policy == SGD_WINDOW:
        return ds.tail(limit) if len(ds) > limit else ds
    if policy == NFT_INDUCER:
        if limit < 1:
            raise ValueError("nft-inducer needs limit >= 1")
        if len(ds) <= limit - 1 + ds.dim:
            return ds
        if current_opt is None or p is None:
            raise ValueError("nft-inducer needs the current optimum and kernel parameters")
        post = posterior(ds, np.asarray(current_opt)[None, :], p)
        return ds.tail(limit - 1).append(current_opt, post.mean[0], post.cov[0, 0])
    raise ValueError(f"unknown retention policy {policy!r}")
