"""Classical and Bayesian parameter shift rules in closed form.

These are direct transcriptions of the analytic results and share no code
with :mod:`bayespsr.gp`, so each side can be used to validate the other.
"""
from __future__ import annotations

import numpy as np

# below this |sin u| the 1/sin^2 terms cancel badly; the bounded sine sum is used instead
_SINGULAR = 0.05


def psr_first(y_minus: float, y_plus: float, alpha: float) -> float:
    """Two-point shift rule ``(y(+a) - y(-a)) / (2 sin a)``."""
    s = np.sin(alpha)
    if abs(s) < 1e-12:
        raise ValueError("shift must not be a multiple of pi")
    return (y_plus - y_minus) / (2.0 * s)


def equidistant_offsets(v: int) -> np.ndarray:
    """Offsets ``(2w+1) pi / (2V)`` for ``w = 0 .. 2V-1``."""
    w = np.arange(2 * v)
    return (2 * w + 1) * np.pi / (2 * v)


def equidistant_points(x_hat, d: int, v: int) -> np.ndarray:
    """The ``2V`` design points around ``x_hat`` along axis ``d`` (0-based), wrapped to [0, 2pi)."""
    x_hat = np.asarray(x_hat, dtype=float)
    if not 0 <= d < x_hat.shape[0]:
        raise ValueError("axis out of range")
    pts = np.tile(x_hat, (2 * v, 1))
    pts[:, d] += equidistant_offsets(v)
    return np.mod(pts, 2 * np.pi)


def _psr_weights(v: int) -> np.ndarray:
    w = np.arange(2 * v)
    return (-1.0) ** w / (2.0 * np.sin((2 * w + 1) * np.pi / (4 * v)) ** 2)


def psr_general(y, v: int) -> float:
    """General shift rule for multiplicity ``v`` on the equidistant design."""
    y = np.asarray(y, dtype=float)
    if y.shape != (2 * v,):
        raise ValueError(f"expected {2 * v} observations")
    return float(_psr_weights(v) @ y / (2 * v))


def bpsr_closed_form(y, v: int, sigma_sq: float, sigma0_sq: float, gamma_sq: float,
                     alpha_prime: float = 0.0) -> tuple[float, float]:
    """Derivative posterior at ``x_hat + alpha' e_d`` from the equidistant design.

    Exact for homoscedastic noise ``sigma_sq``.  Close to a removable
    singularity of the ``1/sin^2`` terms the mean is evaluated in the
    equivalent, bounded sine-sum form.
    """
    y = np.asarray(y, dtype=float)
    if y.shape != (2 * v,):
        raise ValueError(f"expected {2 * v} observations")
    if sigma_sq <= 0 or sigma0_sq <= 0 or gamma_sq <= 0:
        raise ValueError("noise and kernel parameters must be positive")
    r = sigma_sq / sigma0_sq
    g = gamma_sq + 2 * v
    a = g * r + 2 * v
    b = g * r + 4 * v
    w = np.arange(2 * v)
    sign = (-1.0) ** w
    base = (2 * w + 1) * np.pi / (4 * v)
    u = base - alpha_prime / 2
    ca = np.cos(v * alpha_prime)
    if np.min(np.abs(np.sin(u))) < _SINGULAR:
        k = np.arange(1, v + 1)
        ang = np.outer(2 * base - alpha_prime, k)
        sines = 2.0 * (k * np.sin(ang)).sum(axis=1)
        terms = sines - 4 * v**2 * sign * ca / b
    else:
        terms = sign * (ca / (2 * np.sin(u) ** 2)
                        + v * np.sin(base - (v + 0.5) * alpha_prime) / np.sin(u)
                        - 4 * v**2 * ca / b)
    mean = float(terms @ y / a)
    c2 = np.cos(2 * v * alpha_prime)
    var = (sigma_sq * (v * (v + 1) * (2 * v + 1) / (3 * a) - 4 * v**3 * c2 / (a * b))
           - sigma0_sq * 8 * v**4 * (c2 - 1) / (g * a * b))
    return mean, float(var)


def bpsr_center_mean(y, v: int, sigma_sq: float, sigma0_sq: float, gamma_sq: float) -> float:
    """Derivative posterior mean at the design center (``alpha' = 0``)."""
    y = np.asarray(y, dtype=float)
    r = sigma_sq / sigma0_sq
    g = gamma_sq + 2 * v
    w = np.arange(2 * v)
    terms = (-1.0) ** w * (1.0 / (2 * np.sin((2 * w + 1) * np.pi / (4 * v)) ** 2)
                           + v * g * r / (g * r + 4 * v))
    return float(terms @ y / (g * r + 2 * v))


def bpsr_center_var(v: int, sigma_sq: float, sigma0_sq: float, gamma_sq: float) -> float:
    """Derivative posterior variance at ``alpha' = k pi / V``."""
    r = sigma_sq / sigma0_sq
    g = gamma_sq + 2 * v
    a = g * r + 2 * v
    b = g * r + 4 * v
    return sigma_sq * (v * (v + 1) * (2 * v + 1) / (3 * a) - 4 * v**3 / (a * b))


def bpsr_asymptotic(y, v: int, sigma_sq: float, sigma0_sq: float, gamma_sq: float) -> tuple[float, float]:
    """Leading-order mean and variance at the center for small ``sigma^2 / sigma0^2``."""
    y = np.asarray(y, dtype=float)
    r = sigma_sq / sigma0_sq
    mean = _psr_weights(v) @ y / ((gamma_sq + 2 * v) * r + 2 * v)
    return float(mean), sigma_sq * (2 * v**2 + 1) / 6


def bpsr_first_closed_form(y1: float, y2: float, alpha: float, sigma_sq: float,
                           sigma0_sq: float, gamma_sq: float) -> tuple[float, float]:
    """``V = 1`` derivative posterior at the midpoint of ``x - a e_d`` and ``x + a e_d``."""
    if not 0 < alpha < np.pi:
        raise ValueError("alpha must lie in (0, pi)")
    if sigma_sq <= 0 or sigma0_sq <= 0 or gamma_sq <= 0:
        raise ValueError("noise and kernel parameters must be positive")
    s = np.sin(alpha)
    den = (gamma_sq / 2 + 1) * sigma_sq / sigma0_sq + 2 * s * s
    return (y2 - y1) * s / den, sigma_sq / den
