from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .. import simulator as sim
from ..gp import Dataset, KernelParams
from ..psr import equidistant_offsets

TWO_PI = 2 * np.pi

# per-method defaults that the experiment tables fix
DEFAULT_GAMMA_SQ = {"bayes-sgd": 1.0, "gradcore": 9.0, "bayes-nft": 9.0}
DEFAULT_ALPHA = {"sgd": np.pi / 2, "smo": 2 * np.pi / 3}


@dataclass(frozen=True)
class Problem:
    """The VQE instance an optimizer sees: observable, ansatz and noise model."""

    hamiltonian: sim.PauliHamiltonian
    circuit: sim.Circuit
    sigma_bar_sq: float
    noise_mode: str = "exact-variance"

    @property
    def dim(self) -> int:
        return self.circuit.n_params

    @property
    def multiplicities(self) -> tuple[int, ...]:
        return self.circuit.multiplicities

    def observe(self, xs, n_shots, rng):
        return sim.observe_batch(self.hamiltonian, self.circuit, xs, n_shots,
                                 self.noise_mode, self.sigma_bar_sq, rng)


@dataclass(frozen=True)
class OptimizerConfig:
    budget: int
    n_shots: int = 1024
    lr: float = 0.05
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    alpha: Optional[float] = None
    gamma_sq: Optional[float] = None
    sigma0_sq: float = 100.0
    window_r: int = 5
    corethresh: float = 256.0
    coremin_scale: float = 2048.0
    corethresh_scale: float = 1.2
    t_initial: Optional[int] = None
    n_grid: int = 64
    uniform_shots: bool = False
    stabilize_interval: Optional[int] = None
    max_steps: Optional[int] = None

    def __post_init__(self):
        if self.budget <= 0:
            raise ValueError("budget must be positive")
        if self.n_shots < 1:
            raise ValueError("n_shots must be >= 1")
        if self.window_r < 0 or self.n_grid < 2:
            raise ValueError("window_r must be >= 0 and n_grid >= 2")

    def kernel(self, method: str, mult) -> KernelParams:
        g = self.gamma_sq if self.gamma_sq is not None else DEFAULT_GAMMA_SQ.get(method, 9.0)
        return KernelParams(g, self.sigma0_sq, tuple(mult))

    def shift(self, family: str) -> float:
        return self.alpha if self.alpha is not None else DEFAULT_ALPHA[family]

    def with_(self, **kw) -> "OptimizerConfig":
        return replace(self, **kw)


@dataclass(frozen=True)
class AdamState:
    first_moment: np.ndarray
    second_moment: np.ndarray
    step_count: int = 0
    learning_rate: float = 0.05
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    @classmethod
    def fresh(cls, dim, learning_rate=0.05, beta1=0.9, beta2=0.999, epsilon=1e-8):
        return cls(np.zeros(dim), np.zeros(dim), 0, learning_rate, beta1, beta2, epsilon)


def adam_update(s: AdamState, grad, x) -> tuple[AdamState, np.ndarray]:
    """Bias-corrected ADAM step; the new point is wrapped to [0, 2pi)."""
    grad = np.asarray(grad, dtype=float)
    t = s.step_count + 1
    m = s.beta1 * s.first_moment + (1 - s.beta1) * grad
    v = s.beta2 * s.second_moment + (1 - s.beta2) * grad**2
    m_hat = m / (1 - s.beta1**t)
    v_hat = v / (1 - s.beta2**t)
    x_new = np.mod(np.asarray(x, dtype=float) - s.learning_rate * m_hat / (np.sqrt(v_hat) + s.epsilon), TWO_PI)
    return replace(s, first_moment=m, second_moment=v, step_count=t), x_new


@dataclass
class StepRecord:
    step: int
    cumulative_shots: int
    shots: int
    x_hat: np.ndarray
    n_train: int = 0
    kappa_sq: Optional[float] = None
    grad_var: Optional[np.ndarray] = None
    constraint_miss: bool = False


@dataclass
class TrialState:
    x_hat: np.ndarray
    rng: np.random.Generator
    dataset: Optional[Dataset] = None
    adam: Optional[AdamState] = None
    cumulative_shots: int = 0
    step: int = 0
    history: list = field(default_factory=list)

    def record(self, shots: int, **extra):
        self.cumulative_shots += int(shots)
        self.step += 1
        self.history.append(StepRecord(self.step, self.cumulative_shots, int(shots), self.x_hat.copy(), **extra))


def axis_sweep(x_hat, mult, alpha: Optional[float]) -> tuple[np.ndarray, np.ndarray]:
    """Shifted points for every axis: ``x -/+ alpha e_d`` when ``V_d = 1``, else the equidistant design.

    With ``alpha=None`` the equidistant design is used throughout. Returns the
    points and the axis each one belongs to.
    """
    pts, axes = [], []
    for d, v in enumerate(mult):
        offs = np.array([-alpha, alpha]) if (v == 1 and alpha is not None) else equidistant_offsets(v)
        block = np.tile(x_hat, (offs.size, 1))
        block[:, d] += offs
        pts.append(block)
        axes.extend([d] * offs.size)
    return np.mod(np.vstack(pts), TWO_PI), np.asarray(axes)


def out_of_budget(state: TrialState, cost: int, cfg: OptimizerConfig) -> bool:
    if cfg.max_steps is not None and state.step >= cfg.max_steps:
        return True
    return state.cumulative_shots + cost > cfg.budget
