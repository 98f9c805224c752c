"""Seeded experiment driver: configs, parallel trials, metrics, CSV and percentile aggregation."""
from __future__ import annotations

import csv
import dataclasses
import json
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import simulator as sim
from .optimizers import RUNNERS, OptimizerConfig, Problem

METHODS = tuple(RUNNERS)
FIXED_SHOT_METHODS = ("sgd-psr", "bayes-sgd", "nft", "bayes-nft")
WORKERS_ENV = "BAYESPSR_WORKERS"
CSV_FIELDS = ("trial", "step", "cumulative_shots", "delta_energy", "delta_fidelity",
              "kappa_sq", "shots_this_step", "method")
AGG_FIELDS = ("method", "cumulative_shots", "energy_p25", "energy_median", "energy_p75",
              "fidelity_p25", "fidelity_median", "fidelity_p75")


@dataclass(frozen=True)
class ExperimentConfig:
    """One method on one problem instance, repeated over seeded trials.

    ``sigma_bar_sq`` may be given directly; otherwise it is calibrated from
    ``calibration_points`` random parameter vectors drawn with
    ``calibration_seed``.  Calibration is not charged to ``budget``.
    """

    method: str
    budget: int
    n_qubits: int = 5
    layers: int = 3
    coupling: tuple = (-1.0, 0.0, 0.0)
    field: tuple = (0.0, 0.0, -1.0)
    n_shots: Optional[int] = None
    n_trials: int = 10
    base_seed: int = 0
    noise_mode: str = "exact-variance"
    output: str = "records.csv"
    sigma_bar_sq: Optional[float] = None
    calibration_points: int = 30
    calibration_seed: int = 20240101
    calibration_shots: int = 1024
    gamma_sq: Optional[float] = None
    sigma0_sq: float = 100.0
    alpha: Optional[float] = None
    lr: float = 0.05
    beta1: float = 0.9
    beta2: float = 0.999
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
        object.__setattr__(self, "coupling", tuple(float(c) for c in self.coupling))
        object.__setattr__(self, "field", tuple(float(c) for c in self.field))
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; choose from {', '.join(METHODS)}")
        if self.budget <= 0:
            raise ValueError("budget must be positive")
        if self.n_trials < 1:
            raise ValueError("n_trials must be >= 1")
        if self.method in FIXED_SHOT_METHODS and (self.n_shots is None or self.n_shots < 1):
            raise ValueError(f"method {self.method!r} needs a positive n_shots")
        if self.noise_mode not in sim.NOISE_MODES:
            raise ValueError(f"unknown noise mode {self.noise_mode!r}")
        if self.sigma_bar_sq is not None and self.sigma_bar_sq <= 0:
            raise ValueError("sigma_bar_sq must be positive")
        if self.calibration_points < 1:
            raise ValueError("calibration_points must be >= 1")

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise ValueError(f"unknown config keys: {', '.join(unknown)}")
        return cls(**d)

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            data = json.load(fh)
        if not isinstance(data, dict):
            raise ValueError("config must be a JSON object")
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["coupling"], d["field"] = list(self.coupling), list(self.field)
        return d

    def hamiltonian(self) -> sim.PauliHamiltonian:
        return sim.build_heisenberg(self.n_qubits, self.coupling, self.field)

    def circuit(self) -> sim.Circuit:
        return sim.build_efficient_su2(self.n_qubits, self.layers)

    def optimizer_config(self) -> OptimizerConfig:
        return OptimizerConfig(
            budget=self.budget, n_shots=self.n_shots or 1, lr=self.lr, beta1=self.beta1,
            beta2=self.beta2, alpha=self.alpha, gamma_sq=self.gamma_sq, sigma0_sq=self.sigma0_sq,
            window_r=self.window_r, corethresh=self.corethresh, coremin_scale=self.coremin_scale,
            corethresh_scale=self.corethresh_scale, t_initial=self.t_initial, n_grid=self.n_grid,
            uniform_shots=self.uniform_shots, stabilize_interval=self.stabilize_interval,
            max_steps=self.max_steps,
        )


@dataclass(frozen=True)
class RunRecord:
    trial: int
    step: int
    cumulative_shots: int
    delta_energy: float
    delta_fidelity: float
    kappa_sq: Optional[float]
    shots_this_step: int
    method: str


@dataclass(frozen=True)
class Calibration:
    sigma_bar_sq: float
    n_points: int
    seed: Optional[int]
    nominal_shots: int

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def calibrate(cfg: ExperimentConfig) -> Calibration:
    """Single-shot variance used by every trial, or the configured override."""
    if cfg.sigma_bar_sq is not None:
        return Calibration(float(cfg.sigma_bar_sq), 0, None, 0)
    rng = np.random.default_rng(cfg.calibration_seed)
    s = sim.calibrate_sigma_bar(cfg.hamiltonian(), cfg.circuit(), cfg.calibration_points, rng)
    # nominal cost of estimating the variance with shots on hardware; never charged to the budget
    shots = cfg.calibration_points * cfg.calibration_shots * cfg.hamiltonian().n_groups
    return Calibration(s, cfg.calibration_points, cfg.calibration_seed, shots)


def compute_metrics(x_hat, h: sim.PauliHamiltonian, circuit: sim.Circuit, ground) -> tuple[float, float]:
    """Exact energy gap and infidelity of the state prepared at ``x_hat``."""
    de, df = compute_metrics_batch(np.atleast_2d(x_hat), h, circuit, ground)
    return float(de[0]), float(df[0])


def compute_metrics_batch(xs, h, circuit, ground) -> tuple[np.ndarray, np.ndarray]:
    e_gs, psi_gs = ground
    xs = np.atleast_2d(np.asarray(xs, dtype=float))
    if xs.shape[0] == 0:
        return np.zeros(0), np.zeros(0)
    states = sim.prepare_states(circuit, xs)
    energies = sim.exact_energies(h, states)
    fid = np.minimum(1.0, np.abs(states.conj() @ psi_gs))
    return energies - e_gs, 1.0 - fid


def initial_point(base_seed: int, trial: int, dim: int):
    """Trial RNG and starting point; the point is the first draw so it is shared across methods."""
    rng = np.random.default_rng(base_seed + trial)
    return rng, rng.uniform(0.0, 2 * np.pi, dim)


def run_trial(cfg: ExperimentConfig, trial: int, sigma_bar_sq: float, ground=None) -> list[RunRecord]:
    h, circuit = cfg.hamiltonian(), cfg.circuit()
    ground = sim.ground_truth(h) if ground is None else ground
    rng, x0 = initial_point(cfg.base_seed, trial, circuit.n_params)
    problem = Problem(h, circuit, sigma_bar_sq, cfg.noise_mode)
    state = RUNNERS[cfg.method](problem, cfg.optimizer_config(), x0, rng)
    hist = state.history
    de, df = compute_metrics_batch([r.x_hat for r in hist], h, circuit, ground)
    return [
        RunRecord(trial, r.step, r.cumulative_shots, float(de[i]), float(df[i]),
                  r.kappa_sq if cfg.method == "gradcore" else None, r.shots, cfg.method)
        for i, r in enumerate(hist)
    ]


def _trial_job(args):
    return run_trial(*args)


def worker_count() -> int:
    raw = os.environ.get(WORKERS_ENV)
    if raw is None or raw == "":
        return os.cpu_count() or 1
    n = int(raw)
    if n < 1:
        raise ValueError(f"{WORKERS_ENV} must be >= 1")
    return n


def run_experiment(cfg: ExperimentConfig, workers: Optional[int] = None,
                   calibration: Optional[Calibration] = None) -> list[RunRecord]:
    """All trials of ``cfg``, merged in trial order whatever the worker count."""
    cal = calibrate(cfg) if calibration is None else calibration
    ground = sim.ground_truth(cfg.hamiltonian())
    jobs = [(cfg, i, cal.sigma_bar_sq, ground) for i in range(cfg.n_trials)]
    workers = worker_count() if workers is None else workers
    if workers <= 1 or len(jobs) == 1:
        per_trial = [_trial_job(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
            per_trial = list(pool.map(_trial_job, jobs))
    return [r for recs in per_trial for r in recs]


# ---------------------------------------------------------------------------
# CSV


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_records(records: Sequence[RunRecord], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_FIELDS)
        for r in records:
            w.writerow([_fmt(getattr(r, f)) for f in CSV_FIELDS])


def read_records(path) -> list[RunRecord]:
    with open(path, newline="") as fh:
        rows = csv.reader(fh)
        header = next(rows, None)
        if header is None or tuple(header) != CSV_FIELDS:
            raise ValueError(f"{path}: expected header {','.join(CSV_FIELDS)}")
        out = []
        for row in rows:
            if len(row) != len(CSV_FIELDS):
                raise ValueError(f"{path}: malformed row {row!r}")
            t, s, c, de, df, k, n, m = row
            out.append(RunRecord(int(t), int(s), int(c), float(de), float(df),
                                 float(k) if k else None, int(n), m))
    return out


def write_calibration(cal: Calibration, path) -> None:
    Path(path).write_text(json.dumps(cal.to_dict(), indent=2, sort_keys=True) + "\n")


def calibration_path(output) -> Path:
    p = Path(output)
    return p.with_name(p.name + ".calibration.json")


# ---------------------------------------------------------------------------
# aggregation


@dataclass(frozen=True)
class AggregateRow:
    method: str
    cumulative_shots: float
    energy_p25: float
    energy_median: float
    energy_p75: float
    fidelity_p25: float
    fidelity_median: float
    fidelity_p75: float


def checkpoint_grid(records: Sequence[RunRecord], n: int = 64, budget: Optional[int] = None) -> np.ndarray:
    """``n`` log-spaced checkpoints from the first recorded shot count to the budget."""
    if not records:
        raise ValueError("no records to aggregate")
    lo = min(r.cumulative_shots for r in records)
    hi = max(r.cumulative_shots for r in records) if budget is None else budget
    if lo <= 0:
        raise ValueError("cumulative shot counts must be positive")
    if hi <= lo:
        return np.array([float(lo)])
    return np.geomspace(lo, hi, n)


def _carry_forward(shots: np.ndarray, values: np.ndarray, grid: np.ndarray) -> np.ndarray:
    idx = np.searchsorted(shots, grid, side="right") - 1
    out = np.where(idx >= 0, values[np.maximum(idx, 0)], np.nan)
    return out


def aggregate(records: Sequence[RunRecord], grid=None, n_grid: int = 64,
              budget: Optional[int] = None) -> list[AggregateRow]:
    """Median and quartiles across trials of both metrics, per method and checkpoint."""
    if not records:
        raise ValueError("no records to aggregate")
    grid = checkpoint_grid(records, n_grid, budget) if grid is None else np.asarray(grid, dtype=float)
    out: list[AggregateRow] = []
    methods = sorted({r.method for r in records})
    for m in methods:
        trials: dict[int, list[RunRecord]] = {}
        for r in records:
            if r.method == m:
                trials.setdefault(r.trial, []).append(r)
        energy, fid = [], []
        for t in sorted(trials):
            recs = sorted(trials[t], key=lambda r: r.cumulative_shots)
            shots = np.array([r.cumulative_shots for r in recs], dtype=float)
            energy.append(_carry_forward(shots, np.array([r.delta_energy for r in recs]), grid))
            fid.append(_carry_forward(shots, np.array([r.delta_fidelity for r in recs]), grid))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            pe = np.nanpercentile(np.array(energy), [25, 50, 75], axis=0)
            pf = np.nanpercentile(np.array(fid), [25, 50, 75], axis=0)
        for i, c in enumerate(grid):
            out.append(AggregateRow(m, float(c), *(float(v) for v in pe[:, i]), *(float(v) for v in pf[:, i])))
    return out


def write_aggregate(rows: Sequence[AggregateRow], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(AGG_FIELDS)
        for r in rows:
            w.writerow([_fmt(getattr(r, f)) for f in AGG_FIELDS])


def read_aggregate(path) -> list[AggregateRow]:
    with open(path, newline="") as fh:
        rows = csv.reader(fh)
        header = next(rows, None)
        if header is None or tuple(header) != AGG_FIELDS:
            raise ValueError(f"{path}: expected header {','.join(AGG_FIELDS)}")
        return [AggregateRow(r[0], *(float(v) for v in r[1:])) for r in rows]


def final_medians(records: Sequence[RunRecord], budget: int) -> dict[str, float]:
    """Median ΔEnergy across trials at ``budget`` (carried forward), per method."""
    rows = aggregate(records, grid=[float(budget)])
    return {r.method: r.energy_median for r in rows}
