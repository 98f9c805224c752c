"""Statevector simulation of parameterized circuits and Pauli Hamiltonians.

States are stored as complex arrays of length ``2**n_qubits`` with qubit 0 as
the most significant bit.  Batched routines take a ``(B, D)`` parameter
matrix and return ``(B, 2**Q)`` state matrices, which is how the optimizers
evaluate a whole sweep of shifted points at once.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

PAULI_LABELS = ("I", "X", "Y", "Z")
MAX_QUBITS = 14
# above this size the ground state is found with Lanczos instead of a dense eigh
DENSE_LIMIT = 10

_PAULI_MATS = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


@dataclass(frozen=True)
class PauliString:
    ops: str
    coeff: float = 1.0

    def __post_init__(self):
        if any(o not in PAULI_LABELS for o in self.ops):
            raise ValueError(f"invalid Pauli string {self.ops!r}")
        if not np.isfinite(self.coeff):
            raise ValueError("coefficient must be finite")

    @property
    def n_qubits(self) -> int:
        return len(self.ops)

    def support(self) -> list[tuple[int, str]]:
        return [(q, o) for q, o in enumerate(self.ops) if o != "I"]


@dataclass(frozen=True)
class PauliHamiltonian:
    """Weighted Pauli strings partitioned into qubit-wise commuting groups."""

    n_qubits: int
    terms: tuple[PauliString, ...]
    groups: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))
        object.__setattr__(self, "groups", tuple(tuple(g) for g in self.groups))
        for t in self.terms:
            if t.n_qubits != self.n_qubits:
                raise ValueError("term length does not match qubit count")
        seen = sorted(i for g in self.groups for i in g)
        if seen != list(range(len(self.terms))):
            raise ValueError("groups must partition the term indices")
        for g in self.groups:
            basis = ["I"] * self.n_qubits
            for i in g:
                for q, o in self.terms[i].support():
                    if basis[q] not in ("I", o):
                        raise ValueError(f"group {g} is not measurable in one basis")
                    basis[q] = o

    @property
    def n_groups(self) -> int:
        return len(self.groups)


@dataclass(frozen=True)
class FixedGate:
    name: str
    qubits: tuple[int, ...]


@dataclass(frozen=True)
class RotationGate:
    """``exp(-i x_param P / 2)`` with ``P`` the Pauli word ``paulis`` on ``qubits``."""

    paulis: str
    qubits: tuple[int, ...]
    param: int


Gate = Union[FixedGate, RotationGate]

_FIXED_ARITY = {"CNOT": 2, "CZ": 2, "H": 1, "X": 1}


@dataclass(frozen=True)
class Circuit:
    n_qubits: int
    gates: tuple[Gate, ...]
    n_params: int
    multiplicities: tuple[int, ...] = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "gates", tuple(self.gates))
        counts = [0] * self.n_params
        for g in self.gates:
            if any(not 0 <= q < self.n_qubits for q in g.qubits):
                raise ValueError(f"gate {g} acts outside the register")
            if isinstance(g, RotationGate):
                if not 0 <= g.param < self.n_params:
                    raise ValueError(f"parameter index {g.param} out of range")
                if len(g.paulis) != len(g.qubits) or any(p not in "XYZ" for p in g.paulis):
                    raise ValueError(f"bad rotation generator {g.paulis!r}")
                counts[g.param] += 1
            elif g.name not in _FIXED_ARITY or _FIXED_ARITY[g.name] != len(g.qubits):
                raise ValueError(f"unsupported fixed gate {g}")
        if any(c == 0 for c in counts):
            raise ValueError("every parameter must drive at least one gate")
        object.__setattr__(self, "multiplicities", tuple(counts))


# ---------------------------------------------------------------------------
# model builders


def build_heisenberg(q: int, j: Sequence[float], h: Sequence[float]) -> PauliHamiltonian:
    """Open-boundary Heisenberg chain ``-sum_i [J_i s^i s^i + h_i s^i]``, grouped by basis."""
    if q < 2:
        raise ValueError("need at least two qubits")
    if len(j) != 3 or len(h) != 3:
        raise ValueError("j and h must each hold three couplings (X, Y, Z)")
    terms: list[PauliString] = []
    groups: list[tuple[int, ...]] = []
    for axis, label in enumerate("XYZ"):
        idx = []
        if j[axis] != 0:
            for site in range(q - 1):
                ops = ["I"] * q
                ops[site] = ops[site + 1] = label
                idx.append(len(terms))
                terms.append(PauliString("".join(ops), -float(j[axis])))
        if h[axis] != 0:
            for site in range(q):
                ops = ["I"] * q
                ops[site] = label
                idx.append(len(terms))
                terms.append(PauliString("".join(ops), -float(h[axis])))
        if idx:
            groups.append(tuple(idx))
    return PauliHamiltonian(q, tuple(terms), tuple(groups))


def build_ising(q: int) -> PauliHamiltonian:
    """Transverse-field Ising chain at J=(-1,0,0), h=(0,0,-1)."""
    return build_heisenberg(q, (-1.0, 0.0, 0.0), (0.0, 0.0, -1.0))


def build_efficient_su2(q: int, layers: int) -> Circuit:
    """Efficient SU(2) ansatz: ``layers+1`` RY/RZ blocks joined by CNOT chains."""
    if q < 2 or layers < 1:
        raise ValueError("need q >= 2 and layers >= 1")
    gates: list[Gate] = []
    p = 0
    for block in range(layers + 1):
        if block > 0:
            gates.extend(FixedGate("CNOT", (k, k + 1)) for k in range(q - 1))
        for label in "YZ":
            for k in range(q):
                gates.append(RotationGate(label, (k,), p))
                p += 1
    return Circuit(q, tuple(gates), p)


# ---------------------------------------------------------------------------
# state preparation


def _apply_pauli_word(states: np.ndarray, word: Sequence[tuple[int, str]]) -> np.ndarray:
    # states: (B, 2, ..., 2); returns P|psi> for the tensor-product Pauli word
    out = states
    for q, o in word:
        ax = q + 1
        shape = [1] * out.ndim
        shape[ax] = 2
        if o == "X":
            out = np.flip(out, axis=ax)
        elif o == "Z":
            out = out * np.array([1.0, -1.0]).reshape(shape)
        elif o == "Y":
            out = np.flip(out, axis=ax) * np.array([-1j, 1j]).reshape(shape)
    return out


def _apply_fixed(states: np.ndarray, gate: FixedGate) -> np.ndarray:
    if gate.name == "CNOT":
        c, t = gate.qubits
        out = states.copy()
        idx = [slice(None)] * states.ndim
        idx[c + 1] = 1
        sub = states[tuple(idx)]
        # target axis shifts left by one if it sat after the removed control axis
        out[tuple(idx)] = np.flip(sub, axis=t + 1 - (1 if t > c else 0))
        return out
    if gate.name == "CZ":
        a, b = gate.qubits
        out = states.copy()
        idx = [slice(None)] * states.ndim
        idx[a + 1] = 1
        idx[b + 1] = 1
        out[tuple(idx)] *= -1
        return out
    if gate.name == "X":
        return np.flip(states, axis=gate.qubits[0] + 1)
    if gate.name == "H":
        u = np.array([[1, 1], [1, -1]]) / np.sqrt(2)
        ax = gate.qubits[0] + 1
        return np.moveaxis(np.tensordot(u, states, axes=([1], [ax])), 0, ax)
    raise ValueError(f"unsupported fixed gate {gate.name}")


def prepare_states(circuit: Circuit, xs: np.ndarray) -> np.ndarray:
    """Run the circuit from ``|0...0>`` for each row of ``xs``; returns ``(B, 2**Q)``."""
    xs = np.atleast_2d(np.asarray(xs, dtype=float))
    if xs.shape[1] != circuit.n_params:
        raise ValueError(f"expected {circuit.n_params} parameters, got {xs.shape[1]}")
    b, q = xs.shape[0], circuit.n_qubits
    st = np.zeros((b,) + (2,) * q, dtype=complex)
    st[(slice(None),) + (0,) * q] = 1.0
    bshape = (b,) + (1,) * q
    for g in circuit.gates:
        if isinstance(g, RotationGate):
            half = 0.5 * xs[:, g.param]
            c = np.cos(half).reshape(bshape)
            s = np.sin(half).reshape(bshape)
            st = c * st - 1j * s * _apply_pauli_word(st, tuple(zip(g.qubits, g.paulis)))
        else:
            st = _apply_fixed(st, g)
    return np.ascontiguousarray(st.reshape(b, 2**q))


def prepare_state(circuit: Circuit, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.shape[0] != circuit.n_params:
        raise ValueError(f"expected {circuit.n_params} parameters")
    return prepare_states(circuit, x[None, :])[0]


# ---------------------------------------------------------------------------
# observables


def _term_images(h: PauliHamiltonian, states: np.ndarray) -> list[np.ndarray]:
    b = states.shape[0]
    shaped = states.reshape((b,) + (2,) * h.n_qubits)
    return [t.coeff * _apply_pauli_word(shaped, t.support()).reshape(b, -1) for t in h.terms]


def _check_dims(h: PauliHamiltonian, states: np.ndarray):
    if states.shape[-1] != 2**h.n_qubits:
        raise ValueError("state dimension does not match the Hamiltonian")


def energies_and_variances(h: PauliHamiltonian, states: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Exact energies and grouped single-shot variances for a batch of states."""
    states = np.atleast_2d(states)
    _check_dims(h, states)
    b = states.shape[0]
    if not h.terms:
        return np.zeros(b), np.zeros(b)
    images = _term_images(h, states)
    energy = np.zeros(b, dtype=complex)
    var = np.zeros(b)
    for g in h.groups:
        hg = sum(images[i] for i in g)
        mean_g = np.einsum("bi,bi->b", states.conj(), hg)
        energy += mean_g
        var += np.einsum("bi,bi->b", hg.conj(), hg).real - mean_g.real**2
    if np.max(np.abs(energy.imag)) > 1e-10:
        raise AssertionError("energy has an imaginary part; Hamiltonian is not Hermitian")
    return energy.real, np.maximum(var, 0.0)


def exact_energies(h: PauliHamiltonian, states: np.ndarray) -> np.ndarray:
    return energies_and_variances(h, states)[0]


def exact_energy(h: PauliHamiltonian, psi: np.ndarray) -> float:
    return float(exact_energies(h, np.asarray(psi)[None, :])[0])


def energy_variance(h: PauliHamiltonian, psi: np.ndarray) -> float:
    """Single-shot variance of the grouped estimator: ``sum_g Var_psi(H_g)``."""
    return float(energies_and_variances(h, np.asarray(psi)[None, :])[1][0])


def energy(h: PauliHamiltonian, circuit: Circuit, x: np.ndarray) -> float:
    """Noiseless objective ``f*(x)``."""
    return exact_energy(h, prepare_state(circuit, x))


NOISE_MODES = ("exact-variance", "calibrated", "noiseless")


def observe_batch(h, circuit, xs, n_shots, noise_mode, sigma_bar_sq, rng):
    """Shot-noise corrupted energies at each row of ``xs``.

    ``n_shots`` is a scalar or per-row array of shots per operator group.
    Returns ``(y, reported_noise_var)``; the reported variance is always
    ``sigma_bar_sq / n_shots``, whatever the simulated noise.
    """
    xs = np.atleast_2d(np.asarray(xs, dtype=float))
    shots = np.broadcast_to(np.asarray(n_shots), (xs.shape[0],)).astype(float)
    if np.any(shots < 1):
        raise ValueError("n_shots must be >= 1")
    if noise_mode not in NOISE_MODES:
        raise ValueError(f"unknown noise mode {noise_mode!r}")
    states = prepare_states(circuit, xs)
    f, v = energies_and_variances(h, states)
    if noise_mode == "calibrated":
        v = np.full_like(f, sigma_bar_sq)
    if noise_mode == "noiseless":
        y = f
    else:
        y = f + np.sqrt(v / shots) * rng.standard_normal(xs.shape[0])
    return y, sigma_bar_sq / shots


def observe(h, circuit, x, n_shots, noise_mode, sigma_bar_sq, rng) -> tuple[float, float]:
    y, s = observe_batch(h, circuit, np.asarray(x)[None, :], n_shots, noise_mode, sigma_bar_sq, rng)
    return float(y[0]), float(s[0])


def calibrate_sigma_bar(h, circuit, n_points, rng) -> float:
    """Mean single-shot variance over ``n_points`` uniform random parameter vectors."""
    if n_points < 1:
        raise ValueError("n_points must be >= 1")
    xs = rng.uniform(0.0, 2 * np.pi, size=(n_points, circuit.n_params))
    return float(np.mean(energies_and_variances(h, prepare_states(circuit, xs))[1]))


# ---------------------------------------------------------------------------
# exact diagonalization


def pauli_matrix(term: PauliString) -> sp.csr_matrix:
    m = sp.identity(1, dtype=complex, format="csr")
    for o in term.ops:
        m = sp.kron(m, sp.csr_matrix(_PAULI_MATS[o]), format="csr")
    return m


def hamiltonian_matrix(h: PauliHamiltonian) -> sp.csr_matrix:
    dim = 2**h.n_qubits
    m = sp.csr_matrix((dim, dim), dtype=complex)
    for t in h.terms:
        m = m + t.coeff * pauli_matrix(t)
    return m


def ground_truth(h: PauliHamiltonian) -> tuple[float, np.ndarray]:
    """Lowest eigenvalue and a normalized eigenvector of ``H``."""
    if h.n_qubits > MAX_QUBITS:
        raise ValueError(f"exact diagonalization is capped at {MAX_QUBITS} qubits")
    m = hamiltonian_matrix(h)
    if h.n_qubits <= DENSE_LIMIT:
        w, v = np.linalg.eigh(m.toarray())
        e, psi = w[0], v[:, 0]
    else:
        w, v = spla.eigsh(m, k=1, which="SA", tol=1e-12)
        e, psi = w[0], v[:, 0]
    return float(e), psi / np.linalg.norm(psi)


def fidelity(psi_gs: np.ndarray, psi_x: np.ndarray) -> float:
    if psi_gs.shape != psi_x.shape:
        raise ValueError("state dimensions differ")
    return float(min(1.0, abs(np.vdot(psi_gs, psi_x))))
