"""Dense statevector of ``n`` qubits.

Qubit ``k`` maps to bit ``k`` of the basis-state index, so ``|q_{n-1} ... q_1 q_0>``
has index ``sum_k q_k 2**k``. Two-qubit gates act on the local basis
``|q_i q_j>`` with index ``2*q_i + q_j``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import _kernels as K
from .errors import InvalidArgument, ZeroProbabilityBranch

ZERO_PROB = 1e-300
EIG_CUTOFF = 1e-12

KET0 = np.array([1.0, 0.0], dtype=np.complex128)
KET1 = np.array([0.0, 1.0], dtype=np.complex128)


@dataclass
class QuantumState:
    n_qubits: int
    amplitudes: np.ndarray
    labels: dict = field(default_factory=dict)

    def __post_init__(self):
        self.amplitudes = np.ascontiguousarray(self.amplitudes, dtype=np.complex128)
        if self.amplitudes.shape != (1 << self.n_qubits,):
            raise InvalidArgument(
                f"expected {1 << self.n_qubits} amplitudes, got {self.amplitudes.shape}"
            )
        if not self.labels:
            self.labels = {k: ("system", k) for k in range(self.n_qubits)}

    def copy(self) -> "QuantumState":
        return QuantumState(self.n_qubits, self.amplitudes.copy(), dict(self.labels))

    def norm_sq(self) -> float:
        return K.norm_sq(self.amplitudes)

    def normalize(self) -> float:
        nrm = self.norm_sq()
        if nrm < ZERO_PROB:
            raise ZeroProbabilityBranch(f"cannot normalize state with norm^2={nrm:g}")
        K.rescale(self.amplitudes, 1.0 / np.sqrt(nrm))
        return nrm

    def qubits(self, role: str) -> list:
        return sorted(q for q, (r, _) in self.labels.items() if r == role)

    def add_ancillas(self, ids: Sequence) -> list:
        """Append ancilla qubits in ``|0>`` as the next most significant bits."""
        start = self.n_qubits
        m = len(ids)
        amps = np.zeros(1 << (start + m), dtype=np.complex128)
        amps[: 1 << start] = self.amplitudes
        self.amplitudes = amps
        self.n_qubits = start + m
        new = list(range(start, start + m))
        for q, a in zip(new, ids):
            self.labels[q] = ("ancilla", a)
        return new


def _check_site(state: QuantumState, site: int):
    if not 0 <= site < state.n_qubits:
        raise InvalidArgument(f"qubit index {site} out of range for {state.n_qubits} qubits")


def random_qubit_state(rng: np.random.Generator) -> np.ndarray:
    """Haar-random single-qubit pure state."""
    v = rng.standard_normal(2) + 1j * rng.standard_normal(2)
    return v / np.linalg.norm(v)


def new_product_state(n: int, local_states="haar-random-product", rng=None) -> QuantumState:
    """Product state from single-qubit kets, or Haar-random single-qubit factors.

    ``local_states[k]`` is placed on qubit ``k``.
    """
    if n < 1:
        raise InvalidArgument("need at least one qubit")
    if isinstance(local_states, str):
        if local_states != "haar-random-product":
            raise InvalidArgument(f"unknown product-state spec {local_states!r}")
        if rng is None:
            raise InvalidArgument("haar-random-product needs an rng")
        local_states = [random_qubit_state(rng) for _ in range(n)]
    if len(local_states) != n:
        raise InvalidArgument(f"{len(local_states)} local states for {n} qubits")
    amps = np.ones(1, dtype=np.complex128)
    for ket in local_states:
        ket = np.asarray(ket, dtype=np.complex128)
        ket = ket / np.linalg.norm(ket)
        # new qubit becomes the most significant bit
        amps = np.kron(ket, amps)
    return QuantumState(n, amps)


def haar_random_state(n: int, rng: np.random.Generator) -> QuantumState:
    v = rng.standard_normal(1 << n) + 1j * rng.standard_normal(1 << n)
    return QuantumState(n, v / np.linalg.norm(v))


def apply_two_qubit_gate(state: QuantumState, gate: np.ndarray, i: int, j: int) -> QuantumState:
    _check_site(state, i)
    _check_site(state, j)
    if i == j:
        raise InvalidArgument("two-qubit gate needs distinct qubits")
    gate = np.ascontiguousarray(gate, dtype=np.complex128)
    if gate.shape != (4, 4):
        raise InvalidArgument(f"gate must be 4x4, got {gate.shape}")
    K.apply_2q(state.amplitudes, gate, i, j)
    return state


def apply_one_qubit_kraus(state: QuantumState, k: np.ndarray, site: int):
    """Apply ``k`` on ``site``, renormalize, and return ``(state, norm_sq)``.

    ``norm_sq`` is the squared norm of the unnormalized post-state. A branch
    with ``norm_sq < 1e-300`` raises :class:`ZeroProbabilityBranch` and leaves
    the state unnormalized.
    """
    _check_site(state, site)
    k = np.ascontiguousarray(k, dtype=np.complex128)
    nrm = K.apply_1q(state.amplitudes, k, site)
    if nrm < ZERO_PROB:
        raise ZeroProbabilityBranch(f"Kraus branch has norm^2={nrm:g}")
    K.rescale(state.amplitudes, 1.0 / np.sqrt(nrm))
    return state, nrm


def apply_diagonal_kraus(state: QuantumState, site: int, w0: float, w1: float) -> float:
    """In-place ``diag(w0, w1)`` on ``site`` followed by renormalization; returns norm^2."""
    nrm = K.scale_diag(state.amplitudes, site, w0, w1)
    if nrm < ZERO_PROB:
        raise ZeroProbabilityBranch(f"Kraus branch has norm^2={nrm:g}")
    K.rescale(state.amplitudes, 1.0 / np.sqrt(nrm))
    return nrm


def prob_up(state: QuantumState, site: int) -> float:
    """<Pi_+> = weight of |0> (spin up, sigma_z = +1) on ``site``."""
    return K.prob_zero(state.amplitudes, site)


def expectation_sigma_z(state: QuantumState, site: int) -> float:
    _check_site(state, site)
    p0 = K.prob_zero(state.amplitudes, site)
    return 2.0 * p0 - state.norm_sq()


def reduced_spectrum(state: QuantumState, subset: Iterable[int]) -> np.ndarray:
    """Eigenvalues of the reduced density matrix on ``subset`` (or its complement)."""
    n = state.n_qubits
    sub = sorted(set(subset))
    if not sub or len(sub) >= n:
        raise InvalidArgument("subset must be a nonempty proper subset of the qubits")
    for q in sub:
        _check_site(state, q)
    rest = [q for q in range(n) if q not in sub]
    if len(sub) > len(rest):
        sub, rest = rest, sub
    # reshape axis a holds qubit n-1-a
    psi = state.amplitudes.reshape((2,) * n)
    axes = [n - 1 - q for q in sub] + [n - 1 - q for q in rest]
    m = psi.transpose(axes).reshape(1 << len(sub), 1 << len(rest))
    rho = m @ m.conj().T
    return np.linalg.eigvalsh(rho)


def entropy_from_spectrum(evals: np.ndarray, base=np.e) -> float:
    ev = evals[evals > EIG_CUTOFF]
    s = -np.sum(ev * np.log(ev))
    if base == 2:
        s /= np.log(2.0)
    return max(float(s), 0.0)


def entropy_of_subset(state: QuantumState, subset: Iterable[int], log_base=np.e) -> float:
    """Von Neumann entropy of the reduced state on ``subset``; ``log_base`` is e or 2."""
    if log_base not in (2, np.e):
        raise InvalidArgument("log_base must be e or 2")
    return entropy_from_spectrum(reduced_spectrum(state, subset), log_base)


def ghz_state(n: int) -> QuantumState:
    amps = np.zeros(1 << n, dtype=np.complex128)
    amps[0] = amps[-1] = 1 / np.sqrt(2)
    return QuantumState(n, amps)


def bell_state() -> QuantumState:
    return ghz_state(2)
