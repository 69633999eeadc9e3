"""Haar-random SU(2)/U(4) sampling and Haar dual-unitary (HDU) two-qubit gates.

HDU gates have the form ``e^{i phi} (U+ (x) U-) V[theta] (V- (x) V+)`` with

    V[theta] = exp[-i (pi/4 XX + pi/4 YY + (pi/4) theta ZZ)]

where ``phi, theta`` are uniform on ``[0, pi)`` and the four single-qubit
factors are Haar-random in SU(2).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._kernels import build_hdu_batch
from .errors import InvalidArgument

SWAP = np.array(
    [[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=np.complex128
)


@dataclass(frozen=True)
class HduParameters:
    phi: float
    theta: float
    u_plus: np.ndarray
    u_minus: np.ndarray
    v_plus: np.ndarray
    v_minus: np.ndarray


def _su2_from_quaternions(q: np.ndarray) -> np.ndarray:
    """Map unit quaternions of shape (..., 4) to SU(2) matrices (..., 2, 2)."""
    a, b, c, d = q[..., 0], q[..., 1], q[..., 2], q[..., 3]
    out = np.empty(q.shape[:-1] + (2, 2), dtype=np.complex128)
    out[..., 0, 0] = a + 1j * b
    out[..., 0, 1] = c + 1j * d
    out[..., 1, 0] = -c + 1j * d
    out[..., 1, 1] = a - 1j * b
    return out


def sample_su2(rng: np.random.Generator, size=None) -> np.ndarray:
    """Haar SU(2) via a uniformly random unit quaternion."""
    shape = () if size is None else tuple(np.atleast_1d(size))
    q = rng.standard_normal(shape + (4,))
    q /= np.linalg.norm(q, axis=-1, keepdims=True)
    return _su2_from_quaternions(q)


def sample_u4_haar(rng: np.random.Generator, size=None) -> np.ndarray:
    """Haar U(4) from the QR decomposition of a complex Ginibre matrix.

    The phases of ``diag(R)`` are absorbed into ``Q`` so the result is exactly
    Haar distributed.
    """
    shape = (() if size is None else tuple(np.atleast_1d(size))) + (4, 4)
    z = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)
    q, r = np.linalg.qr(z)
    d = np.diagonal(r, axis1=-2, axis2=-1)
    ph = d / np.abs(d)
    return q * ph[..., None, :]


def v_theta(theta) -> np.ndarray:
    """Closed form of V[theta]; broadcasts over an array of angles.

    XX+YY and ZZ commute; on |00>,|11> the exponent is -i pi theta/4, on the
    {|01>,|10>} block it is e^{i pi theta/4} (-i sigma_x).
    """
    theta = np.asarray(theta, dtype=float)
    out = np.zeros(theta.shape + (4, 4), dtype=np.complex128)
    a = np.exp(-1j * np.pi * theta / 4)
    b = -1j * np.exp(1j * np.pi * theta / 4)
    out[..., 0, 0] = a
    out[..., 3, 3] = a
    out[..., 1, 2] = b
    out[..., 2, 1] = b
    return out


def _kron2(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.einsum("...ij,...kl->...ikjl", a, b).reshape(a.shape[:-2] + (4, 4))


def build_hdu_gate(params: HduParameters) -> np.ndarray:
    left = _kron2(params.u_plus, params.u_minus)
    right = _kron2(params.v_minus, params.v_plus)
    return np.exp(1j * params.phi) * left @ v_theta(params.theta) @ right


def sample_hdu_parameters(rng: np.random.Generator) -> HduParameters:
    phi, theta = rng.uniform(0.0, np.pi, size=2)
    u = sample_su2(rng, 4)
    return HduParameters(phi, theta, u[0], u[1], u[2], u[3])


def sample_hdu_gates(rng: np.random.Generator, count: int) -> np.ndarray:
    """``count`` HDU gates, shape (count, 4, 4).

    Draw order per call: ``2*count`` uniforms (phi, theta pairs), then
    ``16*count`` normals for the four SU(2) factors of each gate.
    """
    ang = rng.uniform(0.0, np.pi, size=(count, 2))
    q = rng.standard_normal((count, 4, 4))
    q /= np.linalg.norm(q, axis=-1, keepdims=True)
    return build_hdu_batch(ang, q)


def sample_hdu_gates_reference(rng: np.random.Generator, count: int) -> np.ndarray:
    """Pure-numpy twin of :func:`sample_hdu_gates`; same draws, same gates."""
    ang = rng.uniform(0.0, np.pi, size=(count, 2))
    u = sample_su2(rng, (count, 4))
    left = _kron2(u[:, 0], u[:, 1])
    right = _kron2(u[:, 3], u[:, 2])
    core = v_theta(ang[:, 1])
    return np.exp(1j * ang[:, 0])[:, None, None] * (left @ core @ right)


def reshuffle(gate: np.ndarray) -> np.ndarray:
    """Space-time reshuffle: ``R[(a c), (b d)] = U[(a b), (c d)]``."""
    return np.asarray(gate).reshape(2, 2, 2, 2).transpose(0, 2, 1, 3).reshape(4, 4)


def is_unitary(m: np.ndarray, tol: float = 1e-10) -> bool:
    m = np.asarray(m)
    return bool(np.max(np.abs(m.conj().T @ m - np.eye(m.shape[0]))) < tol)


def check_dual_unitary(gate: np.ndarray, tol: float = 1e-10) -> bool:
    return is_unitary(reshuffle(gate), tol)


class GateSource:
    """Supplies one fresh two-qubit gate per bond per layer."""

    name = "abstract"

    def layer(self, rng: np.random.Generator, count: int) -> np.ndarray:
        raise NotImplementedError


class HduGates(GateSource):
    name = "HDU"

    def layer(self, rng, count):
        return sample_hdu_gates(rng, count)


class HaarGates(GateSource):
    name = "Haar"

    def layer(self, rng, count):
        return sample_u4_haar(rng, count)


class FixedGate(GateSource):
    """Same matrix on every bond; consumes no randomness."""

    name = "fixed"

    def __init__(self, matrix):
        self.matrix = np.ascontiguousarray(matrix, dtype=np.complex128)

    def layer(self, rng, count):
        return np.broadcast_to(self.matrix, (count, 4, 4)).copy()


def gate_source(name: str) -> GateSource:
    try:
        return {"HDU": HduGates, "Haar": HaarGates}[name]()
    except KeyError:
        raise InvalidArgument(f"unknown gate set {name!r}") from None
