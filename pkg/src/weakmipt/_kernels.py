"""Numba kernels over a dense amplitude vector.

Qubit ``k`` is bit ``k`` of the basis-state index. All kernels work in place.
"""
import numpy as np
from numba import njit


@njit(cache=True)
def _insert_zero_bits(k, lo, hi):
    # lo < hi are single-bit masks
    k = ((k & ~(lo - 1)) << 1) | (k & (lo - 1))
    k = ((k & ~(hi - 1)) << 1) | (k & (hi - 1))
    return k


@njit(cache=True)
def apply_2q(psi, u, i, j):
    """psi <- U_(ij) psi, local basis index 2*bit_i + bit_j."""
    mi = 1 << i
    mj = 1 << j
    lo = min(mi, mj)
    hi = max(mi, mj)
    u00, u01, u02, u03 = u[0, 0], u[0, 1], u[0, 2], u[0, 3]
    u10, u11, u12, u13 = u[1, 0], u[1, 1], u[1, 2], u[1, 3]
    u20, u21, u22, u23 = u[2, 0], u[2, 1], u[2, 2], u[2, 3]
    u30, u31, u32, u33 = u[3, 0], u[3, 1], u[3, 2], u[3, 3]
    for k in range(psi.size >> 2):
        b = _insert_zero_bits(k, lo, hi)
        i0 = b
        i1 = b | mj
        i2 = b | mi
        i3 = b | mi | mj
        a0 = psi[i0]
        a1 = psi[i1]
        a2 = psi[i2]
        a3 = psi[i3]
        psi[i0] = u00 * a0 + u01 * a1 + u02 * a2 + u03 * a3
        psi[i1] = u10 * a0 + u11 * a1 + u12 * a2 + u13 * a3
        psi[i2] = u20 * a0 + u21 * a1 + u22 * a2 + u23 * a3
        psi[i3] = u30 * a0 + u31 * a1 + u32 * a2 + u33 * a3


@njit(cache=True)
def apply_layer(psi, gates, pairs):
    for g in range(pairs.shape[0]):
        apply_2q(psi, gates[g], pairs[g, 0], pairs[g, 1])


@njit(cache=True)
def apply_1q(psi, k, site):
    """psi <- k_(site) psi for a general 2x2 matrix; returns the new squared norm."""
    m = 1 << site
    k00, k01, k10, k11 = k[0, 0], k[0, 1], k[1, 0], k[1, 1]
    norm = 0.0
    for idx in range(psi.size >> 1):
        b = ((idx & ~(m - 1)) << 1) | (idx & (m - 1))
        a0 = psi[b]
        a1 = psi[b | m]
        n0 = k00 * a0 + k01 * a1
        n1 = k10 * a0 + k11 * a1
        psi[b] = n0
        psi[b | m] = n1
        norm += n0.real * n0.real + n0.imag * n0.imag + n1.real * n1.real + n1.imag * n1.imag
    return norm


@njit(cache=True)
def scale_diag(psi, site, w0, w1):
    """Multiply the bit=0 / bit=1 halves of ``site`` by real weights; returns the new squared norm."""
    m = 1 << site
    norm = 0.0
    for idx in range(psi.size):
        a = psi[idx]
        if idx & m:
            a = a * w1
        else:
            a = a * w0
        psi[idx] = a
        norm += a.real * a.real + a.imag * a.imag
    return norm


@njit(cache=True)
def prob_zero(psi, site):
    """Weight of the bit=0 subspace of ``site``."""
    m = 1 << site
    s = 0.0
    for idx in range(psi.size):
        if not idx & m:
            a = psi[idx]
            s += a.real * a.real + a.imag * a.imag
    return s


@njit(cache=True)
def norm_sq(psi):
    s = 0.0
    for idx in range(psi.size):
        a = psi[idx]
        s += a.real * a.real + a.imag * a.imag
    return s


@njit(cache=True)
def rescale(psi, c):
    for idx in range(psi.size):
        psi[idx] = psi[idx] * c


def warmup():
    """Trigger compilation of every kernel on tiny inputs."""
    psi = np.zeros(4, dtype=np.complex128)
    psi[0] = 1.0
    u = np.eye(4, dtype=np.complex128)
    apply_2q(psi, u, 0, 1)
    apply_layer(psi, u[None], np.array([[0, 1]], dtype=np.int64))
    apply_1q(psi, np.eye(2, dtype=np.complex128), 0)
    scale_diag(psi, 0, 1.0, 1.0)
    prob_zero(psi, 0)
    norm_sq(psi)
    rescale(psi, 1.0)


@njit(cache=True)
def _su2(q, out):
    a, b, c, d = q[0], q[1], q[2], q[3]
    out[0, 0] = complex(a, b)
    out[0, 1] = complex(c, d)
    out[1, 0] = complex(-c, d)
    out[1, 1] = complex(a, -b)


@njit(cache=True)
def build_hdu_batch(ang, quat):
    """HDU gates from angles (n, 2) = (phi, theta) and unit quaternions (n, 4, 4).

    Quaternion order per gate: U+, U-, V+, V-.
    """
    n = ang.shape[0]
    out = np.empty((n, 4, 4), dtype=np.complex128)
    up = np.empty((2, 2), dtype=np.complex128)
    um = np.empty((2, 2), dtype=np.complex128)
    vp = np.empty((2, 2), dtype=np.complex128)
    vm = np.empty((2, 2), dtype=np.complex128)
    left = np.empty((4, 4), dtype=np.complex128)
    right = np.empty((4, 4), dtype=np.complex128)
    core = np.empty((4, 4), dtype=np.complex128)
    for g in range(n):
        _su2(quat[g, 0], up)
        _su2(quat[g, 1], um)
        _su2(quat[g, 2], vp)
        _su2(quat[g, 3], vm)
        for a in range(2):
            for b in range(2):
                for c in range(2):
                    for d in range(2):
                        left[2 * a + b, 2 * c + d] = up[a, c] * um[b, d]
                        right[2 * a + b, 2 * c + d] = vm[a, c] * vp[b, d]
        th = ang[g, 1]
        ea = np.exp(-1j * np.pi * th / 4)
        eb = -1j * np.exp(1j * np.pi * th / 4)
        # core = V[theta] @ right, V has entries (0,0),(3,3)=ea and (1,2),(2,1)=eb
        for c in range(4):
            core[0, c] = ea * right[0, c]
            core[3, c] = ea * right[3, c]
            core[1, c] = eb * right[2, c]
            core[2, c] = eb * right[1, c]
        ph = np.exp(1j * ang[g, 0])
        for r in range(4):
            for c in range(4):
                s = 0j
                for m in range(4):
                    s += left[r, m] * core[m, c]
                out[g, r, c] = ph * s
    return out
