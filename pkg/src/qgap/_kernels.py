"""Compiled inner loops (numba)."""

from __future__ import annotations

import math

import numba
import numpy as np


@numba.njit(cache=True)
def tridiagonal_ql(d, e, zt, max_sweeps):
    """Implicit-shift QL on a real symmetric tridiagonal matrix, in place.

    ``d`` is the diagonal, ``e[i]`` couples ``i`` and ``i + 1`` (``e[-1]``
    is ignored). On return ``d`` holds the eigenvalues and row ``k`` of
    ``zt`` the ``k``-th eigenvector expressed in the input basis (``zt`` must
    enter as the identity). Returns -1 on success, otherwise the index whose
    iteration failed to converge.
    """
    n = d.shape[0]
    eps = 2.220446049250313e-16
    e[n - 1] = 0.0
    for l in range(n):
        it = 0
        while True:
            m = l
            while m < n - 1:
                dd = abs(d[m]) + abs(d[m + 1])
                if abs(e[m]) <= eps * dd:
                    break
                m += 1
            if m == l:
                break
            it += 1
            if it > max_sweeps:
                return l
            g = (d[l + 1] - d[l]) / (2.0 * e[l])
            r = math.hypot(g, 1.0)
            g = d[m] - d[l] + e[l] / (g + math.copysign(r, g))
            s = 1.0
            c = 1.0
            p = 0.0
            i = m - 1
            deflated = False
            while i >= l:
                f = s * e[i]
                b = c * e[i]
                r = math.hypot(f, g)
                e[i + 1] = r
                if r == 0.0:
                    d[i + 1] -= p
                    e[m] = 0.0
                    deflated = True
                    break
                s = f / r
                c = g / r
                g = d[i + 1] - p
                r = (d[i] - g) * s + 2.0 * c * b
                p = s * r
                d[i + 1] = g + p
                g = c * r - b
                for k in range(n):
                    f = zt[i + 1, k]
                    zt[i + 1, k] = s * zt[i, k] + c * f
                    zt[i, k] = c * zt[i, k] - s * f
                i -= 1
            if deflated:
                continue
            d[l] -= p
            e[l] = g
            e[m] = 0.0
    return -1


@numba.njit(cache=True, nogil=True)
def apply_local_superop(rho, sop, qubit, n_qubits):
    """Apply a single-qubit superoperator to ``rho`` in place.

    ``sop`` is 4x4 in the row-major vectorisation ``(r, c) -> 2 r + c`` of the
    qubit's 2x2 block, i.e. ``kron(K, K.conj())`` summed over Kraus operators.
    """
    d = rho.shape[0]
    bit = 1 << (n_qubits - 1 - qubit)
    s00 = sop[0, 0]; s01 = sop[0, 1]; s02 = sop[0, 2]; s03 = sop[0, 3]
    s10 = sop[1, 0]; s11 = sop[1, 1]; s12 = sop[1, 2]; s13 = sop[1, 3]
    s20 = sop[2, 0]; s21 = sop[2, 1]; s22 = sop[2, 2]; s23 = sop[2, 3]
    s30 = sop[3, 0]; s31 = sop[3, 1]; s32 = sop[3, 2]; s33 = sop[3, 3]
    for r in range(d):
        if r & bit:
            continue
        r1 = r | bit
        for c in range(d):
            if c & bit:
                continue
            c1 = c | bit
            a00 = rho[r, c]
            a01 = rho[r, c1]
            a10 = rho[r1, c]
            a11 = rho[r1, c1]
            rho[r, c] = s00 * a00 + s01 * a01 + s02 * a10 + s03 * a11
            rho[r, c1] = s10 * a00 + s11 * a01 + s12 * a10 + s13 * a11
            rho[r1, c] = s20 * a00 + s21 * a01 + s22 * a10 + s23 * a11
            rho[r1, c1] = s30 * a00 + s31 * a01 + s32 * a10 + s33 * a11


def superop_from_kraus(kraus_ops) -> np.ndarray:
    """Row-major superoperator ``sum_k K ⊗ conj(K)``."""
    return np.asarray(sum(np.kron(k, k.conj()) for k in kraus_ops), dtype=complex)
