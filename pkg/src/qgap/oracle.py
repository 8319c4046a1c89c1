"""Exact-diagonalisation ground truth: eigensystems, gaps and trial-state overlaps.

The Hermitian eigensolver is implemented here (Householder reduction to a
real tridiagonal matrix followed by implicit-shift QL) so the reference
values do not depend on the linear-algebra routines used elsewhere.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass

import numpy as np

from ._kernels import tridiagonal_ql
from .errors import InternalConsistencyError

HERMITIAN_TOL = 1e-9
DEGENERACY_TOL = 1e-9


@dataclass(frozen=True)
class EigenSystem:
    energies: np.ndarray
    vectors: np.ndarray

    @property
    def dim(self) -> int:
        return len(self.energies)


@dataclass(frozen=True)
class GapValue:
    value: float
    degenerate: bool

    def __float__(self) -> float:
        return self.value


def _householder_tridiagonal(a: np.ndarray):
    """Reduce Hermitian ``a`` to tridiagonal form, ``a = q t q^H``.

    Returns the real diagonal, the complex sub-diagonal and ``q``.
    """
    a = np.array(a, dtype=complex)
    n = a.shape[0]
    q = np.eye(n, dtype=complex)
    for k in range(n - 2):
        x = a[k + 1:, k]
        norm_x = np.linalg.norm(x)
        if norm_x == 0.0 or np.linalg.norm(x[1:]) == 0.0:
            continue
        phase = x[0] / abs(x[0]) if x[0] != 0 else 1.0
        alpha = -phase * norm_x
        v = x.copy()
        v[0] -= alpha
        v /= np.linalg.norm(v)
        sub = a[k + 1:, k + 1:]
        p = sub @ v
        w = p - (np.vdot(v, p).real) * v
        sub -= 2.0 * (np.outer(v, w.conj()) + np.outer(w, v.conj()))
        a[k + 1:, k] = 0.0
        a[k, k + 1:] = 0.0
        a[k + 1, k] = alpha
        a[k, k + 1] = np.conj(alpha)
        qs = q[:, k + 1:]
        qs -= 2.0 * np.outer(qs @ v, v.conj())
    diag = np.real(np.diag(a)).copy()
    off = np.diag(a, -1).copy()
    return diag, off, q


def eigh(h: np.ndarray, check: bool = True) -> EigenSystem:
    """Full eigendecomposition of a dense Hermitian matrix, energies ascending."""
    h = np.asarray(h)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {h.shape}")
    scale = max(float(np.max(np.abs(h))), 1.0) if h.size else 1.0
    asym = float(np.max(np.abs(h - h.conj().T))) if h.size else 0.0
    if asym > HERMITIAN_TOL * scale:
        raise ValueError(f"matrix is not Hermitian (max |H - H^dag| = {asym:.3e})")
    n = h.shape[0]
    if n == 1:
        return EigenSystem(np.real(h[0]).astype(float).copy(), np.ones((1, 1), dtype=complex))

    diag, off, q = _householder_tridiagonal(0.5 * (h + h.conj().T))
    # unitary diagonal gauge making the off-diagonal real and non-negative
    phases = np.ones(n, dtype=complex)
    e = np.zeros(n)
    for i in range(n - 1):
        mag = abs(off[i])
        e[i] = mag
        phases[i + 1] = phases[i] * (off[i] / mag if mag > 0 else 1.0)
    zt = np.eye(n)
    failed = tridiagonal_ql(diag, e, zt, 60)
    if failed >= 0:
        raise InternalConsistencyError(f"QL iteration did not converge for eigenvalue {failed}")
    order = np.argsort(diag, kind="stable")
    energies = diag[order]
    vectors = (q * phases[None, :]) @ zt[order].T
    eig = EigenSystem(energies, vectors)
    if check:
        _check(h, eig)
    return eig


def _check(h: np.ndarray, eig: EigenSystem) -> None:
    norm = max(float(np.max(np.abs(h))), 1.0)
    resid = np.max(np.abs(h @ eig.vectors - eig.vectors * eig.energies[None, :]))
    ortho = np.max(np.abs(eig.vectors.conj().T @ eig.vectors - np.eye(eig.dim)))
    if resid > 1e-9 * norm * eig.dim or ortho > 1e-10 * max(1, eig.dim // 64):
        raise InternalConsistencyError(
            f"eigensystem check failed: residual {resid:.2e}, orthonormality {ortho:.2e}")


def exact_gap(eigs: EigenSystem, index: int = 1) -> GapValue:
    """``E[index] - E[0]``; gaps below 1e-9 are reported as a degenerate zero."""
    if eigs.dim < 2:
        raise ValueError("a gap needs at least two levels")
    if not 1 <= index < eigs.dim:
        raise IndexError(f"gap index {index} out of range for dimension {eigs.dim}")
    gap = float(eigs.energies[index] - eigs.energies[0])
    if gap < DEGENERACY_TOL:
        return GapValue(0.0, True)
    return GapValue(gap, False)


def trial_state(theta: float, n_qubits: int) -> np.ndarray:
    """``prod_j R^y_j(theta) |0...0>`` as a state vector."""
    single = np.array([np.cos(theta / 2), np.sin(theta / 2)], dtype=complex)
    psi = np.ones(1, dtype=complex)
    for _ in range(n_qubits):
        psi = np.kron(psi, single)
    return psi


def trial_overlaps(eigs: EigenSystem, theta: float) -> np.ndarray:
    """Expansion coefficients ``c_u = <u| U_I(theta) |0...0>``."""
    n_qubits = int(round(np.log2(eigs.dim)))
    if 2 ** n_qubits != eigs.dim:
        raise ValueError("eigensystem dimension is not a power of two")
    return eigs.vectors.conj().T @ trial_state(theta, n_qubits)


_CACHE: dict = {}
_CACHE_LOCK = threading.Lock()


def model_eigensystem(model) -> EigenSystem:
    """Cached eigensystem of ``model.dense``, keyed on the model terms."""
    key = model.key()
    with _CACHE_LOCK:
        hit = _CACHE.get(key)
    if hit is not None:
        return hit
    eig = eigh(model.dense)
    with _CACHE_LOCK:
        return _CACHE.setdefault(key, eig)
