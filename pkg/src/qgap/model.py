"""Transverse-field Ising Hamiltonian, Pauli strings and Trotter-cost utilities.

Tensor-product convention: qubit 0 is the leftmost Kronecker factor, so it
maps to the most significant bit of a computational-basis index.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property, reduce
from typing import Sequence

import numpy as np

from .errors import InvalidModelError

MAX_QUBITS = 12

PAULI_MATRICES = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}

# single-qubit products: _PRODUCT[a, b] = (phase, c) with sigma_a sigma_b = phase * sigma_c
_PRODUCT = {
    ("I", "I"): (1, "I"), ("I", "X"): (1, "X"), ("I", "Y"): (1, "Y"), ("I", "Z"): (1, "Z"),
    ("X", "I"): (1, "X"), ("X", "X"): (1, "I"), ("X", "Y"): (1j, "Z"), ("X", "Z"): (-1j, "Y"),
    ("Y", "I"): (1, "Y"), ("Y", "X"): (-1j, "Z"), ("Y", "Y"): (1, "I"), ("Y", "Z"): (1j, "X"),
    ("Z", "I"): (1, "Z"), ("Z", "X"): (1j, "Y"), ("Z", "Y"): (-1j, "X"), ("Z", "Z"): (1, "I"),
}


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class PauliString:
    """A real-weighted tensor product of single-qubit Paulis.

    ``axes`` holds one symbol from ``IXYZ`` per qubit, qubit 0 first.
    """

    axes: str
    coefficient: float = 1.0

    def __post_init__(self):
        axes = "".join(self.axes).upper()
        if not axes or any(a not in "IXYZ" for a in axes):
            raise ValueError(f"invalid Pauli axes {self.axes!r}")
        object.__setattr__(self, "axes", axes)
        object.__setattr__(self, "coefficient", float(self.coefficient))

    @classmethod
    def single(cls, n_qubits: int, sites: dict[int, str], coefficient: float = 1.0) -> "PauliString":
        axes = ["I"] * n_qubits
        for j, a in sites.items():
            axes[j] = a
        return cls("".join(axes), coefficient)

    @property
    def n_qubits(self) -> int:
        return len(self.axes)

    def support(self) -> tuple[int, ...]:
        return tuple(j for j, a in enumerate(self.axes) if a != "I")

    def dense(self) -> np.ndarray:
        mats = [PAULI_MATRICES[a] for a in self.axes]
        return self.coefficient * reduce(np.kron, mats)

    def commutes_with(self, other: "PauliString") -> bool:
        anti = sum(1 for a, b in zip(self.axes, other.axes) if a != "I" and b != "I" and a != b)
        return anti % 2 == 0

    def __mul__(self, other: "PauliString") -> tuple[complex, "PauliString"]:
        """Operator product, returned as ``(phase, PauliString)`` with unit-free phase."""
        if self.n_qubits != other.n_qubits:
            raise ValueError("Pauli strings act on different register sizes")
        phase: complex = self.coefficient * other.coefficient
        out = []
        for a, b in zip(self.axes, other.axes):
            ph, c = _PRODUCT[a, b]
            phase *= ph
            out.append(c)
        return phase, PauliString("".join(out), 1.0)

    def __str__(self) -> str:
        return f"{self.coefficient:+g}*{self.axes}"


def dense_sum(terms: Sequence[PauliString], n_qubits: int) -> np.ndarray:
    d = 2 ** n_qubits
    out = np.zeros((d, d), dtype=complex)
    for term in terms:
        out += term.dense()
    return out


@dataclass(frozen=True)
class HamiltonianTerms:
    """Two-part Hamiltonian ``H = H1 + H2`` used for first-order Trotter splitting.

    For the TFIM, ``terms_h1`` holds the ``-J Z_j Z_{j+1}`` bonds of an open
    chain and ``terms_h2`` the ``-h X_j`` fields.
    """

    n_qubits: int
    terms_h1: tuple[PauliString, ...]
    terms_h2: tuple[PauliString, ...]
    j_coupling: float = math.nan
    field: float = math.nan

    def __post_init__(self):
        for term in (*self.terms_h1, *self.terms_h2):
            if term.n_qubits != self.n_qubits:
                raise InvalidModelError(f"term {term} does not act on {self.n_qubits} qubits")

    @classmethod
    def from_terms(cls, n_qubits: int, terms_h1, terms_h2) -> "HamiltonianTerms":
        """Generic split Hamiltonian from two Pauli-string lists."""
        return cls(n_qubits, tuple(terms_h1), tuple(terms_h2))

    @property
    def dim(self) -> int:
        return 2 ** self.n_qubits

    @property
    def is_tfim(self) -> bool:
        return not (math.isnan(self.j_coupling) or math.isnan(self.field))

    @property
    def j_over_h(self) -> float:
        return self.j_coupling / self.field

    @cached_property
    def dense_h1(self) -> np.ndarray:
        return _readonly(dense_sum(self.terms_h1, self.n_qubits))

    @cached_property
    def dense_h2(self) -> np.ndarray:
        return _readonly(dense_sum(self.terms_h2, self.n_qubits))

    @cached_property
    def dense(self) -> np.ndarray:
        return _readonly(self.dense_h1 + self.dense_h2)

    @cached_property
    def dense_commutator(self) -> np.ndarray:
        return _readonly(self.dense_h1 @ self.dense_h2 - self.dense_h2 @ self.dense_h1)

    def key(self) -> tuple:
        return (self.n_qubits, self.terms_h1, self.terms_h2)


def build_tfim(n_qubits: int, j_coupling: float, field: float = 1.0,
               max_qubits: int = MAX_QUBITS) -> HamiltonianTerms:
    """Open-boundary TFIM ``H1 = -J sum Z_j Z_{j+1}``, ``H2 = -h sum X_j``."""
    if int(n_qubits) != n_qubits or n_qubits < 2:
        raise InvalidModelError(f"n_qubits must be an integer >= 2, got {n_qubits}")
    if n_qubits > max_qubits:
        raise InvalidModelError(f"n_qubits={n_qubits} exceeds the configured maximum {max_qubits}")
    if not field > 0:
        raise InvalidModelError(f"field must be positive, got {field}")
    n = int(n_qubits)
    h1 = tuple(PauliString.single(n, {j: "Z", j + 1: "Z"}, -j_coupling) for j in range(n - 1))
    h2 = tuple(PauliString.single(n, {j: "X"}, -field) for j in range(n))
    return HamiltonianTerms(n, h1, h2, float(j_coupling), float(field))


def spin_flip(n_qubits: int) -> np.ndarray:
    """Global spin flip ``X ⊗ ... ⊗ X`` (a TFIM symmetry)."""
    return PauliString("X" * n_qubits).dense()


def commutator_bound(model: HamiltonianTerms) -> float:
    """Upper bound ``4 |J h| (N - 1)`` on ``||[H1, H2]||`` for the TFIM."""
    return 4.0 * abs(model.j_coupling * model.field) * (model.n_qubits - 1)


def commutator_norm(model: HamiltonianTerms) -> float:
    """Exact spectral norm of the dense commutator (cross-check, N <= 10)."""
    if model.n_qubits > 10:
        raise InvalidModelError("exact commutator norm is limited to N <= 10")
    return float(np.linalg.norm(model.dense_commutator, ord=2))


def trotter_cutoff(model: HamiltonianTerms, tolerance: float, filter_spec, time_grid) -> int:
    """Trotter depth cutoff ``ceil(max_t ||[H1,H2]|| t^2 F(t) / tolerance)``.

    The maximum runs over the non-negative sample times of ``time_grid`` and
    uses the analytic commutator bound. A commuting split returns 0; callers
    building circuits should clamp to at least one step.
    """
    from .spectral import filter_time

    if not tolerance > 0:
        raise ValueError("tolerance must be positive")
    times = time_grid.times() if time_grid is not None else np.empty(0)
    if len(times) == 0:
        raise ValueError("time grid is empty")
    bound = commutator_bound(model)
    if bound == 0.0:
        return 0
    weight = max(t * t * filter_time(filter_spec, t) for t in times)
    return int(math.ceil(bound * weight / tolerance))
