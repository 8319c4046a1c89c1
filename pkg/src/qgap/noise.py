"""Markovian noise channels, the global-depolarizing reduction, SPAM and calibration data.

Channels come in three shapes:

* :class:`DepolarizingChannel` acts on the whole register as the affine map
  ``rho -> (1 - p) rho + p I / d``.
* :class:`KrausChannel` with ``qubits=None`` acts on the whole register with
  ``d x d`` Kraus operators.
* :class:`KrausChannel` with ``qubits=(q,)`` acts on a single qubit with
  ``2 x 2`` Kraus operators.

A :class:`NoiseSpec` attaches channels to circuit layers through selectors and
also carries SPAM angle offsets and the readout confusion model.
"""

from __future__ import annotations

import csv
import io
import itertools
import math
import warnings
from dataclasses import dataclass, field
from functools import reduce
from pathlib import Path
from typing import Sequence, Union

import numpy as np

from .errors import ConfigurationError, InternalConsistencyError
from .model import PAULI_MATRICES, PauliString

COMPLETENESS_TOL = 1e-10
MAX_DEPOLARIZING_KRAUS_QUBITS = 5


@dataclass(frozen=True, eq=False)
class KrausChannel:
    kraus_ops: tuple
    label: str = "kraus"
    qubits: tuple[int, ...] | None = None

    def __post_init__(self):
        ops = tuple(np.array(k, dtype=complex) for k in self.kraus_ops)
        if not ops:
            raise ValueError("a Kraus channel needs at least one operator")
        d = ops[0].shape[0]
        if any(k.shape != (d, d) for k in ops):
            raise ValueError("Kraus operators must be square and of equal size")
        if self.qubits is not None:
            qubits = tuple(int(q) for q in self.qubits)
            if len(qubits) != 1 or d != 2:
                raise ValueError("local channels act on exactly one qubit with 2x2 operators")
            object.__setattr__(self, "qubits", qubits)
        for k in ops:
            k.setflags(write=False)
        object.__setattr__(self, "kraus_ops", ops)
        err = completeness_error(ops)
        if err > COMPLETENESS_TOL:
            raise ValueError(f"Kraus operators are not trace preserving (error {err:.2e})")

    @property
    def dim(self) -> int:
        return self.kraus_ops[0].shape[0]

    @property
    def is_local(self) -> bool:
        return self.qubits is not None

    def on(self, qubit: int) -> "KrausChannel":
        """Same single-qubit channel placed on ``qubit``."""
        if self.dim != 2:
            raise ValueError("only single-qubit channels can be placed on a qubit")
        return KrausChannel(self.kraus_ops, self.label, (qubit,))

    def superop(self) -> np.ndarray:
        """Row-major superoperator ``sum_k K (x) conj(K)``."""
        return sum(np.kron(k, k.conj()) for k in self.kraus_ops)


@dataclass(frozen=True)
class DepolarizingChannel:
    """Register-wide depolarizing map, stored as its exact affine form."""

    p: float
    dim: int | None = None
    label: str = "depolarizing"

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"depolarizing probability must lie in [0, 1], got {self.p}")
        if self.dim is not None and (self.dim < 2 or self.dim & (self.dim - 1)):
            raise ValueError("dimension must be a power of two >= 2")

    qubits = None
    is_local = False

    @property
    def kraus_ops(self) -> tuple:
        """Pauli-basis Kraus realization (small registers only)."""
        if self.dim is None:
            raise ValueError("a Kraus realization needs an explicit dimension")
        n = int(math.log2(self.dim))
        if n > MAX_DEPOLARIZING_KRAUS_QUBITS:
            raise ValueError(f"Kraus realization limited to {MAX_DEPOLARIZING_KRAUS_QUBITS} qubits")
        d2 = self.dim ** 2
        ops = []
        for axes in itertools.product("IXYZ", repeat=n):
            weight = self.p / d2 + (1.0 - self.p if all(a == "I" for a in axes) else 0.0)
            if weight > 0:
                ops.append(math.sqrt(weight) * PauliString("".join(axes)).dense())
        return tuple(ops)

    def as_kraus(self) -> KrausChannel:
        return KrausChannel(self.kraus_ops, self.label)


Channel = Union[KrausChannel, DepolarizingChannel]


def completeness_error(kraus_ops) -> float:
    d = kraus_ops[0].shape[0]
    total = sum(k.conj().T @ k for k in kraus_ops)
    return float(np.max(np.abs(total - np.eye(d))))


# ---------------------------------------------------------------- builders

def depolarizing_channel(p: float, dim: int | None = None) -> DepolarizingChannel:
    return DepolarizingChannel(float(p), dim)


def _check_prob(p: float, name: str = "p") -> float:
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"{name} must lie in [0, 1], got {p}")
    return float(p)


def bit_flip(p: float) -> KrausChannel:
    p = _check_prob(p)
    return KrausChannel((math.sqrt(1 - p) * PAULI_MATRICES["I"], math.sqrt(p) * PAULI_MATRICES["X"]),
                        f"bit_flip({p:g})")


def phase_flip(p: float) -> KrausChannel:
    p = _check_prob(p)
    return KrausChannel((math.sqrt(1 - p) * PAULI_MATRICES["I"], math.sqrt(p) * PAULI_MATRICES["Z"]),
                        f"phase_flip({p:g})")


def single_qubit_depolarizing(p: float) -> KrausChannel:
    """``rho -> (1 - p) rho + p I / 2`` on one qubit."""
    p = _check_prob(p)
    ops = [math.sqrt(1 - 3 * p / 4) * PAULI_MATRICES["I"]]
    ops += [math.sqrt(p / 4) * PAULI_MATRICES[a] for a in "XYZ"]
    return KrausChannel(tuple(ops), f"depolarizing_1q({p:g})")


def amplitude_damping(gamma: float) -> KrausChannel:
    g = _check_prob(gamma, "gamma")
    k0 = np.array([[1, 0], [0, math.sqrt(1 - g)]], dtype=complex)
    k1 = np.array([[0, math.sqrt(g)], [0, 0]], dtype=complex)
    return KrausChannel((k0, k1), f"amplitude_damping({g:g})")


def dephasing(p_phi: float) -> KrausChannel:
    """Pure dephasing that scales off-diagonal elements by ``1 - p_phi``."""
    p = _check_prob(p_phi, "p_phi")
    ch = phase_flip(p / 2)
    return KrausChannel(ch.kraus_ops, f"dephasing({p:g})")


def compose(first: KrausChannel, second: KrausChannel) -> KrausChannel:
    """Channel applying ``first`` and then ``second``."""
    if first.dim != second.dim or first.qubits != second.qubits:
        raise ValueError("can only compose channels acting on the same space")
    ops = tuple(b @ a for b in second.kraus_ops for a in first.kraus_ops)
    return KrausChannel(ops, f"{second.label}*{first.label}", first.qubits)


# ---------------------------------------------------------------- application

def apply_channel(channel: Channel, rho: np.ndarray) -> np.ndarray:
    """Apply ``channel`` to a density matrix; returns a new array."""
    rho = np.asarray(rho, dtype=complex)
    d = rho.shape[0]
    if rho.shape != (d, d):
        raise ValueError("density matrix must be square")
    if isinstance(channel, DepolarizingChannel):
        if channel.dim is not None and channel.dim != d:
            raise ValueError(f"channel dimension {channel.dim} does not match state dimension {d}")
        out = (1.0 - channel.p) * rho
        out[np.diag_indices(d)] += channel.p / d
        return out
    if channel.is_local:
        from ._kernels import apply_local_superop

        n = int(round(math.log2(d)))
        if 2 ** n != d or channel.qubits[0] >= n:
            raise ValueError("local channel does not fit the state")
        out = rho.copy()
        apply_local_superop(out, channel.superop(), channel.qubits[0], n)
        return out
    if channel.dim != d:
        raise ValueError(f"channel dimension {channel.dim} does not match state dimension {d}")
    return sum(k @ rho @ k.conj().T for k in channel.kraus_ops)


def global_depolarizing_probability(per_layer_p: Sequence[float]) -> float:
    """``p_gd = 1 - prod(1 - p_nu)``."""
    keep = 1.0
    for p in per_layer_p:
        keep *= 1.0 - _check_prob(p)
    return 1.0 - keep


@dataclass(frozen=True)
class ReducedDepolarizing:
    """``rho -> (1 - p_gd) rho + p_gd I / d`` applied to the noiseless output."""

    p_gd: float
    dim: int

    @property
    def scale(self) -> float:
        return 1.0 - self.p_gd

    def apply(self, rho: np.ndarray) -> np.ndarray:
        return apply_channel(DepolarizingChannel(self.p_gd, self.dim), rho)


def reduce_depolarizing(circuit, per_layer_p: Sequence[float], check: bool | None = None,
                        atol: float = 1e-12) -> ReducedDepolarizing:
    """Collapse per-layer depolarizing noise into one global channel.

    With ``check`` (default: on for N <= 3 and D <= 8) the interleaved
    evolution is simulated and compared against the reduced form.
    """
    from .sim import circuit_unitary, evolve_density

    per_layer_p = list(per_layer_p)
    if len(per_layer_p) != circuit.depth:
        raise ValueError(f"expected {circuit.depth} probabilities, got {len(per_layer_p)}")
    reduced = ReducedDepolarizing(global_depolarizing_probability(per_layer_p), 2 ** circuit.n_qubits)
    if check is None:
        check = circuit.n_qubits <= 3 and circuit.depth <= 8
    if check:
        spec = NoiseSpec(channels=tuple((i, DepolarizingChannel(p)) for i, p in enumerate(per_layer_p)))
        interleaved = evolve_density(circuit, spec)
        u = circuit_unitary(circuit)
        rho = np.outer(u[:, 0], u[:, 0].conj())
        diff = float(np.max(np.abs(interleaved - reduced.apply(rho))))
        if diff > atol:
            raise InternalConsistencyError(f"depolarizing reduction mismatch {diff:.2e} > {atol:.0e}")
    return reduced


def inject_spam(theta: float, prep_offset: float = 0.0, meas_offset: float = 0.0) -> tuple[float, float]:
    """Perturbed preparation and un-preparation angles ``(theta', theta'')``."""
    return theta + prep_offset, theta + meas_offset


# ---------------------------------------------------------------- Pauli propagation

@dataclass(frozen=True)
class PauliRotation:
    """``exp(-i angle G / 2)`` with ``G`` an ``X`` on one qubit or ``Z Z`` on two."""

    kind: str
    qubits: tuple[int, ...]
    angle: float

    def generator(self, n_qubits: int) -> PauliString:
        if self.kind == "x" and len(self.qubits) == 1:
            return PauliString.single(n_qubits, {self.qubits[0]: "X"})
        if self.kind == "zz" and len(self.qubits) == 2 and self.qubits[0] != self.qubits[1]:
            return PauliString.single(n_qubits, {self.qubits[0]: "Z", self.qubits[1]: "Z"})
        raise NotImplementedError(
            f"unsupported rotation {self.kind!r} on {self.qubits}; supported: "
            "R^x on one qubit with any Pauli string, R^zz on two distinct qubits with any Pauli string")

    def dense(self, n_qubits: int) -> np.ndarray:
        g = self.generator(n_qubits).dense()
        return math.cos(self.angle / 2) * np.eye(2 ** n_qubits) - 1j * math.sin(self.angle / 2) * g


def pauli_propagate(gate: PauliRotation, pauli: PauliString) -> list[tuple[complex, PauliString]]:
    """``U P U^dag`` as at most two weighted Pauli strings.

    Anticommuting pairs give ``P cos(phi) - i sin(phi) G P``; commuting pairs
    return ``P`` unchanged.
    """
    g = gate.generator(pauli.n_qubits)
    unit = PauliString(pauli.axes, 1.0)
    if g.commutes_with(pauli):
        return [(complex(pauli.coefficient), unit)]
    phase, gp = g * pauli
    coef = -1j * math.sin(gate.angle) * phase
    return [(complex(math.cos(gate.angle) * pauli.coefficient), unit),
            (complex(coef), gp)]


def realize_terms(terms: list[tuple[complex, PauliString]]) -> np.ndarray:
    return sum(c * p.dense() for c, p in terms)


# ---------------------------------------------------------------- placement

_LAYER_GROUPS = {
    "all": ("trial", "x", "zz", "trial_inv"),
    "trial": ("trial", "trial_inv"),
    "prep": ("trial",),
    "meas": ("trial_inv",),
    "trotter": ("x", "zz"),
    "x": ("x",),
    "zz": ("zz",),
}
PLACEMENTS = ("per-layer", "per-trotter-step")
# insertion points under the coarser placement: after the preparation, after each
# completed Trotter step and after the un-preparation
_STEP_KINDS = ("trial", "zz", "trial_inv")


def _normalize_selector(selector):
    if isinstance(selector, (str, int, np.integer)):
        selector = (selector,)
    out = []
    for item in selector:
        if isinstance(item, (int, np.integer)) and not isinstance(item, bool):
            out.append(int(item))
        elif isinstance(item, str) and item in _LAYER_GROUPS:
            out.append(item)
        else:
            raise ConfigurationError(f"unknown layer selector {item!r}; use an index or one of {sorted(_LAYER_GROUPS)}")
    if not out:
        raise ConfigurationError("empty layer selector")
    return tuple(out)


@dataclass(frozen=True)
class NoiseSpec:
    """Noise placement for one circuit.

    ``channels`` is an ordered list of ``(selector, channel)``; after each
    layer every matching channel is applied in list order. A selector is a
    layer index, a group name (``all``, ``trial``, ``prep``, ``meas``,
    ``trotter``, ``x``, ``zz``) or a tuple of those.

    ``readout`` holds one ``(p01, p10)`` pair per qubit, with ``p01`` the
    probability of reading 0 from a prepared 1 and ``p10`` the reverse.
    """

    placement: str = "per-layer"
    channels: tuple = ()
    spam: tuple[float, float] | None = None
    readout: tuple[tuple[float, float], ...] | None = None
    label: str = "custom"

    def __post_init__(self):
        if self.placement not in PLACEMENTS:
            raise ConfigurationError(f"placement must be one of {PLACEMENTS}, got {self.placement!r}")
        entries = []
        for selector, channel in self.channels:
            if not isinstance(channel, (KrausChannel, DepolarizingChannel)):
                raise ConfigurationError(f"unsupported channel type {type(channel).__name__}")
            entries.append((_normalize_selector(selector), channel))
        object.__setattr__(self, "channels", tuple(entries))
        if self.readout is not None:
            pairs = tuple((_check_prob(float(a), "p01"), _check_prob(float(b), "p10")) for a, b in self.readout)
            object.__setattr__(self, "readout", pairs)
        if self.spam is not None:
            object.__setattr__(self, "spam", (float(self.spam[0]), float(self.spam[1])))

    @property
    def has_channels(self) -> bool:
        return bool(self.channels)

    @property
    def is_real(self) -> bool:
        """True when every channel commutes with complex conjugation of the state."""
        for _, ch in self.channels:
            if isinstance(ch, KrausChannel) and any(np.any(k.imag != 0) for k in ch.kraus_ops):
                return False
        return True

    def insertion_points(self, layers) -> list[int]:
        if self.placement == "per-layer":
            return list(range(len(layers)))
        return [i for i, layer in enumerate(layers) if layer.kind in _STEP_KINDS]

    def resolve(self, layers, n_qubits: int) -> list[list[Channel]]:
        """Channels to apply after each layer; validates every selector."""
        points = set(self.insertion_points(layers))
        depth = len(layers)
        plan: list[list[Channel]] = [[] for _ in range(depth)]
        for selector, channel in self.channels:
            self._check_fits(channel, n_qubits)
            hits = set()
            for item in selector:
                if isinstance(item, int):
                    idx = item + depth if item < 0 else item
                    if not 0 <= idx < depth:
                        raise ConfigurationError(f"layer index {item} outside a circuit of depth {depth}")
                    if idx not in points:
                        raise ConfigurationError(f"layer {item} is not an insertion point under {self.placement}")
                    hits.add(idx)
                else:
                    kinds = _LAYER_GROUPS[item]
                    found = {i for i in points if layers[i].kind in kinds}
                    if not found:
                        raise ConfigurationError(f"selector {item!r} matches no insertion point under {self.placement}")
                    hits |= found
            for idx in sorted(hits):
                plan[idx].append(channel)
        return plan

    @staticmethod
    def _check_fits(channel: Channel, n_qubits: int) -> None:
        d = 2 ** n_qubits
        if channel.is_local:
            if channel.qubits[0] >= n_qubits:
                raise ConfigurationError(f"channel {channel.label} targets qubit {channel.qubits[0]} of {n_qubits}")
        elif channel.dim is not None and channel.dim != d:
            raise ConfigurationError(f"channel {channel.label} has dimension {channel.dim}, register needs {d}")

    def readout_weights(self, n_qubits: int) -> np.ndarray | None:
        """Per-basis-state probability of reading all zeros, or None if ideal."""
        if self.readout is None:
            return None
        if len(self.readout) != n_qubits:
            raise ConfigurationError(f"readout model has {len(self.readout)} qubits, register has {n_qubits}")
        factors = [np.array([1.0 - p10, p01]) for p01, p10 in self.readout]
        return reduce(np.kron, factors)


def readout_zero_probability(diag: np.ndarray, weights: np.ndarray | None) -> float:
    """Probability of the all-zeros readout given basis populations ``diag``."""
    diag = np.real(np.asarray(diag))
    if weights is None:
        return float(diag[0])
    return float(diag @ weights)


def uniform_depolarizing_spec(p: float, placement: str = "per-layer", spam=None) -> NoiseSpec:
    """Same depolarizing probability after every insertion point."""
    return NoiseSpec(placement, (("all", DepolarizingChannel(float(p))),), spam, None, f"depolarizing({p:g})")


# ---------------------------------------------------------------- calibration data

DEFAULT_GATE_TIME_NS = 533.3
DEFAULT_READOUT_LENGTH_NS = 1216.0
REQUIRED_COLUMNS = ("qubit", "T1_us", "T2_us")
OPTIONAL_COLUMNS = ("freq_GHz", "anharmonicity_GHz", "readout_err", "p01", "p10", "gate_err",
                    "ecr_err", "gate_time_ns", "readout_length_ns")


@dataclass(frozen=True)
class CalibrationRecord:
    qubit_id: int
    t1_us: float
    t2_us: float
    readout_p01: float = 0.0
    readout_p10: float = 0.0
    single_gate_error: float = 0.0
    two_gate_error: dict = field(default_factory=dict)
    gate_time_ns: float = DEFAULT_GATE_TIME_NS
    readout_length_ns: float = DEFAULT_READOUT_LENGTH_NS
    freq_ghz: float | None = None
    anharmonicity_ghz: float | None = None
    readout_error: float | None = None

    def __post_init__(self):
        if not (self.t1_us > 0 and self.t2_us > 0):
            raise ValueError(f"qubit {self.qubit_id}: T1 and T2 must be positive")
        for name in ("readout_p01", "readout_p10", "single_gate_error"):
            _check_prob(getattr(self, name), name)
        for pair, err in self.two_gate_error.items():
            _check_prob(err, f"two_gate_error{pair}")
        if not (self.gate_time_ns > 0 and self.readout_length_ns > 0):
            raise ValueError(f"qubit {self.qubit_id}: durations must be positive")

    @property
    def t2_exceeds_limit(self) -> bool:
        return self.t2_us > 2 * self.t1_us

    def to_dict(self) -> dict:
        out = {
            "qubit": self.qubit_id, "T1_us": self.t1_us, "T2_us": self.t2_us,
            "p01": self.readout_p01, "p10": self.readout_p10, "gate_err": self.single_gate_error,
            "ecr_err": {f"{a}-{b}": e for (a, b), e in sorted(self.two_gate_error.items())},
            "gate_time_ns": self.gate_time_ns, "readout_length_ns": self.readout_length_ns,
        }
        for key, value in (("freq_GHz", self.freq_ghz), ("anharmonicity_GHz", self.anharmonicity_ghz),
                           ("readout_err", self.readout_error)):
            if value is not None:
                out[key] = value
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "CalibrationRecord":
        pairs = {}
        for key, err in (data.get("ecr_err") or {}).items():
            a, b = (int(x) for x in str(key).split("-"))
            pairs[(a, b)] = float(err)
        opt = lambda k: None if data.get(k) is None else float(data[k])  # noqa: E731
        return cls(int(data["qubit"]), float(data["T1_us"]), float(data["T2_us"]),
                   float(data.get("p01", 0.0)), float(data.get("p10", 0.0)),
                   float(data.get("gate_err", 0.0)), pairs,
                   float(data.get("gate_time_ns", DEFAULT_GATE_TIME_NS)),
                   float(data.get("readout_length_ns", DEFAULT_READOUT_LENGTH_NS)),
                   opt("freq_GHz"), opt("anharmonicity_GHz"), opt("readout_err"))


@dataclass
class CalibrationParse:
    records: list[CalibrationRecord]
    rejected: list[tuple[int, str]]
    warnings: list[str]


def parse_calibration(source) -> CalibrationParse:
    """Parse delimiter-separated calibration text (comma or tab, ``#`` comments).

    Probabilities are raw (not scaled by 1e-3). ``ecr_err`` is either a bare
    number, taken as the pair with the next listed qubit, or ``a-b:value``.
    Raises ``ConfigurationError`` for an empty file or a missing required column.
    """
    text = Path(source).read_text() if not isinstance(source, io.StringIO) else source.getvalue()
    lines = [ln for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    if not lines:
        raise ConfigurationError("calibration file is empty")
    delimiter = "\t" if "\t" in lines[0] else ","
    reader = csv.DictReader(lines, delimiter=delimiter)
    header = [h.strip() for h in (reader.fieldnames or [])]
    for col in REQUIRED_COLUMNS:
        if col not in header:
            raise ConfigurationError(f"calibration header lacks required column {col!r}")
    rows = [{(k or "").strip(): (v or "").strip() for k, v in row.items()} for row in reader]
    records, rejected, notes = [], [], []
    pending_pairs: list[tuple[int, int, float]] = []
    for lineno, row in enumerate(rows, start=2):
        try:
            rec, pair_spec = _record_from_row(row)
        except (ValueError, KeyError) as exc:
            rejected.append((lineno, str(exc)))
            continue
        records.append(rec)
        if pair_spec is not None:
            pending_pairs.append((len(records) - 1, *pair_spec))
        if rec.t2_exceeds_limit:
            msg = f"qubit {rec.qubit_id}: T2={rec.t2_us} us exceeds 2*T1={2 * rec.t1_us} us"
            notes.append(msg)
            warnings.warn(msg, stacklevel=2)
    for idx, partner, err in pending_pairs:
        rec = records[idx]
        if partner < 0:
            if idx + 1 >= len(records):
                notes.append(f"qubit {rec.qubit_id}: ecr_err has no following qubit, ignored")
                continue
            partner = records[idx + 1].qubit_id
        rec.two_gate_error[(rec.qubit_id, partner)] = err
    return CalibrationParse(records, rejected, notes)


def _record_from_row(row: dict):
    def num(key, default=None):
        value = row.get(key, "")
        if value == "":
            if default is None:
                raise ValueError(f"missing value for {key}")
            return default
        return float(value)

    pair_spec = None
    ecr = row.get("ecr_err", "")
    if ecr:
        if ":" in ecr:
            pair, value = ecr.split(":", 1)
            a, b = (int(x) for x in pair.split("-"))
            pair_spec = (b, float(value))
        else:
            pair_spec = (-1, float(ecr))
        _check_prob(pair_spec[1], "ecr_err")
    t1, t2 = num("T1_us"), num("T2_us")
    if t1 <= 0 or t2 <= 0:
        raise ValueError(f"non-positive coherence time (T1={t1}, T2={t2})")
    opt = lambda k: float(row[k]) if row.get(k, "") != "" else None  # noqa: E731
    rec = CalibrationRecord(
        int(row["qubit"]), t1, t2, num("p01", 0.0), num("p10", 0.0), num("gate_err", 0.0), {},
        num("gate_time_ns", DEFAULT_GATE_TIME_NS), num("readout_length_ns", DEFAULT_READOUT_LENGTH_NS),
        opt("freq_GHz"), opt("anharmonicity_GHz"), opt("readout_err"))
    return rec, pair_spec


def amplitude_damping_probability(dt_ns: float, t1_us: float) -> float:
    return -math.expm1(-dt_ns * 1e-3 / t1_us)


def dephasing_probability(dt_ns: float, t1_us: float, t2_us: float) -> float:
    """``1 - exp(-dt / T_phi)`` with ``1/T_phi = 1/T2 - 1/(2 T1)`` clamped at zero."""
    rate = max(1.0 / t2_us - 0.5 / t1_us, 0.0)
    return -math.expm1(-dt_ns * 1e-3 * rate)


def calibration_to_noise(records: Sequence[CalibrationRecord], layer_duration_ns: float | None = None,
                         scale: float = 1.0, spam=None) -> NoiseSpec:
    """Noise model for a register whose qubit ``j`` is ``records[j]``.

    After every layer each qubit gets amplitude damping followed by pure
    dephasing over ``scale * layer_duration_ns``. Single-qubit gate errors
    become a global depolarizing channel on the rotation layers and
    two-qubit errors on the coupling layers; readout uses the per-qubit
    confusion probabilities.
    """
    records = list(records)
    if not records:
        raise ConfigurationError("no calibration records")
    if not scale > 0:
        raise ConfigurationError("duration scale must be positive")
    base = records[0].gate_time_ns if layer_duration_ns is None else float(layer_duration_ns)
    if not base > 0:
        raise ConfigurationError("layer duration must be positive")
    dt = base * scale
    channels: list = []
    for j, rec in enumerate(records):
        ad = amplitude_damping(amplitude_damping_probability(dt, rec.t1_us))
        ph = dephasing(dephasing_probability(dt, rec.t1_us, rec.t2_us))
        local = compose(ad, ph)
        channels.append(("all", KrausChannel(local.kraus_ops, f"q{rec.qubit_id}:{local.label}", (j,))))
    p1 = global_depolarizing_probability([r.single_gate_error for r in records])
    p2 = global_depolarizing_probability(
        [_pair_error(records[j], records[j + 1]) for j in range(len(records) - 1)])
    if p1 > 0:
        channels.append((("trial", "x"), DepolarizingChannel(p1, label="gate_1q")))
    if p2 > 0:
        channels.append(("zz", DepolarizingChannel(p2, label="gate_2q")))
    readout = tuple((r.readout_p01, r.readout_p10) for r in records)
    qubits = ",".join(str(r.qubit_id) for r in records)
    return NoiseSpec("per-layer", tuple(channels), spam, readout, f"calibration[{qubits}]x{scale:g}")


def _pair_error(a: CalibrationRecord, b: CalibrationRecord) -> float:
    for rec, key in ((a, (a.qubit_id, b.qubit_id)), (b, (b.qubit_id, a.qubit_id)),
                     (a, (b.qubit_id, a.qubit_id)), (b, (a.qubit_id, b.qubit_id))):
        if key in rec.two_gate_error:
            return rec.two_gate_error[key]
    return 0.0
