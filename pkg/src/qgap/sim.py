"""Circuit construction and simulation of the return probability.

A QGE circuit for time ``t`` is

    [TrialRotation(theta), (TrotterX, TrotterZZ) x M, TrialRotationInverse(theta)]

with ``TrotterX = prod_j R^x_j(-2 h t / M)`` and
``TrotterZZ = prod_j R^zz_{j,j+1}(-2 J t / M)``, where
``R^a(phi) = exp(-i phi sigma^a / 2)``. The measured quantity is the
probability of reading ``0...0`` at the end.

Two backends are provided: a batched state-vector path for noiseless runs
and a density-matrix path for any :class:`~qgap.noise.NoiseSpec`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import reduce

import numpy as np

from ._kernels import apply_local_superop
from .errors import ConfigurationError, InternalConsistencyError
from .model import HamiltonianTerms
from .noise import DepolarizingChannel, NoiseSpec, inject_spam, readout_zero_probability
from .oracle import model_eigensystem, trial_overlaps, trial_state
from .spectral import TimeGrid, TimeSeries

LAYER_KINDS = ("trial", "x", "zz", "trial_inv")


def ry(theta: float) -> np.ndarray:
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    return np.array([[c, -s], [s, c]], dtype=complex)


def rx(phi: float) -> np.ndarray:
    c, s = math.cos(phi / 2), math.sin(phi / 2)
    return np.array([[c, -1j * s], [-1j * s, c]], dtype=complex)


def zz_parities(n_qubits: int) -> np.ndarray:
    """``sum_j z_j z_{j+1}`` for every basis state (``z = +1`` for bit 0)."""
    idx = np.arange(2 ** n_qubits)
    out = np.zeros(2 ** n_qubits)
    for j in range(n_qubits - 1):
        a = (idx >> (n_qubits - 1 - j)) & 1
        b = (idx >> (n_qubits - 2 - j)) & 1
        out += 1 - 2 * (a ^ b)
    return out


@dataclass(frozen=True)
class Layer:
    kind: str
    angle: float

    def __post_init__(self):
        if self.kind not in LAYER_KINDS:
            raise ValueError(f"unknown layer kind {self.kind!r}")

    def local_gate(self) -> np.ndarray | None:
        """Single-qubit gate applied to every qubit, or None for the ZZ layer."""
        if self.kind == "trial":
            return ry(self.angle)
        if self.kind == "trial_inv":
            return ry(-self.angle)
        if self.kind == "x":
            return rx(self.angle)
        return None

    def dense(self, n_qubits: int) -> np.ndarray:
        gate = self.local_gate()
        if gate is None:
            return np.diag(np.exp(-0.5j * self.angle * zz_parities(n_qubits)))
        return reduce(np.kron, [gate] * n_qubits)


@dataclass(frozen=True)
class CircuitLayers:
    n_qubits: int
    layers: tuple[Layer, ...]

    @property
    def depth(self) -> int:
        return len(self.layers)


def trial_rotation(theta: float, n_qubits: int) -> np.ndarray:
    """``prod_j R^y_j(theta)`` as a dense matrix."""
    return Layer("trial", theta).dense(n_qubits)


def _require_tfim(model: HamiltonianTerms) -> None:
    if not model.is_tfim:
        raise ConfigurationError("circuit construction needs a TFIM model from build_tfim")


def _check_steps(m_steps: int) -> int:
    if int(m_steps) != m_steps or m_steps < 1:
        raise ValueError(f"m_steps must be an integer >= 1, got {m_steps}")
    return int(m_steps)


def build_qge_circuit(model: HamiltonianTerms, theta: float, t: float, m_steps: int,
                      theta_meas: float | None = None) -> CircuitLayers:
    """Layer list for ``U_I(theta_meas)^dag U_M(t) U_I(theta)``."""
    _require_tfim(model)
    m = _check_steps(m_steps)
    x_angle = -2.0 * model.field * t / m
    zz_angle = -2.0 * model.j_coupling * t / m
    layers = [Layer("trial", theta)]
    for _ in range(m):
        layers += [Layer("x", x_angle), Layer("zz", zz_angle)]
    layers.append(Layer("trial_inv", theta if theta_meas is None else theta_meas))
    return CircuitLayers(model.n_qubits, tuple(layers))


def circuit_unitary(circuit: CircuitLayers) -> np.ndarray:
    u = np.eye(2 ** circuit.n_qubits, dtype=complex)
    for layer in circuit.layers:
        u = layer.dense(circuit.n_qubits) @ u
    return u


def _split_exponential(matrix: np.ndarray, tau: float) -> np.ndarray:
    from .oracle import eigh

    eig = eigh(matrix)
    return (eig.vectors * np.exp(-1j * eig.energies * tau)[None, :]) @ eig.vectors.conj().T


def trotter_unitary(model: HamiltonianTerms, t: float, m_steps: int) -> np.ndarray:
    """First-order product ``[exp(-i H1 t/M) exp(-i H2 t/M)]^M`` (H2 acts first)."""
    m = _check_steps(m_steps)
    if model.is_tfim:
        step = Layer("zz", -2.0 * model.j_coupling * t / m).dense(model.n_qubits) \
            @ Layer("x", -2.0 * model.field * t / m).dense(model.n_qubits)
    else:
        step = _split_exponential(model.dense_h1, t / m) @ _split_exponential(model.dense_h2, t / m)
    return np.linalg.matrix_power(step, m)


def exact_propagator(model: HamiltonianTerms, t: float) -> np.ndarray:
    """``exp(-i H t)`` from the oracle eigensystem."""
    eig = model_eigensystem(model)
    return (eig.vectors * np.exp(-1j * eig.energies * t)[None, :]) @ eig.vectors.conj().T


# ---------------------------------------------------------------- propagator values

@dataclass(frozen=True)
class PropagatorSample:
    time_index: int
    sign: int
    value: float
    shots: int | None = None

    def __post_init__(self):
        if not 0.0 <= self.value <= 1.0:
            raise ValueError(f"propagator value {self.value} outside [0, 1]")


def sample_rng(seed: int, n: int, sign: int) -> np.random.Generator:
    """Generator keyed on ``(seed, n, s)``, independent of evaluation order."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(n), 0 if sign > 0 else 1]))


def _check_shots(shots) -> int | None:
    if shots is None or shots == math.inf:
        return None
    if int(shots) != shots or shots < 1:
        raise ValueError(f"shots must be a positive integer or None for exact, got {shots}")
    return int(shots)


def draw_shots(p: float, shots: int | None, rng: np.random.Generator) -> float:
    p = min(max(p, 0.0), 1.0)
    if shots is None:
        return p
    return rng.binomial(shots, p) / shots


def _statevector_output(circuit: CircuitLayers) -> np.ndarray:
    psi = np.zeros(2 ** circuit.n_qubits, dtype=complex)
    psi[0] = 1.0
    for layer in circuit.layers:
        psi = _apply_layer_batch(psi[:, None], layer.kind, np.array([layer.angle]), circuit.n_qubits)[:, 0]
    return psi


def evolve_density(circuit: CircuitLayers, noise: NoiseSpec | None = None) -> np.ndarray:
    """Output density matrix with each layer followed by its resolved noise channels."""
    n = circuit.n_qubits
    d = 2 ** n
    plan = noise.resolve(circuit.layers, n) if noise is not None else [[] for _ in circuit.layers]
    rho = np.zeros((d, d), dtype=complex)
    rho[0, 0] = 1.0
    zz = None
    pending: dict[int, np.ndarray] = {}

    def flush():
        for q, sop in pending.items():
            apply_local_superop(rho, sop, q, n)
        pending.clear()

    for layer, channels in zip(circuit.layers, plan):
        gate = layer.local_gate()
        if gate is None:
            flush()
            if zz is None:
                zz = zz_parities(n)
            phase = np.exp(-0.5j * layer.angle * zz)
            rho *= np.outer(phase, phase.conj())
        else:
            sop = np.kron(gate, gate.conj())
            for q in range(n):
                pending[q] = sop @ pending[q] if q in pending else sop
        for ch in channels:
            if ch.is_local:
                q = ch.qubits[0]
                sop = ch.superop()
                pending[q] = sop @ pending[q] if q in pending else sop
                continue
            flush()
            if isinstance(ch, DepolarizingChannel):
                rho *= 1.0 - ch.p
                rho[np.diag_indices(d)] += ch.p / d
            else:
                rho[:] = sum(k @ rho @ k.conj().T for k in ch.kraus_ops)
    flush()
    return rho


def output_probability(circuit: CircuitLayers, noise: NoiseSpec | None = None,
                       backend: str = "auto") -> float:
    """Exact probability of reading ``0...0`` at the end of ``circuit``."""
    noisy = noise is not None and noise.has_channels
    if backend == "auto":
        backend = "density" if noisy else "statevector"
    weights = noise.readout_weights(circuit.n_qubits) if noise is not None else None
    if backend == "statevector":
        if noisy:
            raise ConfigurationError("the state-vector backend cannot apply noise channels")
        diag = np.abs(_statevector_output(circuit)) ** 2
    elif backend == "density":
        diag = np.real(np.diag(evolve_density(circuit, noise)))
    else:
        raise ValueError(f"unknown backend {backend!r}")
    return readout_zero_probability(diag, weights)


def propagator_value(circuit: CircuitLayers, noise: NoiseSpec | None = None, shots: int | None = None,
                     rng_seed: int = 0, n: int = 0, sign: int = 1, backend: str = "auto") -> PropagatorSample:
    """Measured return probability, exact (``shots=None``) or binomially sampled."""
    shots = _check_shots(shots)
    p = output_probability(circuit, noise, backend)
    return PropagatorSample(n, sign, draw_shots(p, shots, sample_rng(rng_seed, n, sign)), shots)


# ---------------------------------------------------------------- whole time series

def _apply_local_batch(psi: np.ndarray, gates: np.ndarray, n_qubits: int) -> np.ndarray:
    """Apply per-column 2x2 gates ``gates[b]`` to every qubit of ``psi[:, b]``."""
    batch = psi.shape[1]
    for q in range(n_qubits):
        v = psi.reshape(2 ** q, 2, 2 ** (n_qubits - q - 1), batch)
        a0, a1 = v[:, 0], v[:, 1]
        new0 = gates[:, 0, 0] * a0 + gates[:, 0, 1] * a1
        new1 = gates[:, 1, 0] * a0 + gates[:, 1, 1] * a1
        psi = np.stack([new0, new1], axis=1).reshape(-1, batch)
    return psi


def _apply_layer_batch(psi: np.ndarray, kind: str, angles: np.ndarray, n_qubits: int,
                       zz: np.ndarray | None = None) -> np.ndarray:
    angles = np.asarray(angles, dtype=float)
    if kind == "zz":
        zz = zz_parities(n_qubits) if zz is None else zz
        return psi * np.exp(-0.5j * np.outer(zz, angles))
    c, s = np.cos(angles / 2), np.sin(angles / 2)
    gates = np.empty((len(angles), 2, 2), dtype=complex)
    if kind == "x":
        gates[:, 0, 0] = c
        gates[:, 0, 1] = -1j * s
        gates[:, 1, 0] = -1j * s
        gates[:, 1, 1] = c
    else:
        sgn = 1.0 if kind == "trial" else -1.0
        gates[:, 0, 0] = c
        gates[:, 0, 1] = -sgn * s
        gates[:, 1, 0] = sgn * s
        gates[:, 1, 1] = c
    return _apply_local_batch(psi, gates, n_qubits)


def _trotter_probabilities(model, theta_prep, theta_meas, times, m_steps, weights) -> np.ndarray:
    """Noiseless return probabilities for many times at once."""
    n = model.n_qubits
    m = _check_steps(m_steps)
    batch = len(times)
    psi = np.repeat(trial_state(theta_prep, n)[:, None], batch, axis=1)
    zz = zz_parities(n)
    x_angles = -2.0 * model.field * times / m
    zz_angles = -2.0 * model.j_coupling * times / m
    for _ in range(m):
        psi = _apply_layer_batch(psi, "x", x_angles, n)
        psi = _apply_layer_batch(psi, "zz", zz_angles, n, zz)
    psi = _apply_layer_batch(psi, "trial_inv", np.full(batch, theta_meas), n)
    diag = np.abs(psi) ** 2
    if weights is None:
        return diag[0]
    return weights @ diag


def _exact_probabilities(model, theta_prep, theta_meas, times, weights) -> np.ndarray:
    eig = model_eigensystem(model)
    c_prep = trial_overlaps(eig, theta_prep)
    if weights is None:
        c_meas = trial_overlaps(eig, theta_meas)
        amp = np.exp(-1j * np.outer(times, eig.energies)) @ (np.conj(c_meas) * c_prep)
        return np.abs(amp) ** 2
    n = model.n_qubits
    psi = eig.vectors @ (np.exp(-1j * np.outer(eig.energies, times)) * c_prep[:, None])
    psi = _apply_layer_batch(psi, "trial_inv", np.full(len(times), theta_meas), n)
    return weights @ (np.abs(psi) ** 2)


def sample_series(model: HamiltonianTerms, theta: float, grid: TimeGrid, m_steps: int | None = None,
                  noise: NoiseSpec | None = None, shots: int | None = None, seed: int = 0,
                  evolution: str = "trotter", backend: str = "auto", mirror: bool = True) -> TimeSeries:
    """Propagator samples for every ``(s, n)`` of ``grid``.

    ``evolution="exact"`` replaces the Trotter product by ``exp(-i H t)``
    (noiseless only). Each sample draws its shots from its own ``(seed, n, s)``
    stream, so the series does not depend on evaluation order.

    The circuit at ``-t`` is the complex conjugate of the one at ``t``. With
    ``mirror`` and only real noise channels the density-matrix backend
    therefore evolves the ``s = +1`` branch and reuses its probabilities;
    shots are still drawn per ``(n, s)``.
    """
    _require_tfim(model)
    shots = _check_shots(shots)
    n_qubits = model.n_qubits
    theta_prep, theta_meas = theta, theta
    if noise is not None and noise.spam is not None:
        theta_prep, theta_meas = inject_spam(theta, *noise.spam)
    weights = noise.readout_weights(n_qubits) if noise is not None else None
    noisy = noise is not None and noise.has_channels
    if backend == "auto":
        backend = "density" if noisy else "statevector"
    if noisy and backend != "density":
        raise ConfigurationError("noise channels need the density-matrix backend")
    base = grid.times()
    times = np.concatenate([base, -base])

    if evolution == "exact":
        if noisy:
            raise ConfigurationError("exact evolution is only available without noise channels")
        probs = _exact_probabilities(model, theta_prep, theta_meas, times, weights)
    elif evolution == "trotter":
        if m_steps is None:
            raise ValueError("Trotter evolution needs m_steps")
        if backend == "statevector":
            probs = _trotter_probabilities(model, theta_prep, theta_meas, times, m_steps, weights)
        elif backend == "density":
            reuse = mirror and (noise is None or noise.is_real)
            todo = base if reuse else times
            probs = np.empty(len(todo))
            for i, t in enumerate(todo):
                circuit = build_qge_circuit(model, theta_prep, t, m_steps, theta_meas)
                probs[i] = readout_zero_probability(np.real(np.diag(evolve_density(circuit, noise))), weights)
            if reuse:
                probs = np.concatenate([probs, probs])
        else:
            raise ValueError(f"unknown backend {backend!r}")
    else:
        raise ValueError(f"unknown evolution {evolution!r}")

    probs = np.clip(probs, 0.0, 1.0)
    L = grid.length
    values = np.empty((2, L))
    for row, sign in ((0, 1), (1, -1)):
        for n in range(L):
            values[row, n] = draw_shots(probs[row * L + n], shots, sample_rng(seed, n, sign))
    return TimeSeries(grid, values, shots)


def cross_check_backends(model: HamiltonianTerms, theta: float, t: float, m_steps: int,
                         atol: float = 1e-10) -> float:
    """Compare state-vector and density-matrix results for one noiseless circuit."""
    circuit = build_qge_circuit(model, theta, t, m_steps)
    a = output_probability(circuit, None, "statevector")
    b = output_probability(circuit, None, "density")
    if abs(a - b) > atol:
        raise InternalConsistencyError(f"backends disagree: {a!r} vs {b!r}")
    return abs(a - b)
