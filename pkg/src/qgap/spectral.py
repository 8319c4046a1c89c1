"""Time grids, line-shape filters and the filtered transform of propagator data.

The spectral function is

    A(w_m) = (dt / 2 pi) Re sum_{s=+-} sum_n exp(i w_m s t_n) F(t_n) P_{s n},

with ``w_m = m dw``, ``t_n = n dt`` and ``dw dt = 2 pi / L``. Bins with
``m >= L / 2`` alias negative frequencies.

By default the ``t = 0`` sample enters with total weight one (half on each
time branch), which makes the transform an exact trapezoid rule and keeps it
consistent with the analytic Lehmann sum. ``double_count_origin=True``
reproduces the literal double sum, which adds the constant ``dt F(0) P_0 / 2 pi``
to every bin.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal

import numpy as np

from .errors import MissingSampleError

FilterKind = Literal["lorentzian", "gaussian"]


@dataclass(frozen=True)
class TimeGrid:
    length: int
    dt: float
    dw: float

    def __post_init__(self):
        if int(self.length) != self.length or self.length < 2:
            raise ValueError(f"grid length must be an integer >= 2, got {self.length}")
        if not (self.dt > 0 and self.dw > 0):
            raise ValueError("dt and dw must be positive")
        if abs(self.dt * self.dw - 2 * math.pi / self.length) > 1e-12:
            raise ValueError("grid violates dw * dt = 2 pi / L")

    @classmethod
    def from_dw(cls, dw: float, length: int) -> "TimeGrid":
        return cls(int(length), 2 * math.pi / (length * dw), float(dw))

    @classmethod
    def for_filter(cls, eta: float, dw: float | None = None, length: int | None = None,
                   field: float = 1.0) -> "TimeGrid":
        """Default grid: ``dw = eta / 4`` and ``L = 2 ceil(5 h / dw)``."""
        dw = eta / 4 if dw is None else dw
        if length is None:
            length = 2 * math.ceil(5 * field / dw - 1e-9)
        return cls.from_dw(dw, length)

    def times(self, sign: int = 1) -> np.ndarray:
        return sign * self.dt * np.arange(self.length)

    def omegas(self) -> np.ndarray:
        return self.dw * np.arange(self.length)

    @property
    def period(self) -> float:
        """Frequency period ``L dw`` of the discrete transform."""
        return self.length * self.dw


@dataclass(frozen=True)
class FilterSpec:
    kind: FilterKind
    eta: float

    def __post_init__(self):
        kind = str(self.kind).lower()
        if kind not in ("lorentzian", "gaussian"):
            raise ValueError(f"unknown filter kind {self.kind!r}")
        object.__setattr__(self, "kind", kind)
        if not self.eta > 0:
            raise ValueError("eta must be positive")

    @property
    def sigma(self) -> float:
        """Gaussian width, ``eta = sigma sqrt(2 ln 2)``."""
        return self.eta / math.sqrt(2 * math.log(2))


def filter_time(spec: FilterSpec, t):
    """Time-domain window, evaluated at ``|t|``."""
    t = np.abs(t)
    if spec.kind == "lorentzian":
        out = np.exp(-spec.eta * t)
    else:
        out = np.exp(-0.5 * (spec.sigma * t) ** 2)
    return float(out) if np.ndim(out) == 0 else out


def filter_freq(spec: FilterSpec, w):
    """Normalised line shape, the cosine transform of :func:`filter_time`."""
    w = np.asarray(w, dtype=float)
    if spec.kind == "lorentzian":
        out = spec.eta / (math.pi * (w ** 2 + spec.eta ** 2))
    else:
        s = spec.sigma
        out = np.exp(-0.5 * (w / s) ** 2) / (math.sqrt(2 * math.pi) * s)
    return float(out) if out.ndim == 0 else out


def filter_freq_periodic(spec: FilterSpec, w, period: float):
    """Line shape summed over all images ``w + k * period``."""
    w = np.asarray(w, dtype=float)
    if spec.kind == "lorentzian":
        a = 2 * math.pi * spec.eta / period
        b = 2 * math.pi * w / period
        # sinh(a) / (cosh(a) - cos(b)), written to stay finite for large a
        out = -np.expm1(-2 * a) / (1 + np.exp(-2 * a) - 2 * np.exp(-a) * np.cos(b)) / period
    else:
        reach = 3 + math.ceil(10 * spec.sigma / period)
        w0 = np.mod(w + 0.5 * period, period) - 0.5 * period
        out = sum(filter_freq(spec, w0 + k * period) for k in range(-reach, reach + 1))
    return float(out) if np.ndim(out) == 0 else out


@dataclass
class TimeSeries:
    """Propagator samples on both time branches.

    ``values[0]`` holds ``s = +1`` and ``values[1]`` holds ``s = -1``;
    NaN marks a sample that has not been taken.
    """

    grid: TimeGrid
    values: np.ndarray
    shots: int | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (2, self.grid.length):
            raise ValueError(f"expected values of shape (2, {self.grid.length})")
        finite = self.values[np.isfinite(self.values)]
        if np.any((finite < 0) | (finite > 1)):
            raise ValueError("propagator values must lie in [0, 1]")

    @classmethod
    def empty(cls, grid: TimeGrid, shots: int | None = None) -> "TimeSeries":
        return cls(grid, np.full((2, grid.length), np.nan), shots)

    @staticmethod
    def row(sign: int) -> int:
        if sign not in (1, -1):
            raise ValueError("sign must be +1 or -1")
        return 0 if sign == 1 else 1

    def set(self, sign: int, n: int, value: float) -> None:
        self.values[self.row(sign), n] = value

    def sample(self, sign: int, n: int):
        from .sim import PropagatorSample

        value = self.values[self.row(sign), n]
        if not np.isfinite(value):
            raise MissingSampleError([(sign, n)])
        return PropagatorSample(n, sign, float(value), self.shots)

    def missing(self) -> list[tuple[int, int]]:
        out = []
        for row, sign in ((0, 1), (1, -1)):
            out.extend((sign, int(n)) for n in np.flatnonzero(~np.isfinite(self.values[row])))
        return out

    def check_complete(self) -> None:
        missing = self.missing()
        if missing:
            raise MissingSampleError(missing)


@dataclass
class Spectrum:
    grid: TimeGrid
    values: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.grid.length,):
            raise ValueError("spectrum length does not match its grid")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("spectrum has non-finite entries")

    @property
    def omegas(self) -> np.ndarray:
        return self.grid.omegas()

    def with_values(self, values, **metadata) -> "Spectrum":
        return Spectrum(self.grid, values, {**self.metadata, **metadata})


def _filtered(series: TimeSeries, spec: FilterSpec, double_count_origin: bool) -> np.ndarray:
    weights = filter_time(spec, series.grid.times())
    x = series.values * weights[None, :]
    if not double_count_origin:
        x[:, 0] *= 0.5
    return x


def spectral_function(series: TimeSeries, spec: FilterSpec, method: str = "direct",
                      double_count_origin: bool = False) -> Spectrum:
    """Filtered discrete transform of a complete two-branch time series."""
    series.check_complete()
    grid = series.grid
    x = _filtered(series, spec, double_count_origin)
    L = grid.length
    if method == "direct":
        idx = np.arange(L)
        angle = (2 * math.pi / L) * (np.outer(idx, idx) % L)
        phase = np.exp(1j * angle)
        total = phase @ x[0] + phase.conj() @ x[1]
    elif method == "fft":
        total = L * np.fft.ifft(x[0]) + np.fft.fft(x[1])
    else:
        raise ValueError(f"unknown transform method {method!r}")
    values = grid.dt / (2 * math.pi) * total.real
    meta = {"filter": spec.kind, "eta": spec.eta, "L": L, "shots": series.shots,
            "double_count_origin": bool(double_count_origin)}
    return Spectrum(grid, values, meta)


def lehmann_weights(eigs, theta: float, theta_meas: float | None = None) -> np.ndarray:
    """Spectral weights ``Re[conj(c''_u) c'_u c'_{u'}^* c''_{u'}]``.

    ``theta`` prepares the state and ``theta_meas`` (default ``theta``)
    un-prepares it; equal angles give ``|c_u|^2 |c_{u'}|^2``.
    """
    from .oracle import trial_overlaps

    c_prep = trial_overlaps(eigs, theta)
    c_meas = c_prep if theta_meas is None else trial_overlaps(eigs, theta_meas)
    a = np.conj(c_meas) * c_prep
    return np.real(np.outer(a, np.conj(a)))


def lehmann_reference(eigs, theta: float, spec: FilterSpec, grid: TimeGrid,
                      theta_meas: float | None = None, periodic: bool = True) -> Spectrum:
    """Analytic spectrum ``sum_{u,u'} w_{uu'} F~(w - (E_u - E_{u'}))`` on ``grid``.

    With ``periodic`` the line shape is summed over the aliases of the
    discrete grid, which is what the sampled transform converges to.
    """
    weights = lehmann_weights(eigs, theta, theta_meas)
    energies = eigs.energies
    omegas = grid.omegas()
    values = np.zeros(grid.length)
    keep = np.abs(weights) > 1e-300
    for u in range(len(energies)):
        cols = np.flatnonzero(keep[u])
        if cols.size == 0:
            continue
        gaps = energies[u] - energies[cols]
        shift = omegas[:, None] - gaps[None, :]
        if periodic:
            shape = filter_freq_periodic(spec, shift, grid.period)
        else:
            shape = filter_freq(spec, shift)
        values += shape @ weights[u, cols]
    meta = {"filter": spec.kind, "eta": spec.eta, "L": grid.length, "source": "lehmann",
            "theta": theta, "theta_meas": theta if theta_meas is None else theta_meas}
    return Spectrum(grid, values, meta)


def write_spectrum(spectrum: Spectrum, path, field: float = 1.0, header: dict | None = None) -> None:
    """Two-column text ``omega_over_h  A_times_h`` plus ``<path>.meta.json``."""
    path = Path(path)
    header = dict(header or {})
    lines = [f"# {k}={header[k]}" for k in sorted(header)]
    lines.append("# omega_over_h\tA_times_h")
    for w, a in zip(spectrum.omegas / field, spectrum.values * field):
        lines.append(f"{w:.17g}\t{a:.17g}")
    path.write_text("\n".join(lines) + "\n")
    meta = {**spectrum.metadata, **header, "dw": spectrum.grid.dw, "dt": spectrum.grid.dt}
    Path(str(path) + ".meta.json").write_text(json.dumps(meta, sort_keys=True, indent=2) + "\n")


def read_spectrum(path) -> Spectrum:
    path = Path(path)
    data = np.loadtxt(path, comments="#", ndmin=2)
    meta_path = Path(str(path) + ".meta.json")
    meta = json.loads(meta_path.read_text()) if meta_path.exists() else {}
    dw = meta.get("dw", float(data[1, 0] - data[0, 0]))
    grid = TimeGrid.from_dw(dw, len(data))
    return Spectrum(grid, data[:, 1], meta)
