"""Run configuration: a YAML key tree with defaults for the N=5 headline run.

Schema (all sections and keys optional)::

    name: headline
    model:    {n_qubits: 5, j_over_h: 0.4}
    filter:   {kind: lorentzian, eta_over_h: 0.3}
    grid:     {dw: null, length: null}          # null -> eta/4 and 2*ceil(5h/dw)
    trotter:  {m_steps: 15, evolution: trotter}  # or evolution: exact
    sampling: {shots: 1024, seed: 0}             # shots: exact for infinite shots
    spectral: {method: fft, double_count_origin: false}
    noise:
      kind: none | depolarizing | kraus | calibration
      placement: per-layer | per-trotter-step
      p: 0.0                                     # depolarizing
      channels: [{type: amplitude_damping, p: 1e-3, qubits: all, layers: all}]  # kraus
      calibration: {file: null, qubits: null, scale: 1.0, layer_duration_ns: null}
      spam: null                                 # [prep_offset, meas_offset]
    als:      {lambda_smooth: 1.0, chi_asym: 0.01, max_iters: 50, tol: 1.0e-8}
    optimize: {enabled: true, bounds: [0, 1.5707963267948966], tol: 1.0e-6,
               max_iters: 30, theta0: 0.9424777960769379}
"""

from __future__ import annotations

import copy
import hashlib
import json
import math
from dataclasses import MISSING, asdict, dataclass, field, fields, is_dataclass
from pathlib import Path

import numpy as np
import yaml

from .errors import ConfigurationError


@dataclass(frozen=True)
class ModelConfig:
    n_qubits: int = 5
    j_over_h: float = 0.4


@dataclass(frozen=True)
class FilterConfig:
    kind: str = "lorentzian"
    eta_over_h: float = 0.3


@dataclass(frozen=True)
class GridConfig:
    dw: float | None = None
    length: int | None = None


@dataclass(frozen=True)
class TrotterConfig:
    m_steps: int = 15
    evolution: str = "trotter"


@dataclass(frozen=True)
class SamplingConfig:
    shots: int | None = 1024
    seed: int = 0


@dataclass(frozen=True)
class SpectralConfig:
    method: str = "fft"
    double_count_origin: bool = False


@dataclass(frozen=True)
class CalibrationConfig:
    file: str | None = None
    qubits: tuple[int, ...] | None = None
    scale: float = 1.0
    layer_duration_ns: float | None = None


@dataclass(frozen=True)
class NoiseConfig:
    kind: str = "none"
    placement: str = "per-layer"
    p: float = 0.0
    channels: tuple = ()
    calibration: CalibrationConfig = field(default_factory=CalibrationConfig)
    spam: tuple[float, float] | None = None


@dataclass(frozen=True)
class AlsConfig:
    lambda_smooth: float = 1.0
    chi_asym: float = 1e-2
    max_iters: int = 50
    tol: float = 1e-8


@dataclass(frozen=True)
class OptimizeConfig:
    enabled: bool = True
    bounds: tuple[float, float] = (0.0, math.pi / 2)
    tol: float = 1e-6
    max_iters: int = 30
    theta0: float = 0.3 * math.pi


@dataclass(frozen=True)
class RunConfig:
    name: str = "run"
    model: ModelConfig = field(default_factory=ModelConfig)
    filter: FilterConfig = field(default_factory=FilterConfig)
    grid: GridConfig = field(default_factory=GridConfig)
    trotter: TrotterConfig = field(default_factory=TrotterConfig)
    sampling: SamplingConfig = field(default_factory=SamplingConfig)
    spectral: SpectralConfig = field(default_factory=SpectralConfig)
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    als: AlsConfig = field(default_factory=AlsConfig)
    optimize: OptimizeConfig = field(default_factory=OptimizeConfig)

    def __post_init__(self):
        validate(self)

    # -------------------------------------------------------------- serialization
    def to_dict(self) -> dict:
        data = _plain(asdict(self))
        if data["sampling"]["shots"] is None:
            data["sampling"]["shots"] = "exact"
        return data

    @classmethod
    def from_dict(cls, data: dict | None) -> "RunConfig":
        return _build(cls, data or {}, "")

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False, default_flow_style=None)

    @classmethod
    def from_yaml(cls, text: str) -> "RunConfig":
        try:
            data = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            raise ConfigurationError(f"config is not valid YAML: {exc}") from exc
        if data is not None and not isinstance(data, dict):
            raise ConfigurationError("config must be a mapping at the top level")
        return cls.from_dict(data)

    @classmethod
    def load(cls, path) -> "RunConfig":
        path = Path(path)
        if not path.is_file():
            raise ConfigurationError(f"config file not found: {path}")
        return cls.from_yaml(path.read_text())

    def config_hash(self) -> str:
        canon = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()[:12]

    def replace(self, **changes) -> "RunConfig":
        """Copy with dotted-path overrides, e.g. ``replace(**{"trotter.m_steps": 40})``."""
        data = self.to_dict()
        for key, value in changes.items():
            node = data
            *parents, leaf = key.split(".")
            for p in parents:
                node = node.setdefault(p, {})
            node[leaf] = value
        return RunConfig.from_dict(data)


def _plain(obj):
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


_SHOTS_EXACT = ("exact", "inf", "infinite", None)


def _build(cls, data, where: str):
    if not isinstance(data, dict):
        raise ConfigurationError(f"section {where or 'root'} must be a mapping")
    known = {f.name: f for f in fields(cls)}
    unknown = set(data) - set(known)
    if unknown:
        raise ConfigurationError(f"unknown key(s) in {where or 'root'}: {sorted(unknown)}")
    kwargs = {}
    for name, value in data.items():
        f = known[name]
        path = f"{where}.{name}" if where else name
        default = f.default_factory() if f.default_factory is not MISSING else f.default
        if is_dataclass(default):
            kwargs[name] = _build(type(default), value or {}, path)
        else:
            kwargs[name] = _coerce(cls, name, value, path)
    try:
        return cls(**kwargs)
    except ConfigurationError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigurationError(f"invalid {where or 'config'}: {exc}") from exc


def _coerce(cls, name, value, path):
    if cls is SamplingConfig and name == "shots":
        if isinstance(value, str) and value.lower() in _SHOTS_EXACT or value is None:
            return None
        if value == math.inf:
            return None
    if value is None:
        return None
    if isinstance(value, list):
        if cls is NoiseConfig and name == "channels":
            return tuple(copy.deepcopy(v) for v in value)
        return tuple(value)
    return value


def _int(value, path, minimum=None):
    if isinstance(value, bool) or not isinstance(value, (int, np.integer)) and not (
            isinstance(value, float) and value.is_integer()):
        raise ConfigurationError(f"{path} must be an integer, got {value!r}")
    if minimum is not None and value < minimum:
        raise ConfigurationError(f"{path} must be >= {minimum}, got {value}")
    return int(value)


def _positive(value, path):
    if not isinstance(value, (int, float)) or isinstance(value, bool) or not value > 0:
        raise ConfigurationError(f"{path} must be a positive number, got {value!r}")


def validate(cfg: RunConfig) -> None:
    _int(cfg.model.n_qubits, "model.n_qubits", 2)
    if not isinstance(cfg.model.j_over_h, (int, float)):
        raise ConfigurationError("model.j_over_h must be a number")
    if cfg.filter.kind not in ("lorentzian", "gaussian"):
        raise ConfigurationError(f"filter.kind must be lorentzian or gaussian, got {cfg.filter.kind!r}")
    _positive(cfg.filter.eta_over_h, "filter.eta_over_h")
    if cfg.grid.dw is not None:
        _positive(cfg.grid.dw, "grid.dw")
    if cfg.grid.length is not None:
        _int(cfg.grid.length, "grid.length", 4)
    _int(cfg.trotter.m_steps, "trotter.m_steps", 1)
    if cfg.trotter.evolution not in ("trotter", "exact"):
        raise ConfigurationError("trotter.evolution must be trotter or exact")
    if cfg.sampling.shots is not None:
        _int(cfg.sampling.shots, "sampling.shots", 1)
    _int(cfg.sampling.seed, "sampling.seed", 0)
    if cfg.spectral.method not in ("fft", "direct"):
        raise ConfigurationError("spectral.method must be fft or direct")
    noise = cfg.noise
    if noise.kind not in ("none", "depolarizing", "kraus", "calibration"):
        raise ConfigurationError(f"noise.kind {noise.kind!r} is not one of none/depolarizing/kraus/calibration")
    if noise.placement not in ("per-layer", "per-trotter-step"):
        raise ConfigurationError("noise.placement must be per-layer or per-trotter-step")
    if not (isinstance(noise.p, (int, float)) and 0 <= noise.p <= 1):
        raise ConfigurationError("noise.p must lie in [0, 1]")
    if noise.kind == "calibration" and not noise.calibration.file:
        raise ConfigurationError("noise.kind calibration needs noise.calibration.file")
    if noise.kind == "kraus" and not noise.channels:
        raise ConfigurationError("noise.kind kraus needs a nonempty noise.channels list")
    if noise.spam is not None and len(noise.spam) != 2:
        raise ConfigurationError("noise.spam must be [prep_offset, meas_offset]")
    _positive(cfg.als.lambda_smooth, "als.lambda_smooth")
    if not 0 < cfg.als.chi_asym < 0.5:
        raise ConfigurationError("als.chi_asym must lie in (0, 0.5)")
    _int(cfg.als.max_iters, "als.max_iters", 1)
    opt = cfg.optimize
    if len(opt.bounds) != 2 or not opt.bounds[0] < opt.bounds[1]:
        raise ConfigurationError("optimize.bounds must be [lo, hi] with lo < hi")
    _positive(opt.tol, "optimize.tol")
    _int(opt.max_iters, "optimize.max_iters", 1)


# ---------------------------------------------------------------- noise synthesis

_KRAUS_BUILDERS = ("amplitude_damping", "dephasing", "bit_flip", "phase_flip", "depolarizing_1q",
                   "depolarizing", "custom")


PACKAGE_PREFIX = "package:"


def resolve_data_path(name: str, base_dir: Path | None = None) -> Path:
    """``package:<file>`` names bundled data; relative paths resolve against ``base_dir``."""
    if name.startswith(PACKAGE_PREFIX):
        return Path(__file__).parent / "data" / name[len(PACKAGE_PREFIX):]
    path = Path(name)
    if base_dir is not None and not path.is_absolute():
        path = Path(base_dir) / path
    return path


def build_noise(cfg: NoiseConfig, n_qubits: int, base_dir: Path | None = None):
    """NoiseSpec for ``cfg`` on an ``n_qubits`` register, or None for a clean run."""
    from . import noise as nz

    spam = tuple(cfg.spam) if cfg.spam is not None else None
    if cfg.kind == "none":
        return nz.NoiseSpec(cfg.placement, (), spam, None, "spam" if spam else "none") if spam else None
    if cfg.kind == "depolarizing":
        return nz.NoiseSpec(cfg.placement, (("all", nz.DepolarizingChannel(float(cfg.p))),), spam, None,
                            f"depolarizing({cfg.p:g})")
    if cfg.kind == "kraus":
        entries = []
        for item in cfg.channels:
            entries.extend(_kraus_entries(dict(item), n_qubits, base_dir))
        return nz.NoiseSpec(cfg.placement, tuple(entries), spam, None, "kraus")
    cal = cfg.calibration
    records = load_calibration_records(resolve_data_path(cal.file, base_dir))
    if cal.qubits is not None:
        by_id = {r.qubit_id: r for r in records}
        missing = [q for q in cal.qubits if q not in by_id]
        if missing:
            raise ConfigurationError(f"calibration file lacks qubits {missing}")
        records = [by_id[q] for q in cal.qubits]
    if len(records) < n_qubits:
        raise ConfigurationError(f"calibration has {len(records)} qubits, model needs {n_qubits}")
    spec = nz.calibration_to_noise(records[:n_qubits], cal.layer_duration_ns, cal.scale, spam)
    if cfg.placement != "per-layer":
        spec = nz.NoiseSpec(cfg.placement, spec.channels, spec.spam, spec.readout, spec.label)
    return spec


def _kraus_entries(item: dict, n_qubits: int, base_dir: Path | None):
    from . import noise as nz

    kind = item.pop("type", None)
    layers = item.pop("layers", "all")
    layers = tuple(layers) if isinstance(layers, list) else layers
    qubits = item.pop("qubits", "all")
    if kind not in _KRAUS_BUILDERS:
        raise ConfigurationError(f"unknown channel type {kind!r}; choose from {_KRAUS_BUILDERS}")
    if kind == "depolarizing":
        return [(layers, nz.DepolarizingChannel(float(item.pop("p"))))]
    if kind == "custom":
        ch = load_kraus_file(resolve_data_path(item.pop("file"), base_dir))
    else:
        builder = {"amplitude_damping": nz.amplitude_damping, "dephasing": nz.dephasing,
                   "bit_flip": nz.bit_flip, "phase_flip": nz.phase_flip,
                   "depolarizing_1q": nz.single_qubit_depolarizing}[kind]
        ch = builder(float(item.pop("p")))
    if item:
        raise ConfigurationError(f"unknown channel keys {sorted(item)}")
    if ch.dim != 2:
        return [(layers, ch)]
    targets = range(n_qubits) if qubits == "all" else [int(q) for q in (qubits if isinstance(qubits, (list, tuple)) else [qubits])]
    return [(layers, ch.on(q)) for q in targets]


def load_kraus_file(path: Path):
    """Kraus list from JSON ``{"label": ..., "ops": [[[re, im], ...], ...]}``."""
    from .noise import KrausChannel

    try:
        data = json.loads(Path(path).read_text())
        ops = [np.array(op, dtype=float)[..., 0] + 1j * np.array(op, dtype=float)[..., 1] for op in data["ops"]]
        return KrausChannel(tuple(ops), data.get("label", Path(path).stem))
    except (OSError, KeyError, ValueError, IndexError) as exc:
        raise ConfigurationError(f"cannot read Kraus file {path}: {exc}") from exc


def load_calibration_records(path: Path):
    """Records from calibration CSV/TSV text or the YAML written by ``calib-import``."""
    from .noise import CalibrationRecord, parse_calibration

    if not Path(path).is_file():
        raise ConfigurationError(f"calibration file not found: {path}")
    if Path(path).suffix in (".yaml", ".yml"):
        data = yaml.safe_load(Path(path).read_text()) or {}
        try:
            return [CalibrationRecord.from_dict(r) for r in data.get("records", [])]
        except (KeyError, ValueError, TypeError) as exc:
            raise ConfigurationError(f"bad calibration record in {path}: {exc}") from exc
    parsed = parse_calibration(path)
    if not parsed.records:
        raise ConfigurationError(f"no valid calibration records in {path}")
    return parsed.records
