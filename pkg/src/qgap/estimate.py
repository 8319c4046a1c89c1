"""Gap extraction from spectra, the peak-height cost and trial-angle optimisation."""

from __future__ import annotations

import math
import time
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .baseline import AlsParams, BaselineResult, als_baseline
from .spectral import Spectrum

PENALTY_COST = 1e6
TIE_TOL = 1e-9
GOLDEN = 0.5 * (3.0 - math.sqrt(5.0))
SQRT_EPS = math.sqrt(2.2e-16)


@dataclass(frozen=True)
class TargetWindow:
    center: float
    half_width: float

    def __post_init__(self):
        if not self.half_width > 0:
            raise ValueError("window half width must be positive")

    @property
    def lo(self) -> float:
        return self.center - self.half_width

    @property
    def hi(self) -> float:
        return self.center + self.half_width

    def contains(self, w: float) -> bool:
        return self.lo <= w <= self.hi


def initial_gap(n_qubits: int, j_over_h: float) -> float:
    """Perturbative paramagnet gap ``2 [1 - (1 - 1/N) J/h]`` in units of h."""
    if j_over_h >= 1.0:
        warnings.warn(f"J/h = {j_over_h} is outside the paramagnetic regime", stacklevel=2)
    return 2.0 * (1.0 - (1.0 - 1.0 / n_qubits) * j_over_h)


@dataclass(frozen=True)
class Peak:
    index: int
    omega: float
    height: float


def find_peak_near(spectrum: Spectrum, window: TargetWindow) -> Peak | None:
    """Interior local maximum in ``window`` closest to its center (ties go to lower omega)."""
    omegas = spectrum.omegas
    values = spectrum.values
    best = None
    for m in range(1, len(values) - 1):
        w = omegas[m]
        if not window.contains(w):
            continue
        if values[m - 1] < values[m] >= values[m + 1]:
            dist = abs(w - window.center)
            # distances equal up to rounding count as a tie, kept by the lower omega
            if best is None or dist < best[0] - TIE_TOL * window.half_width:
                best = (dist, m)
    if best is None:
        return None
    m = best[1]
    return Peak(m, float(omegas[m]), float(values[m]))


@dataclass(frozen=True)
class GapEstimate:
    delta_bare: float
    delta_corr: float
    delta_exact: float
    rel_error_bare: float
    rel_error_corr: float
    peak_height_corr: float
    peak_height_bare: float
    found_bare: bool
    found_corr: bool

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def _rel_error(value: float, exact: float) -> float:
    return abs(value - exact) / exact if math.isfinite(value) else math.nan


def estimate_gaps(spectrum: Spectrum, window: TargetWindow, als_params: AlsParams | None,
                  oracle_gap: float) -> tuple[GapEstimate, BaselineResult]:
    """Bare and baseline-corrected gap estimates plus the ALS result.

    A missing peak leaves the matching gap and error as NaN with its
    ``found_*`` flag cleared.
    """
    bare = find_peak_near(spectrum, window)
    baseline = als_baseline(spectrum.values, als_params)
    corr = find_peak_near(spectrum.with_values(baseline.corrected), window)
    nan = math.nan
    estimate = GapEstimate(
        delta_bare=bare.omega if bare else nan,
        delta_corr=corr.omega if corr else nan,
        delta_exact=float(oracle_gap),
        rel_error_bare=_rel_error(bare.omega, oracle_gap) if bare else nan,
        rel_error_corr=_rel_error(corr.omega, oracle_gap) if corr else nan,
        peak_height_corr=corr.height if corr else nan,
        peak_height_bare=bare.height if bare else nan,
        found_bare=bare is not None,
        found_corr=corr is not None,
    )
    return estimate, baseline


def cost_from_estimate(estimate: GapEstimate, field: float = 1.0) -> tuple[float, bool]:
    """``1 / (h A_corr(Delta_corr))``, or the penalty when no usable peak exists."""
    height = estimate.peak_height_corr
    if not estimate.found_corr or not height > 0:
        return PENALTY_COST, True
    return 1.0 / (field * height), False


# ---------------------------------------------------------------- bounded Brent

@dataclass(frozen=True)
class TraceEntry:
    iteration: int
    theta: float
    cost: float
    step: str


@dataclass
class OptimizerTrace:
    entries: list[TraceEntry] = field(default_factory=list)
    termination_reason: str = ""
    theta_opt: float = math.nan
    cost_opt: float = math.nan

    @property
    def n_evals(self) -> int:
        return len(self.entries)


class _StopOptimization(Exception):
    pass


def minimize_bounded(f: Callable[[float], float], lo: float = 0.0, hi: float = math.pi / 2,
                     tol: float = 1e-6, max_iters: int = 30,
                     callback: Callable[[TraceEntry], bool] | None = None,
                     ftol: float | None = None, polish: bool = True) -> tuple[float, OptimizerTrace]:
    """Bounded scalar minimisation by golden section with parabolic steps.

    ``tol`` is the absolute tolerance on the abscissa and ``max_iters`` caps
    the number of evaluations of ``f`` in the main loop. ``ftol`` stops once
    two successive improvements differ by less than it. ``callback`` sees
    every evaluation and stops the search by returning True. With
    ``polish`` the two bounds and the midpoint are evaluated at the end and
    the best point seen is returned.
    """
    if not lo < hi:
        raise ValueError("need lo < hi")
    if max_iters < 1:
        raise ValueError("max_iters must be >= 1")
    trace = OptimizerTrace()
    seen: dict[float, float] = {}

    def evaluate(x: float, step: str) -> float:
        x = float(x)
        if x in seen:
            return seen[x]
        fx_ = float(f(x))
        seen[x] = fx_
        entry = TraceEntry(len(trace.entries), x, fx_, step)
        trace.entries.append(entry)
        if callback is not None and callback(entry):
            raise _StopOptimization
        return fx_

    a, b = float(lo), float(hi)
    reason = "xtol"
    try:
        fulc = a + GOLDEN * (b - a)
        nfc = xf = fulc
        rat = e = 0.0
        fx = evaluate(xf, "initial")
        num = 1
        ffulc = fnfc = fx
        last_accepted = fx
        xm = 0.5 * (a + b)
        tol1 = SQRT_EPS * abs(xf) + tol / 3.0
        tol2 = 2.0 * tol1
        while abs(xf - xm) > (tol2 - 0.5 * (b - a)):
            if num >= max_iters:
                reason = "iteration-cap"
                break
            golden = True
            step = "golden"
            if abs(e) > tol1:
                golden = False
                r = (xf - nfc) * (fx - ffulc)
                q = (xf - fulc) * (fx - fnfc)
                p = (xf - fulc) * q - (xf - nfc) * r
                q = 2.0 * (q - r)
                if q > 0.0:
                    p = -p
                q = abs(q)
                r = e
                e = rat
                if abs(p) < abs(0.5 * q * r) and q * (a - xf) < p < q * (b - xf):
                    rat = p / q
                    x = xf + rat
                    step = "parabolic"
                    if (x - a) < tol2 or (b - x) < tol2:
                        si = math.copysign(1.0, xm - xf)
                        rat = tol1 * si
                else:
                    golden = True
            if golden:
                e = (a - xf) if xf >= xm else (b - xf)
                rat = GOLDEN * e
                step = "golden"
            si = 1.0 if rat >= 0 else -1.0
            x = xf + si * max(abs(rat), tol1)
            fu = evaluate(x, step)
            num += 1
            if fu <= fx:
                if x >= xf:
                    a = xf
                else:
                    b = xf
                fulc, ffulc = nfc, fnfc
                nfc, fnfc = xf, fx
                xf, fx = x, fu
                if ftol is not None and abs(last_accepted - fu) < ftol:
                    last_accepted = fu
                    reason = "ftol"
                    break
                last_accepted = fu
            else:
                if x < xf:
                    a = x
                else:
                    b = x
                if fu <= fnfc or nfc == xf:
                    fulc, ffulc = nfc, fnfc
                    nfc, fnfc = x, fu
                elif fu <= ffulc or fulc == xf or fulc == nfc:
                    fulc, ffulc = x, fu
            xm = 0.5 * (a + b)
            tol1 = SQRT_EPS * abs(xf) + tol / 3.0
            tol2 = 2.0 * tol1
        if polish:
            for x in (lo, hi, 0.5 * (lo + hi)):
                evaluate(x, "polish")
    except _StopOptimization:
        reason = "callback"
    theta_opt = min(seen, key=lambda x: (seen[x], x))
    trace.termination_reason = reason
    trace.theta_opt = theta_opt
    trace.cost_opt = seen[theta_opt]
    return theta_opt, trace


# ---------------------------------------------------------------- pipeline

@dataclass
class Evaluation:
    """Everything computed for one trial angle."""

    theta: float
    cost: float
    penalized: bool
    estimate: GapEstimate
    series: object
    spectrum: Spectrum
    baseline: BaselineResult
    seconds: float


class GapObjective:
    """Cost ``f(theta)`` of the full sampling, transform and correction pipeline.

    Every evaluation is cached by angle and kept in call order.
    """

    def __init__(self, model, grid, filter_spec, window: TargetWindow, m_steps: int | None,
                 noise=None, shots: int | None = None, seed: int = 0,
                 als_params: AlsParams | None = None, oracle_gap: float = math.nan,
                 evolution: str = "trotter", transform: str = "fft", double_count_origin: bool = False):
        self.model = model
        self.grid = grid
        self.filter_spec = filter_spec
        self.window = window
        self.m_steps = m_steps
        self.noise = noise
        self.shots = shots
        self.seed = seed
        self.als_params = als_params or AlsParams()
        self.oracle_gap = oracle_gap
        self.evolution = evolution
        self.transform = transform
        self.double_count_origin = double_count_origin
        self.cache: dict[float, Evaluation] = {}
        self.order: list[float] = []

    def evaluate(self, theta: float) -> Evaluation:
        from .sim import sample_series
        from .spectral import spectral_function

        theta = float(theta)
        hit = self.cache.get(theta)
        if hit is not None:
            return hit
        start = time.perf_counter()
        series = sample_series(self.model, theta, self.grid, self.m_steps, self.noise, self.shots,
                               self.seed, evolution=self.evolution)
        spectrum = spectral_function(series, self.filter_spec, self.transform, self.double_count_origin)
        estimate, baseline = estimate_gaps(spectrum, self.window, self.als_params, self.oracle_gap)
        cost, penalized = cost_from_estimate(estimate, self.model.field)
        spectrum.metadata["theta"] = theta
        ev = Evaluation(theta, cost, penalized, estimate, series, spectrum, baseline,
                        time.perf_counter() - start)
        self.cache[theta] = ev
        self.order.append(theta)
        return ev

    def __call__(self, theta: float) -> float:
        return self.evaluate(theta).cost

    @property
    def evaluations(self) -> list[Evaluation]:
        return [self.cache[t] for t in self.order]


def snapshot_indices(trace: OptimizerTrace) -> dict[str, int]:
    """First, intermediate and final accepted evaluations (indices into the trace)."""
    accepted = []
    best = math.inf
    for i, e in enumerate(trace.entries):
        if e.cost < best:
            best = e.cost
            accepted.append(i)
    final = next(i for i, e in enumerate(trace.entries) if e.theta == trace.theta_opt)
    if final not in accepted:
        accepted.append(final)
    return {"first": 0, "intermediate": accepted[len(accepted) // 2], "final": final}


@dataclass
class RunRecord:
    config: object
    config_hash: str
    delta_exact: float
    delta0: float
    trace: OptimizerTrace
    evaluations: list[Evaluation]
    snapshots: dict[str, int]
    timings: dict[str, float]

    def evaluation_at(self, trace_index: int) -> Evaluation:
        """Evaluation behind a trace entry (entries may repeat a cached angle)."""
        theta = self.trace.entries[trace_index].theta
        return next(ev for ev in self.evaluations if ev.theta == theta)

    @property
    def final(self) -> Evaluation:
        return self.evaluation_at(self.snapshots["final"])

    @property
    def estimate(self) -> GapEstimate:
        return self.final.estimate


class _Stage:
    def __init__(self, name: str):
        self.name = name

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        from .errors import ConfigurationError, InvalidModelError, PipelineStageError

        passthrough = (ConfigurationError, InvalidModelError, PipelineStageError)
        if exc is None or isinstance(exc, passthrough) or not isinstance(exc, Exception):
            return False
        raise PipelineStageError(self.name, exc) from exc


def run_qge(config, base_dir=None, callback: Callable[[TraceEntry], bool] | None = None) -> RunRecord:
    """Full pipeline for one :class:`~qgap.config.RunConfig`, optimising the trial angle if enabled."""
    from .config import build_noise
    from .model import build_tfim
    from .oracle import exact_gap, model_eigensystem
    from .spectral import FilterSpec, TimeGrid

    timings: dict[str, float] = {}
    start = time.perf_counter()
    with _Stage("setup"):
        model = build_tfim(config.model.n_qubits, config.model.j_over_h, 1.0)
        spec = FilterSpec(config.filter.kind, config.filter.eta_over_h)
        grid = TimeGrid.for_filter(spec.eta, config.grid.dw, config.grid.length)
        delta0 = initial_gap(model.n_qubits, model.j_over_h)
        window = TargetWindow(delta0, spec.eta)
        noise = build_noise(config.noise, model.n_qubits, base_dir)
        als = AlsParams(config.als.lambda_smooth, config.als.chi_asym, config.als.max_iters, config.als.tol)
    with _Stage("oracle"):
        gap = exact_gap(model_eigensystem(model)).value
    timings["setup"] = time.perf_counter() - start
    objective = GapObjective(model, grid, spec, window, config.trotter.m_steps, noise,
                             config.sampling.shots, config.sampling.seed, als, gap,
                             config.trotter.evolution, config.spectral.method,
                             config.spectral.double_count_origin)
    opt = config.optimize
    start = time.perf_counter()
    with _Stage("optimize" if opt.enabled else "evaluate"):
        if opt.enabled:
            _, trace = minimize_bounded(objective, opt.bounds[0], opt.bounds[1], opt.tol, opt.max_iters,
                                        callback, ftol=opt.tol)
        else:
            ev = objective.evaluate(opt.theta0)
            trace = OptimizerTrace([TraceEntry(0, ev.theta, ev.cost, "fixed")], "disabled", ev.theta, ev.cost)
    timings["evaluate"] = time.perf_counter() - start
    evaluations = objective.evaluations
    return RunRecord(config, config.config_hash(), gap, delta0, trace, evaluations,
                     snapshot_indices(trace), timings)
