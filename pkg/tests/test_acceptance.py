"""Acceptance criteria 1-11, one test each, printing a PASS/FAIL line per criterion."""
import math
import time
from pathlib import Path

import numpy as np
import pytest

from qgap.baseline import AlsParams, als_baseline
from qgap.cli import OUTPUT_ENV, main
from qgap.config import RunConfig
from qgap.estimate import run_qge
from qgap.model import build_tfim
from qgap.noise import DepolarizingChannel, NoiseSpec, global_depolarizing_probability, inject_spam
from qgap.oracle import model_eigensystem
from qgap.sim import build_qge_circuit, circuit_unitary, evolve_density, sample_series
from qgap.spectral import FilterSpec, TimeGrid, filter_freq, lehmann_reference, lehmann_weights, spectral_function

CONFIGS = Path(__file__).resolve().parent.parent / "configs"
GRID = TimeGrid.for_filter(0.3)
W = GRID.omegas()
LORENTZIAN = FilterSpec("lorentzian", 0.3)
THETA_STAR = 0.9214703836272199  # converged angle of the headline run


@pytest.fixture
def report(capsys):
    def emit(number: int, ok: bool, detail: str, status: str | None = None):
        with capsys.disabled():
            print(f"\nCRITERION {number:2d}: {status or ('PASS' if ok else 'FAIL')}  {detail}")
    return emit


def _timed_run(cfg):
    start = time.perf_counter()
    rec = run_qge(cfg)
    return rec, time.perf_counter() - start


def _local_maxima(values):
    """Interior local maxima on the positive half of the grid, as (bin, height) pairs."""
    half = len(values) // 2
    return [(m, values[m]) for m in range(1, half) if values[m - 1] < values[m] >= values[m + 1]]


def _unmatched(major, candidates):
    return [k for k, _ in major if not any(abs(k - c) <= 1 for c, _ in candidates)]


def test_c01_noiseless_headline(report):
    rec, secs = _timed_run(RunConfig.load(CONFIGS / "headline_exact.yaml"))
    err = rec.estimate.rel_error_corr
    ok = err < 0.01 and secs < 60
    report(1, ok, f"rel_error_corr={err:.5f} (<0.01), runtime={secs:.1f}s (<60s)")
    assert ok


def test_c02_shot_noise(report):
    rec, secs = _timed_run(RunConfig.load(CONFIGS / "headline_shots.yaml"))
    err = rec.estimate.rel_error_corr
    ok = err < 0.03 and secs < 120
    report(2, ok, f"shots=1024 rel_error_corr={err:.5f} (<0.03), runtime={secs:.1f}s (<120s)")
    assert ok


def test_c03_depolarizing_reduction(report):
    rng = np.random.default_rng(3)
    worst = 0.0
    for _ in range(100):
        n = int(rng.integers(2, 4))
        m_steps = int(rng.integers(1, 4))  # D = 2M + 2 <= 8
        circuit = build_qge_circuit(build_tfim(n, rng.uniform(-1, 1)), rng.uniform(0, math.pi),
                                    rng.uniform(-5, 5), m_steps)
        ps = rng.uniform(0, 0.05, circuit.depth)
        spec = NoiseSpec(channels=tuple((i, DepolarizingChannel(p)) for i, p in enumerate(ps)))
        interleaved = evolve_density(circuit, spec)
        u = circuit_unitary(circuit)
        p_gd = global_depolarizing_probability(ps)
        d = 2 ** n
        reduced = (1 - p_gd) * np.outer(u[:, 0], u[:, 0].conj()) + p_gd * np.eye(d) / d
        worst = max(worst, float(np.max(np.abs(interleaved - reduced))))
    ok = worst <= 1e-12
    report(3, ok, f"100 circuits, max entry deviation={worst:.2e} (<=1e-12)")
    assert ok


def test_c04_spam_invariance(report):
    eigs = model_eigensystem(build_tfim(5, 0.4))
    clean_values = lehmann_reference(eigs, THETA_STAR, LORENTZIAN, GRID).values
    # major peaks: above 5% of the noiseless maximum; minor maxima only serve as match partners
    threshold = 0.05 * float(np.max(clean_values))
    clean = _local_maxima(clean_values)
    clean_major = [p for p in clean if p[1] > threshold]
    separated = all(W[b[0]] - W[a[0]] > 2 * LORENTZIAN.eta for a, b in zip(clean_major, clean_major[1:]))
    clean_w = lehmann_weights(eigs, THETA_STAR)
    rng = np.random.default_rng(4)
    misses, max_dw = [], 0.0
    for _ in range(20):
        prep, meas = inject_spam(THETA_STAR, *rng.uniform(-0.1, 0.1, 2))
        noisy = _local_maxima(lehmann_reference(eigs, prep, LORENTZIAN, GRID, theta_meas=meas).values)
        noisy_major = [p for p in noisy if p[1] > threshold]
        misses += _unmatched(clean_major, noisy) + _unmatched(noisy_major, clean)
        max_dw = max(max_dw, float(np.max(np.abs(lehmann_weights(eigs, prep, meas) - clean_w))))
    ok = separated and not misses and max_dw > 1e-3
    report(4, ok, f"major peaks {[round(float(W[k]), 3) for k, _ in clean_major]} separated>2eta={separated}, "
                  f"unmatched within one bin={len(misses)}, max weight change={max_dw:.3e} (>1e-3)")
    assert ok


def test_c05_lehmann_equivalence(report):
    worst = 0.0
    for n in (2, 5):
        model = build_tfim(n, 0.4)
        series = sample_series(model, 0.6, GRID, evolution="exact")
        sim = spectral_function(series, LORENTZIAN, "direct").values
        ref = lehmann_reference(model_eigensystem(model), 0.6, LORENTZIAN, GRID).values
        worst = max(worst, float(np.max(np.abs(sim - ref)) / np.max(ref)))
    ok = worst <= 0.02
    report(5, ok, f"N in {{2,5}}, max |sim - Lehmann| / peak={worst:.2e} (<=0.02)")
    assert ok


def test_c06_depolarizing_robustness(report):
    cfg = RunConfig.load(CONFIGS / "depolarizing.yaml")
    rec = run_qge(cfg)
    err = rec.estimate.rel_error_corr
    final = rec.final
    model = build_tfim(5, 0.4)
    m_steps = cfg.trotter.m_steps
    clean = spectral_function(sample_series(model, final.theta, GRID, m_steps), LORENTZIAN, "fft")
    k = int(np.argmin(np.abs(W - final.estimate.delta_bare)))
    p_gd = global_depolarizing_probability([cfg.noise.p] * (2 * m_steps + 2))
    ratio = final.estimate.peak_height_bare / clean.values[k]
    dev = abs(ratio / (1 - p_gd) - 1)
    ok = err < 0.01 and dev <= 0.02
    report(6, ok, f"p=5e-3 rel_error_corr={err:.5f} (<0.01), raw height ratio={ratio:.4f} "
                  f"vs 1-p_gd={1 - p_gd:.4f}, rel dev={dev:.4f} (<=0.02)")
    assert ok


def test_c07_trotter_convergence(report):
    base = RunConfig.load(CONFIGS / "headline_exact.yaml")
    errs = [run_qge(base.replace(**{"trotter.m_steps": m})).estimate.rel_error_bare for m in (5, 10, 15, 25, 40)]
    trend = errs[-1] <= errs[0]
    steps = all(b <= 1.2 * a for a, b in zip(errs, errs[1:]))
    ok = trend and steps
    report(7, ok, "rel_error_bare M=5,10,15,25,40: " + ", ".join(f"{e:.4f}" for e in errs))
    assert ok


def test_c08_als_solver(report):
    a = filter_freq(LORENTZIAN, W - 1.5) + 0.2 + 0.05 * W
    half = GRID.length // 2
    worst_res, worst_shift, worst_iters = 0.0, 0.0, 0
    for lam in (1.0, 10.0, 100.0, 1e4):
        res = als_baseline(a, AlsParams(lambda_smooth=lam, chi_asym=1e-2))
        k = int(np.argmax(res.corrected[:half]))
        worst_res = max(worst_res, max(res.residuals))
        worst_shift = max(worst_shift, abs(W[k] - 1.5))
        worst_iters = max(worst_iters, res.iterations_used)
    ok = worst_res <= 1e-9 and worst_shift <= GRID.dw and worst_iters <= 50
    report(8, ok, f"max residual={worst_res:.1e} (<=1e-9), max argmax shift={worst_shift:.3f} "
                  f"(<=dw), max iterations={worst_iters} (<=50)")
    assert ok


def test_c09_scale_ceiling(report):
    rec, secs = _timed_run(RunConfig.load(CONFIGS / "n9_calibration.yaml"))
    err = rec.estimate.rel_error_corr
    in_time = secs < 1800
    if in_time and err < 0.05:
        status = "PASS"
    elif in_time and err < 0.10:
        status = "RECORDED"
    else:
        status = "FAIL"
    report(9, status != "FAIL", f"N=9 M=60 calibration noise rel_error_corr={err:.5f} (<0.05), "
                                f"runtime={secs:.0f}s (<1800s)", status)
    assert status != "FAIL"


def test_c10_gaussian_variant(report):
    rec, secs = _timed_run(RunConfig.load(CONFIGS / "gaussian.yaml"))
    err = rec.estimate.rel_error_corr
    ok = err < 0.01 and secs < 60
    report(10, ok, f"Gaussian rel_error_corr={err:.5f} (<0.01), runtime={secs:.1f}s (<60s)")
    assert ok


def test_c11_byte_identical_rerun(report, tmp_path, monkeypatch, capsys):
    trees = []
    for i in range(2):
        root = tmp_path / f"run{i}"
        monkeypatch.setenv(OUTPUT_ENV, str(root))
        assert main(["run", str(CONFIGS / "headline_shots.yaml")]) == 0
        trees.append({p.relative_to(root): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()})
    capsys.readouterr()
    ok = bool(trees[0]) and trees[0] == trees[1]
    report(11, ok, f"headline_shots rerun, {len(trees[0])} files byte-identical={trees[0] == trees[1]}")
    assert ok
