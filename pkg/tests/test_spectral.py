import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qgap.errors import MissingSampleError
from qgap.model import build_tfim
from qgap.noise import uniform_depolarizing_spec
from qgap.oracle import eigh, model_eigensystem
from qgap.sim import sample_series
from qgap.spectral import (
    FilterSpec,
    Spectrum,
    TimeGrid,
    TimeSeries,
    filter_freq,
    filter_freq_periodic,
    filter_time,
    lehmann_reference,
    lehmann_weights,
    read_spectrum,
    spectral_function,
    write_spectrum,
)


def test_filter_time_examples():
    assert filter_time(FilterSpec("lorentzian", 0.3), 0.0) == 1.0
    assert filter_time(FilterSpec("gaussian", 0.3), 0.0) == 1.0
    assert filter_time(FilterSpec("lorentzian", 0.3), 1.0) == pytest.approx(0.740818, abs=1e-6)
    g = FilterSpec("gaussian", 0.3)
    assert g.sigma == pytest.approx(0.3 / math.sqrt(2 * math.log(2)), rel=1e-14)
    assert g.sigma == pytest.approx(0.2547965, abs=1e-7)
    assert filter_time(g, 1.0) == pytest.approx(0.968060, abs=1e-6)
    # quoted reference value rounds sigma to 0.254803
    assert g.sigma == pytest.approx(0.254803, rel=1e-4)


def test_filter_freq_examples():
    lor = FilterSpec("lorentzian", 0.3)
    assert filter_freq(lor, 0.0) == pytest.approx(1.061033, abs=1e-6)
    assert filter_freq(lor, 0.3) == pytest.approx(0.5 * filter_freq(lor, 0.0))
    assert filter_freq(lor, -0.3) == pytest.approx(0.5 * filter_freq(lor, 0.0))
    gauss = FilterSpec("gaussian", 0.3)
    assert filter_freq(gauss, 0.0) == pytest.approx(1 / (math.sqrt(2 * math.pi) * gauss.sigma), rel=1e-14)
    assert filter_freq(gauss, 0.0) == pytest.approx(1.565729, abs=1e-6)
    # quoted reference value 1.565429 differs in the fourth decimal
    assert filter_freq(gauss, 0.0) == pytest.approx(1.565429, rel=1e-3)


def test_gaussian_half_maximum_at_eta():
    g = FilterSpec("gaussian", 0.3)
    assert filter_freq(g, 0.3) == pytest.approx(0.5 * filter_freq(g, 0.0))


@pytest.mark.parametrize("kind", ["lorentzian", "gaussian"])
def test_periodic_line_shape_sums_images(kind):
    spec = FilterSpec(kind, 0.3)
    period = 5.0
    w = np.linspace(-2, 2, 9)
    ref = sum(filter_freq(spec, w + k * period) for k in range(-20000, 20001))
    np.testing.assert_allclose(filter_freq_periodic(spec, w, period), ref, rtol=1e-4)


def test_filter_spec_validation():
    with pytest.raises(ValueError):
        FilterSpec("cauchy", 0.3)
    with pytest.raises(ValueError):
        FilterSpec("lorentzian", 0.0)
    assert FilterSpec("Gaussian", 0.3).kind == "gaussian"


def test_default_grid_defaults():
    g = TimeGrid.for_filter(0.3)
    assert g.length == 134
    assert g.dw == pytest.approx(0.075)
    assert g.dw * g.dt == pytest.approx(2 * math.pi / g.length, rel=1e-14)


def test_grid_rejects_inconsistent_step():
    with pytest.raises(ValueError):
        TimeGrid(10, 0.1, 0.1)


@settings(max_examples=30, deadline=None)
@given(dw=st.floats(0.01, 1.0), length=st.integers(4, 500))
def test_grid_relation(dw, length):
    g = TimeGrid.from_dw(dw, length)
    assert g.dw * g.dt == pytest.approx(2 * math.pi / length, rel=1e-12)


def test_missing_samples_detected():
    series = TimeSeries.empty(TimeGrid.from_dw(0.2, 6))
    series.set(1, 0, 1.0)
    with pytest.raises(MissingSampleError) as err:
        spectral_function(series, FilterSpec("lorentzian", 0.3))
    assert (-1, 0) in err.value.missing


def test_constant_signal_gives_line_shape():
    g = TimeGrid.for_filter(0.3)
    spec = FilterSpec("lorentzian", 0.3)
    a = spectral_function(TimeSeries(g, np.ones((2, g.length))), spec)
    np.testing.assert_allclose(a.values, filter_freq_periodic(spec, g.omegas(), g.period), atol=1e-10)
    assert np.argmax(a.values) == 0


def test_literal_origin_count_adds_constant():
    g = TimeGrid.for_filter(0.3)
    spec = FilterSpec("lorentzian", 0.3)
    rng = np.random.default_rng(3)
    series = TimeSeries(g, rng.uniform(0, 1, (2, g.length)))
    half = spectral_function(series, spec)
    full = spectral_function(series, spec, double_count_origin=True)
    shift = g.dt / (2 * math.pi) * (series.values[0, 0] + series.values[1, 0]) / 2
    np.testing.assert_allclose(full.values - half.values, shift, atol=1e-14)


def test_filtered_cosine_peaks():
    spec = FilterSpec("lorentzian", 0.3)
    g = TimeGrid.from_dw(0.01, 6000)
    delta = 2.0
    p = (1 + np.cos(delta * g.times())) / 2
    a = spectral_function(TimeSeries(g, np.vstack([p, p])), spec, "fft")
    w = g.omegas()
    model = (0.5 * filter_freq_periodic(spec, w, g.period)
             + 0.25 * filter_freq_periodic(spec, w - delta, g.period)
             + 0.25 * filter_freq_periodic(spec, w + delta, g.period))
    np.testing.assert_allclose(a.values, model, atol=1e-3)
    k = int(round(delta / g.dw))
    assert a.values[k] == pytest.approx(0.25 * filter_freq(spec, 0.0), rel=0.06)
    lo, hi = int(1.5 / g.dw), int(2.5 / g.dw)
    assert lo + np.argmax(a.values[lo:hi]) == k
    assert np.argmax(a.values) == 0


@pytest.mark.parametrize("length", [134, 256])
def test_direct_and_fft_agree(length):
    g = TimeGrid.from_dw(0.075, length)
    rng = np.random.default_rng(length)
    series = TimeSeries(g, rng.uniform(0, 1, (2, length)))
    for kind in ("lorentzian", "gaussian"):
        spec = FilterSpec(kind, 0.3)
        a = spectral_function(series, spec, "direct").values
        b = spectral_function(series, spec, "fft").values
        assert np.max(np.abs(a - b)) <= 1e-10


def test_transform_linear():
    g = TimeGrid.for_filter(0.3)
    spec = FilterSpec("gaussian", 0.3)
    rng = np.random.default_rng(0)
    x, y = rng.uniform(0, 1, (2, 2, g.length))
    a, b = 0.3, 0.6
    lhs = spectral_function(TimeSeries(g, a * x + b * y), spec).values
    rhs = (a * spectral_function(TimeSeries(g, x), spec).values
           + b * spectral_function(TimeSeries(g, y), spec).values)
    assert np.max(np.abs(lhs - rhs)) <= 1e-12


def test_lehmann_single_eigenstate():
    eigs = eigh(np.diag([0.0, 1.0, 2.5, 3.0]))
    # theta=0 prepares basis state 0 which is the first eigenvector
    g = TimeGrid.for_filter(0.3)
    spec = FilterSpec("lorentzian", 0.3)
    w = lehmann_weights(eigs, 0.0)
    assert w[0, 0] == pytest.approx(1.0)
    assert np.sum(np.abs(w)) == pytest.approx(1.0)
    ref = lehmann_reference(eigs, 0.0, spec, g)
    np.testing.assert_allclose(ref.values, filter_freq_periodic(spec, g.omegas(), g.period), atol=1e-14)


def test_lehmann_weights_sum_to_one():
    eigs = model_eigensystem(build_tfim(4, 0.4))
    for theta in (0.1, 0.7, 1.3):
        assert np.sum(lehmann_weights(eigs, theta)) == pytest.approx(1.0, abs=1e-10)


def test_lehmann_peak_at_exact_gap(model5, default_grid, lorentzian):
    eigs = model_eigensystem(model5)
    gap = eigs.energies[1] - eigs.energies[0]
    ref = lehmann_reference(eigs, 0.9214703836272199, lorentzian, default_grid)
    lo, hi = int((1.36 - 0.3) / default_grid.dw), int((1.36 + 0.3) / default_grid.dw) + 1
    k = lo + int(np.argmax(ref.values[lo:hi]))
    assert abs(default_grid.omegas()[k] - gap) <= default_grid.dw


@pytest.mark.parametrize("n", [2, 5])
def test_simulator_matches_lehmann(n, default_grid, lorentzian):
    model = build_tfim(n, 0.4)
    series = sample_series(model, 0.6, default_grid, evolution="exact")
    sim = spectral_function(series, lorentzian, "fft").values
    ref = lehmann_reference(model_eigensystem(model), 0.6, lorentzian, default_grid).values
    assert np.max(np.abs(sim - ref)) <= 1e-8 * np.max(ref)


def test_global_depolarizing_structure(default_grid, lorentzian):
    model = build_tfim(3, 0.4)
    m_steps, p = 5, 0.01
    clean = sample_series(model, 0.6, default_grid, m_steps)
    noisy = sample_series(model, 0.6, default_grid, m_steps, noise=uniform_depolarizing_spec(p))
    p_gd = 1 - (1 - p) ** (2 * m_steps + 2)
    flat = spectral_function(TimeSeries(default_grid, np.ones((2, default_grid.length))), lorentzian).values
    expected = (1 - p_gd) * spectral_function(clean, lorentzian).values + p_gd * flat / 8
    np.testing.assert_allclose(spectral_function(noisy, lorentzian).values, expected, atol=1e-8)


def test_spectrum_file_round_trip(tmp_path):
    g = TimeGrid.for_filter(0.3)
    values = np.random.default_rng(1).normal(size=g.length)
    spec = Spectrum(g, values, {"theta": 0.5})
    path = tmp_path / "s.tsv"
    write_spectrum(spec, path, header={"seed": 3})
    back = read_spectrum(path)
    np.testing.assert_array_equal(back.values, values)
    assert back.grid.dw == g.dw
    assert back.metadata["seed"] == 3
    assert path.read_text().startswith("# seed=3\n")
