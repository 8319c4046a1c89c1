import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.sparse import diags

from qgap.baseline import (
    AlsParams,
    als_baseline,
    operating_range_sweep,
    penalized_matvec,
    second_difference_bands,
    window_peaks,
    write_sweep_table,
)
from qgap.spectral import FilterSpec, Spectrum, TimeGrid, filter_freq

GRID = TimeGrid.for_filter(0.3)
W = GRID.omegas()


def peak_plus_ramp(center=1.5, a=0.2, b=0.05):
    return filter_freq(FilterSpec("lorentzian", 0.3), W - center) + a + b * W


def _dense_penalty(length):
    d = diags([1.0, -2.0, 1.0], [0, 1, 2], shape=(length - 2, length)).toarray()
    return d.T @ d


def test_bands_match_dense_operator():
    length = 9
    bands = second_difference_bands(length)
    dense = _dense_penalty(length)
    np.testing.assert_array_equal(bands[2], np.diag(dense))
    np.testing.assert_array_equal(bands[1, 1:], np.diag(dense, 1))
    np.testing.assert_array_equal(bands[0, 2:], np.diag(dense, 2))


def test_matvec_matches_dense(rng):
    length = 12
    w = rng.uniform(0, 1, length)
    b = rng.normal(size=length)
    ref = (np.diag(w) + 3.0 * _dense_penalty(length)) @ b
    np.testing.assert_allclose(penalized_matvec(w, 3.0, b), ref, atol=1e-12)


def test_params_validation():
    with pytest.raises(ValueError):
        AlsParams(lambda_smooth=0.0)
    with pytest.raises(ValueError):
        AlsParams(chi_asym=0.6)
    with pytest.raises(ValueError):
        AlsParams(max_iters=0)


def test_constant_input_reproduced():
    res = als_baseline(np.full(50, 0.7), AlsParams(lambda_smooth=100.0))
    np.testing.assert_allclose(res.baseline, 0.7, atol=1e-10)
    assert res.converged


@pytest.mark.parametrize("lam", [1.0, 10.0, 100.0, 1e4])
def test_peak_on_ramp_position(lam):
    a = peak_plus_ramp()
    res = als_baseline(a, AlsParams(lambda_smooth=lam, chi_asym=1e-2))
    half = slice(0, GRID.length // 2)
    k = int(np.argmax(res.corrected[half]))
    assert abs(W[k] - 1.5) <= GRID.dw
    assert res.iterations_used <= 50
    assert max(res.residuals) <= 1e-9


def test_residual_bound_each_iteration():
    res = als_baseline(peak_plus_ramp(), AlsParams(lambda_smooth=1e4))
    assert len(res.residuals) == res.iterations_used
    assert all(r <= 1e-9 for r in res.residuals)


def test_idempotence_tendency():
    params = AlsParams(lambda_smooth=1e4, chi_asym=1e-2)
    first = als_baseline(peak_plus_ramp(), params)
    second = als_baseline(first.corrected, params)
    assert np.max(np.abs(second.baseline)) <= 0.05 * np.max(np.abs(first.baseline))


def test_baseline_hugs_lower_envelope():
    a = filter_freq(FilterSpec("lorentzian", 0.3), W - 1.5) + 0.3
    res = als_baseline(a, AlsParams(lambda_smooth=1e4, chi_asym=1e-4, max_iters=50))
    peak_bins = np.abs(W - 1.5) <= 0.3
    assert np.all(res.baseline[peak_bins] <= a[peak_bins] + 1e-6)


def test_huge_lambda_gives_straight_line():
    a = 0.1 * (W - 3) ** 2 + filter_freq(FilterSpec("lorentzian", 0.3), W - 1.5)
    res = als_baseline(a, AlsParams(lambda_smooth=1e10))
    assert np.max(np.abs(np.diff(res.baseline, 2))) <= 1e-6


def test_iteration_cap_reported():
    res = als_baseline(peak_plus_ramp(), AlsParams(lambda_smooth=1e4, max_iters=1))
    assert res.iterations_used == 1
    assert not res.converged


def test_rejects_bad_input():
    with pytest.raises(ValueError):
        als_baseline(np.array([1.0, 2.0]))
    with pytest.raises(ValueError):
        als_baseline(np.array([1.0, np.nan, 2.0, 3.0, 4.0]))


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2 ** 31), lam=st.sampled_from([1.0, 1e2, 1e4]),
       chi=st.sampled_from([1e-3, 1e-2, 0.1]))
def test_solver_residual_property(seed, lam, chi):
    a = np.random.default_rng(seed).normal(size=80).cumsum()
    res = als_baseline(a, AlsParams(lam, chi))
    assert max(res.residuals) <= 1e-9
    np.testing.assert_allclose(res.corrected, a - res.baseline)


def test_sweep_single_peak_stable(tmp_path):
    spectrum = Spectrum(GRID, filter_freq(FilterSpec("lorentzian", 0.3), W - 1.5))
    rows = operating_range_sweep(spectrum, [1.0, 1e2, 1e4], [1e-3, 1e-2], (1.06, 1.66))
    positions = {r.peaks for r in rows}
    assert positions == {(1.5,)}
    write_sweep_table(rows, tmp_path / "sweep.tsv")
    assert len((tmp_path / "sweep.tsv").read_text().splitlines()) == 7


def test_flat_noise_threshold_statistics():
    rng = np.random.default_rng(42)
    x = rng.normal(size=20000)
    w = np.arange(x.size, dtype=float)
    _, threshold = window_peaks(w, x, 0, x.size)
    assert np.mean(x > threshold) == pytest.approx(0.1587, abs=0.01)


def test_flat_noise_has_no_stable_peak():
    rng = np.random.default_rng(7)
    spectrum = Spectrum(GRID, 0.1 + 0.01 * rng.normal(size=GRID.length))
    rows = operating_range_sweep(spectrum, [1.0, 1e2, 1e4, 1e6], [1e-2], (1.06, 1.66))
    common = set(rows[0].peaks)
    for r in rows[1:]:
        common &= set(r.peaks)
    assert len(common) <= 1
    assert len({r.peaks for r in rows}) > 1 or not common


def test_residual_floor_negligible_at_small_lambda():
    from qgap.baseline import residual_floor

    a = peak_plus_ramp()
    for lam in (1.0, 1e2):
        res = als_baseline(a, AlsParams(lambda_smooth=lam))
        w = np.where(a > res.baseline, 1e-2, 1 - 1e-2)
        assert residual_floor(w, lam, res.baseline, np.max(np.abs(w * a))) < 1e-10
