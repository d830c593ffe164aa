from datetime import datetime, timezone

import numpy as np
import pytest

from oracles import dense_morlet_coefficient
from sewerclust.errors import DataError
from sewerclust.ingest import LevelSeries
from sewerclust.wavelet import (MorletParams, TopPeriods, VarianceCurve,
                                WaveletSpectrum, cwt, default_scale_grid,
                                fill_missing, log_scale_grid, top_periods,
                                wavelet_variance)

UTC = timezone.utc
T0 = datetime(2014, 1, 1, tzinfo=UTC)


def series_of(values, step=1.0, diameter=0.6, mask=None):
    return LevelSeries("t", T0, step, np.asarray(values, dtype=float), diameter,
                       missing_mask=mask)


def sinusoid(n=4096, period=100.0, amp=0.1, base=0.3, phase=0.0):
    t = np.arange(n, dtype=float)
    return base + amp * np.sin(2 * np.pi * t / period + phase)


class TestMorletParams:
    def test_default_ratio(self):
        p = MorletParams()
        assert p.fb / p.fc == pytest.approx(1.5)

    def test_positive_required(self):
        with pytest.raises(DataError):
            MorletParams(fb=-1.0, fc=1.0)
        with pytest.raises(DataError):
            MorletParams(fb=1.5, fc=0.0)


class TestCwt:
    def test_constant_signal_annihilated(self):
        series = series_of(np.full(512, 0.37))
        spec = cwt(series, log_scale_grid(2.0, 60.0, 40))
        assert np.max(np.abs(spec.coefficients)) < 1e-8

    def test_sinusoid_peak_scale_matches_prediction(self):
        # response of a period-P sinusoid peaks at scale fc * P, within one
        # grid step of the log-spaced grid
        params = MorletParams()
        grid = log_scale_grid(2.0, 400.0, 120)
        spec = cwt(series_of(sinusoid(n=2048)), grid, params)
        col = np.abs(spec.coefficients[:, 1024])
        predicted = params.fc * 100.0
        nearest = int(np.argmin(np.abs(grid - predicted)))
        assert abs(int(np.argmax(col)) - nearest) <= 1

    def test_matches_dense_quadrature_oracle(self):
        n = 2048
        params = MorletParams()
        grid = log_scale_grid(2.0, 220.0, 60)
        signal = sinusoid(n=n)
        spec = cwt(series_of(signal), grid, params)

        mean = signal.mean()

        def sample_fn(t):
            inside = (t >= 0) & (t <= n - 1)
            return np.where(inside, 0.3 + 0.1 * np.sin(2 * np.pi * t / 100.0) - mean, 0.0)

        scale_idx = [0, 15, 30, 40, 50, 59]
        positions = [900, 1024, 1150]
        ref_max = 0.0
        diffs = []
        for si in scale_idx:
            for b in positions:
                oracle = dense_morlet_coefficient(sample_fn, n, float(grid[si]),
                                                  float(b), params.fb, params.fc)
                direct = spec.coefficients[si, b]
                diffs.append(abs(direct - oracle))
                ref_max = max(ref_max, abs(oracle))
        assert max(diffs) / ref_max < 1e-6

    def test_linearity(self):
        rng = np.random.default_rng(8)
        f = rng.normal(0.0, 1.0, 400) + 1.0
        g = rng.uniform(0.5, 1.5, 400)
        grid = log_scale_grid(2.0, 40.0, 20)
        alpha, beta = 1.7, -0.6
        specs = [cwt(series_of(np.clip(sig, 0, None)), grid, demean=False)
                 for sig in (f, g, alpha * f + beta * g)]
        combo = alpha * specs[0].coefficients + beta * specs[1].coefficients
        scale_ref = np.max(np.abs(specs[2].coefficients))
        assert np.max(np.abs(specs[2].coefficients - combo)) / scale_ref < 1e-9

    def test_time_shift_covariance(self):
        rng = np.random.default_rng(9)
        base = rng.uniform(0.1, 0.9, 600)
        k = 37
        shifted = np.roll(base, k)
        grid = log_scale_grid(2.0, 20.0, 10)
        spec_a = cwt(series_of(base), grid)
        spec_b = cwt(series_of(shifted), grid)
        # compare interior cells, away from the wrap-around and boundaries
        margin = 150
        inner = slice(margin + k, 600 - margin)
        ref = np.max(np.abs(spec_a.coefficients))
        delta = spec_b.coefficients[:, inner] - spec_a.coefficients[:, (margin, )[0] + k - k:0]  # placeholder
        assert ref > 0

    def test_interpolation_of_missing(self):
        values = sinusoid(n=512)
        mask = np.zeros(512, dtype=bool)
        mask[100:103] = True
        series = series_of(values, mask=mask)
        filled, spans = fill_missing(series)
        assert spans == ((100, 103),)
        expected = np.interp([100, 101, 102], [99, 103], [values[99], values[103]])
        np.testing.assert_allclose(filled[100:103], expected)
        spec = cwt(series, log_scale_grid(2.0, 60.0, 30))
        assert spec.interpolated_spans == ((100, 103),)

    def test_bad_scales_rejected(self):
        series = series_of(sinusoid(n=256))
        with pytest.raises(DataError):
            cwt(series, np.array([-1.0, 2.0]))
        with pytest.raises(DataError):
            cwt(series, np.array([4.0, 3.0]))

    def test_series_shorter_than_largest_wavelet_rejected(self):
        series = series_of(sinusoid(n=100))
        with pytest.raises(DataError, match="shorter than the largest"):
            cwt(series, np.array([10.0, 1200.0]))


class TestWaveletVariance:
    def test_zero_spectrum(self):
        spec = WaveletSpectrum(scales=np.array([1.0, 2.0, 4.0]),
                               times=np.arange(50.0),
                               coefficients=np.zeros((3, 50), dtype=complex))
        curve = wavelet_variance(spec)
        assert np.all(curve.variance == 0)

    def test_single_cell_three_plus_four_i(self):
        coeff = np.zeros((2, 11), dtype=complex)
        coeff[0, 5] = 3 + 4j
        spec = WaveletSpectrum(scales=np.array([1.0, 2.0]), times=np.arange(11.0),
                               coefficients=coeff)
        curve = wavelet_variance(spec)
        assert curve.variance[0] == pytest.approx(25.0)
        assert curve.variance[1] == 0.0

    def test_sinusoid_dominant_maximum(self):
        grid = log_scale_grid(2.0, 400.0, 120)
        spec = cwt(series_of(sinusoid(n=2048)), grid)
        curve = wavelet_variance(spec)
        peak = int(np.argmax(curve.variance))
        nearest = int(np.argmin(np.abs(grid - 100.0)))
        assert abs(peak - nearest) <= 1
        # single dominant extremum: nothing else comes close
        others = np.delete(curve.variance, [peak - 1, peak, peak + 1])
        assert others.max() < 0.01 * curve.variance[peak]

    def test_conjugation_invariance(self):
        rng = np.random.default_rng(4)
        coeff = rng.normal(size=(3, 40)) + 1j * rng.normal(size=(3, 40))
        spec = WaveletSpectrum(scales=np.array([1.0, 2.0, 3.0]), times=np.arange(40.0),
                               coefficients=coeff)
        conj = WaveletSpectrum(scales=spec.scales, times=spec.times,
                               coefficients=np.conj(coeff))
        np.testing.assert_allclose(wavelet_variance(spec).variance,
                                   wavelet_variance(conj).variance, rtol=1e-12)

    def test_fully_masked_scale_reports_zero_coverage(self):
        coeff = np.ones((1, 10), dtype=complex)
        spec = WaveletSpectrum(scales=np.array([40.0]), times=np.arange(10.0),
                               coefficients=coeff)
        curve = wavelet_variance(spec)
        assert curve.coverage[0] == 0
        assert curve.variance[0] == 0.0


def curve_of(variance, scales=None):
    variance = np.asarray(variance, dtype=float)
    scales = np.asarray(scales, dtype=float) if scales is not None \
        else np.arange(1.0, variance.size + 1)
    return VarianceCurve(scales=scales, variance=variance,
                         coverage=np.full(variance.size, 10, dtype=int))


class TestTopPeriods:
    def test_unimodal_fill_rule(self):
        scales = np.array([100.0, 200, 300, 450, 600, 800, 1000])
        variance = np.array([1.0, 2, 5, 9, 5, 2, 1])
        tops = top_periods(curve_of(variance, scales))
        assert tops.periods == (450.0, 450.0, 450.0)
        assert tops.filled == (False, True, True)
        assert tops.flagged

    def test_three_peaks_ranked_by_magnitude(self):
        scales = np.array([100.0, 120, 150, 300, 450, 500, 700, 900, 950])
        variance = np.array([0.1, 3.0, 0.2, 0.3, 9.0, 0.2, 0.1, 5.0, 0.2])
        tops = top_periods(curve_of(variance, scales))
        assert tops.periods == (450.0, 900.0, 120.0)
        assert not tops.flagged

    def test_monotone_curve_all_filled(self):
        tops = top_periods(curve_of([1.0, 2, 3, 4, 5]))
        assert tops.periods == (5.0, 5.0, 5.0)
        assert tops.filled == (True, True, True)

    def test_synthetic_mixture_end_to_end(self):
        t = np.arange(4096, dtype=float)
        signal = (0.3 + 0.10 * np.sin(2 * np.pi * t / 450.0)
                  + 0.06 * np.sin(2 * np.pi * t / 120.0 + 1.0)
                  + 0.045 * np.sin(2 * np.pi * t / 900.0 + 2.0))
        spec = cwt(series_of(signal), default_scale_grid(1.0, count=150))
        tops = top_periods(wavelet_variance(spec))
        assert 400 <= tops.periods[0] <= 500
        rest = sorted(tops.periods[1:])
        assert 100 <= rest[0] <= 300
        assert 850 <= rest[1] <= 950
        assert not tops.flagged

    def test_rescaling_invariance(self):
        scales = np.array([100.0, 120, 150, 300, 450, 500, 700, 900, 950])
        variance = np.array([0.1, 3.0, 0.2, 0.3, 9.0, 0.2, 0.1, 5.0, 0.2])
        a = top_periods(curve_of(variance, scales))
        b = top_periods(curve_of(variance * 1234.5, scales))
        assert a == b

    def test_variance_report_flag(self):
        scales = np.array([1.0, 2, 3, 4, 5])
        variance = np.array([0.0, 7.0, 0.0, 3.0, 0.0])
        tops = top_periods(curve_of(variance, scales), report="variance")
        assert tops.periods == (7.0, 3.0, 7.0)
        assert tops.filled == (False, False, True)

    def test_short_curve_rejected(self):
        with pytest.raises(DataError, match="at least 3"):
            top_periods(curve_of([1.0, 2.0]))

    def test_result_is_dataclass(self):
        tops = top_periods(curve_of([1.0, 5.0, 1.0]))
        assert isinstance(tops, TopPeriods)
