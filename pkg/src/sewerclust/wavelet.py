"""Continuous wavelet transform with a complex Morlet mother wavelet,
wavelet variance, and extraction of dominant oscillation periods.

Conventions
-----------
The analysing wavelet is

    psi(x) = (pi * fb) ** -0.5 * exp(2j * pi * fc * x) * exp(-x**2 / fb)

and the transform of a sampled signal f is the direct summation

    W(a, b) = a ** -0.5 * sum_t f(t) * conj(psi((t - b) / a)) * dt

evaluated at every sample position b. A sinusoid of period P therefore
responds most strongly near scale a = fc * P, so scales can be read as
periods when fc = 1 (the default; the default bandwidth keeps fb:fc at
1.5:1).

The Gaussian envelope is truncated where it falls below 1e-8 when building
kernels. Boundary handling is zero padding, and a cone-of-influence mask
(one envelope e-folding, sqrt(fb/2) * a, from either end) keeps
boundary-contaminated cells out of the wavelet variance.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError
from .ingest import LevelSeries

# Envelope exp(-x^2/fb) drops below 1e-8 at |x| = sqrt(fb * ln 1e8).
_TRUNCATION = float(np.sqrt(np.log(1e8)))  # in units of sqrt(fb)

DEFAULT_SCALE_COUNT = 200
DEFAULT_MAX_SCALE = 1200.0


@dataclass(frozen=True)
class MorletParams:
    """Bandwidth and centre frequency of the complex Morlet wavelet."""

    fb: float = 1.5
    fc: float = 1.0

    def __post_init__(self):
        if self.fb <= 0 or self.fc <= 0:
            raise DataError("Morlet fb and fc must be positive")

    def envelope_halfwidth(self, scale: float) -> float:
        """Half-width of the truncated kernel support, in time units."""
        return _TRUNCATION * np.sqrt(self.fb) * scale

    def efolding_halfwidth(self, scale: float) -> float:
        """One e-folding of wavelet power; used for the cone of influence."""
        return float(np.sqrt(self.fb / 2.0)) * scale

    def psi(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return ((np.pi * self.fb) ** -0.5
                * np.exp(2j * np.pi * self.fc * x)
                * np.exp(-(x ** 2) / self.fb))


@dataclass(frozen=True)
class WaveletSpectrum:
    """Complex coefficients W(a, b) on a scale x time grid."""

    scales: np.ndarray  # (S,) hours, strictly increasing
    times: np.ndarray   # (T,) hours from series start, uniform
    coefficients: np.ndarray  # (S, T) complex
    params: MorletParams = MorletParams()
    interpolated_spans: tuple[tuple[int, int], ...] = ()

    def __post_init__(self):
        scales = np.asarray(self.scales, dtype=float)
        times = np.asarray(self.times, dtype=float)
        coeff = np.asarray(self.coefficients, dtype=complex)
        for name, arr in (("scales", scales), ("times", times), ("coefficients", coeff)):
            object.__setattr__(self, name, arr)
        if scales.ndim != 1 or times.ndim != 1:
            raise DataError("scales and times must be 1-D")
        if np.any(scales <= 0) or np.any(np.diff(scales) <= 0):
            raise DataError("scales must be positive and strictly increasing")
        if coeff.shape != (scales.size, times.size):
            raise DataError("coefficient matrix shape does not match scales x times")
        for arr in (scales, times, coeff):
            arr.flags.writeable = False

    @property
    def dt(self) -> float:
        if self.times.size < 2:
            return 1.0
        return float(self.times[1] - self.times[0])


@dataclass(frozen=True)
class VarianceCurve:
    """Wavelet variance per scale, with the number of cells that survived
    the cone-of-influence mask."""

    scales: np.ndarray
    variance: np.ndarray
    coverage: np.ndarray  # cells integrated per scale

    def __post_init__(self):
        scales = np.asarray(self.scales, dtype=float)
        variance = np.asarray(self.variance, dtype=float)
        coverage = np.asarray(self.coverage, dtype=int)
        if variance.shape != scales.shape or coverage.shape != scales.shape:
            raise DataError("variance curve arrays must share the scale grid")
        if np.any(variance < 0):
            raise DataError("variance must be non-negative")
        for name, arr in (("scales", scales), ("variance", variance), ("coverage", coverage)):
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)


@dataclass(frozen=True)
class TopPeriods:
    """Ranked dominant periods. filled[i] is True where too few local maxima
    existed and the global-maximum period was substituted."""

    periods: tuple[float, ...]
    filled: tuple[bool, ...]

    @property
    def flagged(self) -> bool:
        return any(self.filled)


def log_scale_grid(min_scale: float, max_scale: float = DEFAULT_MAX_SCALE,
                   count: int = DEFAULT_SCALE_COUNT) -> np.ndarray:
    """Logarithmically spaced analysis scales."""
    if min_scale <= 0 or max_scale <= min_scale:
        raise DataError("need 0 < min_scale < max_scale")
    if count < 2:
        raise DataError("scale grid needs at least 2 points")
    return np.geomspace(min_scale, max_scale, count)


def default_scale_grid(step: float, max_scale: float = DEFAULT_MAX_SCALE,
                       count: int = DEFAULT_SCALE_COUNT) -> np.ndarray:
    """Default grid: log spacing from twice the sample step up to max_scale."""
    return log_scale_grid(2.0 * step, max_scale, count)


def fill_missing(series: LevelSeries) -> tuple[np.ndarray, tuple[tuple[int, int], ...]]:
    """Linearly interpolate masked samples; returns the gap-free signal and
    the (start, stop) index spans that were filled."""
    levels = series.levels.astype(float).copy()
    mask = series.missing_mask
    if not mask.any():
        return levels, ()
    if mask.all():
        raise DataError(f"all samples missing in series {series.catchment_id}")
    idx = np.arange(levels.size)
    levels[mask] = np.interp(idx[mask], idx[~mask], levels[~mask])
    spans = []
    start = None
    for i, m in enumerate(mask):
        if m and start is None:
            start = i
        elif not m and start is not None:
            spans.append((start, i))
            start = None
    if start is not None:
        spans.append((start, int(mask.size)))
    return levels, tuple(spans)


def cwt(series: LevelSeries, scales: np.ndarray,
        params: MorletParams = MorletParams(), demean: bool = True) -> WaveletSpectrum:
    """Continuous wavelet transform of a level series.

    Missing samples are linearly interpolated first (the transform needs a
    gap-free signal) and the series mean is removed unless demean=False.
    Coefficients are computed by direct summation against the truncated
    kernel at each (scale, position) pair; zero padding applies beyond the
    ends of the record.
    """
    scales = np.asarray(scales, dtype=float)
    if scales.ndim != 1 or scales.size == 0:
        raise DataError("scales must be a non-empty 1-D array")
    if np.any(scales <= 0):
        raise DataError("scales must be positive")
    if np.any(np.diff(scales) <= 0):
        raise DataError("scales must be strictly increasing")

    signal, spans = fill_missing(series)
    dt = series.step
    duration = (signal.size - 1) * dt
    # Even the central lobe of the largest wavelet must fit in the record;
    # outer tails are handled by zero padding and the cone of influence.
    if duration < params.efolding_halfwidth(float(scales[-1])):
        raise DataError(
            f"series of {signal.size} samples is shorter than the largest"
            f" requested wavelet (scale {scales[-1]:.6g})")
    if demean:
        signal = signal - signal.mean()

    n = signal.size
    coeff = np.empty((scales.size, n), dtype=complex)
    for si, a in enumerate(scales):
        half = int(np.ceil(params.envelope_halfwidth(a) / dt))
        x = (np.arange(-half, half + 1) * dt) / a
        kernel = np.conj(params.psi(x))[::-1]  # so convolution realises correlation
        full = np.convolve(signal, kernel, mode="full")
        coeff[si] = full[half:half + n] * (dt / np.sqrt(a))

    times = np.arange(n) * dt
    return WaveletSpectrum(scales=scales, times=times, coefficients=coeff,
                           params=params, interpolated_spans=spans)


def wavelet_variance(spectrum: WaveletSpectrum) -> VarianceCurve:
    """Integrate |W(a, b)|^2 over positions b, per scale.

    Cells inside the cone of influence (within one envelope e-folding of
    either end of the record) are excluded; a scale whose cells are all
    excluded gets zero variance and zero coverage.
    """
    times = spectrum.times
    dt = spectrum.dt
    t0, t1 = float(times[0]), float(times[-1])
    power = np.abs(spectrum.coefficients) ** 2
    variance = np.zeros(spectrum.scales.size)
    coverage = np.zeros(spectrum.scales.size, dtype=int)
    for si, a in enumerate(spectrum.scales):
        margin = spectrum.params.efolding_halfwidth(float(a))
        keep = (times >= t0 + margin) & (times <= t1 - margin)
        coverage[si] = int(keep.sum())
        if coverage[si]:
            variance[si] = float(power[si, keep].sum() * dt)
    return VarianceCurve(scales=spectrum.scales, variance=variance, coverage=coverage)


def top_periods(curve: VarianceCurve, m: int = 3, report: str = "scale",
                min_rel_variance: float = 1e-3) -> TopPeriods:
    """Rank the local maxima of the variance curve and return the top m.

    A local maximum must be strictly greater than both neighbours and carry
    at least min_rel_variance of the global maximum (maxima below that are
    discretisation ripple or boundary leakage, not oscillation periods).
    Ranking is by variance, descending, with ties going to the smaller
    scale. When fewer than m qualifying maxima exist the remaining slots
    are filled with the global-maximum scale and flagged.
    report="variance" substitutes the variance magnitudes for the scale
    values (same ranking either way).
    """
    if report not in ("scale", "variance"):
        raise DataError("report must be 'scale' or 'variance'")
    if m < 1:
        raise DataError("m must be at least 1")
    v = curve.variance
    if v.size < 3:
        raise DataError("variance curve needs at least 3 points")

    interior = np.arange(1, v.size - 1)
    is_peak = (v[interior] > v[interior - 1]) & (v[interior] > v[interior + 1])
    peaks = interior[is_peak & (v[interior] >= min_rel_variance * v.max())]
    order = sorted(peaks, key=lambda i: (-v[i], i))[:m]

    global_idx = int(np.argmax(v))
    values = []
    filled = []
    for rank in range(m):
        if rank < len(order):
            idx, fill = order[rank], False
        else:
            idx, fill = global_idx, True
        values.append(float(curve.scales[idx] if report == "scale" else v[idx]))
        filled.append(fill)
    return TopPeriods(periods=tuple(values), filled=tuple(filled))
