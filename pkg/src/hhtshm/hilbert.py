"""Analytic signal and instantaneous amplitude / frequency."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import fft
from scipy.ndimage import uniform_filter1d

from hhtshm.exceptions import DegenerateInputError
from hhtshm.timeseries import TimeSeries

DEFAULT_EDGE_TRIM = 0.05


@dataclass(frozen=True)
class AnalyticSignal:
    real_part: TimeSeries
    imag_part: TimeSeries

    def __post_init__(self):
        if not self.real_part.same_grid(self.imag_part):
            raise ValueError("real and imaginary parts must share one grid")

    @property
    def complex(self) -> np.ndarray:
        return self.real_part.samples + 1j * self.imag_part.samples


@dataclass(frozen=True)
class InstantTrace:
    """Instantaneous amplitude and frequency of one component.

    ``valid_range`` is a half-open index interval ``(lo, hi)``; frequency
    values outside it are edge-contaminated and set to NaN.
    """

    amplitude: TimeSeries
    frequency: TimeSeries
    valid_range: tuple[int, int]

    @property
    def valid_frequency(self) -> np.ndarray:
        lo, hi = self.valid_range
        return self.frequency.samples[lo:hi]

    @property
    def valid_amplitude(self) -> np.ndarray:
        lo, hi = self.valid_range
        return self.amplitude.samples[lo:hi]


def hilbert_transform(x: TimeSeries) -> AnalyticSignal:
    """Spectral Hilbert transform.

    Negative frequencies are zeroed and positive ones doubled before the
    inverse FFT; the imaginary part of the result is H[x].
    """
    samples = x.samples
    n = samples.size
    if n < 4:
        raise DegenerateInputError("hilbert_transform needs at least 4 samples")
    spectrum = fft.fft(samples)
    gain = np.zeros(n)
    gain[0] = 1.0
    if n % 2 == 0:
        gain[n // 2] = 1.0
        gain[1 : n // 2] = 2.0
    else:
        gain[1 : (n + 1) // 2] = 2.0
    z = fft.ifft(spectrum * gain)
    return AnalyticSignal(x, x.with_samples(z.imag))


def edge_range(n: int, trim: float = DEFAULT_EDGE_TRIM) -> tuple[int, int]:
    if not 0 <= trim < 0.5:
        raise ValueError("edge trim must lie in [0, 0.5)")
    cut = int(round(trim * n))
    return cut, n - cut


def instantaneous(
    z: AnalyticSignal, edge_trim: float = DEFAULT_EDGE_TRIM, smooth: float = 0.0
) -> InstantTrace:
    """Amplitude, unwrapped phase derivative and valid index range.

    Parameters
    ----------
    z : AnalyticSignal
    edge_trim : float
        Fraction of samples dropped at each end from ``valid_range``.
    smooth : float
        Length in seconds of an optional moving average applied to the
        frequency; 0 disables it.
    """
    x = z.real_part.samples
    y = z.imag_part.samples
    dt = z.real_part.dt
    amplitude = np.hypot(x, y)
    phase = np.unwrap(np.arctan2(y, x))
    freq = np.gradient(phase, dt) / (2 * np.pi)
    width = int(round(smooth / dt))
    if width > 1:
        freq = uniform_filter1d(freq, size=width, mode="nearest")
    lo, hi = edge_range(x.size, edge_trim)
    if hi <= lo:
        raise DegenerateInputError("edge trim leaves no valid samples")
    freq = freq.copy()
    freq[:lo] = np.nan
    freq[hi:] = np.nan
    return InstantTrace(z.real_part.with_samples(amplitude), z.real_part.with_samples(freq), (lo, hi))


def phase(z: AnalyticSignal) -> np.ndarray:
    return np.unwrap(np.arctan2(z.imag_part.samples, z.real_part.samples))


def hht(x: TimeSeries, edge_trim: float = DEFAULT_EDGE_TRIM, smooth: float = 0.0) -> InstantTrace:
    """Shortcut: Hilbert transform followed by :func:`instantaneous`."""
    return instantaneous(hilbert_transform(x), edge_trim=edge_trim, smooth=smooth)
