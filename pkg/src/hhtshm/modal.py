"""First-mode frequency and shape from per-story IMF sets."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from hhtshm.decomposition import ImfSet
from hhtshm.exceptions import DegenerateInputError, NoAdmissibleWindowError, NoModeFoundError
from hhtshm.hilbert import DEFAULT_EDGE_TRIM, InstantTrace, edge_range, hht
from hhtshm.timeseries import TimeSeries

DEFAULT_BIN_WIDTH = 0.01
SIGNIFICANCE = 0.05
BAND_TOLERANCE = 0.2


@dataclass(frozen=True)
class FrequencyHistogram:
    """Unweighted counts of instantaneous-frequency samples.

    Bin ``j`` covers ``[(j - 1/2) w, (j + 1/2) w)``; only occupied bins are
    stored.
    """

    bin_width: float
    centers: np.ndarray
    counts: np.ndarray
    dominant: tuple[float, float]
    n_samples: int

    @property
    def dominant_center(self) -> float:
        return 0.5 * (self.dominant[0] + self.dominant[1])

    @property
    def dominant_count(self) -> int:
        return int(self.counts.max())

    @property
    def dominant_fraction(self) -> float:
        return self.dominant_count / self.n_samples

    @property
    def bins(self) -> list[tuple[float, int]]:
        return list(zip(self.centers.tolist(), self.counts.tolist()))


@dataclass(frozen=True)
class ModalEstimate:
    f1: float
    f1_interval: tuple[float, float]
    shape: np.ndarray
    window: tuple[float, float]
    selected_imfs: tuple[tuple[int, ...], ...]
    ratio_traces: tuple[TimeSeries, ...] = field(default=(), repr=False)

    def __post_init__(self):
        shape = np.array(self.shape, dtype=float)
        shape.setflags(write=False)
        object.__setattr__(self, "shape", shape)


def histogram_of(freqs, bin_width: float = DEFAULT_BIN_WIDTH) -> FrequencyHistogram:
    if not bin_width > 0:
        raise ValueError("bin_width must be positive")
    f = np.asarray(freqs, dtype=float)
    f = f[np.isfinite(f)]
    if f.size == 0:
        raise DegenerateInputError("no finite frequency samples to histogram")
    idx = np.floor(f / bin_width + 0.5).astype(np.int64)
    occupied, counts = np.unique(idx, return_counts=True)
    # argmax returns the first maximum, i.e. the lowest frequency on ties
    j = occupied[np.argmax(counts)]
    # round so that e.g. 107 * 0.01 prints as 1.07
    digits = max(0, int(np.ceil(-np.log10(bin_width))) + 2)
    centers = np.round(occupied * bin_width, digits)
    lo = round((j - 0.5) * bin_width, digits)
    hi = round((j + 0.5) * bin_width, digits)
    return FrequencyHistogram(bin_width, centers, counts, (lo, hi), int(f.size))


def frequency_histogram(trace: InstantTrace, bin_width: float = DEFAULT_BIN_WIDTH) -> FrequencyHistogram:
    """Histogram of the trace's frequency over its valid range."""
    lo, hi = trace.valid_range
    if hi <= lo:
        raise DegenerateInputError("trace has an empty valid range")
    return histogram_of(trace.valid_frequency, bin_width)


def imf_histograms(
    imfs: ImfSet,
    bin_width: float = DEFAULT_BIN_WIDTH,
    edge_trim: float = DEFAULT_EDGE_TRIM,
    smooth: float = 0.0,
) -> list[FrequencyHistogram]:
    return [frequency_histogram(hht(c, edge_trim, smooth), bin_width) for c in imfs.imfs]


def select_first_mode_imfs(
    sets,
    reference_story: int = -1,
    bin_width: float = DEFAULT_BIN_WIDTH,
    significance: float = SIGNIFICANCE,
    tolerance: float = BAND_TOLERANCE,
    min_energy: float = 0.05,
    edge_trim: float = DEFAULT_EDGE_TRIM,
    smooth: float = 0.0,
):
    """Pick the IMFs carrying the first mode in every story.

    The target band is the lowest dominant-frequency interval among the
    reference story's meaningful IMFs: dominant bin count above
    ``significance`` of the valid samples, and IMF variance at least
    ``min_energy`` of the largest IMF variance (drops drift-like
    components). Each story then keeps every IMF whose dominant frequency is
    within ``tolerance`` (relative) of the target centre.

    Returns
    -------
    target : tuple of float
        Dominant interval ``(lo, hi)`` in Hz.
    selected : tuple of tuple of int
        Zero-based IMF positions per story.
    """
    sets = list(sets)
    if not sets:
        raise ValueError("no IMF sets given")
    hists = [imf_histograms(s, bin_width, edge_trim, smooth) for s in sets]
    ref = hists[reference_story]
    ref_set = sets[reference_story]
    if not ref:
        raise NoModeFoundError("reference story has no IMFs")
    energy = np.array([np.var(c.samples) for c in ref_set.imfs])
    candidates = [
        h
        for h, e in zip(ref, energy)
        if h.dominant_fraction > significance and e >= min_energy * energy.max() and h.dominant_center > 0
    ]
    if not candidates:
        raise NoModeFoundError("no reference IMF has a significant dominant frequency")
    target = min(candidates, key=lambda h: h.dominant_center)
    centre = target.dominant_center
    selected = []
    for story_hists in hists:
        chosen = tuple(
            i for i, h in enumerate(story_hists) if abs(h.dominant_center - centre) <= tolerance * centre
        )
        selected.append(chosen)
    return target.dominant, tuple(selected)


def mode_shape(
    story_signals,
    window_len: float = 6.0,
    stride: float = 1.0,
    amplitude_floor: float = 1e-3,
    edge_trim: float = DEFAULT_EDGE_TRIM,
) -> tuple[np.ndarray, tuple[float, float], tuple[TimeSeries, ...]]:
    """Normalised first-mode amplitudes over the most stable window.

    ``story_signals`` holds one first-mode signal per story (the sum of its
    selected IMFs), bottom to top. Each story's Hilbert amplitude is divided
    by the top story's; the window of ``window_len`` seconds with the lowest
    summed ratio variance gives the shape as the mean ratio inside it.
    Windows where the top amplitude drops below ``amplitude_floor`` times
    its maximum are skipped.

    Returns
    -------
    shape, window, ratio_traces
    """
    signals = list(story_signals)
    if not signals:
        raise ValueError("no story signals given")
    grid = signals[-1]
    for s in signals:
        if not s.same_grid(grid):
            raise ValueError("story signals must share one grid")
    amps = np.vstack([hht(s, edge_trim).amplitude.samples for s in signals])
    top = amps[-1]
    floor = amplitude_floor * top.max()
    safe_top = np.where(top > 0, top, np.inf)
    ratios = amps / safe_top
    ratio_traces = tuple(grid.with_samples(r) for r in ratios)

    n = len(grid)
    dt = grid.dt
    lo, hi = edge_range(n, edge_trim)
    width = int(round(window_len / dt))
    step = max(1, int(round(stride / dt)))
    if width < 2 or width > hi - lo:
        raise NoAdmissibleWindowError(f"window of {window_len}s does not fit the valid range")
    best = None
    for start in range(lo, hi - width + 1, step):
        sl = slice(start, start + width)
        if np.any(top[sl] <= floor):
            continue
        score = float(np.sum(np.var(ratios[:-1, sl], axis=1)))
        if best is None or score < best[0]:
            best = (score, start)
    if best is None:
        raise NoAdmissibleWindowError("top-story amplitude is below the floor in every window")
    start = best[1]
    shape = ratios[:, start : start + width].mean(axis=1)
    shape[-1] = 1.0
    t_start = grid.t0 + start * dt
    return shape, (t_start, t_start + width * dt), ratio_traces


def estimate_modal(
    sets,
    reference_story: int = -1,
    bin_width: float = DEFAULT_BIN_WIDTH,
    window_len: float = 6.0,
    stride: float = 1.0,
    significance: float = SIGNIFICANCE,
    tolerance: float = BAND_TOLERANCE,
    edge_trim: float = DEFAULT_EDGE_TRIM,
    smooth: float = 0.0,
    min_energy: float = 0.05,
    refine: bool = True,
) -> ModalEstimate:
    """Frequency selection followed by :func:`mode_shape`.

    With ``refine`` the reported interval is the dominant bin of the
    reference story's combined first-mode signal rather than of a single
    IMF; when the mode is split over two IMFs each one alone is biased.
    """
    sets = list(sets)
    interval, selected = select_first_mode_imfs(
        sets, reference_story, bin_width, significance, tolerance, min_energy, edge_trim, smooth
    )
    for story, chosen in enumerate(selected):
        if not chosen:
            raise NoModeFoundError(f"story {story} has no IMF in the first-mode band")
    signals = [s.combined(chosen) for s, chosen in zip(sets, selected)]
    if refine:
        interval = frequency_histogram(hht(signals[reference_story], edge_trim, smooth), bin_width).dominant
    shape, window, ratios = mode_shape(signals, window_len, stride, edge_trim=edge_trim)
    f1 = round(0.5 * (interval[0] + interval[1]), 10)
    return ModalEstimate(f1, interval, shape, window, selected, ratios)
