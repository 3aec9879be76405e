"""Acceleration emulator and residual-based damage onset detection."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from hhtshm.rbf import RBFNetwork, TrainConfig
from hhtshm.timeseries import NoiseSpec, TimeSeries, child_seed, noise_array

# near-linear emulator: one Gaussian plus an affine tail extrapolates to
# amplitudes beyond the training window without false alarms
DEFAULT_EMULATOR_CONFIG = TrainConfig(n_centers=1, ridge=1e-6, width_rule=1.0, seed=0, linear_tail=True)
DEFAULT_STRIDE = 3


@dataclass(frozen=True)
class LagSpec:
    """Feature layout for the emulator of one story.

    ``m`` previous samples of every story plus the current sample of every
    story but the target: ``m * n + n - 1`` features. Lags are ``stride``
    samples apart, so at fine sampling the emulator still spans a useful
    fraction of the structural period.
    """

    m: int = 4
    n: int = 3
    target_story: int = 0
    stride: int = 1

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("m must be >= 1")
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if not 0 <= self.target_story < self.n:
            raise ValueError(f"target_story must lie in [0, {self.n})")
        if self.stride < 1:
            raise ValueError("stride must be >= 1")

    @property
    def feature_len(self) -> int:
        return self.m * self.n + self.n - 1

    @property
    def span(self) -> int:
        """Samples consumed before the first feature row."""
        return self.m * self.stride

    def for_story(self, story: int) -> "LagSpec":
        return LagSpec(self.m, self.n, story, self.stride)


@dataclass(frozen=True)
class ResidualTraces:
    absolute: TimeSeries
    cumulative: TimeSeries
    detrended_cumulative: TimeSeries
    baseline: tuple[int, int]


@dataclass(frozen=True)
class OnsetReport:
    onset_time: float | None
    damaged_stories: tuple[int, ...]
    trigger_values: tuple[float, ...]
    thresholds: tuple[float, ...] = field(default=())

    def to_text(self) -> str:
        onset = "none" if self.onset_time is None else f"{self.onset_time:.4f}"
        lines = [
            f"onset_time = {onset}",
            "damaged_stories = " + ",".join(str(s + 1) for s in self.damaged_stories),
            "trigger_values = " + ",".join(f"{v:.6g}" for v in self.trigger_values),
        ]
        return "\n".join(lines) + "\n"


def _stack(accels) -> tuple[np.ndarray, TimeSeries]:
    accels = list(accels)
    if not accels:
        raise ValueError("no acceleration records given")
    grid = accels[0]
    for a in accels[1:]:
        if not a.same_grid(grid):
            raise ValueError("all stories must share one time grid")
    return np.vstack([a.samples for a in accels]), grid


def _lag_matrix(X: np.ndarray, spec: LagSpec) -> tuple[np.ndarray, np.ndarray]:
    n, s = X.shape
    span, q = spec.span, spec.stride
    if n != spec.n:
        raise ValueError(f"got {n} stories, spec expects {spec.n}")
    if s <= span:
        raise ValueError(f"need more than {span} samples, got {s}")
    cols = [X[:, span - lag * q : s - lag * q].T for lag in range(1, spec.m + 1)]
    others = [j for j in range(n) if j != spec.target_story]
    cols.append(X[others, span:].T)
    inputs = np.hstack(cols)
    targets = X[spec.target_story, span:].copy()
    return inputs, targets


def build_lag_features(accels, spec: LagSpec) -> tuple[np.ndarray, np.ndarray]:
    """Emulator inputs and targets for every time index ``i >= m * stride``.

    Columns are ordered lag-major: lag 1 of stories ``0..n-1``, then lag 2,
    and so on, then the current samples of the non-target stories.
    """
    X, _ = _stack(accels)
    return _lag_matrix(X, spec)


def _window_slice(grid: TimeSeries, window) -> slice:
    t_a, t_b = window
    if t_b <= t_a:
        raise ValueError("window end must exceed its start")
    if t_a < grid.t0 - 1e-12 or t_b > grid.t0 + len(grid) * grid.dt + 1e-9:
        raise ValueError(f"window {window} lies outside the record")
    i0 = int(np.ceil((t_a - grid.t0) / grid.dt - 1e-9))
    i1 = int(np.ceil((t_b - grid.t0) / grid.dt - 1e-9))
    return slice(i0, min(i1, len(grid)))


def train_emulator(
    accels,
    spec: LagSpec,
    train_window,
    cfg: TrainConfig = DEFAULT_EMULATOR_CONFIG,
    jitter: NoiseSpec = NoiseSpec(level=0.01),
) -> RBFNetwork:
    """Fit the emulator of ``spec.target_story`` on a time window.

    Every story inside the window gets independent Gaussian jitter of std
    ``jitter.level`` times its own std before features are built, so inputs
    and targets are both perturbed. The fitted net carries
    ``window_nrmse_``: clean in-window prediction RMS over the target std.

    Raises
    ------
    ValueError
        When the window holds fewer than ``10 * m * stride`` samples.
    """
    X, grid = _stack(accels)
    sl = _window_slice(grid, train_window)
    Xw = X[:, sl]
    if Xw.shape[1] < 10 * spec.span:
        raise ValueError(f"training window holds {Xw.shape[1]} samples, need at least {10 * spec.span}")
    noisy = Xw.copy()
    if jitter.level > 0:
        for j in range(spec.n):
            scale = jitter.level * float(np.std(Xw[j]))
            noisy[j] += noise_array(Xw.shape[1], scale, child_seed(jitter.seed, j))
    inputs, targets = _lag_matrix(noisy, spec)
    net = RBFNetwork.from_config(cfg).fit(inputs, targets)
    clean_in, clean_t = _lag_matrix(Xw, spec)
    err = net.predict(clean_in) - clean_t
    std = float(np.std(clean_t))
    net.window_nrmse_ = float(np.sqrt(np.mean(err**2)) / std) if std > 0 else float("inf")
    return net


def train_emulators(
    accels,
    spec: LagSpec,
    train_window,
    cfg: TrainConfig = DEFAULT_EMULATOR_CONFIG,
    jitter: NoiseSpec = NoiseSpec(level=0.01),
) -> list[RBFNetwork]:
    """One emulator per story; ``spec.target_story`` is ignored."""
    accels = list(accels)
    return [train_emulator(accels, spec.for_story(j), train_window, cfg, jitter) for j in range(spec.n)]


def residual_traces(accels, nets, spec: LagSpec, baseline_window) -> list[ResidualTraces]:
    """Absolute, cumulative and detrended-cumulative emulator residuals.

    The first ``spec.span`` samples have no prediction and carry zero
    residual. The detrend line is a least-squares fit to the cumulative
    trace over ``baseline_window``, extended across the record.
    """
    accels = list(accels)
    X, grid = _stack(accels)
    n = X.shape[0]
    if len(nets) != n:
        raise ValueError(f"{len(nets)} nets for {n} stories")
    sl = _window_slice(grid, baseline_window)
    t = grid.time
    out = []
    for j, net in enumerate(nets):
        inputs, targets = _lag_matrix(X, spec.for_story(j))
        absolute = np.zeros(X.shape[1])
        absolute[spec.span :] = np.abs(targets - net.predict(inputs))
        cumulative = np.cumsum(absolute)
        slope, intercept = np.polyfit(t[sl], cumulative[sl], 1)
        detrended = cumulative - (slope * t + intercept)
        out.append(
            ResidualTraces(
                grid.with_samples(absolute),
                grid.with_samples(cumulative),
                grid.with_samples(detrended),
                (sl.start, sl.stop),
            )
        )
    return out


def forward_slope(trace: TimeSeries, horizon: float) -> np.ndarray:
    """``(x[i + h] - x[i]) / (h dt)``; NaN where ``i + h`` runs off the end."""
    h = max(1, int(round(horizon / trace.dt)))
    x = trace.samples
    slope = np.full(x.size, np.nan)
    if x.size > h:
        slope[:-h] = (x[h:] - x[:-h]) / (h * trace.dt)
    return slope


def detect_onset(traces, k_sigma: float = 6.0, horizon: float = 0.5, dominance: float = 0.5) -> OnsetReport:
    """Earliest post-baseline slope exceedance and the stories responsible.

    For each story the forward slope of the detrended cumulative residual is
    compared with ``mean + k_sigma * std`` of the same slope inside the
    baseline window. The trigger value is the story's post-baseline peak
    slope divided by its threshold; stories within ``dominance`` of the
    largest trigger are reported as damaged.
    """
    traces = list(traces)
    onsets, triggers, thresholds = [], [], []
    for tr in traces:
        d = tr.detrended_cumulative
        slope = forward_slope(d, horizon)
        h = max(1, int(round(horizon / d.dt)))
        b0, b1 = tr.baseline
        base = slope[b0 : max(b0 + 1, b1 - h)]
        base = base[np.isfinite(base)]
        if base.size < 2:
            raise ValueError("baseline window too short for the slope horizon")
        thr = float(np.mean(base) + k_sigma * np.std(base))
        after = slope[b1:]
        finite = np.isfinite(after)
        hits = np.flatnonzero(finite & (after > thr))
        onsets.append(d.time[b1 + hits[0]] if hits.size else None)
        peak = float(np.max(after[finite])) if finite.any() else 0.0
        triggers.append(peak / thr if thr > 0 else float("inf"))
        thresholds.append(thr)
    hit_times = [t for t in onsets if t is not None]
    if not hit_times:
        return OnsetReport(None, (), tuple(triggers), tuple(thresholds))
    top = max(triggers)
    damaged = tuple(j for j, v in enumerate(triggers) if v >= dominance * top)
    return OnsetReport(float(min(hit_times)), damaged, tuple(triggers), tuple(thresholds))
