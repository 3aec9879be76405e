"""Uniformly sampled signals, seeded noise and CSV ingestion."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from hhtshm.exceptions import DegenerateInputError


@dataclass(frozen=True)
class TimeSeries:
    """Real signal on the grid ``t0 + i * dt``.

    The sample array is copied and frozen on construction, so instances can
    be shared freely.
    """

    samples: np.ndarray
    dt: float
    t0: float = 0.0

    def __post_init__(self):
        x = np.array(self.samples, dtype=float)
        if x.ndim != 1:
            raise ValueError(f"samples must be 1-D, got shape {x.shape}")
        if x.size < 2:
            raise DegenerateInputError("a TimeSeries needs at least 2 samples")
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        x.setflags(write=False)
        object.__setattr__(self, "samples", x)
        object.__setattr__(self, "dt", float(self.dt))
        object.__setattr__(self, "t0", float(self.t0))

    def __len__(self):
        return self.samples.size

    @property
    def time(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.samples.size)

    @property
    def duration(self) -> float:
        return self.samples.size * self.dt

    def with_samples(self, samples) -> "TimeSeries":
        """Same grid, new values."""
        return TimeSeries(samples, self.dt, self.t0)

    def same_grid(self, other: "TimeSeries") -> bool:
        return (
            len(self) == len(other)
            and np.isclose(self.dt, other.dt, rtol=1e-12, atol=0)
            and np.isclose(self.t0, other.t0, rtol=0, atol=1e-9 * self.dt)
        )

    def slice_time(self, start=None, stop=None) -> "TimeSeries":
        """Samples with ``start <= t < stop`` (closed-open)."""
        t = self.time
        mask = np.ones(len(self), dtype=bool)
        eps = 1e-9 * self.dt
        if start is not None:
            mask &= t >= start - eps
        if stop is not None:
            mask &= t < stop - eps
        idx = np.flatnonzero(mask)
        if idx.size < 2:
            raise DegenerateInputError(f"time slice [{start}, {stop}) holds fewer than 2 samples")
        return TimeSeries(self.samples[idx], self.dt, self.t0 + idx[0] * self.dt)


@dataclass(frozen=True)
class NoiseSpec:
    level: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.level < 0:
            raise ValueError(f"noise level must be >= 0, got {self.level}")


def child_seed(master: int, k: int) -> np.random.SeedSequence:
    """Independent, order-free seed for ensemble member ``k``."""
    return np.random.SeedSequence(entropy=int(master) % 2**64, spawn_key=(int(k),))


def std_dev(x) -> float:
    """Population standard deviation of a series (or raw array)."""
    samples = x.samples if isinstance(x, TimeSeries) else np.asarray(x, dtype=float)
    if samples.size < 2:
        raise DegenerateInputError("std_dev needs at least 2 samples")
    return float(np.std(samples))


def gaussian_noise(n: int, spec: NoiseSpec, sigma_ref: float, dt: float = 1.0) -> TimeSeries:
    """White Gaussian noise with std ``spec.level * sigma_ref``.

    Output depends only on the arguments.
    """
    if n < 2:
        raise DegenerateInputError("a noise series needs n >= 2 samples")
    if sigma_ref < 0:
        raise ValueError("sigma_ref must be >= 0")
    seed = np.random.SeedSequence(int(spec.seed) % 2**64)
    return TimeSeries(noise_array(n, spec.level * sigma_ref, seed), dt)


def noise_array(n: int, scale: float, seed: np.random.SeedSequence | int) -> np.ndarray:
    if scale == 0:
        return np.zeros(n)
    return np.random.default_rng(seed).normal(0.0, scale, n)


def time_grid(dt: float, duration: float, t0: float = 0.0) -> np.ndarray:
    """Closed-open grid; the duration rounds down to whole samples."""
    if not dt > 0 or not duration > 0:
        raise ValueError("dt and duration must be positive")
    n = int(np.floor(duration / dt + 1e-9))
    return t0 + dt * np.arange(n)


def three_tone(t):
    t = np.asarray(t, dtype=float)
    return (
        5 * np.cos(2 * np.pi * 2 * t) + 5 * np.cos(2 * np.pi * 4 * t) + 2 * np.sin(2 * np.pi * 8 * t)
    ) * np.exp(-t / 10)


def synth_three_tone(dt: float, duration: float) -> TimeSeries:
    """Decaying 2/4/8 Hz benchmark signal."""
    return TimeSeries(three_tone(time_grid(dt, duration)), dt)


@dataclass(frozen=True)
class GroundMotionSpec:
    """Synthetic ground acceleration built from segments.

    ``segments`` is a tuple of ``(kind, t_start, t_end, amplitude, freq)``
    entries where ``kind`` is ``"noise"`` (band-limited white noise with
    std ``amplitude``), ``"pulse"`` (sine cycles at ``freq`` with peak
    ``amplitude``) or ``"burst"`` (noise with a half-sine envelope).
    """

    dt: float
    duration: float
    segments: tuple = field(default_factory=tuple)
    seed: int = 0
    band: tuple = (0.2, 20.0)


def ground_motion(spec: GroundMotionSpec) -> TimeSeries:
    from scipy.signal import butter, sosfiltfilt

    t = time_grid(spec.dt, spec.duration)
    a = np.zeros_like(t)
    fs = 1.0 / spec.dt
    lo, hi = spec.band
    hi = min(hi, 0.45 * fs)
    sos = butter(4, [lo, hi], btype="bandpass", fs=fs, output="sos")
    for k, (kind, start, end, amp, freq) in enumerate(spec.segments):
        mask = (t >= start) & (t < end)
        if not mask.any():
            continue
        if kind in ("noise", "burst"):
            w = np.random.default_rng(child_seed(spec.seed, k)).standard_normal(t.size)
            w = sosfiltfilt(sos, w)
            seg = w[mask]
            seg = seg / np.std(seg)
            if kind == "burst":
                tau = (t[mask] - start) / (end - start)
                seg = seg * np.sin(np.pi * tau)
            a[mask] += amp * seg
        elif kind == "pulse":
            a[mask] += amp * np.sin(2 * np.pi * freq * (t[mask] - start))
        else:
            raise ValueError(f"unknown ground-motion segment kind {kind!r}")
    return TimeSeries(a, spec.dt)


def _is_number(text: str) -> bool:
    try:
        float(text)
    except ValueError:
        return False
    return True


def read_csv(path, dt: float | None = None, column: int | None = None) -> TimeSeries:
    """Load a record from CSV.

    Two layouts are accepted: ``time, value`` with constant spacing, or a
    single value column together with an explicit ``dt``. A non-numeric
    first row is treated as a header.
    """
    path = Path(path)
    with path.open(newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if not rows:
        raise DegenerateInputError(f"{path}: empty file")
    first_data = 1 if not all(_is_number(c) for c in rows[0]) else 0
    try:
        data = np.array([[float(c) for c in r] for r in rows[first_data:]], dtype=float)
    except ValueError as exc:
        raise ValueError(f"{path}: non-numeric value ({exc})") from None
    if data.ndim != 2 or data.shape[0] < 2:
        raise DegenerateInputError(f"{path}: need at least 2 data rows")
    if data.shape[1] == 1 or dt is not None:
        if dt is None:
            raise ValueError(f"{path}: single-column record requires an explicit dt")
        col = 0 if data.shape[1] == 1 else (column if column is not None else data.shape[1] - 1)
        return TimeSeries(data[:, col], dt)
    t = data[:, 0]
    steps = np.diff(t)
    step = float(np.mean(steps))
    bad = np.flatnonzero(np.abs(steps - step) > 1e-6 * abs(step))
    if not step > 0 or bad.size:
        line = first_data + int(bad[0]) + 2 if bad.size else first_data + 1
        raise ValueError(f"{path}:{line}: time column is not uniformly spaced")
    col = column if column is not None else 1
    return TimeSeries(data[:, col], step, float(t[0]))


def write_columns(path, header, columns, fmt="%.10g"):
    """Write equal-length columns with a header row."""
    arr = np.column_stack([np.asarray(c, dtype=float) for c in columns])
    np.savetxt(path, arr, delimiter=",", header=",".join(header), comments="", fmt=fmt)
