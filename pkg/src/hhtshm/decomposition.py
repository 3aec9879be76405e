"""Empirical mode decomposition and its noise-assisted ensemble variant."""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field

import numpy as np
from joblib import Parallel, delayed
from scipy.interpolate import CubicSpline

from hhtshm.exceptions import TooFewExtremaError
from hhtshm.timeseries import TimeSeries, child_seed, noise_array

logger = logging.getLogger(__name__)

N_MIRROR = 2


@dataclass(frozen=True)
class SiftSettings:
    sd_threshold: float = 0.2
    max_sift_iters: int = 10
    max_imfs: int = 12
    mirror: bool = True
    shape_iters: int = 40

    def __post_init__(self):
        if not self.sd_threshold > 0:
            raise ValueError("sd_threshold must be positive")
        if self.max_sift_iters < 1:
            raise ValueError("max_sift_iters must be >= 1")
        if self.max_imfs < 1:
            raise ValueError("max_imfs must be >= 1")
        if self.shape_iters < 0:
            raise ValueError("shape_iters must be >= 0")


@dataclass(frozen=True)
class EemdSettings:
    noise_level: float = 1.0
    ensemble_n: int = 200
    seed: int = 0
    sift: SiftSettings = field(default_factory=SiftSettings)

    def __post_init__(self):
        if self.ensemble_n < 1:
            raise ValueError("ensemble_n must be >= 1")
        if self.noise_level < 0:
            raise ValueError("noise_level must be >= 0")


@dataclass(frozen=True)
class ImfSet:
    """IMFs ``C_1 .. C_n`` (highest frequency first) plus the residue."""

    imfs: tuple[TimeSeries, ...]
    residue: TimeSeries
    source_len: int
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.imfs)

    def as_array(self) -> np.ndarray:
        """``(n_imfs + 1, n)`` array, residue in the last row."""
        return np.vstack([c.samples for c in self.imfs] + [self.residue.samples])

    def reconstruct(self) -> np.ndarray:
        total = self.residue.samples.copy()
        for c in self.imfs:
            total += c.samples
        return total

    def combined(self, indices) -> TimeSeries:
        """Sum of the IMFs at the given zero-based positions."""
        idx = list(indices)
        if not idx:
            raise ValueError("no IMF indices given")
        total = np.zeros(self.source_len)
        for i in idx:
            total = total + self.imfs[i].samples
        return self.residue.with_samples(total)


def find_extrema(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Interior maxima and minima; a flat plateau reports its midpoint."""
    d = np.diff(x)
    nz = np.flatnonzero(d)
    if nz.size < 2:
        return np.empty(0, dtype=int), np.empty(0, dtype=int)
    s = d[nz] > 0
    turn = np.flatnonzero(s[:-1] != s[1:])
    loc = (nz[turn] + 1 + nz[turn + 1]) // 2
    rising = s[turn]
    return loc[rising], loc[~rising]


def count_zero_crossings(x: np.ndarray) -> int:
    s = np.sign(x)
    s = s[s != 0]
    return int(np.count_nonzero(s[:-1] != s[1:]))


def _mirror(x, imax, imin, n_sym=N_MIRROR):
    """Extend extrema beyond both ends by reflection.

    The symmetry axis is the end sample or the outermost extremum,
    whichever keeps the extension consistent with the boundary value.
    """
    n = x.size
    last = n - 1

    # left boundary
    if imax[0] < imin[0]:
        if x[0] > x[imin[0]]:
            lmax = imax[1 : n_sym + 1][::-1]
            lmin = imin[:n_sym][::-1]
            lsym = imax[0]
        else:
            lmax = imax[:n_sym][::-1]
            lmin = np.r_[imin[: n_sym - 1][::-1], 0]
            lsym = 0
    else:
        if x[0] < x[imax[0]]:
            lmax = imax[:n_sym][::-1]
            lmin = imin[1 : n_sym + 1][::-1]
            lsym = imin[0]
        else:
            lmax = np.r_[imax[: n_sym - 1][::-1], 0]
            lmin = imin[:n_sym][::-1]
            lsym = 0

    # right boundary
    if imax[-1] < imin[-1]:
        if x[-1] < x[imax[-1]]:
            rmax = imax[-n_sym:][::-1]
            rmin = imin[-n_sym - 1 : -1][::-1]
            rsym = imin[-1]
        else:
            rmax = np.r_[last, imax[-n_sym + 1 :][::-1]] if n_sym > 1 else np.array([last])
            rmin = imin[-n_sym:][::-1]
            rsym = last
    else:
        if x[-1] > x[imin[-1]]:
            rmax = imax[-n_sym - 1 : -1][::-1]
            rmin = imin[-n_sym:][::-1]
            rsym = imax[-1]
        else:
            rmax = imax[-n_sym:][::-1]
            rmin = np.r_[last, imin[-n_sym + 1 :][::-1]] if n_sym > 1 else np.array([last])
            rsym = last

    tlmin = 2 * lsym - lmin
    tlmax = 2 * lsym - lmax
    trmin = 2 * rsym - rmin
    trmax = 2 * rsym - rmax

    # reflected points must land outside the data span; otherwise mirror on the end sample
    if lsym != 0 and (tlmin.size and tlmin[0] > 0 or tlmax.size and tlmax[0] > 0):
        if lsym == imax[0]:
            lmax = imax[:n_sym][::-1]
        else:
            lmin = imin[:n_sym][::-1]
        lsym = 0
        tlmin = 2 * lsym - lmin
        tlmax = 2 * lsym - lmax
    if rsym != last and (trmin.size and trmin[-1] < last or trmax.size and trmax[-1] < last):
        if rsym == imax[-1]:
            rmax = imax[-n_sym:][::-1]
        else:
            rmin = imin[-n_sym:][::-1]
        rsym = last
        trmin = 2 * rsym - rmin
        trmax = 2 * rsym - rmax

    vmax = np.r_[x[lmax], x[imax], x[rmax]]
    vmin = np.r_[x[lmin], x[imin], x[rmin]]
    tmax = np.r_[tlmax, imax, trmax]
    tmin = np.r_[tlmin, imin, trmin]
    return tmax, vmax, tmin, vmin


def _dedupe(t, v):
    keep = np.r_[True, np.diff(t) > 0]
    if not keep.all() or np.any(np.diff(t) < 0):
        order = np.argsort(t, kind="stable")
        t, v = t[order], v[order]
        keep = np.r_[True, np.diff(t) > 0]
    return t[keep], v[keep]


def _envelope_arrays(x: np.ndarray, mirror: bool = True):
    imax, imin = find_extrema(x)
    if imax.size + imin.size < 3 or imax.size == 0 or imin.size == 0:
        raise TooFewExtremaError(f"{imax.size} maxima / {imin.size} minima")
    if mirror:
        tmax, vmax, tmin, vmin = _mirror(x, imax, imin)
    else:
        last = x.size - 1
        tmax, vmax = np.r_[0, imax, last], np.r_[x[imax[0]], x[imax], x[imax[-1]]]
        tmin, vmin = np.r_[0, imin, last], np.r_[x[imin[0]], x[imin], x[imin[-1]]]
    tmax, vmax = _dedupe(tmax, vmax)
    tmin, vmin = _dedupe(tmin, vmin)
    if tmax.size < 2 or tmin.size < 2:
        raise TooFewExtremaError("fewer than 2 knots per envelope after extension")
    grid = np.arange(x.size)
    upper = CubicSpline(tmax, vmax, bc_type="natural")(grid)
    lower = CubicSpline(tmin, vmin, bc_type="natural")(grid)
    return upper, lower


def envelopes(x: TimeSeries, mirror: bool = True) -> tuple[TimeSeries, TimeSeries, TimeSeries]:
    """Upper and lower cubic-spline envelopes and their mean.

    Raises
    ------
    TooFewExtremaError
        When the series is (close to) monotone and cannot be sifted.
    """
    upper, lower = _envelope_arrays(x.samples, mirror)
    return x.with_samples(upper), x.with_samples(lower), x.with_samples(0.5 * (upper + lower))


def _is_imf_shape(h):
    imax, imin = find_extrema(h)
    return abs(imax.size + imin.size - count_zero_crossings(h)) <= 1


def sift(x: np.ndarray, settings: SiftSettings) -> tuple[np.ndarray, int]:
    """Extract one IMF from ``x``; returns it with the iteration count.

    Stops when the SD between successive iterates drops below
    ``sd_threshold`` and the extrema / zero-crossing counts differ by at
    most one. After ``max_sift_iters`` iterations the SD test is dropped and
    at most ``shape_iters`` further iterations are spent on the count
    condition alone.
    """
    h = x
    limit = settings.max_sift_iters + settings.shape_iters
    for it in range(1, limit + 1):
        try:
            upper, lower = _envelope_arrays(h, settings.mirror)
        except TooFewExtremaError:
            if it == 1:
                raise
            return h, it - 1
        h_next = h - 0.5 * (upper + lower)
        denom = np.dot(h, h)
        sd = np.dot(h - h_next, h - h_next) / denom if denom > 0 else 0.0
        h = h_next
        if (sd < settings.sd_threshold or it >= settings.max_sift_iters) and _is_imf_shape(h):
            return h, it
    return h, limit


def emd_array(x: np.ndarray, settings: SiftSettings = SiftSettings()) -> tuple[list, np.ndarray]:
    """Array-level EMD: list of IMF arrays and the residue array."""
    x = np.asarray(x, dtype=float)
    imfs = []
    residue = x.copy()
    if np.ptp(x) == 0:
        return imfs, residue
    while len(imfs) < settings.max_imfs:
        try:
            imf, _ = sift(residue, settings)
        except TooFewExtremaError:
            break
        imfs.append(imf)
        residue = residue - imf
    return imfs, residue


def emd(x: TimeSeries, settings: SiftSettings = SiftSettings()) -> ImfSet:
    """Decompose ``x`` into IMFs and a residue by repeated sifting.

    Sum of IMFs plus residue reproduces ``x`` up to rounding.
    """
    imfs, residue = emd_array(x.samples, settings)
    return ImfSet(
        tuple(x.with_samples(c) for c in imfs),
        x.with_samples(residue),
        len(x),
        {"method": "emd", "sift": asdict(settings)},
    )


def _trial(x, scale, seed, settings):
    noisy = x + noise_array(x.size, scale, seed) if scale > 0 else x
    imfs, _ = emd_array(noisy, settings)
    out = np.zeros((settings.max_imfs, x.size))
    for i, c in enumerate(imfs):
        out[i] = c
    return out, len(imfs)


def eemd(x: TimeSeries, settings: EemdSettings = EemdSettings(), n_jobs: int | None = 1) -> ImfSet:
    """Ensemble EMD.

    Each trial decomposes ``x`` plus white noise of std
    ``noise_level * std(x)``; trials are padded to ``max_imfs`` rows and
    averaged in trial order. The residue is the complement ``x - sum(C)``.
    Results do not depend on ``n_jobs``.
    """
    samples = x.samples
    scale = settings.noise_level * float(np.std(samples))
    sift_settings = settings.sift

    if settings.ensemble_n == 1 and scale == 0:
        result = emd(x, sift_settings)
        meta = {"method": "eemd", **asdict(settings)}
        return ImfSet(result.imfs, result.residue, result.source_len, meta)

    seeds = [child_seed(settings.seed, k) for k in range(settings.ensemble_n)]
    if n_jobs in (None, 1):
        trials = (_trial(samples, scale, s, sift_settings) for s in seeds)
    else:
        trials = Parallel(n_jobs=n_jobs, return_as="generator")(
            delayed(_trial)(samples, scale, s, sift_settings) for s in seeds
        )

    total = np.zeros((sift_settings.max_imfs, samples.size))
    n_used = 0
    for block, count in trials:
        total += block
        n_used = max(n_used, count)
    mean = total[:n_used] / settings.ensemble_n
    residue = samples - mean.sum(axis=0)
    meta = {"method": "eemd", **asdict(settings)}
    return ImfSet(tuple(x.with_samples(c) for c in mean), x.with_samples(residue), len(x), meta)
