"""Nonlinear shear-building simulator with degrading bilinear story springs.

Floors are lumped masses joined by story springs. Story shear follows a
bilinear (kinematic-hardening) law; every time a yielded story unloads back
onto its elastic branch its elastic stiffness is multiplied by the
degradation factor. Integration is Newmark average acceleration. Inside a
regime the system is linear, so each step is a single linear solve; regime
changes are located inside a step by bisection.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import linalg

from hhtshm.exceptions import InfeasibleTargetError, InstabilityError, NotPositiveDefiniteError
from hhtshm.timeseries import TimeSeries

GAMMA = 0.5
BETA = 0.25
DRIFT_TOL = 1e-9
MAX_BISECT = 80


@dataclass(frozen=True)
class MaterialLaw:
    """Bilinear story law.

    ``yield_drift`` is a scalar or one value per story; the yield shear of
    story ``i`` is ``k_i * yield_drift_i`` with the undamaged stiffness, so
    strength is unaffected by stiffness degradation.
    """

    yield_drift: float | tuple = 0.01
    post_yield_ratio: float = 0.0
    degradation_factor: float = 0.91

    def __post_init__(self):
        yd = self.yield_drift
        if np.ndim(yd):
            yd = tuple(float(v) for v in yd)
            object.__setattr__(self, "yield_drift", yd)
        if not np.all(np.asarray(yd) > 0):
            raise ValueError("yield_drift must be positive")
        if self.post_yield_ratio < 0:
            raise ValueError("post_yield_ratio must be >= 0")
        if not 0 < self.degradation_factor <= 1:
            raise ValueError("degradation_factor must lie in (0, 1]")


LINEAR = MaterialLaw(yield_drift=1e12)


def equal_strength_yield_drifts(story_k, first_story_yield_drift: float) -> tuple:
    """Per-story yield drifts giving every story the first story's strength.

    Identical column sections on every floor mean identical story shear
    capacity; the stiffer stories then yield at smaller drifts.
    """
    k = np.asarray(story_k, dtype=float)
    return tuple(first_story_yield_drift * k[0] / k)


@dataclass(frozen=True)
class RayleighSpec:
    zeta: float = 0.05
    anchor_modes: tuple[int, int] = (1, 3)


@dataclass(frozen=True)
class ShearFrameModel:
    masses: tuple
    story_k: tuple
    material: MaterialLaw = field(default_factory=MaterialLaw)
    damping: RayleighSpec = field(default_factory=RayleighSpec)

    def __post_init__(self):
        m = tuple(float(v) for v in np.atleast_1d(self.masses))
        k = tuple(float(v) for v in np.atleast_1d(self.story_k))
        if len(m) != len(k) or not m:
            raise ValueError("masses and story_k must be non-empty and equally long")
        if min(m) <= 0 or min(k) <= 0:
            raise NotPositiveDefiniteError("masses and story stiffnesses must be positive")
        object.__setattr__(self, "masses", m)
        object.__setattr__(self, "story_k", k)

    @property
    def n_stories(self) -> int:
        return len(self.masses)

    def yield_drifts(self) -> np.ndarray:
        yd = np.broadcast_to(np.asarray(self.material.yield_drift, dtype=float), (self.n_stories,))
        return yd.copy()

    def mass_matrix(self) -> np.ndarray:
        return np.diag(self.masses)

    def stiffness_matrix(self, story_k=None) -> np.ndarray:
        return stiffness_matrix(self.story_k if story_k is None else story_k)

    def scaled(self, fractions) -> "ShearFrameModel":
        """Copy with each story stiffness multiplied by ``fractions``."""
        k = np.asarray(self.story_k) * np.asarray(fractions, dtype=float)
        return replace(self, story_k=tuple(k))


def stiffness_matrix(story_k) -> np.ndarray:
    """Tridiagonal shear-building stiffness; story 1 connects to the ground."""
    k = np.asarray(story_k, dtype=float)
    n = k.size
    K = np.zeros((n, n))
    for i in range(n):
        K[i, i] = k[i] + (k[i + 1] if i + 1 < n else 0.0)
        if i + 1 < n:
            K[i, i + 1] = K[i + 1, i] = -k[i + 1]
    return K


def eigen_modes(model: ShearFrameModel) -> list[tuple[float, np.ndarray]]:
    """All modes as ``(frequency_hz, shape)`` pairs, ascending in frequency.

    Shapes are scaled so the top-story entry equals 1.
    """
    M = model.mass_matrix()
    K = model.stiffness_matrix()
    try:
        linalg.cholesky(K)
    except linalg.LinAlgError:
        raise NotPositiveDefiniteError("stiffness matrix is not positive definite") from None
    w2, phi = linalg.eigh(K, M)
    modes = []
    for j in range(w2.size):
        shape = phi[:, j] / phi[-1, j]
        modes.append((float(np.sqrt(w2[j]) / (2 * np.pi)), shape))
    return modes


def first_mode(model: ShearFrameModel) -> tuple[float, np.ndarray]:
    return eigen_modes(model)[0]


def calibrate(target_f1: float, target_shape, masses) -> np.ndarray:
    """Story stiffnesses whose first mode matches the targets.

    ``K(k) phi = w^2 M phi`` is linear in ``k``; with ``phi`` normalised to
    1 at the top the system is upper bidiagonal and has a unique solution.
    """
    phi = np.asarray(target_shape, dtype=float)
    m = np.asarray(masses, dtype=float)
    if phi.shape != m.shape:
        raise ValueError("shape and masses must have equal length")
    if np.any(phi <= 0) or not np.isclose(phi[-1], 1.0):
        raise InfeasibleTargetError("first-mode shape must be positive with top entry 1")
    w2 = (2 * np.pi * target_f1) ** 2
    n = phi.size
    drift = np.diff(np.r_[0.0, phi])
    A = np.zeros((n, n))
    for i in range(n):
        A[i, i] = drift[i]
        if i + 1 < n:
            A[i, i + 1] = -drift[i + 1]
    try:
        k = linalg.solve(A, w2 * m * phi)
    except linalg.LinAlgError:
        raise InfeasibleTargetError("calibration system is singular") from None
    if not np.all(np.isfinite(k)) or np.any(k <= 0):
        raise InfeasibleTargetError(f"targets imply non-positive story stiffness {k}")
    return k


def rayleigh_coefficients(f1: float, f3: float, zeta: float) -> tuple[float, float]:
    """Mass and stiffness proportional factors ``(a0, a1)``."""
    if not f1 < f3:
        raise ValueError("anchor frequencies must satisfy f1 < f3")
    if zeta < 0:
        raise ValueError("zeta must be >= 0")
    w1, w3 = 2 * np.pi * f1, 2 * np.pi * f3
    return 2 * zeta * w1 * w3 / (w1 + w3), 2 * zeta / (w1 + w3)


def rayleigh_damping_ratio(f: float, a0: float, a1: float) -> float:
    w = 2 * np.pi * f
    return a0 / (2 * w) + a1 * w / 2


def damping_matrix(model: ShearFrameModel) -> np.ndarray:
    """Rayleigh damping built from the undamaged model."""
    zeta = model.damping.zeta
    freqs = [f for f, _ in eigen_modes(model)]
    i, j = model.damping.anchor_modes
    i = min(i, len(freqs)) - 1
    j = min(j, len(freqs)) - 1
    if i == j:
        w = 2 * np.pi * freqs[i]
        a0, a1 = zeta * w, zeta / w
    else:
        a0, a1 = rayleigh_coefficients(freqs[i], freqs[j], zeta)
    return a0 * model.mass_matrix() + a1 * model.stiffness_matrix()


@dataclass(frozen=True)
class SimResult:
    """Time histories at the ground-motion sample instants.

    ``stiffness_history[s]`` lists ``(time, k)`` breakpoints starting at
    ``t0``; ``excursion_log`` holds ``(story, time, new_k)`` degradation
    events and ``yield_log`` ``(story, time)`` yield onsets. Stories are
    zero-based.
    """

    accel: tuple[TimeSeries, ...]
    drift: tuple[TimeSeries, ...]
    disp: np.ndarray
    vel: np.ndarray
    stiffness_history: tuple[tuple[tuple[float, float], ...], ...]
    excursion_log: tuple[tuple[int, float, float], ...]
    yield_log: tuple[tuple[int, float], ...]
    hysteretic_energy: np.ndarray
    final_k: np.ndarray

    def excursion_counts(self) -> list[int]:
        counts = [0] * len(self.accel)
        for story, _, _ in self.excursion_log:
            counts[story] += 1
        return counts

    def first_yield_time(self, story: int | None = None) -> float | None:
        times = [t for s, t in self.yield_log if story is None or s == story]
        return min(times) if times else None

    def stiffness_at(self, story: int, t: float) -> float:
        k = self.stiffness_history[story][0][1]
        for tb, kb in self.stiffness_history[story]:
            if tb <= t:
                k = kb
        return k


ELASTIC, UPPER, LOWER = 0, 1, -1


class _Stories:
    """Mutable story-spring state for one simulation."""

    def __init__(self, k0, material: MaterialLaw, yield_drifts):
        self.k = np.array(k0, dtype=float)
        n = self.k.size
        self.alpha = material.post_yield_ratio
        self.factor = material.degradation_factor
        # fixed strength: yield shear from the undamaged stiffness
        self.c = (1 - self.alpha) * self.k * yield_drifts
        self.mode = np.zeros(n, dtype=int)
        self.offset = np.zeros(n)

    def tangent(self):
        return np.where(self.mode == ELASTIC, self.k, self.alpha * self.k)

    def shear(self, drift):
        elastic = self.k * (drift - self.offset)
        plastic = self.alpha * self.k * drift + self.mode * self.c
        return np.where(self.mode == ELASTIC, elastic, plastic)

    def overshoot(self, drift):
        """Positive where an elastic story lies beyond a yield line."""
        v = self.k * (drift - self.offset)
        hard = self.alpha * self.k * drift
        over = np.maximum(v - (hard + self.c), (hard - self.c) - v)
        return np.where(self.mode == ELASTIC, over, -np.inf)


def _restoring(shear):
    f = shear.copy()
    f[:-1] -= shear[1:]
    return f


def _drifts(u):
    return np.diff(np.r_[0.0, u])


def simulate(
    model: ShearFrameModel,
    ground_accel: TimeSeries,
    u0=None,
    v0=None,
    stiffness_events=(),
) -> SimResult:
    """Integrate ``M u'' + C u' + f_s(u) = -M 1 a_g`` over the record.

    Parameters
    ----------
    model : ShearFrameModel
    ground_accel : TimeSeries
        Ground acceleration in m/s^2; its grid is the integration grid.
    u0, v0 : array-like, optional
        Initial floor displacements and velocities relative to the ground.
    stiffness_events : sequence of (time, story, factor)
        Scheduled elastic-stiffness reductions (damage injection); applied
        at the first grid instant at or after ``time`` without a force jump.

    Returns
    -------
    SimResult
        Absolute floor accelerations, story drifts and the damage logs.
    """
    n = model.n_stories
    dt = ground_accel.dt
    ag = ground_accel.samples
    nt = ag.size
    t0 = ground_accel.t0
    M = model.mass_matrix()
    m = np.asarray(model.masses)
    C = damping_matrix(model)
    T1 = 1.0 / eigen_modes(model)[0][0]
    if dt > T1 / 50:
        warnings.warn(f"dt={dt} exceeds T1/50={T1 / 50:.4g}; response may be inaccurate", stacklevel=2)

    yd = model.yield_drifts()
    st = _Stories(model.story_k, model.material, yd)
    limit = 1e4 * yd

    u = np.zeros(n) if u0 is None else np.array(u0, dtype=float)
    v = np.zeros(n) if v0 is None else np.array(v0, dtype=float)
    st.offset[:] = 0.0
    shear = st.shear(_drifts(u))
    a = (-m * ag[0] - C @ v - _restoring(shear)) / m

    disp = np.zeros((nt, n))
    vel = np.zeros((nt, n))
    acc = np.zeros((nt, n))
    disp[0], vel[0], acc[0] = u, v, a + ag[0]
    history = [[(t0, float(k))] for k in st.k]
    excursions = []
    yields = []
    energy = np.zeros((nt, n))
    w_plastic = np.zeros(n)
    pending = sorted((float(t), int(s), float(f)) for t, s, f in stiffness_events)

    def trial(h, ag_start, slope, u, v, a):
        kt = st.tangent()
        K = stiffness_matrix(kt)
        Khat = K + (GAMMA / (BETA * h)) * C + M / (BETA * h * h)
        dP = -m * slope * h
        rhs = dP + M @ (v / (BETA * h)) + C @ (GAMMA / BETA * v) + M @ (a / (2 * BETA)) + C @ (
            h * (GAMMA / (2 * BETA) - 1) * a
        )
        du = linalg.solve(Khat, rhs, assume_a="sym")
        dv = GAMMA / (BETA * h) * du - GAMMA / BETA * v + h * (1 - GAMMA / (2 * BETA)) * a
        un, vn = u + du, v + dv
        dr = _drifts(un)
        sh = st.shear(dr)
        an = (-m * (ag_start + slope * h) - C @ vn - _restoring(sh)) / m
        return un, vn, an, dr, sh

    def events(dr, vn):
        over = st.overshoot(dr)
        dv_story = _drifts(vn)
        unload = np.where(st.mode == UPPER, dv_story < 0, False) | np.where(
            st.mode == LOWER, dv_story > 0, False
        )
        return over > 0, unload

    for step in range(1, nt):
        t_start = t0 + (step - 1) * dt
        while pending and pending[0][0] <= t_start + 1e-12:
            _, s, f = pending.pop(0)
            dr = _drifts(u)
            vcur = st.shear(dr)[s]
            st.k[s] *= f
            if st.mode[s] == ELASTIC:
                st.offset[s] = dr[s] - vcur / st.k[s]
            history[s].append((t_start, float(st.k[s])))

        slope = (ag[step] - ag[step - 1]) / dt
        ag_cur = ag[step - 1]
        remaining = dt
        t_cur = t_start
        guard = 0
        while remaining > 0:
            guard += 1
            if guard > 10 * n + 20:
                raise InstabilityError(f"too many regime changes near t={t_cur:.4f}")
            dr0 = _drifts(u)
            sh0 = st.shear(dr0)
            un, vn, an, dr, sh = trial(remaining, ag_cur, slope, u, v, a)
            yielding, unloading = events(dr, vn)
            if not (yielding.any() or unloading.any()):
                w_plastic += _plastic_work(st, sh0, sh, dr - dr0)
                u, v, a = un, vn, an
                t_cur += remaining
                remaining = 0.0
                break
            # bracket the earliest regime change
            lo, hi = 0.0, remaining
            lo_dr = dr0
            hi_state = (un, vn, an, dr, sh)
            for _ in range(MAX_BISECT):
                if np.max(np.abs(hi_state[3] - lo_dr)) < DRIFT_TOL:
                    break
                mid = 0.5 * (lo + hi)
                state = trial(mid, ag_cur, slope, u, v, a)
                y_mid, ul_mid = events(state[3], state[1])
                if y_mid.any() or ul_mid.any():
                    hi, hi_state = mid, state
                else:
                    lo, lo_dr = mid, state[3]
            un, vn, an, dr, sh = hi_state
            yielding, unloading = events(dr, vn)
            w_plastic += _plastic_work(st, sh0, sh, dr - dr0)
            t_ev = t_cur + hi
            for s in np.flatnonzero(yielding):
                st.mode[s] = UPPER if dr[s] - st.offset[s] > 0 else LOWER
                yields.append((int(s), float(t_ev)))
            for s in np.flatnonzero(unloading):
                v_on_line = st.shear(dr)[s]
                st.mode[s] = ELASTIC
                st.k[s] *= st.factor
                st.offset[s] = dr[s] - v_on_line / st.k[s]
                excursions.append((int(s), float(t_ev), float(st.k[s])))
                history[s].append((float(t_ev), float(st.k[s])))
            sh = st.shear(dr)
            an = (-m * (ag_cur + slope * hi) - C @ vn - _restoring(sh)) / m
            u, v, a = un, vn, an
            ag_cur += slope * hi
            t_cur = t_ev
            remaining -= hi
            if remaining < 1e-12 * dt:
                remaining = 0.0

        d = _drifts(u)
        if np.any(np.abs(d) > limit) or not np.all(np.isfinite(u)):
            raise InstabilityError(f"response diverged at t={t0 + step * dt:.4f}s")
        disp[step], vel[step], acc[step] = u, v, a + ag[step]
        energy[step] = w_plastic

    drifts = np.diff(np.hstack([np.zeros((nt, 1)), disp]), axis=1)
    return SimResult(
        accel=tuple(ground_accel.with_samples(acc[:, i]) for i in range(n)),
        drift=tuple(ground_accel.with_samples(drifts[:, i]) for i in range(n)),
        disp=disp,
        vel=vel,
        stiffness_history=tuple(tuple(h) for h in history),
        excursion_log=tuple(excursions),
        yield_log=tuple(yields),
        hysteretic_energy=energy,
        final_k=st.k.copy(),
    )


def _plastic_work(st: _Stories, sh0, sh1, ddrift):
    """Energy dissipated over a sub-step by stories on a yield line."""
    plastic = st.mode != ELASTIC
    if not plastic.any():
        return np.zeros_like(sh0)
    work = 0.5 * (sh0 + sh1) * ddrift - (sh1**2 - sh0**2) / (2 * st.k)
    return np.where(plastic, work, 0.0)


def mechanical_energy(model: ShearFrameModel, result: SimResult) -> np.ndarray:
    """Kinetic plus elastic strain energy per sample for a linear run."""
    m = np.asarray(model.masses)
    k = np.asarray(model.story_k)
    drifts = np.column_stack([d.samples for d in result.drift])
    return 0.5 * (result.vel**2 @ m) + 0.5 * (drifts**2 @ k)
