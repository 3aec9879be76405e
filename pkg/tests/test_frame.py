import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hhtshm.exceptions import InfeasibleTargetError
from hhtshm.frame import (
    LINEAR,
    MaterialLaw,
    RayleighSpec,
    ShearFrameModel,
    calibrate,
    eigen_modes,
    equal_strength_yield_drifts,
    first_mode,
    mechanical_energy,
    rayleigh_coefficients,
    rayleigh_damping_ratio,
    simulate,
)
from hhtshm.timeseries import GroundMotionSpec, TimeSeries, ground_motion

from conftest import MASSES, TARGET_F1, TARGET_SHAPE


def free_vibration(m, k, zeta, periods, u0=0.01, steps_per_period=200):
    T = 2 * np.pi * np.sqrt(m / k)
    dt = T / steps_per_period
    n = int(periods * steps_per_period) + 1
    model = ShearFrameModel((m,), (k,), LINEAR, RayleighSpec(zeta))
    res = simulate(model, TimeSeries(np.zeros(n), dt), u0=[u0])
    return model, res, T, dt


def crossing_times(x, dt):
    # upward zero crossings, linearly interpolated
    idx = np.flatnonzero((x[:-1] < 0) & (x[1:] >= 0))
    return (idx + x[idx] / (x[idx] - x[idx + 1])) * dt


def test_single_story_frequency():
    model = ShearFrameModel((2.0,), (50.0,), LINEAR)
    assert eigen_modes(model)[0][0] == pytest.approx(np.sqrt(25.0) / (2 * np.pi), rel=1e-12)


def brute_force_uniform_roots():
    # det(K - c M) for uniform 3-story pencil (k = m = 1) expanded by hand:
    # K = [[2,-1,0],[-1,2,-1],[0,-1,1]] -> -c^3 + 5c^2 - 6c + 1
    return np.sort(np.roots([-1.0, 5.0, -6.0, 1.0]).real)


def test_uniform_frame_matches_characteristic_polynomial():
    m, k = 3000.0, 2.0e6
    model = ShearFrameModel((m,) * 3, (k,) * 3, LINEAR)
    w2 = np.array([(2 * np.pi * f) ** 2 for f, _ in eigen_modes(model)])
    c = brute_force_uniform_roots()
    assert c[0] == pytest.approx(0.198, abs=1e-3)
    assert np.allclose(w2, c * k / m, rtol=1e-8, atol=0)


def test_calibration_reproduces_targets(calibrated_model):
    f1, phi = first_mode(calibrated_model)
    assert f1 == pytest.approx(TARGET_F1, rel=1e-6)
    assert np.allclose(phi, TARGET_SHAPE, rtol=1e-6)
    assert np.all(np.asarray(calibrated_model.story_k) > 0)


@given(st.lists(st.floats(1e5, 1e7), min_size=2, max_size=5), st.floats(500, 20000))
def test_calibration_round_trip(k, m):
    masses = (m,) * len(k)
    f1, phi = first_mode(ShearFrameModel(masses, tuple(k), LINEAR))
    assert np.allclose(calibrate(f1, phi, masses), k, rtol=1e-8)


def test_uniform_shape_target_hand_solve():
    # phi = [1/3, 2/3, 1], m = 1, w^2 = 1: k3/3 = 1, k2/3 - k3/3 = 2/3, k1/3 - k2/3 = 1/3
    k = calibrate(1 / (2 * np.pi), [1 / 3, 2 / 3, 1.0], [1.0, 1.0, 1.0])
    assert np.allclose(k, [6.0, 5.0, 3.0], rtol=1e-12)


def test_calibration_rejects_bad_targets():
    with pytest.raises(InfeasibleTargetError):
        calibrate(1.0, [0.5, 0.4, 1.0], MASSES)
    with pytest.raises(InfeasibleTargetError):
        calibrate(1.0, [0.3, 0.7, 0.9], MASSES)


def test_rayleigh_zero_damping():
    assert rayleigh_coefficients(1.0, 3.0, 0.0) == (0.0, 0.0)


def test_rayleigh_coincident_limit():
    f, zeta = 1.5, 0.04
    w = 2 * np.pi * f
    a0, a1 = rayleigh_coefficients(f, f * (1 + 1e-10), zeta)
    assert a0 == pytest.approx(zeta * w, rel=1e-8)
    assert a1 == pytest.approx(zeta / w, rel=1e-8)


def test_rayleigh_plug_back(calibrated_model):
    freqs = [f for f, _ in eigen_modes(calibrated_model)]
    a0, a1 = rayleigh_coefficients(freqs[0], freqs[2], 0.05)
    assert abs(rayleigh_damping_ratio(freqs[0], a0, a1) - 0.05) < 1e-12
    assert abs(rayleigh_damping_ratio(freqs[2], a0, a1) - 0.05) < 1e-12


def test_zero_input_zero_response(calibrated_model):
    res = simulate(calibrated_model, TimeSeries(np.zeros(500), 0.01))
    assert not np.any(res.disp) and not np.any(res.vel)
    assert all(not np.any(a.samples) for a in res.accel)


def test_damped_sdof_period_and_decrement():
    zeta = 0.02
    model, res, T, dt = free_vibration(1000.0, 4.0e5, zeta, periods=10)
    x = res.disp[:, 0]
    Td = T / np.sqrt(1 - zeta**2)
    measured = np.mean(np.diff(crossing_times(x, dt)))
    assert abs(measured - Td) / Td < 1e-3
    peaks = [np.max(x[int(i * 200) : int((i + 1) * 200)]) for i in range(1, 9)]
    delta = np.mean(np.log(np.array(peaks[:-1]) / np.array(peaks[1:])))
    expected = 2 * np.pi * zeta / np.sqrt(1 - zeta**2)
    assert abs(delta - expected) / expected < 1e-2


def test_undamped_energy_conserved():
    model, res, T, dt = free_vibration(1000.0, 4.0e5, 0.0, periods=10)
    e = mechanical_energy(model, res)
    assert np.max(np.abs(e - e[0])) / e[0] < 5e-3


def test_three_story_energy_conserved(calibrated_k):
    model = ShearFrameModel(MASSES, tuple(calibrated_k), LINEAR, RayleighSpec(0.0))
    T1 = 1 / first_mode(model)[0]
    dt = T1 / 400
    res = simulate(model, TimeSeries(np.zeros(4001), dt), u0=[0.003, 0.007, 0.01])
    e = mechanical_energy(model, res)
    assert np.max(np.abs(e - e[0])) / e[0] < 5e-3


def strong_run(k, seed=3):
    gm = ground_motion(GroundMotionSpec(0.01, 30.0, (("noise", 0, 5, 0.3, 0), ("pulse", 5, 7, 0.5, 1.0)), seed=seed))
    yd = np.array(equal_strength_yield_drifts(k, 0.012))
    yd[1:] *= 1.5
    model = ShearFrameModel(MASSES, tuple(k), MaterialLaw(tuple(yd), 0.0, 0.91))
    return model, simulate(model, gm)


def test_degradation_identity(calibrated_k):
    model, res = strong_run(calibrated_k)
    d = res.excursion_counts()
    assert d[0] >= 1 and d[1:] == [0, 0]
    expected = np.array(calibrated_k, dtype=float)
    for s, _, _ in res.excursion_log:
        expected[s] *= 0.91
    assert np.array_equal(res.final_k, expected)
    assert np.allclose(res.final_k, calibrated_k * 0.91 ** np.array(d), rtol=1e-14)


def test_stiffness_history_monotone(calibrated_k):
    _, res = strong_run(calibrated_k)
    for hist in res.stiffness_history:
        ks = [k for _, k in hist]
        assert all(b <= a for a, b in zip(ks, ks[1:]))


def test_hysteretic_energy_nonnegative_nondecreasing(calibrated_k):
    _, res = strong_run(calibrated_k)
    e = res.hysteretic_energy
    assert np.all(e >= 0)
    assert np.all(np.diff(e, axis=0) >= -1e-12 * max(1.0, e.max()))
    assert e[-1, 0] > 0


def test_scheduled_stiffness_event(calibrated_model):
    gm = TimeSeries(np.zeros(300), 0.01)
    res = simulate(calibrated_model, gm, stiffness_events=[(1.0, 0, 0.8)])
    assert res.final_k[0] == pytest.approx(0.8 * calibrated_model.story_k[0])
    assert res.stiffness_at(0, 0.5) == calibrated_model.story_k[0]


def test_second_order_convergence(calibrated_k):
    model = ShearFrameModel(MASSES, tuple(calibrated_k), LINEAR)
    t_end = 5.0

    def run(dt):
        t = np.arange(int(round(t_end / dt)) + 1) * dt
        res = simulate(model, TimeSeries(np.sin(2 * np.pi * 0.7 * t), dt))
        return res.disp[-1]

    ref = run(0.005 / 8)
    e1 = np.linalg.norm(run(0.005) - ref)
    e2 = np.linalg.norm(run(0.01) - ref)
    assert 3.5 <= e2 / e1 <= 4.5


def test_material_validation():
    with pytest.raises(ValueError):
        MaterialLaw(yield_drift=0.0)
    with pytest.raises(ValueError):
        MaterialLaw(degradation_factor=1.5)
