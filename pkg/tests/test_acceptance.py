"""Acceptance criteria 1-9, each reporting one PASS/FAIL line.

Run ``pytest tests/test_acceptance.py -v``; the lines are repeated in the
"acceptance criteria" section of the terminal summary. The full-ensemble
modal reproduction is marked ``slow`` (``pytest -m slow``).
"""

import json
import time

import numpy as np
import pytest

from hhtshm import pipeline as pl
from hhtshm.decomposition import EemdSettings, emd, eemd
from hhtshm.frame import LINEAR, ShearFrameModel, calibrate, eigen_modes, first_mode, mechanical_energy
from hhtshm.identification import generate_training_set, identify, train_identifier
from hhtshm.hilbert import hht
from hhtshm.modal import ModalEstimate, frequency_histogram
from hhtshm.rbf import TrainConfig, train
from hhtshm.timeseries import TimeSeries, synth_three_tone

from conftest import MASSES, TARGET_F1, TARGET_SHAPE, record_criterion
from test_frame import brute_force_uniform_roots, crossing_times, free_vibration, strong_run


def test_criterion_1_three_tone_eemd():
    t0 = time.perf_counter()
    imfs = eemd(synth_three_tone(0.01, 20.0), EemdSettings(0.2, 200, seed=0), n_jobs=1)
    runtime = time.perf_counter() - t0
    # a 0.5 s moving average spans two 4 Hz beat periods of residual mixing
    dom = [frequency_histogram(hht(c, smooth=0.5), 0.05).dominant_center for c in imfs.imfs]
    raw = [frequency_histogram(hht(c), 0.05).dominant_center for c in imfs.imfs]
    miss = {tone: min(abs(d - tone) for d in dom) for tone in (8, 4, 2)}
    ok = all(v <= 0.2 for v in miss.values()) and runtime < 60
    record_criterion(
        1,
        ok,
        f"dominants={np.round(dom, 2).tolist()} worst miss={max(miss.values()):.2f} Hz "
        f"runtime={runtime:.1f}s (unsmoothed: {np.round(raw, 2).tolist()})",
    )
    assert ok


def test_criterion_2_reconstruction_identity():
    rng = np.random.default_rng(20)
    worst = 0.0
    for _ in range(20):
        n = int(rng.integers(500, 5001))
        t = np.arange(n) * 0.01
        x = np.cumsum(rng.normal(size=n)) * 0.05 + rng.normal(size=n)
        x += sum(rng.uniform(0.2, 2) * np.sin(2 * np.pi * rng.uniform(0.1, 20) * t + rng.uniform(0, 6)) for _ in range(3))
        s = emd(TimeSeries(x, 0.01))
        rec = np.sum([c.samples for c in s.imfs], axis=0) + s.residue.samples
        worst = max(worst, np.linalg.norm(x - rec) / np.linalg.norm(x))
    ok = worst <= 1e-9
    record_criterion(2, ok, f"worst relative error={worst:.2e} over 20 signals")
    assert ok


def _same(a, b):
    return len(a.imfs) == len(b.imfs) and all(
        np.array_equal(p.samples, q.samples) for p, q in zip(a.imfs + (a.residue,), b.imfs + (b.residue,))
    )


def test_criterion_3_eemd_determinism():
    x = synth_three_tone(0.01, 8.0)
    x = TimeSeries(x.samples + 0.1 * np.random.default_rng(3).normal(size=x.samples.size), 0.01)
    degenerate = _same(eemd(x, EemdSettings(0.0, 1, seed=5)), emd(x))
    settings = EemdSettings(0.2, 8, seed=5)
    repeat = _same(eemd(x, settings), eemd(x, settings))
    threads = _same(eemd(x, settings, n_jobs=1), eemd(x, settings, n_jobs=2))
    ok = degenerate and repeat and threads
    record_criterion(3, ok, f"degenerate={degenerate} repeat={repeat} threads={threads}")
    assert ok


def test_criterion_4_eigen_and_calibration():
    k = calibrate(TARGET_F1, TARGET_SHAPE, MASSES)
    f1, phi = first_mode(ShearFrameModel(MASSES, tuple(k), LINEAR))
    cal_err = max(abs(f1 - TARGET_F1) / TARGET_F1, np.max(np.abs(phi - TARGET_SHAPE) / TARGET_SHAPE))
    m, ks = 3000.0, 2.0e6
    w2 = np.array([(2 * np.pi * f) ** 2 for f, _ in eigen_modes(ShearFrameModel((m,) * 3, (ks,) * 3, LINEAR))])
    oracle = brute_force_uniform_roots() * ks / m
    eig_err = np.max(np.abs(w2 - oracle) / oracle)
    ok = cal_err <= 1e-6 and eig_err <= 1e-8
    record_criterion(4, ok, f"calibration rel err={cal_err:.1e} uniform eigen rel err={eig_err:.1e}")
    assert ok


def _modal_run(out, ensemble_n=None):
    text = pl.preset_text("calibrated")
    if ensemble_n is not None:
        text = text.replace("ensemble_n = 500", f"ensemble_n = {ensemble_n}")
    cfg = pl.load_config(text)
    t0 = time.perf_counter()
    pl.stage_simulate(cfg, out)
    pl.stage_decompose(cfg, out)
    est = pl.stage_modal(cfg, out)
    return est, time.perf_counter() - t0


def test_criterion_5_modal_extraction(tmp_path):
    est, runtime = _modal_run(tmp_path)
    lo, hi = est.f1_interval
    err = np.abs(est.shape - TARGET_SHAPE) / TARGET_SHAPE * 100
    ok = lo <= TARGET_F1 < hi and np.all(err <= 2.0) and runtime < 900
    record_criterion(
        5, ok, f"f1 interval=[{lo:.3f}, {hi:.3f}) shape err %={np.round(err, 2).tolist()} runtime={runtime:.0f}s"
    )
    assert ok


@pytest.mark.slow
def test_criterion_5_full_ensemble(tmp_path):
    est, runtime = _modal_run(tmp_path, ensemble_n=5000)
    lo, hi = est.f1_interval
    err = np.abs(est.shape - TARGET_SHAPE) / TARGET_SHAPE * 100
    ok = lo <= TARGET_F1 < hi and np.all(err <= 1.0)
    record_criterion("5 (ensemble 5000)", ok, f"f1 interval=[{lo:.3f}, {hi:.3f}) shape err %={np.round(err, 2).tolist()} runtime={runtime:.0f}s")
    assert ok


def test_criterion_6_damage_pipeline(tmp_path):
    cfg = pl.load_config(pl.preset_text("damage"))
    damaged = tmp_path / "damaged"
    report = pl.run_pipeline(cfg, damaged)
    frame = json.loads((damaged / "frame.json").read_text())
    d = frame["excursion_counts"]
    # (a) each excursion multiplies the story stiffness by the factor once
    expected = np.array(frame["story_k"])
    for line in (damaged / "excursions.csv").read_text().splitlines()[1:]:
        expected[int(line.split(",")[0]) - 1] *= cfg.frame.degradation_factor
    identity = d[0] >= 2 and np.array_equal(np.array(frame["final_k"]), expected)
    power = np.allclose(frame["final_k"], np.array(frame["story_k"]) * 0.91 ** np.array(d), rtol=1e-14, atol=0)

    # (b) onset against the first story-1 yield, plus an undamaged companion
    yields = [ln.split(",") for ln in (damaged / "yields.csv").read_text().splitlines()[1:]]
    first_yield = min(float(t) for s, t in yields if s == "1")
    onset = report.onset
    located = 0 in onset.damaged_stories
    timely = onset.onset_time is not None and abs(onset.onset_time - first_yield) <= 1.0
    companion_cfg = pl.load_config(pl.preset_text("damage").replace("material = bilinear", "material = linear"))
    companion = tmp_path / "companion"
    companion.mkdir()
    pl.stage_simulate(companion_cfg, companion)
    clean = pl.stage_detect(companion_cfg, companion).onset_time is None

    # (c) identified story-1 stiffness against the simulated final value
    err1 = report.stiffness.error_vs_reference[0]
    accurate = abs(err1) < 5.0

    ok = identity and power and located and timely and clean and accurate
    record_criterion(
        6,
        ok,
        f"d={d} identity={identity} onset={onset.onset_time} first yield={first_yield:.2f} "
        f"stories={[s + 1 for s in onset.damaged_stories]} companion clean={clean} "
        f"story-1 error={err1:.2f}% extrapolated={report.stiffness.extrapolated}",
    )
    assert ok


def test_criterion_7_sensitivity_sweep():
    nominal = ShearFrameModel(MASSES, tuple(calibrate(TARGET_F1, TARGET_SHAPE, MASSES)), LINEAR)
    net = train_identifier(generate_training_set(nominal, 100, seed=3))
    sweep = np.linspace(1.065, 1.075, 11)
    k1 = []
    for f1 in sweep:
        est = identify(net, ModalEstimate(f1, (f1 - 0.005, f1 + 0.005), TARGET_SHAPE, (0.0, 6.0), ()), nominal)
        k1.append(est.story_k[0])
    k1 = np.array(k1)
    change = (k1.max() - k1.min()) / k1[np.argmin(np.abs(sweep - TARGET_F1))] * 100
    trend = "increasing" if np.all(np.diff(k1) > 0) else "decreasing" if np.all(np.diff(k1) < 0) else "non-monotone"
    ok = change < 5.0
    record_criterion(7, ok, f"story-1 stiffness change={change:.2f}% trend={trend}")
    assert ok


def test_criterion_8_rbf_properties():
    X = np.random.default_rng(0).uniform(-2, 2, size=(40, 3))
    y = np.random.default_rng(1).normal(size=(40, 2))
    resid = np.max(np.abs(train(X, y, TrainConfig("all", 0.0)).predict(X) - y))
    x = np.linspace(0, 2 * np.pi, 50)[:, None]
    net = train(x, np.sin(x[:, 0]), TrainConfig(25, 1e-8, seed=0))
    xt = np.linspace(0.05, 2 * np.pi - 0.05, 301)[:, None]
    rmse = np.sqrt(np.mean((net.predict(xt) - np.sin(xt[:, 0])) ** 2))
    ok = resid <= 1e-8 and rmse < 0.01
    record_criterion(8, ok, f"interpolation residual={resid:.1e} sin held-out rmse={rmse:.2e}")
    assert ok


def test_criterion_9_simulator_physics(calibrated_k):
    zeta = 0.02
    _, res, T, dt = free_vibration(1000.0, 4.0e5, zeta, periods=10)
    x = res.disp[:, 0]
    Td = T / np.sqrt(1 - zeta**2)
    period_err = abs(np.mean(np.diff(crossing_times(x, dt))) - Td) / Td
    peaks = [np.max(x[i * 200 : (i + 1) * 200]) for i in range(1, 9)]
    delta = np.mean(np.log(np.array(peaks[:-1]) / np.array(peaks[1:])))
    expected = 2 * np.pi * zeta / np.sqrt(1 - zeta**2)
    dec_err = abs(delta - expected) / expected
    model, res0, _, _ = free_vibration(1000.0, 4.0e5, 0.0, periods=10)
    e = mechanical_energy(model, res0)
    drift = np.max(np.abs(e - e[0])) / e[0]
    _, res_nl = strong_run(calibrated_k)
    e_h = res_nl.hysteretic_energy.min()
    ok = period_err < 1e-3 and dec_err < 1e-2 and drift < 5e-3 and e_h >= 0
    record_criterion(
        9, ok, f"period err={period_err:.1e} log-dec err={dec_err:.1e} energy drift={drift:.1e} min hysteretic={e_h:.2e}"
    )
    assert ok
