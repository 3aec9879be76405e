import numpy as np
import pytest
from sklearn.base import clone

from hhtshm import EEMD, EMD, AccelerationEmulator, ModalEstimator, StiffnessIdentifier
from hhtshm.decomposition import EemdSettings, eemd, emd
from hhtshm.frame import first_mode, simulate
from hhtshm.modal import ModalEstimate
from hhtshm.timeseries import GroundMotionSpec, TimeSeries, ground_motion, synth_three_tone

DT = 0.01


def test_emd_transformer_matches_function():
    x = synth_three_tone(DT, 5.0)
    out = EMD().fit(x.samples, dt=DT).transform(x.samples)
    assert np.array_equal(out, emd(x).as_array())


def test_eemd_transformer_matches_function():
    x = synth_three_tone(DT, 5.0)
    est = EEMD(noise_level=0.2, ensemble_n=4, random_state=3)
    assert np.array_equal(est.fit(x.samples, dt=DT).transform(x.samples), eemd(x, EemdSettings(0.2, 4, 3)).as_array())


def test_params_roundtrip():
    est = EEMD(noise_level=0.5, ensemble_n=10)
    c = clone(est)
    assert c.get_params()["ensemble_n"] == 10
    c.set_params(ensemble_n=20)
    assert c.ensemble_n == 20 and est.ensemble_n == 10


def test_transform_requires_fit():
    from sklearn.exceptions import NotFittedError

    with pytest.raises(NotFittedError):
        EMD().transform(np.zeros(10))


def test_plain_array_needs_1d():
    with pytest.raises(ValueError):
        EMD().fit(np.zeros(10)).transform(np.zeros((3, 3)))


@pytest.fixture(scope="module")
def linear_accels(calibrated_model):
    gm = ground_motion(GroundMotionSpec(DT, 30.0, (("noise", 0, 30, 0.5, 0),), seed=2))
    return np.column_stack([a.samples for a in simulate(calibrated_model, gm).accel])


def test_emulator_estimator(linear_accels):
    em = AccelerationEmulator(train_window=(0.0, 12.0)).fit(linear_accels, dt=DT)
    pred = em.predict(linear_accels)
    assert np.all(np.isnan(pred[: em.spec_.span]))
    assert em.score(linear_accels) > 0.99
    report = em.detect(linear_accels, baseline_window=(12.0, 20.0))
    assert report.onset_time is None


def test_emulator_rejects_wrong_width(linear_accels):
    em = AccelerationEmulator(train_window=(0.0, 12.0)).fit(linear_accels, dt=DT)
    with pytest.raises(ValueError):
        em.predict(linear_accels[:, :2])


def test_modal_estimator_on_tones():
    t = np.arange(3000) * DT
    x = np.cos(2 * np.pi * 1.2 * t) * (1 + 0.2 * np.sin(0.3 * t)) + 0.2 * np.cos(2 * np.pi * 5 * t)
    X = np.column_stack([0.4 * x, 0.8 * x, x])
    est = ModalEstimator(ensemble_n=2, noise_level=0.1).fit(X, dt=DT)
    assert est.f1_interval_[0] <= 1.2 <= est.f1_interval_[1]
    assert np.allclose(est.shape_, [0.4, 0.8, 1.0], atol=0.02)


def test_stiffness_identifier(calibrated_model):
    ident = StiffnessIdentifier(nominal=calibrated_model, count=60).fit()
    f1, phi = first_mode(calibrated_model.scaled([0.8, 1.0, 0.9]))
    est = ident.identify(ModalEstimate(f1, (f1, f1), phi, (0, 6), ()))
    assert np.allclose(est.fraction_of_nominal, [0.8, 1.0, 0.9], atol=0.03)
    assert ident.predict(np.array([[f1, phi[0], phi[1]]])).shape == (1, 3)


def test_identifier_needs_nominal():
    with pytest.raises(ValueError):
        StiffnessIdentifier().fit()
