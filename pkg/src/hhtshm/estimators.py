"""Estimator-style wrappers over the functional stages.

Signals go in as ``(n_samples, n_stories)`` arrays sampled at ``dt``;
hyperparameters are constructor arguments so ``get_params`` /
``set_params`` and cloning work as usual.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin, TransformerMixin
from sklearn.metrics import r2_score
from sklearn.utils.validation import check_is_fitted

from hhtshm._validation import as_series, as_story_matrix, check_matrix
from hhtshm.decomposition import EemdSettings, SiftSettings, eemd, emd
from hhtshm.detection import (
    DEFAULT_EMULATOR_CONFIG,
    DEFAULT_STRIDE,
    LagSpec,
    _lag_matrix,
    detect_onset,
    residual_traces,
    train_emulators,
)
from hhtshm.frame import ShearFrameModel
from hhtshm.identification import generate_training_set, identify, train_identifier
from hhtshm.modal import estimate_modal
from hhtshm.rbf import TrainConfig
from hhtshm.timeseries import NoiseSpec, TimeSeries


class EMD(TransformerMixin, BaseEstimator):
    """Empirical mode decomposition of a single signal.

    ``transform`` returns an ``(n_imfs + 1, n_samples)`` array with the
    residue in the last row.
    """

    def __init__(self, sd_threshold=0.2, max_sift_iters=10, max_imfs=12, mirror=True, shape_iters=40):
        self.sd_threshold = sd_threshold
        self.max_sift_iters = max_sift_iters
        self.max_imfs = max_imfs
        self.mirror = mirror
        self.shape_iters = shape_iters

    def _sift(self):
        return SiftSettings(self.sd_threshold, self.max_sift_iters, self.max_imfs, self.mirror, self.shape_iters)

    def fit(self, x, y=None, dt=1.0):
        self._sift()
        self.dt_ = dt
        return self

    def decompose(self, x, dt=None):
        return emd(as_series(x, dt if dt is not None else getattr(self, "dt_", 1.0)), self._sift())

    def transform(self, x, dt=None):
        check_is_fitted(self, "dt_")
        return self.decompose(x, dt).as_array()


class EEMD(EMD):
    """Ensemble EMD; ``random_state`` is the master seed."""

    def __init__(
        self,
        noise_level=1.0,
        ensemble_n=200,
        random_state=0,
        n_jobs=1,
        sd_threshold=0.2,
        max_sift_iters=10,
        max_imfs=12,
        mirror=True,
        shape_iters=40,
    ):
        super().__init__(sd_threshold, max_sift_iters, max_imfs, mirror, shape_iters)
        self.noise_level = noise_level
        self.ensemble_n = ensemble_n
        self.random_state = random_state
        self.n_jobs = n_jobs

    def settings(self) -> EemdSettings:
        return EemdSettings(self.noise_level, self.ensemble_n, self.random_state, self._sift())

    def decompose(self, x, dt=None):
        series = as_series(x, dt if dt is not None else getattr(self, "dt_", 1.0))
        return eemd(series, self.settings(), n_jobs=self.n_jobs)


class ModalEstimator(BaseEstimator):
    """First-mode frequency and shape from multi-story accelerations.

    Attributes
    ----------
    estimate_ : ModalEstimate
    f1_, f1_interval_, shape_ : as in ``estimate_``
    imf_sets_ : list of ImfSet
    """

    def __init__(
        self,
        noise_level=1.0,
        ensemble_n=500,
        random_state=0,
        n_jobs=1,
        bin_width=0.01,
        window_len=6.0,
        stride=1.0,
        smooth=2.0,
        significance=0.05,
        tolerance=0.2,
        min_energy=0.05,
        reference_story=-1,
    ):
        self.noise_level = noise_level
        self.ensemble_n = ensemble_n
        self.random_state = random_state
        self.n_jobs = n_jobs
        self.bin_width = bin_width
        self.window_len = window_len
        self.stride = stride
        self.smooth = smooth
        self.significance = significance
        self.tolerance = tolerance
        self.min_energy = min_energy
        self.reference_story = reference_story

    def fit(self, X, y=None, dt=0.01):
        X = as_story_matrix(X)
        settings = EemdSettings(self.noise_level, self.ensemble_n, self.random_state, SiftSettings(shape_iters=0))
        self.imf_sets_ = [eemd(TimeSeries(col, dt), settings, self.n_jobs) for col in X.T]
        return self.fit_imfs(self.imf_sets_)

    def fit_imfs(self, sets):
        """Skip decomposition and estimate from precomputed IMF sets."""
        self.imf_sets_ = list(sets)
        self.estimate_ = estimate_modal(
            self.imf_sets_,
            reference_story=self.reference_story,
            bin_width=self.bin_width,
            window_len=self.window_len,
            stride=self.stride,
            significance=self.significance,
            tolerance=self.tolerance,
            smooth=self.smooth,
            min_energy=self.min_energy,
        )
        self.f1_ = self.estimate_.f1
        self.f1_interval_ = self.estimate_.f1_interval
        self.shape_ = self.estimate_.shape
        return self


class AccelerationEmulator(RegressorMixin, BaseEstimator):
    """One lagged-acceleration RBF emulator per story.

    ``fit`` trains on ``train_window`` (seconds); ``predict`` returns the
    one-step predictions with NaN in the first ``m * stride`` rows;
    ``detect`` runs the residual onset analysis.
    """

    def __init__(
        self,
        m=4,
        stride=DEFAULT_STRIDE,
        train_window=(0.0, 15.0),
        n_centers=DEFAULT_EMULATOR_CONFIG.n_centers,
        ridge=DEFAULT_EMULATOR_CONFIG.ridge,
        width_rule=DEFAULT_EMULATOR_CONFIG.width_rule,
        linear_tail=DEFAULT_EMULATOR_CONFIG.linear_tail,
        jitter=0.01,
        random_state=0,
    ):
        self.m = m
        self.stride = stride
        self.train_window = train_window
        self.n_centers = n_centers
        self.ridge = ridge
        self.width_rule = width_rule
        self.linear_tail = linear_tail
        self.jitter = jitter
        self.random_state = random_state

    def _series(self, X, dt):
        X = as_story_matrix(X)
        return [TimeSeries(col, dt) for col in X.T]

    def fit(self, X, y=None, dt=0.01):
        accels = self._series(X, dt)
        self.dt_ = dt
        self.spec_ = LagSpec(self.m, len(accels), 0, self.stride)
        cfg = TrainConfig(self.n_centers, self.ridge, self.width_rule, self.random_state, self.linear_tail)
        jitter = NoiseSpec(self.jitter, self.random_state)
        self.nets_ = train_emulators(accels, self.spec_, self.train_window, cfg, jitter)
        self.n_features_in_ = len(accels)
        return self

    def predict(self, X):
        check_is_fitted(self, "nets_")
        X = check_matrix(X, min_samples=2, n_features=self.n_features_in_)
        out = np.full(X.shape, np.nan)
        for j, net in enumerate(self.nets_):
            inputs, _ = _lag_matrix(X.T, self.spec_.for_story(j))
            out[self.spec_.span :, j] = net.predict(inputs)
        return out

    def score(self, X, y=None, sample_weight=None):
        """Mean R^2 of the one-step predictions over all stories."""
        pred = self.predict(X)
        X = np.asarray(X, dtype=float)
        rows = slice(self.spec_.span, None)
        return r2_score(X[rows], pred[rows], sample_weight=sample_weight)

    def residuals(self, X, baseline_window=None):
        check_is_fitted(self, "nets_")
        accels = self._series(X, self.dt_)
        return residual_traces(accels, self.nets_, self.spec_, baseline_window or self.train_window)

    def detect(self, X, baseline_window=None, k_sigma=6.0, horizon=0.5):
        return detect_onset(self.residuals(X, baseline_window), k_sigma, horizon)


class StiffnessIdentifier(RegressorMixin, BaseEstimator):
    """Modal features ``[f1, shape_1 .. shape_{n-1}]`` to stiffness fractions.

    ``fit`` ignores ``X`` and ``y``: the training set is generated from
    ``nominal`` by eigen analysis.
    """

    def __init__(
        self,
        nominal: ShearFrameModel | None = None,
        count=100,
        frac_range=(0.5, 1.0),
        restrict_to=None,
        random_state=0,
        ridge=1e-10,
        width_rule=1.0,
    ):
        self.nominal = nominal
        self.count = count
        self.frac_range = frac_range
        self.restrict_to = restrict_to
        self.random_state = random_state
        self.ridge = ridge
        self.width_rule = width_rule

    def fit(self, X=None, y=None):
        if self.nominal is None:
            raise ValueError("nominal frame model is required")
        self.patterns_ = generate_training_set(
            self.nominal, self.count, self.frac_range, self.restrict_to, self.random_state
        )
        cfg = TrainConfig("all", self.ridge, self.width_rule, self.random_state)
        self.net_ = train_identifier(self.patterns_, cfg)
        self.n_features_in_ = self.net_.n_features_in_
        return self

    def predict(self, X):
        check_is_fitted(self, "net_")
        return self.net_.predict(X)

    def identify(self, modal, reference=None):
        check_is_fitted(self, "net_")
        return identify(self.net_, modal, self.nominal, reference)
