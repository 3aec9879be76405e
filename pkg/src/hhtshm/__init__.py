"""Hilbert-Huang modal estimation and neural-network damage identification
for lumped-mass shear frames."""

from hhtshm.decomposition import EemdSettings, ImfSet, SiftSettings, eemd, emd
from hhtshm.detection import LagSpec, OnsetReport, build_lag_features, detect_onset, residual_traces, train_emulator
from hhtshm.estimators import EEMD, EMD, AccelerationEmulator, ModalEstimator, StiffnessIdentifier
from hhtshm.frame import (
    LINEAR,
    MaterialLaw,
    RayleighSpec,
    ShearFrameModel,
    calibrate,
    eigen_modes,
    equal_strength_yield_drifts,
    simulate,
)
from hhtshm.hilbert import hht, hilbert_transform, instantaneous
from hhtshm.identification import generate_training_set, identify, train_identifier
from hhtshm.modal import estimate_modal, frequency_histogram, mode_shape, select_first_mode_imfs
from hhtshm.rbf import RBFNetwork, TrainConfig
from hhtshm.timeseries import NoiseSpec, TimeSeries, gaussian_noise

__version__ = "0.1.0"

__all__ = [
    "AccelerationEmulator",
    "EEMD",
    "EMD",
    "EemdSettings",
    "ImfSet",
    "LINEAR",
    "LagSpec",
    "MaterialLaw",
    "ModalEstimator",
    "NoiseSpec",
    "OnsetReport",
    "RBFNetwork",
    "RayleighSpec",
    "ShearFrameModel",
    "SiftSettings",
    "StiffnessIdentifier",
    "TimeSeries",
    "TrainConfig",
    "build_lag_features",
    "calibrate",
    "detect_onset",
    "eemd",
    "eigen_modes",
    "emd",
    "equal_strength_yield_drifts",
    "estimate_modal",
    "frequency_histogram",
    "gaussian_noise",
    "generate_training_set",
    "hht",
    "hilbert_transform",
    "identify",
    "instantaneous",
    "mode_shape",
    "residual_traces",
    "select_first_mode_imfs",
    "simulate",
    "train_emulator",
    "train_identifier",
]
