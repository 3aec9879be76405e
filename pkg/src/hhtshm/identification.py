"""Inverse map from first-mode data to story stiffnesses."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from hhtshm.frame import ShearFrameModel, first_mode
from hhtshm.modal import ModalEstimate
from hhtshm.rbf import RBFNetwork, TrainConfig
from hhtshm.timeseries import write_columns

logger = logging.getLogger(__name__)

DEFAULT_IDENTIFIER_CONFIG = TrainConfig(n_centers="all", ridge=1e-10, width_rule=1.0, seed=0)


@dataclass(frozen=True)
class DamagePattern:
    k_fractions: np.ndarray
    f1: float
    shape: np.ndarray

    @property
    def features(self) -> np.ndarray:
        return modal_features(self.f1, self.shape)


@dataclass(frozen=True)
class StiffnessEstimate:
    story_k: np.ndarray
    fraction_of_nominal: np.ndarray
    error_vs_reference: np.ndarray | None = None
    extrapolated: bool = False

    def __post_init__(self):
        if np.any(np.asarray(self.story_k) <= 0):
            raise ValueError("identified stiffness must be positive")

    def to_text(self) -> str:
        lines = ["story,k_N_per_m,fraction,error_pct"]
        err = self.error_vs_reference
        for i, (k, f) in enumerate(zip(self.story_k, self.fraction_of_nominal)):
            e = "" if err is None else f"{err[i]:.4f}"
            lines.append(f"{i + 1},{k:.6e},{f:.6f},{e}")
        lines.append(f"extrapolated,{str(self.extrapolated).lower()}")
        return "\n".join(lines) + "\n"


def modal_features(f1: float, shape) -> np.ndarray:
    """``[f1, shape_1 .. shape_{n-1}]``; the top entry is always 1."""
    shape = np.asarray(shape, dtype=float)
    return np.r_[f1, shape[:-1]]


def pattern_for(nominal: ShearFrameModel, fractions) -> DamagePattern:
    fractions = np.asarray(fractions, dtype=float)
    f1, shape = first_mode(nominal.scaled(fractions))
    return DamagePattern(fractions, f1, shape)


def generate_training_set(
    nominal: ShearFrameModel,
    count: int = 100,
    frac_range: tuple[float, float] = (0.5, 1.0),
    restrict_to=None,
    seed: int = 0,
) -> list[DamagePattern]:
    """Seeded stiffness-reduction patterns with their first-mode data.

    The first pattern is the undamaged frame; the others draw every free
    story's fraction uniformly from ``frac_range``. Stories outside
    ``restrict_to`` (zero-based) stay at 1.
    """
    lo, hi = frac_range
    if not 0 < lo <= hi <= 1:
        raise ValueError("frac_range must satisfy 0 < lo <= hi <= 1")
    if count < 1:
        raise ValueError("count must be >= 1")
    n = nominal.n_stories
    free = np.ones(n, dtype=bool) if restrict_to is None else np.isin(np.arange(n), list(restrict_to))
    if not free.any():
        raise ValueError("restrict_to selects no story")
    rng = np.random.default_rng(seed)
    draws = rng.uniform(lo, hi, size=(count - 1, n))
    fractions = np.vstack([np.ones(n), np.where(free, draws, 1.0)])
    return [pattern_for(nominal, f) for f in fractions]


def training_arrays(patterns) -> tuple[np.ndarray, np.ndarray]:
    X = np.vstack([p.features for p in patterns])
    Y = np.vstack([p.k_fractions for p in patterns])
    return X, Y


def write_training_set(path, patterns) -> None:
    X, Y = training_arrays(patterns)
    n = Y.shape[1]
    header = [f"k{i + 1}_fraction" for i in range(n)] + ["f1_hz"] + [f"shape{i + 1}" for i in range(n - 1)]
    write_columns(path, header, np.hstack([Y, X]).T)


def train_identifier(patterns, cfg: TrainConfig = DEFAULT_IDENTIFIER_CONFIG) -> RBFNetwork:
    """RBF network from modal features to per-story stiffness fractions."""
    patterns = list(patterns)
    if len(patterns) < 10:
        raise ValueError(f"need at least 10 patterns, got {len(patterns)}")
    X, Y = training_arrays(patterns)
    return RBFNetwork.from_config(cfg).fit(X, Y)


def identify(
    net: RBFNetwork,
    modal: ModalEstimate,
    nominal: ShearFrameModel,
    reference=None,
    hull_tol: float = 1e-9,
) -> StiffnessEstimate:
    """Story stiffnesses from a modal estimate.

    ``reference`` (true stiffnesses in N/m) adds per-story percentage
    errors. Inputs outside the bounding box of the training features set
    the ``extrapolated`` flag.
    """
    shape = np.asarray(modal.shape, dtype=float)
    if shape.size != nominal.n_stories:
        raise ValueError(f"shape has {shape.size} entries, frame has {nominal.n_stories} stories")
    x = modal_features(modal.f1, shape)
    fractions = np.atleast_1d(net.predict(x[None, :])[0])
    k_nominal = np.asarray(nominal.story_k, dtype=float)
    story_k = fractions * k_nominal
    # the input scaler holds the per-feature training range
    lo, hi = net.input_scaler_.data_min_, net.input_scaler_.data_max_
    span = np.maximum(hi - lo, 1e-12)
    extrapolated = bool(np.any(x < lo - hull_tol * span) or np.any(x > hi + hull_tol * span))
    if extrapolated:
        logger.warning("modal input %s lies outside the training range", x)
    err = None
    if reference is not None:
        ref = np.asarray(reference, dtype=float)
        err = 100.0 * (story_k - ref) / ref
    return StiffnessEstimate(story_k, fractions, err, extrapolated)
