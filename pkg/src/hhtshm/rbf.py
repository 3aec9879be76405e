"""Gaussian radial-basis-function regression network."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import linalg
from scipy.spatial.distance import cdist, pdist
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.cluster import KMeans
from sklearn.preprocessing import MinMaxScaler
from sklearn.utils.validation import check_is_fitted

from hhtshm._validation import check_matrix, check_targets
from hhtshm.exceptions import RankDeficientError

FORMAT = "hhtshm-rbf"
VERSION = 1


@dataclass(frozen=True)
class TrainConfig:
    n_centers: int | str = "all"
    ridge: float = 1e-8
    width_rule: float = 1.0
    seed: int = 0
    linear_tail: bool = False

    def __post_init__(self):
        if self.n_centers != "all" and (not isinstance(self.n_centers, int) or self.n_centers < 1):
            raise ValueError("n_centers must be a positive int or 'all'")
        if self.ridge < 0:
            raise ValueError("ridge must be >= 0")
        if not self.width_rule > 0:
            raise ValueError("width_rule must be positive")


class RBFNetwork(RegressorMixin, BaseEstimator):
    """Gaussian RBF network with a linear output layer.

    Inputs and outputs are min-max scaled to ``[-1, 1]``. Centres are the
    training samples themselves (``n_centers="all"``) or k-means centroids.
    All centres share one width, ``width_rule`` times the median pairwise
    centre distance. Output weights come from a ridge least-squares solve
    with an unpenalised bias.

    Parameters
    ----------
    n_centers : int or "all", default="all"
    ridge : float, default=1e-8
    width_rule : float, default=1.0
    random_state : int, default=0
        Seed for the k-means initialisation.
    linear_tail : bool, default=False
        Append the scaled inputs as extra linear features, so the network
        extrapolates affinely instead of decaying to the bias far from the
        centres.

    Attributes
    ----------
    centers_ : ndarray of shape (n_centers, n_features)
        Centres in scaled input space.
    width_ : float
    weights_ : ndarray of shape (n_centers [+ n_features] + 1, n_outputs)
        Output weights; the last row is the bias, linear-tail rows (if any)
        sit just above it.
    training_loss_ : float
        Root-mean-square training error in original output units.
    """

    def __init__(self, n_centers="all", ridge=1e-8, width_rule=1.0, random_state=0, linear_tail=False):
        self.n_centers = n_centers
        self.ridge = ridge
        self.width_rule = width_rule
        self.random_state = random_state
        self.linear_tail = linear_tail

    @classmethod
    def from_config(cls, cfg: TrainConfig) -> "RBFNetwork":
        return cls(cfg.n_centers, cfg.ridge, cfg.width_rule, cfg.seed, cfg.linear_tail)

    def _features(self, Xs):
        d2 = cdist(Xs, self.centers_, "sqeuclidean")
        phi = np.exp(-d2 / (2 * self.width_**2))
        return np.hstack([phi, Xs]) if self.linear_tail else phi

    def fit(self, X, y):
        TrainConfig(self.n_centers, self.ridge, self.width_rule, self.random_state, self.linear_tail)
        X = check_matrix(X, min_samples=2)
        Y, self._y_1d = check_targets(y, X.shape[0])
        self.n_features_in_ = X.shape[1]
        self.input_scaler_ = MinMaxScaler(feature_range=(-1, 1)).fit(X)
        self.output_scaler_ = MinMaxScaler(feature_range=(-1, 1)).fit(Y)
        Xs = self.input_scaler_.transform(X)
        Ys = self.output_scaler_.transform(Y)

        if self.n_centers == "all" or self.n_centers >= Xs.shape[0]:
            centers = Xs.copy()
        else:
            km = KMeans(n_clusters=self.n_centers, n_init=10, random_state=self.random_state)
            centers = km.fit(Xs).cluster_centers_
        self.centers_ = centers
        if centers.shape[0] > 1:
            scale = float(np.median(pdist(centers)))
        else:
            scale = float(np.median(np.linalg.norm(Xs - centers[0], axis=1)))
        self.width_ = self.width_rule * (scale if scale > 0 else 1.0)

        Phi = self._features(Xs)
        phi_mean = Phi.mean(axis=0)
        y_mean = Ys.mean(axis=0)
        Pc = Phi - phi_mean
        Yc = Ys - y_mean
        m = Pc.shape[1]
        if self.ridge == 0:
            need = min(Pc.shape[0] - 1, m)
            rank = np.linalg.matrix_rank(Pc)
            if rank < need:
                raise RankDeficientError(
                    f"feature matrix has rank {rank} < {need}; use a nonzero ridge"
                )
            W, *_ = linalg.lstsq(Pc, Yc, cond=1e-15)
        else:
            A = Pc.T @ Pc + self.ridge * np.eye(m)
            W = linalg.solve(A, Pc.T @ Yc, assume_a="pos")
        bias = y_mean - phi_mean @ W
        self.weights_ = np.vstack([W, bias])
        self.n_outputs_ = Ys.shape[1]
        fitted = self.predict(X).reshape(Y.shape)
        self.training_loss_ = float(np.sqrt(np.mean((fitted - Y) ** 2)))
        return self

    def decision_scaled(self, X) -> np.ndarray:
        """Network output in scaled units."""
        check_is_fitted(self, "weights_")
        X = check_matrix(X, n_features=self.n_features_in_)
        Xs = self.input_scaler_.transform(X)
        Phi = self._features(Xs)
        return Phi @ self.weights_[:-1] + self.weights_[-1]

    def predict(self, X):
        out = self.output_scaler_.inverse_transform(self.decision_scaled(X))
        return out[:, 0] if self._y_1d else out

    @property
    def input_dim(self) -> int:
        return self.n_features_in_

    @property
    def output_dim(self) -> int:
        return self.n_outputs_

    def to_dict(self) -> dict:
        check_is_fitted(self, "weights_")

        def scaler(s):
            return {"data_min": s.data_min_.tolist(), "data_max": s.data_max_.tolist()}

        return {
            "format": FORMAT,
            "version": VERSION,
            "params": self.get_params(),
            "input_dim": self.n_features_in_,
            "output_dim": self.n_outputs_,
            "y_1d": self._y_1d,
            "input_scaler": scaler(self.input_scaler_),
            "output_scaler": scaler(self.output_scaler_),
            "centers": self.centers_.tolist(),
            "width": self.width_,
            "weights": self.weights_.tolist(),
            "training_loss": self.training_loss_,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "RBFNetwork":
        if data.get("format") != FORMAT:
            raise ValueError("not an RBF network file")
        if data.get("version") != VERSION:
            raise ValueError(f"unsupported RBF file version {data.get('version')}")
        net = cls(**data["params"])

        def scaler(d):
            s = MinMaxScaler(feature_range=(-1, 1))
            return s.fit(np.vstack([d["data_min"], d["data_max"]]))

        net.input_scaler_ = scaler(data["input_scaler"])
        net.output_scaler_ = scaler(data["output_scaler"])
        net.n_features_in_ = int(data["input_dim"])
        net.n_outputs_ = int(data["output_dim"])
        net._y_1d = bool(data["y_1d"])
        net.centers_ = np.asarray(data["centers"], dtype=float)
        net.width_ = float(data["width"])
        net.weights_ = np.asarray(data["weights"], dtype=float)
        net.training_loss_ = float(data["training_loss"])
        return net

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def load(cls, path) -> "RBFNetwork":
        return cls.from_dict(json.loads(Path(path).read_text()))


RbfNet = RBFNetwork


def train(inputs, targets, cfg: TrainConfig = TrainConfig()) -> RBFNetwork:
    return RBFNetwork.from_config(cfg).fit(inputs, targets)


def predict(net: RBFNetwork, x) -> np.ndarray:
    """Output vector for a single input vector."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ValueError("predict expects a single input vector")
    if x.size != net.input_dim:
        raise ValueError(f"input has {x.size} features, network expects {net.input_dim}")
    return np.atleast_1d(net.predict(x[None, :])[0])
