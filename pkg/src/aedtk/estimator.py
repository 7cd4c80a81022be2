"""Scikit-learn style estimators wrapping the feature and network stacks.

`LogMelTransformer` turns waveforms into (3, frames, 50) feature maps;
`ConvNetClassifier` trains an architecture-A/B network on such maps and
predicts clip labels through the patch-averaging inference rule, so the two
compose in a standard Pipeline. X is a sequence (lists are fine, maps may
have different frame counts); y is any label array.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .audio import SAMPLE_RATE, AudioClip
from .features import (
    PATCH_FRAMES,
    extract_features,
    standardization_stats,
    standardize,
)
from .models import build_architecture
from .nnet import Network
from .training import clip_posterior, run_training


def _as_feature_maps(x, bands: int) -> list[np.ndarray]:
    if isinstance(x, np.ndarray) and x.ndim == 4:
        maps = [x[i] for i in range(x.shape[0])]
    else:
        maps = [np.asarray(fm, dtype=np.float32) for fm in x]
    if not maps:
        raise ValueError("X must contain at least one feature map")
    for fm in maps:
        if fm.ndim != 3 or fm.shape[0] != 3 or fm.shape[2] != bands:
            raise ValueError(
                f"feature maps must have shape (3, frames, {bands}); got {fm.shape}"
            )
    return maps


class LogMelTransformer(BaseEstimator, TransformerMixin):
    """Stateless clip-to-feature-map transform.

    Accepts AudioClips or raw 16 kHz sample arrays. `warp` applies the
    piecewise-linear filterbank frequency warp used for augmentation.
    """

    def __init__(self, warp=None):
        self.warp = warp

    def fit(self, X, y=None):
        return self

    def transform(self, X):
        out = []
        for item in X:
            clip = item if isinstance(item, AudioClip) else AudioClip(np.asarray(item), SAMPLE_RATE)
            out.append(extract_features(clip, warp=self.warp))
        return out


class ConvNetClassifier(BaseEstimator, ClassifierMixin):
    """Deep 3x3-convolution network classifier over feature-map inputs.

    fit(X, y) standardizes features with training-set statistics, builds the
    requested architecture, and runs mini-batch SGD with momentum on the
    L1-regularized cross-entropy objective, cropping one random patch per
    map per epoch (or same-class bags when `mil` is "max"/"noisy_or").
    predict(X) averages patch softmax outputs at a 50% shift and takes the
    argmax class.
    """

    def __init__(
        self,
        arch: str = "a",
        epochs: int = 30,
        batch_size: int = 128,
        learning_rate: float = 0.01,
        momentum: float = 0.9,
        lambda_l1: float = 1e-6,
        patch_frames: int = PATCH_FRAMES,
        bands: int = 50,
        width_divisor: int = 1,
        dropout_keep: float = 0.5,
        mil: str = "off",
        bag_size: int = 2,
        standardize: bool = True,
        lr_decay: float = 0.1,
        lr_patience: int = 3,
        eval_every: int = 1,
        posterior: str = "mean",
        random_state: int = 0,
    ):
        self.arch = arch
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.momentum = momentum
        self.lambda_l1 = lambda_l1
        self.patch_frames = patch_frames
        self.bands = bands
        self.width_divisor = width_divisor
        self.dropout_keep = dropout_keep
        self.mil = mil
        self.bag_size = bag_size
        self.standardize = standardize
        self.lr_decay = lr_decay
        self.lr_patience = lr_patience
        self.eval_every = eval_every
        self.posterior = posterior
        self.random_state = random_state

    def fit(self, X, y, eval_set=None, callbacks=()):
        maps = _as_feature_maps(X, self.bands)
        y = np.asarray(y)
        if len(y) != len(maps):
            raise ValueError(f"X has {len(maps)} maps but y has {len(y)} labels")
        self.classes_, labels = np.unique(y, return_inverse=True)
        if len(self.classes_) < 2:
            raise ValueError("need at least two classes")

        if self.standardize:
            self.feature_mean_, self.feature_std_ = standardization_stats(maps)
        else:
            self.feature_mean_ = np.zeros((3, self.bands), dtype=np.float32)
            self.feature_std_ = np.ones((3, self.bands), dtype=np.float32)
        maps = [standardize(fm, self.feature_mean_, self.feature_std_) for fm in maps]

        spec = build_architecture(
            self.arch,
            num_classes=len(self.classes_),
            patch_frames=self.patch_frames,
            bands=self.bands,
            width_divisor=self.width_divisor,
            dropout_keep=self.dropout_keep,
        )
        self.network_ = Network(spec, seed=self.random_state)

        eval_fn = None
        if eval_set is not None:
            x_val, y_val = eval_set
            val_maps = _as_feature_maps(x_val, self.bands)
            val_idx = np.searchsorted(self.classes_, np.asarray(y_val))

            def eval_fn(network):
                pred = self._predict_indices(val_maps, network)
                return float(np.mean(pred == val_idx))

        self.history_ = run_training(
            self.network_,
            maps,
            labels,
            epochs=self.epochs,
            batch_size=self.batch_size,
            learning_rate=self.learning_rate,
            momentum=self.momentum,
            lambda_l1=self.lambda_l1,
            patch_frames=self.patch_frames,
            mil=self.mil,
            bag_size=self.bag_size,
            seed=self.random_state,
            lr_decay=self.lr_decay,
            lr_patience=self.lr_patience,
            eval_fn=eval_fn,
            eval_every=self.eval_every,
            callbacks=callbacks,
        )
        return self

    def _posterior_matrix(self, maps, network=None) -> np.ndarray:
        network = network or self.network_
        rows = []
        for fm in maps:
            fm = standardize(fm, self.feature_mean_, self.feature_std_)
            rows.append(clip_posterior(network, fm, self.patch_frames, self.posterior))
        return np.stack(rows)

    def _predict_indices(self, maps, network=None) -> np.ndarray:
        return self._posterior_matrix(maps, network).argmax(axis=1)

    def predict_proba(self, X) -> np.ndarray:
        check_is_fitted(self, "network_")
        return self._posterior_matrix(_as_feature_maps(X, self.bands))

    def predict(self, X) -> np.ndarray:
        check_is_fitted(self, "network_")
        return self.classes_[self._predict_indices(_as_feature_maps(X, self.bands))]
