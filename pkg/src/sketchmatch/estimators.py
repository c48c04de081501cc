"""scikit-learn compatible estimators wrapping the networks.

``MlffClassifier`` is a plain feed-forward classifier over feature vectors.
``SketchRecognizer`` trains the generator/discriminator pair on
photo/sketch pairs and then identifies probe sketches against an enrolled
photo gallery.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from . import tensor as T
from .config import RunConfig
from .matching import build_gallery, embed_sketches, identify, synthesize_batch
from .model_io import save_weights
from .networks import Mlff, mlff_classify, mlff_logits
from .params import adam_step
from .training import TrainingData, train


class MlffClassifier(ClassifierMixin, BaseEstimator):
    def __init__(self, hidden_layer_sizes=(64,), lr=1e-2, max_iter=200, random_state=0):
        self.hidden_layer_sizes = hidden_layer_sizes
        self.lr = lr
        self.max_iter = max_iter
        self.random_state = random_state

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=np.float64)
        self.classes_, codes = np.unique(y, return_inverse=True)
        self.n_features_in_ = X.shape[1]
        self.model_ = Mlff.create(X.shape[1], len(self.classes_), self.hidden_layer_sizes,
                                  seed=self.random_state)
        onehot = np.eye(len(self.classes_))[codes]
        xt = T.Tensor(X)
        self.loss_curve_ = []
        for _ in range(self.max_iter):
            logp = T.log_softmax(mlff_logits(self.model_, xt))
            loss = -T.mean(T.tsum(logp * onehot, axis=1))
            self.model_.params.zero_grad()
            loss.backward()
            adam_step(self.model_.params, self.lr)
            self.loss_curve_.append(loss.item())
        return self

    def predict_proba(self, X):
        check_is_fitted(self, "model_")
        X = check_array(X, dtype=np.float64)
        return mlff_classify(self.model_, X).data

    def predict(self, X):
        proba = self.predict_proba(X)
        return self.classes_[np.argmax(proba, axis=1)]


def _as_images(X):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 3:
        X = X[:, None]
    if X.ndim != 4 or X.shape[1] != 1:
        raise ValueError(f"expected images shaped [N,H,W] or [N,1,H,W], got {X.shape}")
    return X


class SketchRecognizer(BaseEstimator):
    """Photo-to-sketch synthesis plus embedding-based identification.

    ``fit`` takes ``X`` shaped ``[N,2,H,W]`` holding (photo, sketch) pairs and
    identity labels ``y``; the first photo of each identity is enrolled as
    the gallery. ``predict`` maps probe sketches to gallery identities.
    """

    def __init__(self, image_size=128, gen_channels=(4, 8, 16, 32), disc_channels=(4, 8, 16, 32),
                 feature_dim=1024, patch_mode=False, patch_size=32, patch_stride=16,
                 lambda_adv=1.0, lambda_rec=100.0, lambda_trip=1.0, lambda_attr=0.5, margin=0.5,
                 optimizer="adam", lr=1e-2, warmup_steps=0, lr_schedule="constant", epochs=10, max_steps=0, batch_size=4,
                 seed=0, precision="f64"):
        self.image_size = image_size
        self.gen_channels = gen_channels
        self.disc_channels = disc_channels
        self.feature_dim = feature_dim
        self.patch_mode = patch_mode
        self.patch_size = patch_size
        self.patch_stride = patch_stride
        self.lambda_adv = lambda_adv
        self.lambda_rec = lambda_rec
        self.lambda_trip = lambda_trip
        self.lambda_attr = lambda_attr
        self.margin = margin
        self.optimizer = optimizer
        self.lr = lr
        self.warmup_steps = warmup_steps
        self.lr_schedule = lr_schedule
        self.epochs = epochs
        self.max_steps = max_steps
        self.batch_size = batch_size
        self.seed = seed
        self.precision = precision

    def to_config(self):
        return RunConfig(**self.get_params())

    @property
    def _patch(self):
        return (self.patch_size, self.patch_stride) if self.patch_mode else None

    def fit(self, X, y, attributes=None):
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 4 or X.shape[1] != 2:
            raise ValueError(f"X must hold (photo, sketch) pairs shaped [N,2,H,W], got {X.shape}")
        y = np.asarray(y)
        config = self.to_config()
        attrs = None if attributes is None else np.asarray(attributes, dtype=np.float64)
        data = TrainingData(X[:, :1], X[:, 1:], y, attrs)
        result = train(config, data)
        self.models_ = result.models
        self.metrics_ = result.metrics
        first = {}
        for i, ident in enumerate(y.tolist()):
            first.setdefault(ident, i)
        idx = list(first.values())
        self.enroll(X[idx, 0], y[idx])
        return self

    def enroll(self, photos, identities):
        """Replace the gallery with ``photos`` labelled ``identities``."""
        check_is_fitted(self, "models_")
        self.gallery_ = build_gallery(self.models_.generator, self.models_.discriminator,
                                      _as_images(photos), list(identities), self._patch)
        self.classes_ = np.asarray(self.gallery_.identities)
        return self

    def transform(self, photos):
        """Synthesized sketches ``[N,H,W]``."""
        check_is_fitted(self, "models_")
        return synthesize_batch(self.models_.generator, _as_images(photos), self._patch)[:, 0]

    def embed(self, sketches):
        check_is_fitted(self, "models_")
        return embed_sketches(self.models_.discriminator, _as_images(sketches))

    def rank(self, sketches, y=None):
        check_is_fitted(self, "gallery_")
        return identify(self.gallery_, self.embed(sketches), y)

    def predict(self, sketches):
        return np.asarray([r.ranked[0][0] for r in self.rank(sketches)])

    def score(self, sketches, y):
        """Rank-1 identification accuracy."""
        return float(np.mean(self.predict(sketches) == np.asarray(y)))

    def save(self, path):
        check_is_fitted(self, "models_")
        save_weights(self.models_.params(), path)
