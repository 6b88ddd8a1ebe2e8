"""Scikit-learn style front end over the federated engine.

``fit`` consumes a list of FeatureDataset (one per participating domain);
``predict``/``transform`` then operate on plain (n_samples, n_features)
arrays, so the fitted model slots into the usual pipelines and model
selection tooling via get_params/set_params.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin

from .adapter import forward
from .errors import ConfigError
from .evaluation import predict as _predict
from .federation import run_federation
from .numerics import as_matrix


class FederatedAdapterClassifier(ClassifierMixin, BaseEstimator):
    """Trains the attention adapter across federated clients, then predicts
    by cosine similarity against the per-class text features.

    Parameters mirror the engine: ``algorithm`` is one of "fedclip",
    "fedprox-adapter" or "zero-shot" ("local-only" trains one model per
    client and has no single predictor; drive it through the engine or the
    CLI instead).
    """

    def __init__(self, algorithm: str = "fedclip", lr: float = 5e-4,
                 batch_size: int = 32, local_epochs: int = 1, rounds: int = 200,
                 scale: float = 100.0, mu: float = 0.01, seed: int = 0):
        self.algorithm = algorithm
        self.lr = lr
        self.batch_size = batch_size
        self.local_epochs = local_epochs
        self.rounds = rounds
        self.scale = scale
        self.mu = mu
        self.seed = seed

    def fit(self, datasets, y=None):
        """Run the federated rounds over ``datasets`` and keep the adapter
        selected by mean validation accuracy."""
        if self.algorithm == "local-only":
            raise ConfigError(
                "local-only keeps one adapter per client; use run_federation directly")
        run = run_federation(
            list(datasets),
            algorithm=self.algorithm,
            lr=self.lr,
            batch_size=self.batch_size,
            local_epochs=self.local_epochs,
            rounds=self.rounds,
            scale=self.scale,
            mu=self.mu,
            seed=self.seed,
        )
        first = run.clients[0].dataset
        self.run_ = run
        self.adapter_ = run.best_adapter
        self.class_names_ = list(first.class_names)
        self.class_text_features_ = first.class_text_features
        self.classes_ = np.arange(first.n_classes)
        self.n_features_in_ = first.feature_dim
        return self

    def _check_fitted(self):
        if not hasattr(self, "class_text_features_"):
            raise ConfigError("this estimator has not been fitted yet")

    def predict(self, X) -> np.ndarray:
        self._check_fitted()
        X = self._validate(X)
        return _predict(self.adapter_, X, self.class_text_features_, self.scale)

    def transform(self, X) -> np.ndarray:
        """Adapted features (attention times input); raw features when the
        fitted model is zero-shot."""
        self._check_fitted()
        X = self._validate(X)
        if self.adapter_ is None:
            return X.copy()
        return forward(self.adapter_, X).adapted

    def _validate(self, X) -> np.ndarray:
        X = as_matrix(X, "X")
        if X.shape[1] != self.n_features_in_:
            raise ConfigError(
                f"X has {X.shape[1]} features, model was fitted with "
                f"{self.n_features_in_}")
        return X
