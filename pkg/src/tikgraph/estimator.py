"""Scikit-learn style estimators wrapping the training module.

Hyperparameters mirror TrainConfig so get_params/set_params (inherited from
BaseEstimator) expose every knob to pipelines and search utilities. fit
accepts a list of GraphSample; labels live inside the samples, matching the
dataset persistence format, so y is accepted but optional.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator

from .datasets import GraphSample, split_dataset
from .model import SolverOpts
from .training import TrainConfig, export_explanation, forward_dataset, train
from .validation import check_samples


class _BaseTikhonovEstimator(BaseEstimator):
    _loss = "cross_entropy"

    def __init__(
        self,
        hidden=8,
        channels=1,
        degree=5,
        filter_init="linear",
        qnet_layers=5,
        qnet_order=3,
        qnet_hidden=8,
        q_init=0.1,
        pooling="mean_sum_max_layernorm",
        learning_rate=5e-3,
        batch_size=128,
        patience=50,
        max_epochs=500,
        pcg_tol=1e-6,
        pcg_max_iter=30,
        q_min=1e-10,
        q_max=1e10,
        seed=0,
    ):
        self.hidden = hidden
        self.channels = channels
        self.degree = degree
        self.filter_init = filter_init
        self.qnet_layers = qnet_layers
        self.qnet_order = qnet_order
        self.qnet_hidden = qnet_hidden
        self.q_init = q_init
        self.pooling = pooling
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.patience = patience
        self.max_epochs = max_epochs
        self.pcg_tol = pcg_tol
        self.pcg_max_iter = pcg_max_iter
        self.q_min = q_min
        self.q_max = q_max
        self.seed = seed

    def _config(self) -> TrainConfig:
        return TrainConfig(
            learning_rate=self.learning_rate,
            batch_size=self.batch_size,
            patience=self.patience,
            max_epochs=self.max_epochs,
            seed=self.seed,
            pcg_tol=self.pcg_tol,
            pcg_max_iter=self.pcg_max_iter,
            q_min=self.q_min,
            q_max=self.q_max,
            pooling=self.pooling,
            loss=self._loss,
            hidden=self.hidden,
            channels=self.channels,
            degree=self.degree,
            filter_init=self.filter_init,
            qnet_layers=self.qnet_layers,
            qnet_order=self.qnet_order,
            qnet_hidden=self.qnet_hidden,
            q_init=self.q_init,
        )

    def fit(self, X, y=None, val_samples=None, test_samples=None):
        """Train on a list of GraphSample.

        When validation/test splits are not supplied, an internal stratified
        80/10/10 split of X is used.
        """
        samples = check_samples(X, "X")
        if y is not None:
            samples = [
                GraphSample(s.graph, s.features, label, s.meta)
                for s, label in zip(samples, y)
            ]
        if val_samples is None or test_samples is None:
            tr, va, te = split_dataset(
                samples, seed=self.seed, stratify=self._loss == "cross_entropy"
            )
            val_samples = va if val_samples is None else check_samples(val_samples)
            test_samples = te if test_samples is None else check_samples(test_samples)
            samples = tr
        else:
            val_samples = check_samples(val_samples, "val_samples")
            test_samples = check_samples(test_samples, "test_samples")
        result = train(samples, val_samples, test_samples, self._config())
        self.params_ = result.params
        self.encoding_ = result.encoding
        self.report_ = result.report
        return self

    def _check_fitted(self):
        if not hasattr(self, "params_"):
            raise RuntimeError("estimator is not fitted; call fit first")

    def _raw_predictions(self, X) -> np.ndarray:
        self._check_fitted()
        samples = check_samples(X, "X")
        opts = SolverOpts(tol=self.pcg_tol, max_iter=self.pcg_max_iter)
        return forward_dataset(self.params_, samples, opts, self.batch_size)

    def predict(self, X):
        self._check_fitted()
        return self.encoding_.decode_predictions(self._raw_predictions(X))

    def explain(self, sample: GraphSample) -> dict:
        """The model's built-in explanation for one graph: per-node q values
        and the learned filter curve, plus the prediction."""
        self._check_fitted()
        opts = SolverOpts(tol=self.pcg_tol, max_iter=self.pcg_max_iter)
        return export_explanation(self.params_, self.encoding_, sample, opts)


class TikhonovGraphClassifier(_BaseTikhonovEstimator):
    """Graph classifier with a single interpretable Tikhonov propagation layer."""

    _loss = "cross_entropy"

    def predict_proba(self, X) -> np.ndarray:
        logits = self._raw_predictions(X)
        shifted = logits - logits.max(axis=1, keepdims=True)
        expd = np.exp(shifted)
        return expd / expd.sum(axis=1, keepdims=True)

    def score(self, X, y=None) -> float:
        samples = check_samples(X, "X")
        labels = [s.label for s in samples] if y is None else list(y)
        return self.encoding_.metric(self._raw_predictions(samples), labels)


class TikhonovGraphRegressor(_BaseTikhonovEstimator):
    """Graph regressor variant; trains with MAE loss by default."""

    _loss = "mae"

    def score(self, X, y=None) -> float:
        """Negative MAE (higher is better, sklearn convention)."""
        samples = check_samples(X, "X")
        labels = [s.label for s in samples] if y is None else list(y)
        return -self.encoding_.metric(self._raw_predictions(samples), labels)
