"""scikit-learn wrapper around the flat-vector MLP, so a single device's model
can be dropped into pipelines, cross-validation and grid searches."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.multiclass import check_classification_targets
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .model import Dataset, ModelSpec, ParameterVector, forward, init_params, predict, train_local


class MLPClassifier(ClassifierMixin, BaseEstimator):
    """ReLU MLP with softmax output trained by plain mini-batch SGD.

    Parameters
    ----------
    hidden_dims : tuple of int, default=(64,)
    epochs : int, default=5
    batch_size : int, default=32
    lr : float, default=0.1
    random_state : int, default=0
        Seeds both the initial weights and the per-epoch shuffles.
    warm_start : bool, default=False
        Continue from ``params_`` on repeated ``fit`` calls.
    """

    def __init__(self, hidden_dims=(64,), epochs=5, batch_size=32, lr=0.1, random_state=0, warm_start=False):
        self.hidden_dims = hidden_dims
        self.epochs = epochs
        self.batch_size = batch_size
        self.lr = lr
        self.random_state = random_state
        self.warm_start = warm_start

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=np.float64)
        check_classification_targets(y)
        classes, encoded = np.unique(y, return_inverse=True)
        if len(classes) < 2:
            raise ValueError("MLPClassifier needs at least two classes in y")
        spec = ModelSpec(X.shape[1], tuple(self.hidden_dims), len(classes))
        reuse = (
            self.warm_start
            and hasattr(self, "params_")
            and self.spec_ == spec
            and np.array_equal(self.classes_, classes)
        )
        start = self.params_ if reuse else init_params(spec, self.random_state)
        self.params_ = train_local(spec, start, Dataset(X, encoded), self.epochs, self.batch_size,
                                   self.lr, self.random_state)
        self.spec_ = spec
        self.classes_ = classes
        self.n_features_in_ = X.shape[1]
        return self

    def set_weights(self, values):
        """Load a flat weight vector (for example, an aggregated model)."""
        check_is_fitted(self, "params_")
        self.params_ = ParameterVector.for_spec(self.spec_, values)
        return self

    def predict_proba(self, X):
        check_is_fitted(self, "params_")
        X = check_array(X, dtype=np.float64)
        return forward(self.spec_, self.params_, X)

    def predict(self, X):
        check_is_fitted(self, "params_")
        X = check_array(X, dtype=np.float64)
        return self.classes_[predict(self.spec_, self.params_, X)]
