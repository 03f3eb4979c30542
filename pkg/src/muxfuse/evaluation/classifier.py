from __future__ import annotations

import logging

import numpy as np
from scipy.special import softmax
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from muxfuse.ndauto import Adam, Tape, Tensor
from muxfuse.ndauto import ops
from muxfuse.objective import cross_entropy_loss

logger = logging.getLogger(__name__)


class SoftmaxRegression(ClassifierMixin, BaseEstimator):
    """Multinomial logistic regression trained with Adam on the ndauto tape.

    Parameters
    ----------
    lr : float, default=0.01
        Adam learning rate.
    steps : int, default=300
        Full-batch optimization steps.
    weight_decay : float, default=1e-4
        L2 penalty on the weights (not the bias).
    random_state : int, default=0
        Seed of the weight initialization.

    Attributes
    ----------
    classes_ : ndarray of shape (n_classes,)
        Sorted class labels seen during fit.
    coef_ : ndarray of shape (n_features, n_classes)
    intercept_ : ndarray of shape (n_classes,)
    loss_curve_ : list of float
    """

    def __init__(self, lr: float = 0.01, steps: int = 300, weight_decay: float = 1e-4, random_state: int = 0):
        self.lr = lr
        self.steps = steps
        self.weight_decay = weight_decay
        self.random_state = random_state

    def fit(self, X, y) -> SoftmaxRegression:
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y)
        self.classes_, encoded = np.unique(y, return_inverse=True)
        self.n_features_in_ = X.shape[1]
        rng = np.random.default_rng(self.random_state)

        x = Tensor(X)
        weight = Tensor(rng.normal(scale=0.01, size=(X.shape[1], self.classes_.size)), requires_grad=True, name="coef")
        bias = Tensor(np.zeros((1, self.classes_.size)), requires_grad=True, name="intercept")
        weight_opt = Adam([weight], lr=self.lr, weight_decay=self.weight_decay)
        bias_opt = Adam([bias], lr=self.lr)
        rows = np.arange(X.shape[0])

        self.loss_curve_: list[float] = []
        for _ in range(self.steps):
            with Tape() as tape:
                logits = ops.add(ops.matmul(x, weight), bias)
                loss = cross_entropy_loss(logits, encoded, rows)
                tape.backward(loss)
            self.loss_curve_.append(loss.item())
            weight_opt.step()
            bias_opt.step()

        self.coef_ = weight.values.copy()
        self.intercept_ = bias.values[0].copy()
        logger.debug(f"Softmax regression fitted: {X.shape[0]} rows, {self.classes_.size} classes, "
                     f"final loss {self.loss_curve_[-1] if self.loss_curve_ else float('nan'):.4f}")
        return self

    def decision_function(self, X) -> np.ndarray:
        check_is_fitted(self, "coef_")
        return np.asarray(X, dtype=np.float64) @ self.coef_ + self.intercept_

    def predict_proba(self, X) -> np.ndarray:
        return softmax(self.decision_function(X), axis=1)

    def predict(self, X) -> np.ndarray:
        return self.classes_[np.argmax(self.decision_function(X), axis=1)]
