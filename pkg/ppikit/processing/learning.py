"""Module with the prediction models trained inside ppikit."""

from typing import Optional

import numpy as np
from sklearn.base import RegressorMixin
from sklearn.ensemble import GradientBoostingRegressor
from sklearn.linear_model import Ridge

from ppikit.classes import LearnerSpec
from ppikit.utils import DegenerateTraining, DimensionMismatch

__all__ = ["Predictor", "fit_learner"]


class Predictor:
    """A fitted learner: a pure function from covariate rows to reals."""
    def __init__(self, spec: LearnerSpec, n_features: int,
                 model: Optional[RegressorMixin] = None,
                 constant: Optional[float] = None) -> None:
        self.spec = spec
        self.n_features = n_features
        self._model = model
        self._constant = constant

    def __repr__(self) -> str:
        return f"Predictor({self.spec.kind}, p={self.n_features})"

    def __call__(self, X: np.ndarray) -> np.ndarray:
        return self.predict(X)

    @property
    def model(self) -> Optional[RegressorMixin]:
        """The fitted scikit-learn estimator, None for constant targets."""
        return self._model

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X.reshape(-1, self.n_features)
        if X.shape[1] != self.n_features:
            msg = f"Predictor expects {self.n_features} covariates, got {X.shape[1]}"
            raise DimensionMismatch(msg)
        if self._model is None:
            return np.full(X.shape[0], self._constant)
        return self._model.predict(X).astype(np.float64)


def _build_model(spec: LearnerSpec) -> RegressorMixin:
    if spec.kind == "Ridge":
        # Intercept is fit unpenalized by centering
        return Ridge(alpha=spec.penalty, fit_intercept=True, solver="svd")
    # Depth-1 trees: candidate thresholds are midpoints of sorted unique values
    return GradientBoostingRegressor(
        loss="squared_error", criterion="squared_error", max_depth=1,
        n_estimators=spec.rounds, learning_rate=spec.learning_rate,
        min_samples_leaf=spec.min_leaf, subsample=1.0, random_state=0)


def fit_learner(spec: LearnerSpec, X: np.ndarray, Y: np.ndarray) -> Predictor:
    """Fit a learner to covariates `X` and outcomes `Y`.

    Parameters
    ----------
    spec : LearnerSpec
        Ridge(penalty): coefficients (X'X + penalty I)^-1 X'Y with an
        unpenalized intercept.  GBStumps(rounds, learning_rate, min_leaf):
        greedy squared-error boosting of depth-1 trees, each split leaving
        at least `min_leaf` rows per side.

    X : array-like of shape (m, p)
        Training covariates.

    Y : array-like of shape (m,)
        Training outcomes.

    Returns
    -------
    predictor : Predictor
        Constant-Y training data gives the constant predictor.

    Raises
    ------
    DegenerateTraining
        If there are fewer than max(2, 2 * min_leaf) rows or non-finite
        values.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    Y = np.asarray(Y, dtype=np.float64).ravel()
    if X.shape[0] != Y.size:
        raise DimensionMismatch(f"{X.shape[0]} covariate rows but {Y.size} outcomes")
    if Y.size < spec.min_training_rows:
        msg = f"{spec.kind} needs at least {spec.min_training_rows} training rows, "\
              f"got {Y.size}"
        raise DegenerateTraining(msg)
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(Y))):
        raise DegenerateTraining("Training data contain missing or infinite values")
    if np.ptp(Y) == 0:
        return Predictor(spec, X.shape[1], constant=float(Y[0]))
    model = _build_model(spec).fit(X, Y)
    return Predictor(spec, X.shape[1], model=model)
