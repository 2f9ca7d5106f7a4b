"""Module with the observed-data structures shared by estimators,
diagnostics and simulations.
"""

from dataclasses import dataclass, field
from typing import Literal, Optional, Sequence, Union

import numpy as np
from typing_extensions import Self

from ppikit.utils import EmptyUnlabeled, InsufficientLabeled, InvalidSpec, \
    MissingPredictions

__all__ = ["Dataset", "PredictionSet", "Pretrained", "CrossFitted",
           "LossTarget", "LabeledView", "UnlabeledView", "split_views"]


def _frozen(values, dtype=np.float64) -> np.ndarray:
    """Return a read-only copy of `values`."""
    arr = np.array(values, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


class Dataset:
    """Observed data: covariates for every row, outcomes for labeled rows
    only, and the label indicator.

    Outcomes of unlabeled rows are never stored, so no estimator can read
    them.  Instances are immutable.
    """
    @property
    def covariates(self) -> np.ndarray:
        """Read-only (n, p) covariate matrix."""
        return self._covariates

    @property
    def covariate_names(self) -> list[str]:
        """Names of the covariate columns."""
        return list(self._covariate_names)

    @property
    def label_indicator(self) -> np.ndarray:
        """Read-only boolean vector, True for labeled rows (S=1)."""
        return self._labels

    @property
    def labeled_outcome(self) -> np.ndarray:
        """Outcomes of labeled rows, in row order."""
        return self._labeled_outcome

    @property
    def outcome(self) -> np.ndarray:
        """Outcome per row with NaN on unlabeled rows."""
        out = np.full(self.n, np.nan)
        out[self._labels] = self._labeled_outcome
        out.setflags(write=False)
        return out

    @property
    def row_id(self) -> np.ndarray:
        """Integer identifier per row."""
        return self._row_id

    @property
    def rejected_rows(self) -> int:
        """Number of input rows dropped for missing covariates."""
        return self._rejected_rows

    @property
    def n(self) -> int:
        return self._covariates.shape[0]

    @property
    def p(self) -> int:
        return self._covariates.shape[1]

    @property
    def n_l(self) -> int:
        return int(self._labels.sum())

    @property
    def n_u(self) -> int:
        return self.n - self.n_l

    @property
    def labeled_fraction(self) -> float:
        return self.n_l / self.n

    def __init__(
        self,
        covariates: Union[np.ndarray, Sequence],
        outcome: Union[np.ndarray, Sequence],
        label_indicator: Union[np.ndarray, Sequence],
        row_id: Optional[Union[np.ndarray, Sequence]] = None,
        covariate_names: Optional[Sequence[str]] = None,
        rejected_rows: int = 0
    ) -> None:
        """Representation of the observed data.

        Parameters
        ----------
        covariates : array-like of shape (n, p) or (n,)
            Covariates of every row.  Must not contain missing entries.

        outcome : array-like of shape (n,)
            Outcomes.  Only entries of labeled rows are read; the values of
            unlabeled rows are discarded.

        label_indicator : array-like of shape (n,)
            0/1 indicator of an observed outcome.

        row_id : array-like of shape (n,) (optional, default=None)
            Unique integer identifiers.  Defaults to 0, ..., n-1.

        covariate_names : sequence of str (optional, default=None)
            Names of the covariates.  Defaults to x1, ..., xp.

        rejected_rows : int (optional, default=0)
            Number of input rows dropped for missing covariates during
            ingestion.

        Raises
        ------
        InvalidSpec
            If shapes disagree, covariates are incomplete, labels are not
            binary, labeled rows lack outcomes or row IDs repeat.
        """
        X = np.array(covariates, dtype=np.float64)
        if X.ndim == 1:
            X = X.reshape(-1, 1)
        if X.ndim != 2 or X.shape[0] == 0:
            raise InvalidSpec("Covariates must be a non-empty 2-D matrix")
        n = X.shape[0]
        if not np.all(np.isfinite(X)):
            bad = int((~np.isfinite(X)).any(axis=1).sum())
            msg = f"Covariates of {bad:,} row(s) are missing or not finite; "\
                  "assumption (A3) requires complete covariates"
            raise InvalidSpec(msg)

        labels = np.asarray(label_indicator)
        if labels.shape != (n,):
            raise InvalidSpec(f"Label indicator must have length {n}")
        if not np.all(np.isin(labels, (0, 1))):
            raise InvalidSpec("Label indicator must only contain 0 and 1")
        labels = labels.astype(bool)

        y = np.asarray(outcome, dtype=np.float64)
        if y.shape != (n,):
            raise InvalidSpec(f"Outcome must have length {n}")
        labeled_y = y[labels]
        if not np.all(np.isfinite(labeled_y)):
            raise InvalidSpec("Every labeled row requires an observed outcome")

        if row_id is None:
            row_id = np.arange(n)
        ids = np.asarray(row_id)
        if ids.shape != (n,) or np.unique(ids).size != n:
            raise InvalidSpec(f"Row IDs must be {n} unique integers")

        if covariate_names is None:
            covariate_names = [f"x{j + 1}" for j in range(X.shape[1])]
        if len(covariate_names) != X.shape[1]:
            raise InvalidSpec("One name per covariate column is required")

        self._covariates = _frozen(X)
        self._labels = _frozen(labels, dtype=bool)
        self._labeled_outcome = _frozen(labeled_y)
        self._row_id = _frozen(ids, dtype=np.int64)
        self._covariate_names = tuple(str(c) for c in covariate_names)
        self._rejected_rows = int(rejected_rows)

    def __repr__(self) -> str:
        return f"Dataset(n={self.n}, p={self.p}, n_l={self.n_l}, n_u={self.n_u})"

    def __eq__(self, other) -> bool:
        if not isinstance(other, Dataset):
            return NotImplemented
        return (self._covariate_names == other._covariate_names
                and np.array_equal(self._covariates, other._covariates)
                and np.array_equal(self._labels, other._labels)
                and np.array_equal(self._labeled_outcome, other._labeled_outcome)
                and np.array_equal(self._row_id, other._row_id))

    __hash__ = None

    def require_estimable(self) -> None:
        """Raise unless the dataset has at least two labeled and one
        unlabeled row.
        """
        if self.n_l < 2:
            msg = f"At least 2 labeled rows are required, found {self.n_l}"
            raise InsufficientLabeled(msg)
        if self.n_u < 1:
            raise EmptyUnlabeled("The dataset contains no unlabeled rows")


@dataclass(frozen=True)
class Pretrained:
    """Predictions of a model trained outside the dataset."""
    kind: Literal["Pretrained"] = "Pretrained"


@dataclass(frozen=True)
class CrossFitted:
    """Cross-fitted predictions: `fold_assignment[i]` is the fold of the
    i-th labeled row, whose prediction comes from the model trained
    without that fold.
    """
    fold_assignment: np.ndarray = field(repr=False)
    model_count: int
    kind: Literal["CrossFitted"] = "CrossFitted"

    def __post_init__(self):
        object.__setattr__(self, "fold_assignment",
                           _frozen(self.fold_assignment, dtype=np.int64))


class PredictionSet:
    """Predicted outcomes for every row with their provenance."""
    @property
    def values(self) -> np.ndarray:
        """Read-only vector of predictions."""
        return self._values

    @property
    def provenance(self) -> Union[Pretrained, CrossFitted]:
        """How the predictions were produced."""
        return self._provenance

    @property
    def is_crossfitted(self) -> bool:
        return isinstance(self._provenance, CrossFitted)

    def __init__(
        self,
        values: Union[np.ndarray, Sequence],
        provenance: Optional[Union[Pretrained, CrossFitted]] = None
    ) -> None:
        """Representation of per-row predictions.

        Raises
        ------
        MissingPredictions
            If any prediction is missing or not finite.
        """
        values = np.asarray(values, dtype=np.float64).ravel()
        if not np.all(np.isfinite(values)):
            missing = int((~np.isfinite(values)).sum())
            msg = f"Predictions are required for every row, {missing:,} missing"
            raise MissingPredictions(msg)
        self._values = _frozen(values)
        self._provenance = provenance or Pretrained()

    def __len__(self) -> int:
        return self._values.size

    def __repr__(self) -> str:
        return f"PredictionSet(n={len(self)}, provenance={self._provenance.kind})"

    def check_against(self, dataset: Dataset) -> None:
        """Raise `MissingPredictions` unless there is one prediction per row
        of `dataset`.
        """
        if len(self) != dataset.n:
            msg = f"Expected {dataset.n:,} predictions, got {len(self):,}"
            raise MissingPredictions(msg)


@dataclass(frozen=True)
class LossTarget:
    """The estimand: a mean or the coefficients of a linear regression."""
    kind: Literal["Mean", "LinearRegression"] = "Mean"
    include_intercept: bool = True

    def __post_init__(self):
        if self.kind not in ("Mean", "LinearRegression"):
            raise InvalidSpec(f"Unknown target kind '{self.kind}'")

    @classmethod
    def mean(cls) -> Self:
        return cls("Mean")

    @classmethod
    def linear_regression(cls, include_intercept: bool = True) -> Self:
        return cls("LinearRegression", include_intercept)

    @property
    def is_mean(self) -> bool:
        return self.kind == "Mean"

    def design(self, covariates: np.ndarray) -> np.ndarray:
        """Design matrix of the target: a column of ones for the mean,
        the covariates (with leading intercept) for the regression.
        """
        n = covariates.shape[0]
        if self.is_mean:
            return np.ones((n, 1))
        if covariates.shape[1] < 1:
            raise InvalidSpec("Linear regression requires at least one covariate")
        if self.include_intercept:
            return np.column_stack([np.ones(n), covariates])
        return np.asarray(covariates, dtype=np.float64)

    def coefficient_names(self, covariate_names: Sequence[str]) -> list[str]:
        """Names of the entries of theta."""
        if self.is_mean:
            return ["mean"]
        names = list(covariate_names)
        return ["intercept"] + names if self.include_intercept else names

    def __str__(self) -> str:
        if self.is_mean:
            return "mean"
        return "ols" if self.include_intercept else "ols (no intercept)"


@dataclass(frozen=True)
class LabeledView:
    """Rows with S=1: covariates, outcomes and optional predictions."""
    row_id: np.ndarray = field(repr=False)
    covariates: np.ndarray = field(repr=False)
    outcome: np.ndarray = field(repr=False)
    predictions: Optional[np.ndarray] = field(default=None, repr=False)

    def __len__(self) -> int:
        return self.row_id.size


@dataclass(frozen=True)
class UnlabeledView:
    """Rows with S=0: covariates and optional predictions."""
    row_id: np.ndarray = field(repr=False)
    covariates: np.ndarray = field(repr=False)
    predictions: Optional[np.ndarray] = field(default=None, repr=False)

    def __len__(self) -> int:
        return self.row_id.size


def split_views(
        dataset: Dataset,
        predictions: Optional[PredictionSet] = None
) -> tuple[LabeledView, UnlabeledView]:
    """Split a dataset into read-only labeled and unlabeled views that keep
    the original row order and row IDs.
    """
    mask = dataset.label_indicator
    yhat_l = yhat_u = None
    if predictions is not None:
        predictions.check_against(dataset)
        yhat_l = _frozen(predictions.values[mask])
        yhat_u = _frozen(predictions.values[~mask])
    labeled = LabeledView(_frozen(dataset.row_id[mask], np.int64),
                          _frozen(dataset.covariates[mask]),
                          dataset.labeled_outcome, yhat_l)
    unlabeled = UnlabeledView(_frozen(dataset.row_id[~mask], np.int64),
                              _frozen(dataset.covariates[~mask]), yhat_u)
    return labeled, unlabeled
