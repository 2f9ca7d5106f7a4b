"""Module with the complete-case, PPI and PPI++ estimators of means and
linear-regression coefficients.

All regression estimators solve the linear estimating equation of the
lambda-weighted squared-loss objective

    [lambda H_u + (1 - lambda) H_l] theta
        = lambda (1/n_u) sum_u X Yhat + (1/n_l) sum_l X (Y - lambda Yhat),

where H_u, H_l are the averaged Gram matrices of the unlabeled and labeled
rows.  lambda = 0 is ordinary least squares on the labeled rows, lambda = 1
is PPI.
"""

from typing import Optional

import numpy as np
import pandas as pd

from ppikit.classes import ConfidenceInterval, Dataset, Estimate, LambdaPolicy, \
    LossTarget, PredictionSet, VarianceGap
from ppikit.establishing import get_logger
from ppikit.establishing.constants import DEFAULT_LEVEL, LAMBDA_GRID_STEP
from ppikit.processing.utils import gram, sample_covariance, sandwich, solve_gram
from ppikit.utils import EmptyUnlabeled, InsufficientLabeled, InvalidSpec, \
    RankDeficientDesign

__all__ = ["cc_estimate", "ppi_estimate", "ppipp_estimate", "confidence_interval",
           "variance_gap", "compare_widths", "optimal_mean_lambda",
           "mean_ppi_arrays", "power_tuned_arrays"]


def _var(values: np.ndarray) -> float:
    return float(sample_covariance(values)[0, 0])


def power_tuned_arrays(
        X_l: np.ndarray,
        y: np.ndarray,
        yhat_l: Optional[np.ndarray],
        X_u: Optional[np.ndarray],
        yhat_u: Optional[np.ndarray],
        lam: float
) -> tuple[np.ndarray, np.ndarray]:
    """Solve the lambda-weighted estimating equation on raw design arrays.

    Returns
    -------
    theta, covariance : ndarray
        The solution and its sandwich covariance
        H^-1 [lambda^2 V_u / n_u + V_l / n_l] H^-1, with V_u the sample
        covariance of X (X'theta - Yhat) over unlabeled rows and V_l that of
        X (Y - lambda Yhat - (1 - lambda) X'theta) over labeled rows.
    """
    n_l = X_l.shape[0]
    H = (1 - lam) * gram(X_l)
    rhs = X_l.T @ (y - lam * yhat_l if lam else y) / n_l
    if lam:
        n_u = X_u.shape[0]
        H = H + lam * gram(X_u)
        rhs = rhs + lam * (X_u.T @ yhat_u) / n_u
    theta = solve_gram(H, rhs)

    fitted_l = X_l @ theta
    resid_l = y - fitted_l if not lam else y - lam * yhat_l - (1 - lam) * fitted_l
    meat = sample_covariance(X_l * resid_l[:, None]) / n_l
    if lam:
        resid_u = X_u @ theta - yhat_u
        meat = meat + lam ** 2 * sample_covariance(X_u * resid_u[:, None]) / n_u
    cov = sandwich(np.linalg.inv(H), meat)
    return theta, cov


def mean_ppi_arrays(
        y: np.ndarray,
        yhat_l: np.ndarray,
        yhat_u: np.ndarray,
        lam: Optional[float] = None,
        all_rows: bool = False
) -> tuple[float, float]:
    """Closed-form mean estimate and its variance.

    With `lam=None` this is PPI, mean(Yhat|S=0) + mean(Y - Yhat|S=1), or
    with `all_rows=True` the prediction mean over all rows.  With a
    numeric `lam` it is PPI++ in control-variate form,
    mean(Y|S=1) + lambda (mean(Yhat|S=0) - mean(Yhat|S=1)).
    """
    n_l, n_u = y.size, yhat_u.size
    if all_rows:
        n = n_l + n_u
        theta = np.concatenate([yhat_l, yhat_u]).mean() + np.mean(y - yhat_l)
        var = n_u * _var(yhat_u) / n ** 2 + _var(y - (1 - n_l / n) * yhat_l) / n_l
        return float(theta), var
    if lam is None:
        lam = 1.0
        theta = np.mean(yhat_u) + np.mean(y - yhat_l)
    else:
        theta = np.mean(y) + lam * (np.mean(yhat_u) - np.mean(yhat_l))
    var = _var(y - lam * yhat_l) / n_l + lam ** 2 * _var(yhat_u) / n_u
    return float(theta), var


def optimal_mean_lambda(y: np.ndarray, yhat_l: np.ndarray, yhat_u: np.ndarray) -> float:
    """Variance-minimizing lambda for the mean, clipped to [0, 1]:

    Cov(Y, Yhat | S=1) / [V_pool(Yhat) (1 + n_l / n_u)].

    Constant predictions carry no signal and give lambda = 0.
    """
    pooled = _var(np.concatenate([yhat_l, yhat_u]))
    if pooled <= 0:
        return 0.0
    cov = float(sample_covariance(np.column_stack([y, yhat_l]))[0, 1])
    lam = cov / (pooled * (1 + y.size / yhat_u.size))
    return float(np.clip(lam, 0.0, 1.0))


def _labeled_arrays(dataset: Dataset, target: LossTarget, predictions=None):
    mask = dataset.label_indicator
    X = target.design(dataset.covariates)
    out = [X[mask], dataset.labeled_outcome, X[~mask]]
    if predictions is not None:
        predictions.check_against(dataset)
        out += [predictions.values[mask], predictions.values[~mask]]
    return out


def _check_labeled(dataset: Dataset, target: LossTarget) -> None:
    d = 1 if target.is_mean else target.design(dataset.covariates[:1]).shape[1]
    needed = max(2, d + 1)
    if dataset.n_l < needed:
        msg = f"At least {needed} labeled rows are required for "\
              f"{d} parameter{'s' if d > 1 else ''}, found {dataset.n_l}"
        raise InsufficientLabeled(msg)


def _make_estimate(theta, cov, method, dataset, target, lambda_=None, **metadata):
    names = target.coefficient_names(dataset.covariate_names)
    metadata["target"] = str(target)
    return Estimate(np.atleast_1d(theta), np.atleast_2d(cov), method,
                    dataset.n_l, dataset.n_u, lambda_=lambda_,
                    coefficient_names=names, metadata=metadata)


def _flag_degenerate(dataset: Dataset, method: str, lam: float) -> dict:
    """Metadata marking a variance whose unlabeled term is zero because
    n_u < 2, which makes the interval anti-conservative.
    """
    if not lam or dataset.n_u >= 2:
        return {}
    get_logger().warning("%s variance omits the unlabeled term: n_u=%s",
                         method, dataset.n_u)
    return {"degenerate_variance": True}


def cc_estimate(dataset: Dataset, target: Optional[LossTarget] = None) -> Estimate:
    """Complete-case (classical) estimate from labeled rows only.

    Parameters
    ----------
    dataset : Dataset
        The observed data.

    target : LossTarget (optional, default=None)
        The estimand.  If None, the mean.

    Returns
    -------
    estimate : Estimate
        Mean: sample mean with covariance V(Y)/n_l.  Linear regression:
        ordinary least squares with HC0 sandwich covariance whose meat is
        the sample covariance of the scores X e.

    Raises
    ------
    InsufficientLabeled
        If n_l < max(2, d + 1).

    RankDeficientDesign
        If the labeled design is (nearly) singular.
    """
    target = target or LossTarget.mean()
    _check_labeled(dataset, target)
    y = dataset.labeled_outcome
    if target.is_mean:
        return _make_estimate(np.mean(y), _var(y) / y.size, "Classical",
                              dataset, target)
    X_l, y, _ = _labeled_arrays(dataset, target)
    theta, cov = power_tuned_arrays(X_l, y, None, None, None, 0.0)
    return _make_estimate(theta, cov, "Classical", dataset, target)


def _ppi(dataset, predictions, target, lam, all_rows=False):
    dataset.require_estimable()
    _check_labeled(dataset, target)
    if predictions is None:
        raise InvalidSpec("Predictions are required for prediction-powered estimators")
    X_l, y, X_u, yhat_l, yhat_u = _labeled_arrays(dataset, target, predictions)
    if target.is_mean:
        return mean_ppi_arrays(y, yhat_l, yhat_u, lam, all_rows)
    if all_rows:
        raise InvalidSpec("The all-rows variant is defined for the mean only")
    return power_tuned_arrays(X_l, y, yhat_l, X_u, yhat_u, 1.0 if lam is None else lam)


def ppi_estimate(
        dataset: Dataset,
        predictions: PredictionSet,
        target: Optional[LossTarget] = None,
        all_rows: bool = False,
        method: str = "PPI"
) -> Estimate:
    """Prediction-powered estimate: prediction-based fit on unlabeled rows
    plus a residual correction from labeled rows.

    Parameters
    ----------
    dataset : Dataset
        The observed data.

    predictions : PredictionSet
        One prediction per row.

    target : LossTarget (optional, default=None)
        The estimand.  If None, the mean.

    all_rows : bool (optional, default=False)
        Mean only: average predictions over all rows rather than the
        unlabeled rows only.

    method : str (optional, default="PPI")
        Tag recorded on the estimate; cross-fitted callers pass "CrossPPI".

    Raises
    ------
    EmptyUnlabeled
        If there are no unlabeled rows.

    MissingPredictions
        If predictions do not cover every row.

    RankDeficientDesign
        If the unlabeled Gram matrix is (nearly) singular.
    """
    target = target or LossTarget.mean()
    theta, cov = _ppi(dataset, predictions, target, None, all_rows)
    extra = _flag_degenerate(dataset, method, 1.0)
    if all_rows:
        extra["all_rows"] = True
    return _make_estimate(theta, cov, method, dataset, target, **extra)


def ppipp_estimate(
        dataset: Dataset,
        predictions: PredictionSet,
        target: Optional[LossTarget] = None,
        policy: Optional[LambdaPolicy] = None
) -> Estimate:
    """PPI++ estimate: every prediction term weighted by lambda, which
    interpolates between complete-case (0) and PPI (1).

    Parameters
    ----------
    dataset : Dataset
        The observed data.

    predictions : PredictionSet
        One prediction per row.

    target : LossTarget (optional, default=None)
        The estimand.  If None, the mean.

    policy : LambdaPolicy (optional, default=None)
        Fixed lambda or variance-minimizing lambda.  If None, optimized.
        For the mean the optimum has a closed form; for regression lambda
        minimizes the trace of the covariance over a grid of step 0.01,
        ties going to the smaller lambda.

    Returns
    -------
    estimate : Estimate
        Tagged PPIpp with the lambda used.  A positive lambda with fewer
        than 2 unlabeled rows sets metadata degenerate_variance.
    """
    target = target or LossTarget.mean()
    policy = policy or LambdaPolicy.optimized()
    dataset.require_estimable()
    _check_labeled(dataset, target)
    if policy.mode == "Fixed":
        lam = policy.value
        theta, cov = _ppi(dataset, predictions, target, lam)
    elif target.is_mean:
        _, y, _, yhat_l, yhat_u = _labeled_arrays(dataset, target, predictions)
        lam = optimal_mean_lambda(y, yhat_l, yhat_u)
        theta, cov = mean_ppi_arrays(y, yhat_l, yhat_u, lam)
    else:
        lam, theta, cov = _grid_lambda(dataset, predictions, target)
    return _make_estimate(theta, cov, "PPIpp", dataset, target, lambda_=lam,
                          lambda_mode=policy.mode,
                          **_flag_degenerate(dataset, "PPIpp", lam))


def _grid_lambda(dataset, predictions, target):
    X_l, y, X_u, yhat_l, yhat_u = _labeled_arrays(dataset, target, predictions)
    steps = int(round(1 / LAMBDA_GRID_STEP))
    best = None
    for lam in np.arange(steps + 1) / steps:
        try:
            theta, cov = power_tuned_arrays(X_l, y, yhat_l, X_u, yhat_u, lam)
        except RankDeficientDesign:
            continue
        # Strict comparison keeps the smaller lambda on ties
        if best is None or np.trace(cov) < np.trace(best[2]):
            best = (float(lam), theta, cov)
    if best is None:
        raise RankDeficientDesign("No lambda on the grid gives a well-conditioned design")
    return best


def confidence_interval(estimate: Estimate, level: float = DEFAULT_LEVEL) -> ConfidenceInterval:
    """Normal-quantile interval theta +/- z_{(1+level)/2} * se.

    Raises
    ------
    InvalidLevel
        If level is not in (0, 1).
    """
    return estimate.confidence_interval(level)


def variance_gap(dataset: Dataset, predictions: PredictionSet) -> VarianceGap:
    """Plug-in gap V(PPI) - V(CC) of the mean estimators:

    V(f(X)) / (pi (1 - pi) n) - 2 Cov(Y, f(X)) / (pi n),

    with V(f(X)) pooled over all rows, Cov(Y, f(X)) from labeled rows and
    pi = n_l / n.  A negative gap favors PPI.

    Raises
    ------
    InsufficientLabeled
        If n_l < 2.
    """
    if dataset.n_l < 2:
        raise InsufficientLabeled(f"At least 2 labeled rows are required, found {dataset.n_l}")
    if dataset.n_u < 1:
        raise EmptyUnlabeled("The dataset contains no unlabeled rows")
    predictions.check_against(dataset)
    mask = dataset.label_indicator
    var_pred = _var(predictions.values)
    cov = float(sample_covariance(np.column_stack(
        [dataset.labeled_outcome, predictions.values[mask]]))[0, 1])
    return VarianceGap.from_components(var_pred, cov, dataset.labeled_fraction,
                                       dataset.n)


def compare_widths(
        estimate: Estimate,
        reference: Estimate,
        level: float = DEFAULT_LEVEL
) -> pd.DataFrame:
    """Compare interval widths of `estimate` with those of a reference,
    typically the complete-case estimate.

    Returns
    -------
    out : DataFrame
        Columns coefficient, width, reference_width and ratio.
    """
    if estimate.d != reference.d:
        raise InvalidSpec("Estimates must have the same dimension")
    width = estimate.confidence_interval(level).width
    ref = reference.confidence_interval(level).width
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = width / ref
    return pd.DataFrame({"coefficient": estimate.coefficient_names,
                         "width": width, "reference_width": ref, "ratio": ratio})
