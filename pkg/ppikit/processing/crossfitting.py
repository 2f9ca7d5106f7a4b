"""Module with the internal-model workflows: K-fold cross-fitted
predictions, Cross-PPI estimates and Cross-PPBoot percentile intervals.
"""

from math import ceil
from typing import Optional

import numpy as np
from joblib import Parallel, delayed
from tqdm import tqdm

from ppikit.classes import BootConfig, ConfidenceInterval, CrossFitted, Dataset, \
    Estimate, FoldPlan, LearnerSpec, LossTarget, PredictionSet
from ppikit.establishing.constants import BOOT_BATCH_SIZE, DEFAULT_FOLDS
from ppikit.processing.estimating import mean_ppi_arrays, power_tuned_arrays, \
    ppi_estimate
from ppikit.processing.learning import fit_learner
from ppikit.processing.utils import chunk_list, rng_stream
from ppikit.utils import FoldMismatch, InvalidSpec, TooFewLabeled, validate_param

__all__ = ["make_folds", "crossfit_predict", "cross_ppi_estimate",
           "bootstrap_replicates", "percentile_interval", "cross_ppboot_ci"]


def make_folds(n_l: int, K: int, seed: int) -> FoldPlan:
    """Balanced random partition of `n_l` labeled rows into `K` folds.

    Row `perm[j]` of a seeded permutation goes to fold j mod K, so fold
    sizes differ by at most one and the plan depends on (seed, n_l, K)
    only.

    Raises
    ------
    TooFewLabeled
        If K > n_l.
    """
    validate_param(n_l, "n_l", (int, np.integer))
    validate_param(K, "K", (int, np.integer))
    if K > n_l:
        raise TooFewLabeled(f"Cannot split {n_l:,} labeled rows into {K} folds")
    if K < 2:
        raise InvalidSpec(f"At least 2 folds are required, got {K}")
    assignment = np.empty(n_l, dtype=np.int64)
    assignment[rng_stream(seed).permutation(n_l)] = np.arange(n_l) % K
    return FoldPlan(K, assignment, seed)


def _fit_fold(spec, X_train, y_train, X_test, X_u):
    predictor = fit_learner(spec, X_train, y_train)
    pred_u = predictor.predict(X_u) if X_u.shape[0] else np.empty(0)
    return predictor.predict(X_test), pred_u


def crossfit_predict(
        dataset: Dataset,
        spec: LearnerSpec,
        plan: FoldPlan,
        n_jobs: int = 1
) -> PredictionSet:
    """Out-of-fold predictions for labeled rows and fold-averaged
    predictions for unlabeled rows.

    Parameters
    ----------
    dataset : Dataset
        The observed data.

    spec : LearnerSpec
        The learner trained once per fold.

    plan : FoldPlan
        Fold assignment of the labeled rows, in row order.

    n_jobs : int (optional, default=1)
        Number of folds trained concurrently, as in joblib.Parallel.

    Returns
    -------
    predictions : PredictionSet
        The prediction of a labeled row in fold k comes from the model
        trained on all labeled rows outside fold k; unlabeled rows get
        the mean of the K models' predictions.

    Raises
    ------
    FoldMismatch
        If the plan does not cover exactly the labeled rows.
    """
    if plan.n_l != dataset.n_l:
        msg = f"Fold plan covers {plan.n_l:,} rows but the dataset has "\
              f"{dataset.n_l:,} labeled rows"
        raise FoldMismatch(msg)
    mask = dataset.label_indicator
    X_l, X_u = dataset.covariates[mask], dataset.covariates[~mask]
    y = dataset.labeled_outcome
    results = Parallel(n_jobs=n_jobs)(
        delayed(_fit_fold)(spec, X_l[~plan.in_fold(k)], y[~plan.in_fold(k)],
                           X_l[plan.in_fold(k)], X_u)
        for k in range(plan.K))

    yhat_l = np.empty(dataset.n_l)
    for k, (pred_k, _) in enumerate(results):
        yhat_l[plan.in_fold(k)] = pred_k
    values = np.empty(dataset.n)
    values[mask] = yhat_l
    values[~mask] = np.mean([pred_u for _, pred_u in results], axis=0)
    provenance = CrossFitted(fold_assignment=plan.assignment, model_count=plan.K)
    return PredictionSet(values, provenance)


def _with_metadata(estimate: Estimate, method: str, covariance=None, **extra) -> Estimate:
    metadata = estimate.metadata
    metadata.update(extra)
    cov = estimate.covariance if covariance is None else covariance
    return Estimate(estimate.theta, cov, method, estimate.n_l, estimate.n_u,
                    coefficient_names=estimate.coefficient_names, metadata=metadata)


def cross_ppi_estimate(
        dataset: Dataset,
        spec: LearnerSpec,
        K: int = DEFAULT_FOLDS,
        seed: int = 0,
        target: Optional[LossTarget] = None,
        n_jobs: int = 1
) -> Estimate:
    """Cross-PPI: PPI on cross-fitted predictions of a learner trained on
    the labeled rows themselves.

    Parameters
    ----------
    dataset : Dataset
        The observed data.

    spec : LearnerSpec
        The learner.

    K : int (optional, default=5)
        Number of folds, at most n_l.

    seed : int (optional, default=0)
        Seed of the fold assignment.

    target : LossTarget (optional, default=None)
        The estimand.  If None, the mean.

    n_jobs : int (optional, default=1)
        Number of folds trained concurrently.

    Returns
    -------
    estimate : Estimate
        Tagged CrossPPI, with the fold count, fold seed and learner in its
        metadata.
    """
    dataset.require_estimable()
    plan = make_folds(dataset.n_l, K, seed)
    predictions = crossfit_predict(dataset, spec, plan, n_jobs=n_jobs)
    estimate = ppi_estimate(dataset, predictions, target, method="CrossPPI")
    return _with_metadata(estimate, "CrossPPI", folds=K, fold_seed=seed,
                          learner=spec.to_dict())


def _replicate_batch(arrays, is_mean, seed, indices):
    X_l, y, X_u, yhat_l, yhat_u = arrays
    n_l, n_u = y.size, yhat_u.size
    out = []
    for r in indices:
        rng = rng_stream(seed, r)
        idx_l = rng.integers(0, n_l, size=n_l)
        idx_u = rng.integers(0, n_u, size=n_u)
        if is_mean:
            theta, _ = mean_ppi_arrays(y[idx_l], yhat_l[idx_l], yhat_u[idx_u])
        else:
            theta, _ = power_tuned_arrays(X_l[idx_l], y[idx_l], yhat_l[idx_l],
                                          X_u[idx_u], yhat_u[idx_u], 1.0)
        out.append(np.atleast_1d(theta))
    return out


def bootstrap_replicates(
        dataset: Dataset,
        predictions: PredictionSet,
        target: LossTarget,
        boot: BootConfig,
        n_jobs: int = 1,
        verbose: bool = False
) -> np.ndarray:
    """PPI point estimates on B resamples with the predictions held fixed.

    Labeled and unlabeled rows are resampled independently with
    replacement at their own sizes.  Replicate r draws from the stream
    seeded by (boot.seed, r), so results do not depend on `n_jobs`.

    Returns
    -------
    replicates : ndarray of shape (B, d)
    """
    predictions.check_against(dataset)
    mask = dataset.label_indicator
    X = target.design(dataset.covariates)
    arrays = (X[mask], dataset.labeled_outcome, X[~mask],
              predictions.values[mask], predictions.values[~mask])
    batches = chunk_list(range(boot.B), BOOT_BATCH_SIZE)
    results = Parallel(n_jobs=n_jobs)(
        delayed(_replicate_batch)(arrays, target.is_mean, boot.seed, batch)
        for batch in tqdm(batches, disable=not verbose))
    return np.vstack([theta for batch in results for theta in batch])


def percentile_interval(replicates: np.ndarray, level: float) -> ConfidenceInterval:
    """Percentile interval whose endpoints are the order statistics of
    ranks ceil(B alpha/2) and ceil(B (1 - alpha/2)), alpha = 1 - level.
    """
    replicates = np.asarray(replicates, dtype=np.float64)
    replicates = np.sort(replicates.reshape(replicates.shape[0], -1), axis=0)
    B = replicates.shape[0]
    alpha = 1 - level
    # Rounding removes float noise such as 1000 * 0.05 = 50.000000000000004
    low = max(1, ceil(round(B * alpha / 2, 9)))
    high = min(B, ceil(round(B * (1 - alpha / 2), 9)))
    return ConfidenceInterval(level, replicates[low - 1], replicates[high - 1],
                              kind="percentile")


def cross_ppboot_ci(
        dataset: Dataset,
        spec: LearnerSpec,
        K: int = DEFAULT_FOLDS,
        seed: int = 0,
        target: Optional[LossTarget] = None,
        boot: Optional[BootConfig] = None,
        n_jobs: int = 1,
        verbose: bool = False
) -> tuple[Estimate, ConfidenceInterval]:
    """Cross-PPBoot: Cross-PPI point estimate with a percentile bootstrap
    interval.

    Cross-fitted predictions are computed once and frozen; learners are
    not refit inside the bootstrap.  This variant is recorded as
    `metadata["bootstrap"] = "frozen-predictions"`.

    Parameters
    ----------
    dataset : Dataset
        The observed data.

    spec : LearnerSpec
        The learner.

    K : int (optional, default=5)
        Number of folds.

    seed : int (optional, default=0)
        Seed of the fold assignment.

    target : LossTarget (optional, default=None)
        The estimand.  If None, the mean.

    boot : BootConfig (optional, default=None)
        Replicates, seed and level.  If None, the defaults.

    n_jobs : int (optional, default=1)
        Workers for fold fits and replicates.

    verbose : bool (optional, default=False)
        Whether to show a progress bar over replicate batches.

    Returns
    -------
    estimate, interval : Estimate and ConfidenceInterval
        The estimate is tagged CrossPPBoot and carries the bootstrap
        covariance of the replicates; the interval is of kind
        "percentile".
    """
    target = target or LossTarget.mean()
    boot = boot or BootConfig()
    dataset.require_estimable()
    plan = make_folds(dataset.n_l, K, seed)
    predictions = crossfit_predict(dataset, spec, plan, n_jobs=n_jobs)
    point = ppi_estimate(dataset, predictions, target, method="CrossPPI")
    replicates = bootstrap_replicates(dataset, predictions, target, boot,
                                      n_jobs=n_jobs, verbose=verbose)
    cov = np.atleast_2d(np.cov(replicates, rowvar=False, ddof=1))
    estimate = _with_metadata(point, "CrossPPBoot", covariance=cov,
                              bootstrap="frozen-predictions", replicates=boot.B,
                              boot_seed=boot.seed, folds=K, fold_seed=seed,
                              learner=spec.to_dict())
    return estimate, percentile_interval(replicates, boot.level)
