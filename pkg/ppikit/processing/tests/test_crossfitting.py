"""Tests for processing.crossfitting module."""

import numpy as np
import pytest
from numpy.testing import assert_allclose
from pytest import approx

from ppikit.classes import BootConfig, Dataset, FoldPlan, LearnerSpec, LossTarget
from ppikit.processing import bootstrap_replicates, cross_ppboot_ci, \
    cross_ppi_estimate, crossfit_predict, fit_learner, make_folds, \
    percentile_interval, ppi_estimate
from ppikit.utils import FoldMismatch, InvalidSpec, TooFewLabeled

RIDGE = LearnerSpec.ridge(0.1)


def _linear(seed, n=300, p=2, pi=0.3):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, p))
    y = 1 + X @ np.linspace(1, 2, p) + rng.standard_normal(n)
    return Dataset(X, y, rng.random(n) < pi)


def _r2(y, fitted):
    return 1 - ((y - fitted) ** 2).sum() / ((y - y.mean()) ** 2).sum()


def test_make_folds_sizes():
    assert make_folds(10, 5, 0).fold_sizes.tolist() == [2, 2, 2, 2, 2]
    assert make_folds(7, 3, 0).fold_sizes.tolist() == [3, 2, 2]
    plan = make_folds(7, 3, 9)
    assert sorted(plan.assignment.tolist()) == [0, 0, 0, 1, 1, 2, 2]
    with pytest.raises(TooFewLabeled):
        make_folds(10, 11, 0)
    with pytest.raises(InvalidSpec):
        make_folds(10, 1, 0)
    with pytest.raises(TypeError):
        make_folds(10.0, 2, 0)


def test_make_folds_deterministic():
    a, b = make_folds(50, 5, 3), make_folds(50, 5, 3)
    assert np.array_equal(a.assignment, b.assignment)
    assert not np.array_equal(a.assignment, make_folds(50, 5, 4).assignment)


def test_crossfit_predict_bookkeeping():
    dataset = _linear(0)
    plan = make_folds(dataset.n_l, 4, 1)
    predictions = crossfit_predict(dataset, RIDGE, plan)
    assert predictions.is_crossfitted
    assert predictions.provenance.model_count == 4
    assert np.array_equal(predictions.provenance.fold_assignment, plan.assignment)

    mask = dataset.label_indicator
    X_l, X_u = dataset.covariates[mask], dataset.covariates[~mask]
    y = dataset.labeled_outcome
    yhat_l = predictions.values[mask]
    unlabeled = []
    for k in range(4):
        fold = plan.in_fold(k)
        model = fit_learner(RIDGE, X_l[~fold], y[~fold])
        assert_allclose(yhat_l[fold], model.predict(X_l[fold]), rtol=1e-12)
        unlabeled.append(model.predict(X_u))
    assert_allclose(predictions.values[~mask], np.mean(unlabeled, axis=0), rtol=1e-12)


def test_crossfit_predict_fold_mismatch():
    dataset = _linear(1)
    plan = make_folds(dataset.n_l + 1, 2, 0)
    with pytest.raises(FoldMismatch):
        crossfit_predict(dataset, RIDGE, plan)


def test_crossfit_prevents_leakage():
    rng = np.random.default_rng(11)
    n_l, n_u = 40, 20
    X = rng.standard_normal((n_l + n_u, 1))
    y = rng.standard_normal(n_l + n_u)
    dataset = Dataset(X, y, np.r_[np.ones(n_l, dtype=int), np.zeros(n_u, dtype=int)])
    spec = LearnerSpec.gb_stumps(rounds=6000, learning_rate=1.0, min_leaf=1)
    labeled = dataset.labeled_outcome
    in_sample = fit_learner(spec, X[:n_l], labeled).predict(X[:n_l])
    assert _r2(labeled, in_sample) >= 0.95
    plan = make_folds(n_l, 5, 0)
    out_of_fold = crossfit_predict(dataset, spec, plan).values[:n_l]
    assert _r2(labeled, out_of_fold) <= 0.05


def test_crossfit_leave_one_out():
    dataset = _linear(2, n=40, pi=0.3)
    plan = make_folds(dataset.n_l, dataset.n_l, 0)
    assert (plan.fold_sizes == 1).all()
    predictions = crossfit_predict(dataset, RIDGE, plan)
    assert predictions.provenance.model_count == dataset.n_l


def test_cross_ppi_estimate():
    dataset = _linear(3)
    estimate = cross_ppi_estimate(dataset, RIDGE, K=5, seed=7,
                                  target=LossTarget.linear_regression())
    assert estimate.method == "CrossPPI"
    assert estimate.d == 3
    assert estimate.metadata["folds"] == 5
    assert estimate.metadata["fold_seed"] == 7
    assert estimate.metadata["learner"] == {"kind": "Ridge", "penalty": 0.1}
    again = cross_ppi_estimate(dataset, RIDGE, K=5, seed=7,
                               target=LossTarget.linear_regression(), n_jobs=2)
    assert_allclose(again.theta, estimate.theta, rtol=1e-12)


def test_cross_ppi_intercept_only():
    base = _linear(4, p=1)
    dataset = Dataset(np.ones(base.n), base.outcome, base.label_indicator)
    mean = cross_ppi_estimate(dataset, RIDGE, seed=1)
    regression = cross_ppi_estimate(dataset, RIDGE, seed=1,
                                    target=LossTarget.linear_regression(False))
    assert_allclose(regression.theta, mean.theta, rtol=1e-10)
    assert_allclose(regression.covariance, mean.covariance, rtol=1e-10)


def test_cross_ppi_constant_outcome():
    rng = np.random.default_rng(5)
    dataset = Dataset(rng.standard_normal(30), np.full(30, 2.5),
                      np.r_[np.ones(15, dtype=int), np.zeros(15, dtype=int)])
    estimate = cross_ppi_estimate(dataset, LearnerSpec.gb_stumps(), K=3)
    assert estimate.theta[0] == approx(2.5)
    assert estimate.se[0] == approx(0.0)


def test_percentile_interval_ranks():
    replicates = np.random.default_rng(0).permutation(np.arange(1.0, 1001.0))
    ci = percentile_interval(replicates, 0.90)
    assert (ci.lower[0], ci.upper[0]) == (50.0, 950.0)
    assert ci.kind == "percentile"
    ci = percentile_interval(np.arange(1.0, 200.0)[::-1], 0.90)
    assert (ci.lower[0], ci.upper[0]) == (10.0, 190.0)
    both = percentile_interval(np.column_stack([np.arange(100.0), -np.arange(100.0)]),
                               0.5)
    assert both.lower.tolist() == [24.0, -75.0]
    assert both.upper.tolist() == [74.0, -25.0]


def test_bootstrap_replicates_deterministic():
    dataset = _linear(6)
    plan = make_folds(dataset.n_l, 5, 0)
    predictions = crossfit_predict(dataset, RIDGE, plan)
    boot = BootConfig(B=120, seed=3)
    target = LossTarget.mean()
    first = bootstrap_replicates(dataset, predictions, target, boot)
    assert first.shape == (120, 1)
    parallel = bootstrap_replicates(dataset, predictions, target, boot, n_jobs=2)
    assert np.array_equal(first, parallel)
    other = bootstrap_replicates(dataset, predictions, target, BootConfig(B=120, seed=4))
    assert not np.array_equal(first, other)


def test_cross_ppboot_ci():
    dataset = _linear(7)
    boot = BootConfig(B=200, seed=1, level=0.9)
    target = LossTarget.linear_regression()
    estimate, interval = cross_ppboot_ci(dataset, RIDGE, K=5, seed=2, target=target,
                                         boot=boot)
    assert estimate.method == "CrossPPBoot"
    assert estimate.metadata["bootstrap"] == "frozen-predictions"
    assert estimate.metadata["replicates"] == 200
    assert interval.kind == "percentile"
    assert interval.lower.shape == (3,)
    point = cross_ppi_estimate(dataset, RIDGE, K=5, seed=2, target=target)
    assert np.array_equal(estimate.theta, point.theta)


def test_cross_ppboot_degenerate():
    rng = np.random.default_rng(8)
    dataset = Dataset(rng.standard_normal(40), np.full(40, -1.0),
                      np.r_[np.ones(20, dtype=int), np.zeros(20, dtype=int)])
    estimate, interval = cross_ppboot_ci(dataset, RIDGE, boot=BootConfig(B=100))
    assert interval.width[0] == approx(0.0, abs=1e-12)
    assert interval.lower[0] == approx(-1.0)


def test_cross_ppboot_matches_normal_width():
    dataset = _linear(9, n=2000, p=1)
    boot = BootConfig(B=2000, seed=0, level=0.9)
    _, interval = cross_ppboot_ci(dataset, RIDGE, K=5, seed=0, boot=boot)
    normal = cross_ppi_estimate(dataset, RIDGE, K=5, seed=0).confidence_interval(0.9)
    assert interval.width[0] == approx(normal.width[0], rel=0.10)


def test_fold_plan_from_make_folds_is_valid():
    plan = make_folds(23, 4, 0)
    assert isinstance(plan, FoldPlan)
    assert plan.fold_sizes.max() - plan.fold_sizes.min() <= 1
