"""Tests for processing.estimating module."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose
from pytest import approx

from ppikit.classes import Dataset, LambdaPolicy, LossTarget, PredictionSet
from ppikit.processing import cc_estimate, compare_widths, confidence_interval, \
    optimal_mean_lambda, ppi_estimate, ppipp_estimate, variance_gap
from ppikit.utils import EmptyUnlabeled, InsufficientLabeled, InvalidLevel, \
    InvalidSpec, RankDeficientDesign

OLS = LossTarget.linear_regression()


def _cov(rows):
    rows = [np.atleast_1d(r) for r in rows]
    center = sum(rows) / len(rows)
    return sum(np.outer(r - center, r - center) for r in rows) / (len(rows) - 1)


def _power_tuned_oracle(X_l, y, f_l, X_u, f_u, lam):
    n_l, n_u = len(y), len(f_u)
    A = (1 - lam) * sum(np.outer(x, x) for x in X_l) / n_l
    b = sum(x * (yi - lam * fi) for x, yi, fi in zip(X_l, y, f_l)) / n_l
    if lam:
        A = A + lam * sum(np.outer(x, x) for x in X_u) / n_u
        b = b + lam * sum(x * fi for x, fi in zip(X_u, f_u)) / n_u
    A_inv = np.linalg.inv(A)
    theta = A_inv @ b
    meat = _cov([x * (yi - lam * fi - (1 - lam) * x @ theta)
                 for x, yi, fi in zip(X_l, y, f_l)]) / n_l
    if lam:
        meat = meat + lam ** 2 * _cov([x * (x @ theta - fi)
                                       for x, fi in zip(X_u, f_u)]) / n_u
    return theta, A_inv @ meat @ A_inv


def _small_dataset(rng):
    n = 10
    n_l = int(rng.integers(4, 7))
    labels = np.zeros(n, dtype=int)
    labels[rng.permutation(n)[:n_l]] = 1
    X = rng.standard_normal((n, 1))
    y = 0.5 + 2 * X[:, 0] + rng.standard_normal(n)
    f = y + rng.standard_normal(n)
    return Dataset(X, y, labels), PredictionSet(f)


def test_oracle_equivalence():
    rng = np.random.default_rng(42)
    for _ in range(1000):
        dataset, preds = _small_dataset(rng)
        mask = dataset.label_indicator
        y = dataset.labeled_outcome
        f_l, f_u = preds.values[mask], preds.values[~mask]
        n_l, n_u = y.size, f_u.size
        # Mean
        cc = cc_estimate(dataset)
        assert_allclose(cc.theta, [sum(y) / n_l], rtol=1e-10, atol=1e-10)
        assert_allclose(cc.covariance, _cov(y) / n_l, rtol=1e-10, atol=1e-10)
        ppi = ppi_estimate(dataset, preds)
        resid = y - f_l
        assert_allclose(ppi.theta, [sum(f_u) / n_u + sum(resid) / n_l],
                        rtol=1e-10, atol=1e-10)
        assert_allclose(ppi.covariance, _cov(f_u) / n_u + _cov(resid) / n_l,
                        rtol=1e-10, atol=1e-10)
        # Linear regression
        X = np.column_stack([np.ones(dataset.n), dataset.covariates])
        for lam, estimate in ((0.0, cc_estimate(dataset, OLS)),
                              (1.0, ppi_estimate(dataset, preds, OLS)),
                              (0.3, ppipp_estimate(dataset, preds, OLS,
                                                   LambdaPolicy.fixed(0.3)))):
            theta, cov = _power_tuned_oracle(X[mask], y, f_l, X[~mask], f_u, lam)
            assert_allclose(estimate.theta, theta, rtol=1e-10, atol=1e-10)
            assert_allclose(estimate.covariance, cov, rtol=1e-10, atol=1e-10)


def test_cc_mean(four_rows):
    dataset, _ = four_rows
    estimate = cc_estimate(dataset)
    assert estimate.method == "Classical"
    assert estimate.theta[0] == approx(2.0)
    assert estimate.se[0] == approx(1.0)
    assert estimate.coefficient_names == ["mean"]
    assert (estimate.n_l, estimate.n_u) == (2, 2)


def test_ppi_mean(four_rows):
    dataset, preds = four_rows
    estimate = ppi_estimate(dataset, preds)
    assert estimate.method == "PPI"
    assert estimate.theta[0] == approx(5.0)
    assert estimate.se[0] == approx(np.sqrt(2))
    everything = ppi_estimate(dataset, preds, all_rows=True)
    assert everything.theta[0] == approx(3.5)
    assert everything.metadata["all_rows"] is True


def test_ppipp_endpoints(make_data):
    for seed in range(100):
        dataset, preds = make_data(seed, n=60)
        for target in (LossTarget.mean(), OLS):
            cc = cc_estimate(dataset, target)
            ppi = ppi_estimate(dataset, preds, target)
            zero = ppipp_estimate(dataset, preds, target, LambdaPolicy.fixed(0))
            one = ppipp_estimate(dataset, preds, target, LambdaPolicy.fixed(1))
            assert zero.lambda_ == 0.0
            assert_allclose(zero.theta, cc.theta, rtol=1e-10, atol=1e-10)
            assert_allclose(zero.covariance, cc.covariance, rtol=1e-10, atol=1e-14)
            assert_allclose(one.theta, ppi.theta, rtol=1e-10, atol=1e-10)
            assert_allclose(one.covariance, ppi.covariance, rtol=1e-10, atol=1e-14)


def test_ppipp_control_variate(make_data):
    for seed in range(100):
        dataset, preds = make_data(seed, n=60)
        mask = dataset.label_indicator
        gap = np.mean(preds.values[~mask]) - np.mean(preds.values[mask])
        cc = cc_estimate(dataset).theta[0]
        for lam in (0.0, 0.25, 0.5, 1.0):
            estimate = ppipp_estimate(dataset, preds, policy=LambdaPolicy.fixed(lam))
            assert estimate.theta[0] == cc + lam * gap


def test_single_unlabeled_row_flags_variance():
    dataset = Dataset([0.0, 1.0, 2.0, 3.0], [1.0, 2.0, 4.0, np.nan], [1, 1, 1, 0])
    preds = PredictionSet([1.0, 2.0, 3.0, 4.0])
    ppi = ppi_estimate(dataset, preds)
    assert ppi.metadata["degenerate_variance"] is True
    assert ppi.se[0] == approx(1 / 3)
    assert ppi_estimate(dataset, preds, all_rows=True).metadata["degenerate_variance"]
    half = ppipp_estimate(dataset, preds, policy=LambdaPolicy.fixed(0.5))
    assert half.metadata["degenerate_variance"] is True
    zero = ppipp_estimate(dataset, preds, policy=LambdaPolicy.fixed(0))
    assert "degenerate_variance" not in zero.metadata
    assert "degenerate_variance" not in cc_estimate(dataset).metadata


def test_intercept_only_regression(make_data):
    dataset, preds = make_data(3, p=1)
    ones = Dataset(np.ones(dataset.n), dataset.outcome, dataset.label_indicator)
    no_intercept = LossTarget.linear_regression(include_intercept=False)
    pairs = [(cc_estimate(ones, no_intercept), cc_estimate(ones)),
             (ppi_estimate(ones, preds, no_intercept), ppi_estimate(ones, preds)),
             (ppipp_estimate(ones, preds, no_intercept, LambdaPolicy.fixed(0.4)),
              ppipp_estimate(ones, preds, policy=LambdaPolicy.fixed(0.4)))]
    for regression, mean in pairs:
        assert_allclose(regression.theta, mean.theta, rtol=1e-10)
        assert_allclose(regression.covariance, mean.covariance, rtol=1e-10)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 1000), st.floats(-100, 100))
def test_location_equivariance(seed, shift):
    dataset, preds = _small_dataset(np.random.default_rng(seed))
    shifted = Dataset(dataset.covariates, dataset.outcome + shift,
                      dataset.label_indicator)
    shifted_preds = PredictionSet(preds.values + shift)
    policy = LambdaPolicy.fixed(0.5)
    for target in (LossTarget.mean(), OLS):
        pairs = [(cc_estimate(dataset, target), cc_estimate(shifted, target)),
                 (ppi_estimate(dataset, preds, target),
                  ppi_estimate(shifted, shifted_preds, target)),
                 (ppipp_estimate(dataset, preds, target, policy),
                  ppipp_estimate(shifted, shifted_preds, target, policy))]
        for base, moved in pairs:
            expected = base.theta.copy()
            expected[0] += shift
            assert_allclose(moved.theta, expected, rtol=1e-9, atol=1e-8)
            assert_allclose(moved.se, base.se, rtol=1e-6, atol=1e-8)


def test_ppipp_optimized_mean(make_data):
    dataset, preds = make_data(4)
    mask = dataset.label_indicator
    y, f_l, f_u = dataset.labeled_outcome, preds.values[mask], preds.values[~mask]
    expected = np.cov(y, f_l, ddof=1)[0, 1] / \
        (np.var(preds.values, ddof=1) * (1 + y.size / f_u.size))
    estimate = ppipp_estimate(dataset, preds)
    assert estimate.lambda_ == approx(min(max(expected, 0.0), 1.0))
    assert optimal_mean_lambda(y, f_l, f_u) == estimate.lambda_
    assert estimate.metadata["lambda_mode"] == "Optimized"
    assert estimate.se[0] <= cc_estimate(dataset).se[0]


def test_ppipp_optimized_constant_predictions(four_rows):
    dataset, _ = four_rows
    estimate = ppipp_estimate(dataset, PredictionSet([3.0, 3.0, 3.0, 3.0]))
    assert estimate.lambda_ == 0.0
    assert estimate.theta[0] == approx(2.0)


def test_ppipp_optimized_regression(make_data):
    dataset, preds = make_data(5)
    estimate = ppipp_estimate(dataset, preds, OLS)
    assert round(estimate.lambda_ * 100) == approx(estimate.lambda_ * 100)
    trace = np.trace(estimate.covariance)
    assert trace <= np.trace(cc_estimate(dataset, OLS).covariance)
    assert trace <= np.trace(ppi_estimate(dataset, preds, OLS).covariance)


def test_ppipp_ignores_useless_predictions():
    for seed in range(100):
        rng = np.random.default_rng(seed)
        n_l, n_u = 1000, 250
        labels = np.r_[np.ones(n_l, dtype=int), np.zeros(n_u, dtype=int)]
        dataset = Dataset(rng.standard_normal(n_l + n_u), rng.standard_normal(n_l + n_u),
                          labels)
        preds = PredictionSet(rng.standard_normal(n_l + n_u))
        estimate = ppipp_estimate(dataset, preds)
        assert estimate.lambda_ <= 0.05
        ratio = compare_widths(estimate, cc_estimate(dataset))["ratio"].iloc[0]
        assert ratio <= 1.02


def test_confidence_interval(four_rows):
    dataset, _ = four_rows
    ci = confidence_interval(cc_estimate(dataset), 0.90)
    assert ci.lower[0] == approx(2 - 1.6449, abs=1e-4)
    assert ci.upper[0] == approx(2 + 1.6449, abs=1e-4)
    with pytest.raises(InvalidLevel):
        confidence_interval(cc_estimate(dataset), 1.2)


def test_variance_gap_formula():
    rng = np.random.default_rng(0)
    X = rng.standard_normal(100)
    preds = PredictionSet(2 * X)
    labels = np.r_[np.ones(50, dtype=int), np.zeros(50, dtype=int)]
    dataset = Dataset(X, X, labels)
    gap = variance_gap(dataset, preds)
    assert gap.pi == 0.5
    assert gap.n == 100
    assert gap.var_pred == approx(np.var(2 * X, ddof=1))
    assert gap.cov_y_pred == approx(2 * np.var(X[:50], ddof=1))


def test_variance_gap_monte_carlo():
    rng = np.random.default_rng(2024)
    n, pi = 2000, 0.5
    cc, ppi = [], []
    for _ in range(2000):
        X = rng.standard_normal(n)
        y = X + rng.standard_normal(n)
        labels = rng.random(n) < pi
        dataset = Dataset(X, y, labels)
        cc.append(cc_estimate(dataset).theta[0])
        ppi.append(ppi_estimate(dataset, PredictionSet(2 * X)).theta[0])
    observed = np.var(ppi, ddof=1) - np.var(cc, ddof=1)
    expected = 4 / (pi * (1 - pi) * n) - 2 * 2 / (pi * n)
    assert observed == approx(expected, rel=0.15)


def test_compare_widths(make_data):
    dataset, preds = make_data(6, pred_noise=0.1)
    table = compare_widths(ppi_estimate(dataset, preds, OLS), cc_estimate(dataset, OLS))
    assert list(table.columns) == ["coefficient", "width", "reference_width", "ratio"]
    assert table["coefficient"].tolist() == ["intercept", "x1", "x2"]
    assert (table["ratio"] < 1).all()
    with pytest.raises(InvalidSpec):
        compare_widths(cc_estimate(dataset), cc_estimate(dataset, OLS))


def test_rank_deficient_design():
    rng = np.random.default_rng(7)
    x = rng.standard_normal(20)
    labels = np.r_[np.ones(10, dtype=int), np.zeros(10, dtype=int)]
    dataset = Dataset(np.column_stack([x, x]), x, labels)
    with pytest.raises(RankDeficientDesign):
        cc_estimate(dataset, OLS)


def test_estimator_errors(four_rows):
    dataset, preds = four_rows
    with pytest.raises(InsufficientLabeled):
        cc_estimate(dataset, OLS)
    with pytest.raises(InvalidSpec):
        ppi_estimate(dataset, None)
    all_labeled = Dataset([1.0, 2.0, 3.0], [1.0, 2.0, 4.0], [1, 1, 1])
    with pytest.raises(EmptyUnlabeled):
        ppi_estimate(all_labeled, PredictionSet([1.0, 2.0, 3.0]))
    with pytest.raises(InvalidSpec):
        rng = np.random.default_rng(0)
        data = Dataset(rng.standard_normal(8), rng.standard_normal(8),
                       [1, 1, 1, 1, 0, 0, 0, 0])
        ppi_estimate(data, PredictionSet(np.zeros(8)), OLS, all_rows=True)
