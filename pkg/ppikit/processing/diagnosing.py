"""Module with the checks of the identification assumptions and the
variant recommender.

(A1) labels missing at random, (A2) predictions compatible with the
labeled data, (A3) complete covariates.  Outcomes are unobserved on
unlabeled rows, so balance checks use covariates only.
"""

from typing import Iterable, Optional, Union

import numpy as np
import pandas as pd
import scipy.stats as ss
from scipy.spatial.distance import cdist

from ppikit.classes import Dataset, DiagnosticReport, DiagnosticThresholds, \
    PredictionSet, Recommendation
from ppikit.establishing import get_logger
from ppikit.establishing.constants import ENERGY_MAX_ROWS, FLAGS
from ppikit.processing.utils import rng_stream
from ppikit.utils import DegenerateScale, DimensionMismatch, EmptySample, \
    InsufficientLabeled, InvalidSpec, TooFewSamples

__all__ = ["standardized_mean_diff", "ks_two_sample", "energy_distance",
           "prediction_shift_check", "build_report", "recommend"]


def standardized_mean_diff(labeled, unlabeled) -> float:
    """(mean_l - mean_u) / sqrt((V_l + V_u) / 2).

    Raises
    ------
    TooFewSamples
        If a sample has fewer than 2 elements.

    DegenerateScale
        If both samples are constant at different values.
    """
    a = np.asarray(labeled, dtype=np.float64).ravel()
    b = np.asarray(unlabeled, dtype=np.float64).ravel()
    if a.size < 2 or b.size < 2:
        raise TooFewSamples(f"Both samples need 2 elements, got {a.size} and {b.size}")
    diff = a.mean() - b.mean()
    pooled = np.sqrt((a.var(ddof=1) + b.var(ddof=1)) / 2)
    if pooled == 0:
        if diff == 0:
            return 0.0
        raise DegenerateScale("Both samples are constant but their means differ")
    return float(diff / pooled)


def ks_two_sample(a, b) -> dict:
    """Two-sample Kolmogorov-Smirnov test.

    The statistic is the largest gap between the right-continuous ECDFs
    over all pooled sample points; the p-value comes from the limiting
    Kolmogorov distribution at effective size n_a n_b / (n_a + n_b).

    Returns
    -------
    result : dict
        Keys stat and pvalue.

    Raises
    ------
    EmptySample
        If a sample is empty.
    """
    a = np.sort(np.asarray(a, dtype=np.float64).ravel())
    b = np.sort(np.asarray(b, dtype=np.float64).ravel())
    if a.size == 0 or b.size == 0:
        raise EmptySample("Kolmogorov-Smirnov test needs two non-empty samples")
    points = np.concatenate([a, b])
    cdf_a = np.searchsorted(a, points, side="right") / a.size
    cdf_b = np.searchsorted(b, points, side="right") / b.size
    stat = float(np.abs(cdf_a - cdf_b).max())
    en = a.size * b.size / (a.size + b.size)
    pvalue = float(np.clip(ss.kstwobign.sf(np.sqrt(en) * stat), 0.0, 1.0))
    return {"stat": stat, "pvalue": pvalue}


def _as_matrix(values) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    return arr.reshape(-1, 1) if arr.ndim == 1 else arr


def _energy_from_distances(D: np.ndarray, in_a: np.ndarray, total: float) -> float:
    w_a = in_a.astype(np.float64)
    w_b = 1.0 - w_a
    n_a, n_b = w_a.sum(), w_b.sum()
    s_aa = w_a @ D @ w_a
    s_bb = w_b @ D @ w_b
    s_ab = (total - s_aa - s_bb) / 2
    return max(2 * s_ab / (n_a * n_b) - s_aa / n_a ** 2 - s_bb / n_b ** 2, 0.0)


def energy_distance(A, B, permutations: int = 0, seed: int = 0) -> dict:
    """Energy distance between two samples of rows,

    2 mean|a - b| - mean|a - a'| - mean|b - b'|

    over all pairs (V-statistic) with Euclidean norms.

    Parameters
    ----------
    A, B : array-like of shape (n_a, p) and (n_b, p)
        The samples.  Vectors are read as one column.

    permutations : int (optional, default=0)
        Number of random relabelings of the pooled rows for the p-value
        (1 + #{permuted >= observed}) / (1 + permutations).  Permutation i
        uses the stream seeded by (seed, i).

    seed : int (optional, default=0)
        Seed of the permutations.

    Returns
    -------
    result : dict
        Keys dist and pvalue; pvalue is None without permutations.

    Raises
    ------
    DimensionMismatch
        If the samples have different column counts.
    """
    A, B = _as_matrix(A), _as_matrix(B)
    if A.shape[1] != B.shape[1]:
        msg = f"Samples have {A.shape[1]} and {B.shape[1]} columns"
        raise DimensionMismatch(msg)
    if A.shape[0] == 0 or B.shape[0] == 0:
        raise EmptySample("Energy distance needs two non-empty samples")
    if permutations < 0:
        raise InvalidSpec(f"Permutations must be >= 0, got {permutations}")
    dist = max(2 * cdist(A, B).mean() - cdist(A, A).mean() - cdist(B, B).mean(), 0.0)
    if not permutations:
        return {"dist": float(dist), "pvalue": None}

    pooled = np.vstack([A, B])
    D = cdist(pooled, pooled)
    n, n_a = pooled.shape[0], A.shape[0]
    total = D.sum()
    exceed = 0
    for i in range(permutations):
        in_a = np.zeros(n, dtype=bool)
        in_a[rng_stream(seed, i).permutation(n)[:n_a]] = True
        exceed += _energy_from_distances(D, in_a, total) >= dist
    return {"dist": float(dist), "pvalue": (1 + exceed) / (1 + permutations)}


def prediction_shift_check(dataset: Dataset, predictions: PredictionSet) -> dict:
    """One-sample t-test of labeled residuals Y - Yhat against zero.

    A small p-value hints at miscalibrated predictions, a warning about
    (A2) rather than proof of a violation.

    Returns
    -------
    result : dict
        Keys mean_residual, t_stat, pvalue and degenerate.  Constant
        residuals are degenerate: zero residuals give t = 0 and p-value 1,
        others an infinite t and p-value 0.

    Raises
    ------
    InsufficientLabeled
        If n_l < 2.
    """
    if dataset.n_l < 2:
        raise InsufficientLabeled(f"At least 2 labeled rows are required, found {dataset.n_l}")
    predictions.check_against(dataset)
    resid = dataset.labeled_outcome - predictions.values[dataset.label_indicator]
    mean = float(resid.mean())
    if resid.std(ddof=1) == 0:
        if mean == 0:
            return {"mean_residual": 0.0, "t_stat": 0.0, "pvalue": 1.0,
                    "degenerate": True}
        return {"mean_residual": mean, "t_stat": float(np.copysign(np.inf, mean)),
                "pvalue": 0.0, "degenerate": True}
    res = ss.ttest_1samp(resid, 0.0)
    return {"mean_residual": mean, "t_stat": float(res.statistic),
            "pvalue": float(res.pvalue), "degenerate": False}


def _subsample(X: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    if X.shape[0] <= ENERGY_MAX_ROWS:
        return X
    return X[np.sort(rng.choice(X.shape[0], ENERGY_MAX_ROWS, replace=False))]


def build_report(
        dataset: Dataset,
        predictions: Optional[PredictionSet] = None,
        thresholds: Optional[DiagnosticThresholds] = None,
        has_pretrained: bool = True,
        permutations: int = 200,
        seed: int = 0
) -> DiagnosticReport:
    """Run the assumption battery on a dataset.

    Parameters
    ----------
    dataset : Dataset
        The observed data, with at least 2 labeled rows and 1 unlabeled
        row.  With a single unlabeled row the SMDs are NaN and never flag.

    predictions : PredictionSet (optional, default=None)
        Predictions of a pre-trained model.  Without them the prediction
        shift check is skipped.

    thresholds : DiagnosticThresholds (optional, default=None)
        Flag thresholds.  If None, |SMD| > 0.1 and p < 0.01.

    has_pretrained : bool (optional, default=True)
        Whether a pre-trained model is available.  Without one (A2) is
        suspect, as predictions would have to come from the same data.

    permutations : int (optional, default=200)
        Permutations of the energy-distance test.  Groups larger than
        1,000 rows are subsampled.

    seed : int (optional, default=0)
        Seed of the subsampling and permutations.

    Returns
    -------
    report : DiagnosticReport
        A1_suspect if any |smd| or any KS or energy p-value crosses its
        threshold; A2_suspect without a pre-trained model or with a
        significant prediction shift; A3_violated if rows were rejected
        for missing covariates.
    """
    thresholds = thresholds or DiagnosticThresholds()
    mask = dataset.label_indicator
    X_l, X_u = dataset.covariates[mask], dataset.covariates[~mask]
    triggers = {flag: [] for flag in FLAGS}

    rows = []
    for j, name in enumerate(dataset.covariate_names):
        try:
            smd = standardized_mean_diff(X_l[:, j], X_u[:, j])
        except DegenerateScale:
            smd = float(np.copysign(np.inf, X_l[:, j].mean() - X_u[:, j].mean()))
        except TooFewSamples as err:
            get_logger().warning("SMD of %s not computed: %s", name, err)
            smd = np.nan
        ks = ks_two_sample(X_l[:, j], X_u[:, j])
        if abs(smd) > thresholds.smd:
            triggers["A1_suspect"].append(f"|SMD| of {name} is {abs(smd):.3f}")
        if ks["pvalue"] < thresholds.pvalue:
            triggers["A1_suspect"].append(f"KS p-value of {name} is {ks['pvalue']:.2g}")
        rows.append({"name": name, "smd": smd, "ks_stat": ks["stat"],
                     "ks_pvalue": ks["pvalue"]})
    per_covariate = pd.DataFrame(rows, columns=["name", "smd", "ks_stat", "ks_pvalue"])

    rng = rng_stream(seed)
    energy = energy_distance(_subsample(X_l, rng), _subsample(X_u, rng),
                             permutations=permutations, seed=seed)
    if energy["pvalue"] is not None and energy["pvalue"] < thresholds.pvalue:
        triggers["A1_suspect"].append(f"energy distance p-value is {energy['pvalue']:.2g}")

    shift = None
    if not has_pretrained:
        triggers["A2_suspect"].append("no pre-trained model is available")
    if predictions is not None:
        shift = prediction_shift_check(dataset, predictions)
        if shift["pvalue"] < thresholds.pvalue:
            triggers["A2_suspect"].append(
                f"labeled residuals have mean {shift['mean_residual']:.4g} "
                f"(p-value {shift['pvalue']:.2g})")

    if dataset.rejected_rows:
        triggers["A3_violated"].append(
            f"{dataset.rejected_rows:,} row(s) rejected for missing covariates")

    missingness = {"n_l": dataset.n_l, "n_u": dataset.n_u,
                   "labeled_fraction": dataset.labeled_fraction,
                   "rejected_rows": dataset.rejected_rows}
    report = DiagnosticReport(per_covariate, energy["dist"], energy["pvalue"], shift,
                              missingness, triggers, thresholds, has_pretrained)
    get_logger().info("Diagnostics on n_l=%s, n_u=%s: %r", dataset.n_l, dataset.n_u,
                      report)
    return report


_ADVICE = {
    "A1_suspect": "labeling may depend on covariates: use a MAR-robust variant "
                  "with a propensity model",
    "A2_suspect": "predictions may not transfer: train within the labeled data "
                  "with K-fold cross-fitting (Cross-PPI, Cross-PPBoot)",
    "A3_violated": "covariates are incomplete: impute covariates before "
                   "prediction-powered inference",
}
_SINGLE = {"A1_suspect": "MAR_robust_variant", "A2_suspect": "CrossFit_variant",
           "A3_violated": "Imputation_variant"}


def recommend(
        report: Union[DiagnosticReport, Iterable[str]],
        has_pretrained: Optional[bool] = None
) -> Recommendation:
    """Suggest an estimator variant from the diagnostic flags.

    Parameters
    ----------
    report : DiagnosticReport or iterable of str
        A report, or the raised flags directly.

    has_pretrained : bool (optional, default=None)
        Whether a pre-trained model is available.  If None, taken from the
        report (or True for bare flags).  Without a pre-trained model
        A2_suspect is always raised.

    Returns
    -------
    recommendation : Recommendation
        PPI_or_PPIpp without flags, the matching variant for a single
        flag, Combined for several.  The result is advisory.
    """
    if isinstance(report, DiagnosticReport):
        flags = set(report.flags)
        triggers = report.triggers
        if has_pretrained is None:
            has_pretrained = report.has_pretrained
    else:
        flags = set(report)
        triggers = {}
        unknown = flags - set(FLAGS)
        if unknown:
            raise InvalidSpec(f"Unknown flag(s): {', '.join(sorted(unknown))}")
    if has_pretrained is False:
        flags.add("A2_suspect")
        triggers.setdefault("A2_suspect", ["no pre-trained model is available"])

    if not flags:
        return Recommendation("PPI_or_PPIpp",
                              ["no assumption flagged: PPI, or PPI++ for "
                               "guaranteed no loss over complete-case"])
    reasons = []
    for flag in sorted(flags):
        checks = "; ".join(triggers.get(flag, [])) or "flag raised"
        reasons.append(f"{flag} ({checks}): {_ADVICE[flag]}")
    variant = _SINGLE[flags.pop()] if len(flags) == 1 else "Combined"
    return Recommendation(variant, reasons)
