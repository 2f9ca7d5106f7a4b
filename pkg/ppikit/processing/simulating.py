"""Module with the simulation lab: synthetic data, labeling mechanisms,
training regimes and Monte Carlo coverage studies.
"""

import json
from dataclasses import replace
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np
import pandas as pd
from joblib import Parallel, delayed
from tqdm import tqdm

from ppikit.classes import TABLE_COLUMNS, BootConfig, CoverageTable, Dataset, \
    DGPSpec, DoubleDipping, Estimate, Holdout, LabelMechanism, LearnerSpec, \
    LossTarget, MonteCarloSpec, PredictionSet, ScenarioSpec
from ppikit.establishing import EstimationLogger, attach_logger, current_log_file, \
    get_logger
from ppikit.establishing.constants import METHODS, REFERENCE_METHODS
from ppikit.processing.crossfitting import bootstrap_replicates, \
    crossfit_predict, make_folds, percentile_interval
from ppikit.processing.estimating import cc_estimate, ppi_estimate, ppipp_estimate
from ppikit.processing.learning import fit_learner
from ppikit.processing.utils import canonical_method, rng_stream
from ppikit.utils import InfeasibleMechanism, InvalidSpec, custom_print, get_ending

__all__ = ["generate", "apply_labeling", "run_scenario", "run_sweep",
           "emit_table", "load_scenario"]

# Stream keys within a replication
_INTERNAL, _LABELS, _EXTERNAL, _FOLDS, _BOOT = range(5)


def generate(dgp: DGPSpec, seed: int, *keys: int) -> dict:
    """Draw a synthetic sample.

    Covariates share a common factor, X = sqrt(rho) Z_0 + sqrt(1 - rho) Z,
    so every pair has correlation rho = `covariate_corr`.

    Parameters
    ----------
    dgp : DGPSpec
        The data-generating process.

    seed : int
        Seed of the draw; `keys` select independent sub-streams.

    Returns
    -------
    sample : dict
        Keys covariates (n, p), true_outcomes (n,), true_beta (p + 1,)
        and true_mean.
    """
    rng = rng_stream(seed, *keys)
    rho = dgp.covariate_corr
    common = rng.standard_normal((dgp.n, 1))
    X = np.sqrt(rho) * common + np.sqrt(1 - rho) * rng.standard_normal((dgp.n, dgp.p))
    beta = np.asarray(dgp.beta)
    y = beta[0] + X @ beta[1:] + rng.normal(0.0, dgp.noise_sd, size=dgp.n)
    if dgp.nonlinearity:
        y = y + dgp.nonlinearity * np.sin(X[:, 0])
    return {"covariates": X, "true_outcomes": y, "true_beta": dgp.true_beta,
            "true_mean": dgp.true_mean}


def _probabilities(mech: LabelMechanism) -> tuple[float, float]:
    low, high = mech.probabilities
    if high > 1:
        msg = f"Labeling probability above the quantile is {high:.3f} > 1; "\
              f"lower target_pi or the multiplier"
        raise InfeasibleMechanism(msg)
    return low, high


def apply_labeling(
        true_outcomes: np.ndarray,
        mech: LabelMechanism,
        seed: int,
        *keys: int
) -> np.ndarray:
    """Draw the label indicator of each row independently.

    MCAR labels with probability pi.  MNAR labels rows whose outcome
    exceeds the sample `quantile` of `true_outcomes` with probability
    multiplier * p_low and the others with p_low, where
    p_low = target_pi / (quantile + multiplier (1 - quantile)).

    Raises
    ------
    InfeasibleMechanism
        If multiplier * p_low > 1.
    """
    y = np.asarray(true_outcomes, dtype=np.float64)
    low, high = _probabilities(mech)
    if mech.kind == "MCAR":
        probs = np.full(y.size, low)
    else:
        threshold = np.quantile(y, mech.quantile)
        probs = np.where(y > threshold, high, low)
    labels = rng_stream(seed, *keys).random(y.size) < probs
    get_logger().debug("%s labeling: realized fraction %.4f (expected %.4f)",
                       mech.kind, labels.mean(), mech.expected_fraction)
    return labels


def _truth(sample: dict, target: LossTarget) -> np.ndarray:
    if target.is_mean:
        return np.array([sample["true_mean"]])
    beta = sample["true_beta"]
    return beta if target.include_intercept else beta[1:]


def _train_predictions(dgp, scenario, dataset, sample, seed, rep) -> PredictionSet:
    regime = scenario.regime
    external = generate(replace(dgp, n=regime.n_external), seed, rep, _EXTERNAL)
    X_train, y_train = external["covariates"], external["true_outcomes"]
    if regime.kind == "DoubleDipping":
        mask = dataset.label_indicator
        X_train = np.vstack([X_train, sample["covariates"][mask]])
        y_train = np.concatenate([y_train, dataset.labeled_outcome])
    predictor = fit_learner(scenario.learner, X_train, y_train)
    return PredictionSet(predictor.predict(dataset.covariates))


def _retag(estimate: Estimate, method: str) -> Estimate:
    return Estimate(estimate.theta, estimate.covariance, method, estimate.n_l,
                    estimate.n_u, coefficient_names=estimate.coefficient_names,
                    metadata=estimate.metadata)


def _oracle(sample: dict, target: LossTarget, dataset: Dataset) -> Estimate:
    n = dataset.n
    full = Dataset(sample["covariates"], sample["true_outcomes"], np.ones(n, dtype=int),
                   covariate_names=dataset.covariate_names)
    return _retag(cc_estimate(full, target), "Oracle")


def _records(rep, method, truth, names, interval=None, theta=None, error=None):
    out = []
    for j, name in enumerate(names):
        record = {"rep": rep, "method": method, "coefficient": j, "name": name,
                  "truth": float(truth[j])}
        if error is None:
            lower, upper = float(interval.lower[j]), float(interval.upper[j])
            record.update({"estimate": float(theta[j]), "lower": lower, "upper": upper,
                           "width": upper - lower,
                           "covered": bool(lower <= truth[j] <= upper),
                           "failed": False, "error": None})
        else:
            record.update({"estimate": np.nan, "lower": np.nan, "upper": np.nan,
                           "width": np.nan, "covered": False, "failed": True,
                           "error": error})
        out.append(record)
    return out


def _run_replication(dgp, mech, scenario, rep, log_file=None) -> list[dict]:
    attach_logger(log_file)
    mc, target = scenario.mc, scenario.target
    sample = generate(dgp, mc.seed, rep, _INTERNAL)
    labels = apply_labeling(sample["true_outcomes"], mech, mc.seed, rep, _LABELS)
    dataset = Dataset(sample["covariates"], sample["true_outcomes"], labels)
    truth = _truth(sample, target)
    names = target.coefficient_names(dataset.covariate_names)

    cache = {}

    def regime_predictions():
        if "regime" not in cache:
            cache["regime"] = _train_predictions(dgp, scenario, dataset, sample,
                                                 mc.seed, rep)
        return cache["regime"]

    def crossfitted():
        if "cross" not in cache:
            dataset.require_estimable()
            fold_seed = int(rng_stream(mc.seed, rep, _FOLDS).integers(2 ** 31))
            plan = make_folds(dataset.n_l, scenario.folds, fold_seed)
            cache["cross"] = crossfit_predict(dataset, scenario.learner, plan)
        return cache["cross"]

    records = []
    for method in scenario.methods:
        try:
            with EstimationLogger(method, dataset.n_l, dataset.n_u, str(target)) as log:
                interval = None
                if method == "Classical":
                    estimate = cc_estimate(dataset, target)
                elif method == "PPI":
                    estimate = ppi_estimate(dataset, regime_predictions(), target)
                elif method == "PPIpp":
                    estimate = ppipp_estimate(dataset, regime_predictions(), target)
                elif method == "CrossPPI":
                    estimate = ppi_estimate(dataset, crossfitted(), target,
                                            method="CrossPPI")
                elif method == "CrossPPBoot":
                    boot_seed = int(rng_stream(mc.seed, rep, _BOOT).integers(2 ** 31))
                    boot = BootConfig(scenario.boot_replicates, boot_seed, mc.ci_level)
                    estimate = _retag(ppi_estimate(dataset, crossfitted(), target,
                                                   method="CrossPPI"), "CrossPPBoot")
                    interval = percentile_interval(
                        bootstrap_replicates(dataset, crossfitted(), target, boot),
                        mc.ci_level)
                else:
                    estimate = _oracle(sample, target, dataset)
                log.estimate = estimate
            interval = interval or estimate.confidence_interval(mc.ci_level)
            records += _records(rep, method, truth, names, interval, estimate.theta)
        except ValueError as err:
            records += _records(rep, method, truth, names, error=type(err).__name__)
    return records


def _aggregate(records: pd.DataFrame, scenario: ScenarioSpec) -> pd.DataFrame:
    order = {m: i for i, m in enumerate(METHODS + REFERENCE_METHODS)}
    rows = []
    for (method, coef), group in records.groupby(["method", "coefficient"], sort=False):
        ok = group[~group["failed"]]
        bias = ok["estimate"] - ok["truth"]
        rows.append({
            "method": method, "coefficient": int(coef),
            "coverage": ok["covered"].mean() if len(ok) else np.nan,
            "mean_width": ok["width"].mean() if len(ok) else np.nan,
            "mean_bias": bias.mean() if len(ok) else np.nan,
            "reps": scenario.mc.reps,
            "name": group["name"].iloc[0],
            "sd_estimate": ok["estimate"].std(ddof=1) if len(ok) > 1 else np.nan,
            "failed": int(group["failed"].sum()),
        })
    data = pd.DataFrame(rows, columns=TABLE_COLUMNS + ["name", "sd_estimate", "failed"])
    data["_order"] = data["method"].map(order)
    data = data.sort_values(["_order", "coefficient"], kind="stable")
    return data.drop(columns="_order").reset_index(drop=True)


def run_scenario(
        dgp: DGPSpec,
        mech: LabelMechanism,
        scenario: ScenarioSpec,
        jobs: int = 1,
        verbose: bool = False,
        audit_path: Optional[Union[str, Path]] = None
) -> CoverageTable:
    """Monte Carlo coverage study of the requested estimators.

    Parameters
    ----------
    dgp : DGPSpec
        The data-generating process of every replication.

    mech : LabelMechanism
        How rows are labeled.

    scenario : ScenarioSpec
        Regime, learner, methods, target and Monte Carlo settings.
        Holdout trains the learner on an external sample of size
        n_external only; DoubleDipping pools it with the internal labeled
        rows and predicts those same rows.  Cross-fitted methods train
        within the internal labeled rows in either regime.

    jobs : int (optional, default=1)
        Number of replications run concurrently, as in joblib.Parallel.
        Results do not depend on it.  Workers log to the file of the
        calling process.

    verbose : bool (optional, default=False)
        Whether to report progress.

    audit_path : str or pathlib.Path (optional, default=None)
        If given, per-replication records are written there as JSON lines.

    Returns
    -------
    table : CoverageTable
        Coverage, mean width and mean bias per method and coefficient over
        the successful replications.  Failed replications are excluded and
        counted per method.

    Raises
    ------
    InfeasibleMechanism
        If the labeling probabilities exceed 1.
    """
    _probabilities(mech)
    reps = scenario.mc.reps
    log_file = current_log_file()
    custom_print(f"Running {reps:,} replication{get_ending(reps)} of "
                 f"{len(scenario.methods)} method{get_ending(len(scenario.methods))} "
                 f"({scenario.regime.kind}, {mech.kind})...", verbose)
    results = Parallel(n_jobs=jobs)(
        delayed(_run_replication)(dgp, mech, scenario, r, log_file)
        for r in tqdm(range(reps), disable=not verbose))
    records = pd.DataFrame([rec for rep in results for rec in rep])
    data = _aggregate(records, scenario)

    per_method = records[records["coefficient"] == 0].groupby("method", sort=False)
    failures = {m: int(g["failed"].sum()) for m, g in per_method}
    log = get_logger()
    log.info("Scenario %s/%s/%s with %s replications done", scenario.regime.kind,
             mech.kind, scenario.learner.kind, reps)
    for method, count in failures.items():
        if count:
            log.warning("%s failed in %s of %s replications", method, count, reps)
            custom_print(f"{method} failed in {count:,} replication"
                         f"{get_ending(count)}", verbose)
    if audit_path is not None:
        records.to_json(audit_path, orient="records", lines=True)
    return CoverageTable(data, records=records, failures=failures)


def _sweep_mechanism(mech: LabelMechanism, fraction: float) -> LabelMechanism:
    if mech.kind == "MCAR":
        return replace(mech, pi=float(fraction))
    return replace(mech, target_pi=float(fraction))


def run_sweep(
        dgp: DGPSpec,
        mech: LabelMechanism,
        scenario: ScenarioSpec,
        external_sizes: Sequence[int],
        labeled_fractions: Sequence[float],
        jobs: int = 1,
        verbose: bool = False
) -> CoverageTable:
    """Run a scenario for every combination of external sample size and
    labeled fraction and stack the tables with columns n_external and
    labeled_fraction.
    """
    tables, failures = [], {}
    for n_external in external_sizes:
        regime = replace(scenario.regime, n_external=int(n_external))
        for fraction in labeled_fractions:
            custom_print(f"n_external={n_external:,}, labeled fraction={fraction}",
                         verbose)
            table = run_scenario(dgp, _sweep_mechanism(mech, fraction),
                                 replace(scenario, regime=regime), jobs=jobs)
            data = table.data
            data.insert(0, "labeled_fraction", float(fraction))
            data.insert(0, "n_external", int(n_external))
            tables.append(data)
            for method, count in table.failures.items():
                failures[method] = failures.get(method, 0) + count
    return CoverageTable(pd.concat(tables, ignore_index=True), failures=failures)


def emit_table(table: CoverageTable, path: Union[str, Path]) -> None:
    """Write a coverage table as CSV with header
    `method,coefficient,coverage,mean_width,mean_bias,reps`, rows ordered
    by method and coefficient index.  Sweep tables are prefixed with
    their n_external and labeled_fraction columns.
    """
    data = table.data
    keys = [c for c in ("n_external", "labeled_fraction") if c in data.columns]
    columns = keys + TABLE_COLUMNS
    if data.empty:
        pd.DataFrame(columns=columns).to_csv(path, index=False, lineterminator="\n")
        return
    order = {m: i for i, m in enumerate(METHODS + REFERENCE_METHODS)}
    data = data.assign(_order=data["method"].map(order))
    data = data.sort_values(keys + ["_order", "coefficient"], kind="stable")
    data[columns].to_csv(path, index=False, lineterminator="\n")


def _take(config: dict, allowed: set, section: str) -> dict:
    if not isinstance(config, dict):
        raise InvalidSpec(f"Section '{section}' must be a JSON object")
    unknown = set(config) - allowed
    if unknown:
        msg = f"Unknown key(s) in '{section}': {', '.join(sorted(unknown))}"
        raise InvalidSpec(msg)
    return config


def _parse_target(value) -> LossTarget:
    if isinstance(value, dict):
        _take(value, {"kind", "include_intercept"}, "target")
        return LossTarget(**value)
    aliases = {"mean": LossTarget.mean(), "ols": LossTarget.linear_regression(),
               "linearregression": LossTarget.linear_regression()}
    try:
        return aliases[str(value).lower()]
    except KeyError:
        raise InvalidSpec(f"Unknown target '{value}'") from None


def _parse_regime(value) -> Union[Holdout, DoubleDipping]:
    if isinstance(value, str):
        value = {"kind": value}
    _take(value, {"kind", "n_external"}, "regime")
    value = dict(value)
    kind = value.pop("kind", "Holdout")
    regimes = {"holdout": Holdout, "doubledipping": DoubleDipping}
    try:
        return regimes[kind.lower()](**value)
    except KeyError:
        raise InvalidSpec(f"Unknown regime '{kind}'") from None


def load_scenario(path: Union[str, Path]) -> tuple[DGPSpec, LabelMechanism, ScenarioSpec]:
    """Read a scenario configuration of the form

    {"dgp": {"n", "p", "beta", "noise_sd", "covariate_corr", "nonlinearity"},
     "mechanism": {"kind": "MCAR", "pi"} or
                  {"kind": "MNAR", "quantile", "multiplier", "target_pi"},
     "scenario": {"regime", "learner", "methods", "mc", "target", "folds",
                  "boot_replicates", "strict"}}

    Raises
    ------
    InvalidSpec
        If a key is unknown or a value is invalid.
    """
    with open(path, encoding="utf-8") as inf:
        try:
            config = json.load(inf)
        except json.JSONDecodeError as err:
            raise InvalidSpec(f"Scenario file is not valid JSON: {err}") from None
    _take(config, {"dgp", "mechanism", "scenario"}, "root")
    try:
        dgp = DGPSpec(**_take(config["dgp"], {"n", "p", "beta", "noise_sd",
                                              "covariate_corr", "nonlinearity"}, "dgp"))
        mech = dict(_take(config.get("mechanism", {}),
                          {"kind", "pi", "quantile", "multiplier", "target_pi"},
                          "mechanism"))
        kind = mech.pop("kind", "MCAR").upper()
        mech = LabelMechanism.mcar(**mech) if kind == "MCAR" else \
            LabelMechanism.mnar(**mech) if kind == "MNAR" else LabelMechanism(kind)

        raw = dict(_take(config.get("scenario", {}),
                         {"regime", "learner", "methods", "mc", "target", "folds",
                          "boot_replicates", "strict"}, "scenario"))
        kwargs = {}
        if "regime" in raw:
            kwargs["regime"] = _parse_regime(raw.pop("regime"))
        if "learner" in raw:
            kwargs["learner"] = LearnerSpec.from_dict(raw.pop("learner"))
        if "methods" in raw:
            kwargs["methods"] = tuple(canonical_method(m) for m in raw.pop("methods"))
        if "mc" in raw:
            kwargs["mc"] = MonteCarloSpec(**_take(raw.pop("mc"),
                                                  {"reps", "seed", "ci_level"}, "mc"))
        if "target" in raw:
            kwargs["target"] = _parse_target(raw.pop("target"))
        scenario = ScenarioSpec(**kwargs, **raw)
    except KeyError as err:
        raise InvalidSpec(f"Missing scenario key {err}") from None
    except TypeError as err:
        raise InvalidSpec(f"Invalid scenario value: {err}") from None
    return dgp, mech, scenario
