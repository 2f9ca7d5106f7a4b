"""Command line interface of ppikit.

    ppikit estimate --input data.csv --method ppipp --target mean
    ppikit diagnose --input data.csv --pretrained
    ppikit simulate --config scenario.json --out table.csv --jobs 4
    ppikit version

Machine-readable output goes to standard output or files, human-readable
text to standard error.  Exit codes: 0 success, 1 usage error, 2 data
error.
"""

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path
from typing import Optional, Sequence

from ppikit.classes import BootConfig, DiagnosticThresholds, LambdaPolicy, \
    LearnerSpec, LossTarget
from ppikit.establishing import EstimationLogger
from ppikit.establishing.constants import DEFAULT_BOOT_REPLICATES, \
    DEFAULT_FOLDS, DEFAULT_LEVEL, SCHEMA_VERSION
from ppikit.processing import build_report, canonical_method, cc_estimate, \
    cross_ppboot_ci, cross_ppi_estimate, emit_table, estimate_to_json, \
    ingest_csv, load_scenario, ppi_estimate, ppipp_estimate, recommend, \
    run_scenario
from ppikit.utils import InvalidSpec, PPIKitError, resolve_seed

USAGE_ERROR = 1
DATA_ERROR = 2


class _Parser(argparse.ArgumentParser):
    """Argument parser exiting with code 1 on usage errors."""
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(USAGE_ERROR, f"{self.prog}: error: {message}\n")


def _build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ppikit",
                     description="Prediction-powered inference toolkit.")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    est = sub.add_parser("estimate", help="Estimate a mean or regression coefficients")
    est.add_argument("--input", required=True, help="CSV file id,x1..xp,y,s[,yhat]")
    est.add_argument("--schema", help="JSON file mapping columns onto the data model")
    est.add_argument("--method", default="ppipp",
                     help="classical (cc), ppi, ppipp, crossppi or crossppboot")
    est.add_argument("--target", default="mean", choices=["mean", "ols"])
    est.add_argument("--no-intercept", action="store_true",
                     help="Fit the regression without intercept")
    est.add_argument("--level", type=float, default=DEFAULT_LEVEL)
    est.add_argument("--lambda", dest="lambda_", type=float,
                     help="Fixed PPI++ lambda in [0, 1]; optimized if omitted")
    est.add_argument("--all-rows", action="store_true",
                     help="PPI mean averaging predictions over all rows")
    est.add_argument("--learner", default="Ridge",
                     help="Ridge, GBStumps or a JSON learner specification")
    est.add_argument("--K", type=int, default=DEFAULT_FOLDS, help="Number of folds")
    est.add_argument("--boot", type=int, default=DEFAULT_BOOT_REPLICATES,
                     help="Bootstrap replicates of Cross-PPBoot")
    est.add_argument("--seed", type=int, help="Seed of folds and bootstrap")
    est.add_argument("--drop-incomplete", action="store_true",
                     help="Drop rows with missing covariates instead of failing")

    diag = sub.add_parser("diagnose", help="Check the identification assumptions")
    diag.add_argument("--input", required=True)
    diag.add_argument("--schema")
    diag.add_argument("--pretrained", action="store_true",
                      help="A pre-trained model produced the predictions")
    diag.add_argument("--smd-threshold", type=float)
    diag.add_argument("--pvalue-threshold", type=float)
    diag.add_argument("--permutations", type=int, default=200)
    diag.add_argument("--seed", type=int)
    diag.add_argument("--drop-incomplete", action="store_true")

    sim = sub.add_parser("simulate", help="Run a Monte Carlo coverage study")
    sim.add_argument("--config", required=True, help="Scenario JSON file")
    sim.add_argument("--out", required=True, help="Coverage table CSV")
    sim.add_argument("--jobs", type=int, default=1)
    sim.add_argument("--seed", type=int)
    sim.add_argument("--audit", help="Per-replication JSON lines file")
    sim.add_argument("--verbose", action="store_true")

    sub.add_parser("version", help="Print the version")
    return parser


def _require_file(path: str) -> Path:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"No such file: '{path}'")
    return path


def _require_parent(path: str) -> Path:
    path = Path(path)
    if not path.parent.is_dir():
        raise FileNotFoundError(f"No such directory: '{path.parent}'")
    return path


def _read_json(path: Path):
    with open(path, encoding="utf-8") as inf:
        try:
            return json.load(inf)
        except json.JSONDecodeError as err:
            raise InvalidSpec(f"'{path}' is not valid JSON: {err}") from None


def _learner(text: str) -> LearnerSpec:
    if text.lstrip().startswith("{"):
        try:
            return LearnerSpec.from_dict(json.loads(text))
        except json.JSONDecodeError as err:
            raise InvalidSpec(f"Learner is not valid JSON: {err}") from None
    kinds = {"ridge": "Ridge", "gbstumps": "GBStumps"}
    return LearnerSpec.from_dict({"kind": kinds.get(text.strip().lower(), text)})


def _ingest(args):
    path = _require_file(args.input)
    schema = _read_json(_require_file(args.schema)) if args.schema else None
    policy = "drop" if args.drop_incomplete else "raise"
    return ingest_csv(path, schema, on_missing_covariates=policy)


def _estimate(args) -> int:
    method = canonical_method(args.method)
    if method == "Oracle":
        raise InvalidSpec("The oracle is available in simulations only")
    if args.lambda_ is not None and method != "PPIpp":
        raise InvalidSpec("--lambda applies to the ppipp method only")
    target = LossTarget.mean() if args.target == "mean" else \
        LossTarget.linear_regression(not args.no_intercept)
    dataset, predictions = _ingest(args)
    seed = resolve_seed(args.seed, 0)
    interval = None
    with EstimationLogger(method, dataset.n_l, dataset.n_u, str(target)) as log:
        if method == "Classical":
            estimate = cc_estimate(dataset, target)
        elif method in ("PPI", "PPIpp"):
            if predictions is None:
                raise InvalidSpec(f"{method} needs a prediction column (yhat)")
            if method == "PPI":
                estimate = ppi_estimate(dataset, predictions, target,
                                        all_rows=args.all_rows)
            else:
                policy = LambdaPolicy.optimized() if args.lambda_ is None \
                    else LambdaPolicy.fixed(args.lambda_)
                estimate = ppipp_estimate(dataset, predictions, target, policy)
        elif method == "CrossPPI":
            estimate = cross_ppi_estimate(dataset, _learner(args.learner), args.K,
                                          seed, target)
        else:
            boot = BootConfig(args.boot, seed, args.level)
            estimate, interval = cross_ppboot_ci(dataset, _learner(args.learner),
                                                 args.K, seed, target, boot)
        log.estimate = estimate
    interval = interval or estimate.confidence_interval(args.level)
    print(estimate_to_json(estimate, interval))
    return 0


def _diagnose(args) -> int:
    defaults = DiagnosticThresholds()
    thresholds = DiagnosticThresholds(
        defaults.smd if args.smd_threshold is None else args.smd_threshold,
        defaults.pvalue if args.pvalue_threshold is None else args.pvalue_threshold)
    dataset, predictions = _ingest(args)
    report = build_report(dataset, predictions, thresholds,
                          has_pretrained=args.pretrained,
                          permutations=args.permutations,
                          seed=resolve_seed(args.seed, 0))
    advice = recommend(report)
    out = report.to_dict()
    out["recommendation"] = advice.to_dict()
    print(json.dumps(out, indent=2))
    print(report.render(), file=sys.stderr)
    print(f"Recommended variant: {advice.variant}", file=sys.stderr)
    for reason in advice.reasons:
        print(f"  - {reason}", file=sys.stderr)
    return 0


def _simulate(args) -> int:
    config = _require_file(args.config)
    out = _require_parent(args.out)
    if args.audit:
        _require_parent(args.audit)
    if args.jobs == 0:
        raise InvalidSpec("--jobs must not be 0")
    dgp, mech, scenario = load_scenario(config)
    seed = resolve_seed(args.seed, scenario.mc.seed)
    scenario = replace(scenario, mc=replace(scenario.mc, seed=seed))
    table = run_scenario(dgp, mech, scenario, jobs=args.jobs, verbose=args.verbose,
                         audit_path=args.audit)
    emit_table(table, out)
    print(table.summary(), file=sys.stderr)
    print(f"Wrote {len(table):,} rows to {out}", file=sys.stderr)
    return 0


def _version() -> int:
    from ppikit import __version__
    print(json.dumps({"schema_version": SCHEMA_VERSION, "version": __version__}))
    return 0


def run(argv: Optional[Sequence[str]] = None) -> int:
    """Run the command line with arguments `argv` and return the exit code."""
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as err:
        return USAGE_ERROR if err.code not in (0, None) else 0
    if args.command is None:
        parser.print_help(sys.stderr)
        return USAGE_ERROR
    commands = {"estimate": _estimate, "diagnose": _diagnose,
                "simulate": _simulate}
    try:
        if args.command == "version":
            return _version()
        return commands[args.command](args)
    except (PPIKitError, OSError) as err:
        print(f"ppikit {args.command}: {type(err).__name__}: {err}", file=sys.stderr)
        return DATA_ERROR


def main() -> None:
    sys.exit(run())
