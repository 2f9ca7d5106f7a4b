"""Module with functions to read and write datasets, predictions and
estimates.
"""

import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal, Optional, Union

import numpy as np
import pandas as pd
from typing_extensions import Self

from ppikit.classes import ConfidenceInterval, Dataset, Estimate, PredictionSet
from ppikit.establishing import get_logger
from ppikit.utils import EmptyLabeledSet, InvalidSpec, MalformedRow, \
    MissingColumn, get_ending

__all__ = ["ColumnSchema", "ingest_csv", "emit_csv", "estimate_to_json"]

_COVARIATE_PATTERN = re.compile(r"^x\d+$")


@dataclass(frozen=True)
class ColumnSchema:
    """Mapping of CSV columns onto the data model."""
    covariates: tuple = field(default_factory=tuple)
    outcome: str = "y"
    label: str = "s"
    id: Optional[str] = "id"
    prediction: Optional[str] = None

    def __post_init__(self):
        object.__setattr__(self, "covariates", tuple(self.covariates))

    @classmethod
    def default(cls, header: list[str]) -> Self:
        """Infer the schema `id, x1..xp, y, s[, yhat]` from a header."""
        covariates = sorted((c for c in header if _COVARIATE_PATTERN.match(c)),
                            key=lambda c: int(c[1:]))
        return cls(covariates=covariates,
                   id="id" if "id" in header else None,
                   prediction="yhat" if "yhat" in header else None)

    @classmethod
    def from_dict(cls, mapping: dict) -> Self:
        allowed = {"covariates", "outcome", "label", "id", "prediction"}
        unknown = set(mapping) - allowed
        if unknown:
            raise InvalidSpec(f"Unknown schema key(s): {', '.join(sorted(unknown))}")
        return cls(**mapping)

    @property
    def columns(self) -> list[str]:
        cols = [self.id] + list(self.covariates) + [self.outcome, self.label,
                                                    self.prediction]
        return [c for c in cols if c is not None]


def _read_raw(path: Union[str, Path]) -> pd.DataFrame:
    """Read every cell as stripped text; empty cells become ''."""
    try:
        df = pd.read_csv(path, dtype=str, keep_default_na=False)
    except pd.errors.ParserError as err:
        match = re.search(r"line (\d+)", str(err))
        line = int(match.group(1)) if match else 0
        raise MalformedRow(line, "wrong number of fields") from None
    return df.apply(lambda col: col.str.strip())


def _parse_column(values: pd.Series, name: str) -> np.ndarray:
    """Parse text cells as 64-bit floats, NaN for empty cells."""
    out = np.full(values.size, np.nan)
    for i, cell in enumerate(values.to_numpy()):
        if cell == "":
            continue
        try:
            out[i] = float(cell)
        except ValueError:
            raise MalformedRow(i + 2, f"'{cell}' in column '{name}' is not a number") from None
        if not np.isfinite(out[i]):
            raise MalformedRow(i + 2, f"non-finite value in column '{name}'")
    return out


def ingest_csv(
        path: Union[str, Path],
        schema: Optional[Union[ColumnSchema, dict]] = None,
        on_missing_covariates: Literal["raise", "drop"] = "raise"
) -> tuple[Dataset, Optional[PredictionSet]]:
    """Read a dataset and optional predictions from a CSV file.

    Parameters
    ----------
    path : str or pathlib.Path
        CSV file with a header row.

    schema : ColumnSchema or dict (optional, default=None)
        Column mapping.  If None, the schema `id, x1..xp, y, s[, yhat]` is
        inferred from the header.

    on_missing_covariates : str (optional, default="raise")
        Accepted values: "raise", "drop".  Whether a row with a missing
        covariate raises `MalformedRow` or is dropped and counted in
        `Dataset.rejected_rows`.

    Returns
    -------
    dataset, predictions : Dataset and PredictionSet or None

    Raises
    ------
    MalformedRow
        If a row has a non-numeric cell, a label other than 0/1, a labeled
        row lacks its outcome, a prediction is missing, or a covariate is
        missing and `on_missing_covariates="raise"`.

    MissingColumn
        If a column named in the schema is absent.

    EmptyLabeledSet
        If no row is labeled.
    """
    if on_missing_covariates not in {"raise", "drop"}:
        raise TypeError("Argument on_missing_covariates must be 'raise' or 'drop'.")
    raw = _read_raw(path)
    header = list(raw.columns)
    if schema is None:
        schema = ColumnSchema.default(header)
    elif isinstance(schema, dict):
        schema = ColumnSchema.from_dict(schema)
    for col in schema.columns:
        if col not in header:
            raise MissingColumn(col)
    if not schema.covariates:
        raise MissingColumn("x1")
    log = get_logger()

    # Labels must be literal 0/1
    labels = raw[schema.label].to_numpy()
    bad = np.flatnonzero(~np.isin(labels, ["0", "1"]))
    if bad.size:
        i = bad[0]
        raise MalformedRow(i + 2, f"label '{labels[i]}' is not 0 or 1")
    labels = (labels == "1")

    X = np.column_stack([_parse_column(raw[c], c) for c in schema.covariates])
    y = _parse_column(raw[schema.outcome], schema.outcome)
    missing_y = np.flatnonzero(labels & np.isnan(y))
    if missing_y.size:
        raise MalformedRow(missing_y[0] + 2, "labeled row without outcome")

    # Assumption (A3): complete covariates
    incomplete = np.isnan(X).any(axis=1)
    rejected = int(incomplete.sum())
    if rejected and on_missing_covariates == "raise":
        line = np.flatnonzero(incomplete)[0] + 2
        raise MalformedRow(line, f"missing covariate ({rejected:,} row"
                                 f"{get_ending(rejected)} in total); assumption "
                                 "(A3) requires complete covariates")
    if rejected:
        log.warning("Dropped %s row(s) with missing covariates", rejected)

    discarded = int((~labels & ~np.isnan(y)).sum())
    if discarded:
        log.warning("Discarded %s outcome(s) of unlabeled rows", discarded)

    if schema.id is not None:
        ids = _parse_column(raw[schema.id], schema.id)
        if np.isnan(ids).any() or np.any(ids != np.round(ids)):
            line = np.flatnonzero(np.isnan(ids) | (ids != np.round(ids)))[0] + 2
            raise MalformedRow(line, "row ID must be an integer")
        ids = ids.astype(np.int64)
    else:
        ids = np.arange(raw.shape[0])

    keep = ~incomplete
    if not labels[keep].any():
        raise EmptyLabeledSet("The input contains no labeled rows")
    dataset = Dataset(X[keep], y[keep], labels[keep], row_id=ids[keep],
                      covariate_names=schema.covariates, rejected_rows=rejected)

    predictions = None
    if schema.prediction is not None:
        yhat = _parse_column(raw[schema.prediction], schema.prediction)
        missing_pred = np.flatnonzero(np.isnan(yhat) & keep)
        if missing_pred.size:
            raise MalformedRow(missing_pred[0] + 2, "missing prediction")
        predictions = PredictionSet(yhat[keep])
    log.info("Ingested %s: n=%s, n_l=%s, n_u=%s", path, dataset.n,
             dataset.n_l, dataset.n_u)
    return dataset, predictions


def emit_csv(
        dataset: Dataset,
        path: Union[str, Path],
        predictions: Optional[PredictionSet] = None
) -> None:
    """Write a dataset (and predictions) in the `id, x1..xp, y, s[, yhat]`
    layout read by `ingest_csv()`.  Covariates are written under the
    positional headers x1..xp whatever their names in `dataset`.  Floats are
    written with full round-trip precision.
    """
    df = pd.DataFrame(dataset.covariates,
                      columns=[f"x{j + 1}" for j in range(dataset.p)])
    df.insert(0, "id", dataset.row_id)
    df["y"] = dataset.outcome
    df["s"] = dataset.label_indicator.astype(int)
    if predictions is not None:
        predictions.check_against(dataset)
        df["yhat"] = predictions.values
    df.to_csv(path, index=False, na_rep="")


def estimate_to_json(
        estimate: Estimate,
        interval: Optional[ConfidenceInterval] = None,
        indent: Optional[int] = 2
) -> str:
    """Serialize an estimate and its interval as JSON."""
    return json.dumps(estimate.to_dict(interval), indent=indent)
