"""Module with the specification and result types of simulation studies."""

from dataclasses import dataclass, field
from typing import Literal, Optional, Union

import numpy as np
import pandas as pd
from typing_extensions import Self

from ppikit.classes.configs import LearnerSpec
from ppikit.classes.dataset import LossTarget
from ppikit.establishing.constants import DEFAULT_FOLDS, DEFAULT_LEVEL, \
    METHODS, MIN_BOOT_REPLICATES, REFERENCE_METHODS
from ppikit.utils import InvalidSpec

__all__ = ["DGPSpec", "LabelMechanism", "Holdout", "DoubleDipping",
           "MonteCarloSpec", "ScenarioSpec", "CoverageTable", "TABLE_COLUMNS"]

TABLE_COLUMNS = ["method", "coefficient", "coverage", "mean_width",
                 "mean_bias", "reps"]


@dataclass(frozen=True)
class DGPSpec:
    """Gaussian data-generating process

    Y = [1, X] beta + nonlinearity * sin(X_1) + eps,  eps ~ N(0, noise_sd^2),

    with equicorrelated standard-normal covariates.
    """
    n: int
    p: int
    beta: tuple
    noise_sd: float = 1.0
    covariate_corr: float = 0.0
    nonlinearity: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "beta", tuple(float(b) for b in self.beta))
        if int(self.n) != self.n or self.n < 1:
            raise InvalidSpec(f"n must be a positive integer, got {self.n}")
        if int(self.p) != self.p or self.p < 1:
            raise InvalidSpec(f"p must be a positive integer, got {self.p}")
        if len(self.beta) != self.p + 1:
            msg = f"beta needs {self.p + 1} entries (intercept first), "\
                  f"got {len(self.beta)}"
            raise InvalidSpec(msg)
        if not self.noise_sd > 0:
            raise InvalidSpec(f"noise_sd must be > 0, got {self.noise_sd}")
        if not 0 <= self.covariate_corr < 1:
            raise InvalidSpec(f"covariate_corr must lie in [0, 1), got {self.covariate_corr}")
        if not self.nonlinearity >= 0:
            raise InvalidSpec(f"nonlinearity must be >= 0, got {self.nonlinearity}")

    @property
    def true_beta(self) -> np.ndarray:
        """Population least-squares coefficients of Y on [1, X].

        For standard-normal X_1, E[X_1 sin(X_1)] = exp(-1/2), and with
        equicorrelated covariates the projection of sin(X_1) loads on
        X_1 only.
        """
        beta = np.array(self.beta)
        beta[1] += self.nonlinearity * np.exp(-0.5)
        return beta

    @property
    def true_mean(self) -> float:
        return self.beta[0]


@dataclass(frozen=True)
class LabelMechanism:
    """Which rows get an observed outcome.

    MCAR labels every row with probability `pi`.  MNAR labels rows whose
    outcome exceeds the `quantile` of outcomes `multiplier` times more
    often than the rest, with the low probability solved so the expected
    labeled fraction equals `target_pi`.
    """
    kind: Literal["MCAR", "MNAR"] = "MCAR"
    pi: Optional[float] = 0.5
    quantile: float = 0.8
    multiplier: float = 10.0
    target_pi: Optional[float] = None

    def __post_init__(self):
        if self.kind == "MCAR":
            if self.pi is None or not 0 < self.pi < 1:
                raise InvalidSpec(f"MCAR pi must lie in (0, 1), got {self.pi}")
        elif self.kind == "MNAR":
            if not 0 < self.quantile < 1:
                raise InvalidSpec(f"Quantile must lie in (0, 1), got {self.quantile}")
            if not self.multiplier > 1:
                raise InvalidSpec(f"Multiplier must be > 1, got {self.multiplier}")
            if self.target_pi is None or not 0 < self.target_pi < 1:
                raise InvalidSpec(f"target_pi must lie in (0, 1), got {self.target_pi}")
        else:
            raise InvalidSpec(f"Unknown labeling mechanism '{self.kind}'")

    @classmethod
    def mcar(cls, pi: float = 0.5) -> Self:
        return cls("MCAR", pi=float(pi))

    @classmethod
    def mnar(cls, quantile: float = 0.8, multiplier: float = 10.0,
             target_pi: float = 0.2) -> Self:
        return cls("MNAR", pi=None, quantile=float(quantile),
                   multiplier=float(multiplier), target_pi=float(target_pi))

    @property
    def probabilities(self) -> tuple[float, float]:
        """Labeling probabilities (below, above) the outcome quantile."""
        if self.kind == "MCAR":
            return self.pi, self.pi
        p_low = self.target_pi / (self.quantile + self.multiplier * (1 - self.quantile))
        return p_low, self.multiplier * p_low

    @property
    def expected_fraction(self) -> float:
        return self.pi if self.kind == "MCAR" else self.target_pi


@dataclass(frozen=True)
class Holdout:
    """Learner trained on an external labeled sample disjoint from the
    inference data.
    """
    n_external: int = 1000
    kind: Literal["Holdout"] = "Holdout"


@dataclass(frozen=True)
class DoubleDipping:
    """Learner trained on the external sample pooled with the internal
    labeled rows, then used to predict every internal row.
    """
    n_external: int = 1000
    kind: Literal["DoubleDipping"] = "DoubleDipping"


@dataclass(frozen=True)
class MonteCarloSpec:
    reps: int = 500
    seed: int = 0
    ci_level: float = DEFAULT_LEVEL

    def __post_init__(self):
        if int(self.reps) != self.reps or self.reps < 1:
            raise InvalidSpec(f"reps must be a positive integer, got {self.reps}")
        if int(self.seed) != self.seed or self.seed < 0:
            raise InvalidSpec(f"seed must be a non-negative integer, got {self.seed}")
        if not 0 < self.ci_level < 1:
            raise InvalidSpec(f"ci_level must lie in (0, 1), got {self.ci_level}")


@dataclass(frozen=True)
class ScenarioSpec:
    """How predictions are produced and which estimators are compared."""
    regime: Union[Holdout, DoubleDipping] = field(default_factory=Holdout)
    learner: LearnerSpec = field(default_factory=LearnerSpec)
    methods: tuple = METHODS
    mc: MonteCarloSpec = field(default_factory=MonteCarloSpec)
    target: LossTarget = field(default_factory=LossTarget.linear_regression)
    folds: int = DEFAULT_FOLDS
    boot_replicates: int = 200
    strict: bool = False

    def __post_init__(self):
        methods = tuple(self.methods)
        if not methods:
            raise InvalidSpec("At least one method is required")
        unknown = set(methods) - set(METHODS + REFERENCE_METHODS)
        if unknown:
            raise InvalidSpec(f"Unknown method(s): {', '.join(sorted(unknown))}")
        # Canonical order keeps tables and logs deterministic
        order = METHODS + REFERENCE_METHODS
        object.__setattr__(self, "methods",
                           tuple(m for m in order if m in methods))
        if self.regime.n_external < self.learner.min_training_rows:
            raise InvalidSpec("External sample is too small for the learner")
        if self.folds < 2:
            raise InvalidSpec(f"At least 2 folds are required, got {self.folds}")
        if self.boot_replicates < MIN_BOOT_REPLICATES:
            msg = f"At least {MIN_BOOT_REPLICATES} bootstrap replicates are "\
                  f"required, got {self.boot_replicates}"
            raise InvalidSpec(msg)
        crossfit = {"CrossPPI", "CrossPPBoot"} & set(methods)
        if self.strict and self.regime.kind == "DoubleDipping" and crossfit:
            msg = "Strict mode forbids cross-fitted methods under double-dipping"
            raise InvalidSpec(msg)


class CoverageTable:
    """Per-method, per-coefficient coverage and interval width of a
    Monte Carlo study.
    """
    @property
    def data(self) -> pd.DataFrame:
        """The table with columns method, coefficient, coverage, mean_width,
        mean_bias, reps and the diagnostics name, sd_estimate and failed.
        """
        return self._data.copy()

    @property
    def records(self) -> Optional[pd.DataFrame]:
        """Per-replication records the table was aggregated from."""
        return None if self._records is None else self._records.copy()

    @property
    def failures(self) -> dict:
        """Number of failed replications per method."""
        return dict(self._failures)

    def __init__(self, data: pd.DataFrame, records: Optional[pd.DataFrame] = None,
                 failures: Optional[dict] = None) -> None:
        missing = set(TABLE_COLUMNS) - set(data.columns)
        if missing:
            raise InvalidSpec(f"Coverage table lacks column(s) {', '.join(sorted(missing))}")
        if not data["coverage"].dropna().between(0, 1).all():
            raise InvalidSpec("Coverage must lie in [0, 1]")
        self._data = data.reset_index(drop=True)
        self._records = records
        self._failures = failures or {}

    def __len__(self) -> int:
        return self._data.shape[0]

    def __repr__(self) -> str:
        return f"CoverageTable(rows={len(self)})"

    @classmethod
    def empty(cls) -> Self:
        return cls(pd.DataFrame(columns=TABLE_COLUMNS))

    def row(self, method: str, coefficient: int) -> pd.Series:
        mask = (self._data["method"] == method) & (self._data["coefficient"] == coefficient)
        return self._data[mask].iloc[0]

    def summary(self) -> str:
        """Human-readable table."""
        cols = [c for c in ["method", "name", "coverage", "mean_width", "mean_bias",
                            "reps", "failed"] if c in self._data.columns]
        return self._data[cols].to_string(index=False, float_format="{:.4f}".format)
