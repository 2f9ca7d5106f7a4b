"""Module with configuration objects for estimators, learners, folds,
bootstrap and diagnostics.
"""

from dataclasses import dataclass, field
from typing import Literal, Optional

import numpy as np
from typing_extensions import Self

from ppikit.establishing.constants import DEFAULT_BOOT_REPLICATES, \
    DEFAULT_LEVEL, MIN_BOOT_REPLICATES, PVALUE_THRESHOLD, SMD_THRESHOLD
from ppikit.utils import InvalidSpec, accepts

__all__ = ["LambdaPolicy", "LearnerSpec", "BootConfig", "FoldPlan",
           "DiagnosticThresholds"]


@dataclass(frozen=True)
class LambdaPolicy:
    """How PPI++ chooses its power-tuning parameter lambda."""
    mode: Literal["Fixed", "Optimized"] = "Optimized"
    value: Optional[float] = None

    def __post_init__(self):
        if self.mode == "Fixed":
            if self.value is None or not 0.0 <= float(self.value) <= 1.0:
                msg = f"Fixed lambda must lie in [0, 1], got {self.value}"
                raise InvalidSpec(msg)
        elif self.mode == "Optimized":
            if self.value is not None:
                raise InvalidSpec("Optimized lambda policy takes no value")
        else:
            raise InvalidSpec(f"Unknown lambda mode '{self.mode}'")

    @classmethod
    def fixed(cls, value: float) -> Self:
        return cls("Fixed", float(value))

    @classmethod
    def optimized(cls) -> Self:
        return cls("Optimized")


@dataclass(frozen=True)
class LearnerSpec:
    """Prediction model trained inside the package: ridge regression or
    gradient-boosted depth-1 trees (stumps).
    """
    kind: Literal["Ridge", "GBStumps"] = "Ridge"
    penalty: float = 0.0
    rounds: int = 100
    learning_rate: float = 0.1
    min_leaf: int = 1

    def __post_init__(self):
        if self.kind == "Ridge":
            if not self.penalty >= 0:
                raise InvalidSpec(f"Ridge penalty must be >= 0, got {self.penalty}")
        elif self.kind == "GBStumps":
            if int(self.rounds) != self.rounds or self.rounds < 1:
                raise InvalidSpec(f"Rounds must be an integer >= 1, got {self.rounds}")
            if not 0 < self.learning_rate <= 1:
                msg = f"Learning rate must lie in (0, 1], got {self.learning_rate}"
                raise InvalidSpec(msg)
            if int(self.min_leaf) != self.min_leaf or self.min_leaf < 1:
                msg = f"Minimum leaf size must be an integer >= 1, got {self.min_leaf}"
                raise InvalidSpec(msg)
        else:
            raise InvalidSpec(f"Unknown learner kind '{self.kind}'")

    @classmethod
    def ridge(cls, penalty: float = 0.0) -> Self:
        return cls("Ridge", penalty=float(penalty))

    @classmethod
    def gb_stumps(
            cls,
            rounds: int = 100,
            learning_rate: float = 0.1,
            min_leaf: int = 1
    ) -> Self:
        return cls("GBStumps", rounds=int(rounds),
                   learning_rate=float(learning_rate), min_leaf=int(min_leaf))

    @classmethod
    def from_dict(cls, config: dict) -> Self:
        """Build a spec from its JSON form, e.g.
        `{"kind": "GBStumps", "rounds": 500, "learning_rate": 0.3}`.
        """
        config = dict(config)
        kind = config.pop("kind", "Ridge")
        if kind == "Ridge":
            allowed = {"penalty"}
        else:
            allowed = {"rounds", "learning_rate", "min_leaf"}
        unknown = set(config) - allowed
        if unknown:
            msg = f"Unknown learner option(s) for {kind}: {', '.join(sorted(unknown))}"
            raise InvalidSpec(msg)
        if kind == "Ridge":
            return cls.ridge(**config)
        if kind == "GBStumps":
            return cls.gb_stumps(**config)
        raise InvalidSpec(f"Unknown learner kind '{kind}'")

    def to_dict(self) -> dict:
        if self.kind == "Ridge":
            return {"kind": "Ridge", "penalty": self.penalty}
        return {"kind": "GBStumps", "rounds": self.rounds,
                "learning_rate": self.learning_rate, "min_leaf": self.min_leaf}

    @property
    def min_training_rows(self) -> int:
        if self.kind == "GBStumps":
            return max(2, 2 * self.min_leaf)
        return 2


@dataclass(frozen=True)
class BootConfig:
    """Settings of the percentile bootstrap."""
    B: int = DEFAULT_BOOT_REPLICATES
    seed: int = 0
    level: float = DEFAULT_LEVEL

    def __post_init__(self):
        if int(self.B) != self.B or self.B < MIN_BOOT_REPLICATES:
            msg = f"At least {MIN_BOOT_REPLICATES} bootstrap replicates are "\
                  f"required, got {self.B}"
            raise InvalidSpec(msg)
        if not 0 < self.level < 1:
            raise InvalidSpec(f"Level must lie in (0, 1), got {self.level}")


@dataclass(frozen=True)
class FoldPlan:
    """Assignment of labeled rows to K cross-fitting folds."""
    K: int
    assignment: np.ndarray = field(repr=False)
    seed: int

    def __post_init__(self):
        assignment = np.array(self.assignment, dtype=np.int64, copy=True)
        assignment.setflags(write=False)
        object.__setattr__(self, "assignment", assignment)
        if self.K < 2:
            raise InvalidSpec(f"At least 2 folds are required, got {self.K}")
        sizes = self.fold_sizes
        if assignment.min(initial=0) < 0 or assignment.max(initial=0) >= self.K:
            raise InvalidSpec("Fold indices must lie in 0, ..., K-1")
        if sizes.max() - sizes.min() > 1:
            raise InvalidSpec("Fold sizes must differ by at most one")

    @property
    def n_l(self) -> int:
        return self.assignment.size

    @property
    def fold_sizes(self) -> np.ndarray:
        return np.bincount(self.assignment, minlength=self.K)

    def in_fold(self, k: int) -> np.ndarray:
        """Boolean mask over labeled rows belonging to fold `k`."""
        return self.assignment == k


class DiagnosticThresholds:
    """Thresholds turning diagnostic statistics into assumption flags."""
    @property
    def smd(self) -> float:
        """Absolute standardized mean difference above which (A1) is
        suspect.
        """
        return self._smd

    @smd.setter
    @accepts((int, float))
    def smd(self, val: float) -> None:
        if val < 0:
            raise InvalidSpec(f"SMD threshold must be >= 0, got {val}")
        self._smd = float(val)

    @property
    def pvalue(self) -> float:
        """Significance level below which a test raises a flag."""
        return self._pvalue

    @pvalue.setter
    @accepts((int, float))
    def pvalue(self, val: float) -> None:
        if not 0 < val < 1:
            raise InvalidSpec(f"P-value threshold must lie in (0, 1), got {val}")
        self._pvalue = float(val)

    def __init__(self, smd: float = SMD_THRESHOLD,
                 pvalue: float = PVALUE_THRESHOLD) -> None:
        self.smd = smd
        self.pvalue = pvalue

    def __repr__(self) -> str:
        return f"DiagnosticThresholds(smd={self.smd}, pvalue={self.pvalue})"

    def to_dict(self) -> dict:
        return {"smd": self.smd, "pvalue": self.pvalue}
