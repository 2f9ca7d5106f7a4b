"""Module with the exceptions raised by ppikit."""

__all__ = ["PPIKitError", "MalformedRow", "MissingColumn", "EmptyLabeledSet",
           "RankDeficientDesign", "InsufficientLabeled", "MissingPredictions",
           "EmptyUnlabeled", "InvalidLevel", "TooFewLabeled",
           "DegenerateTraining", "FoldMismatch", "TooFewSamples",
           "DegenerateScale", "EmptySample", "DimensionMismatch",
           "InvalidSpec", "InfeasibleMechanism"]


class PPIKitError(ValueError):
    """Base class for all data and specification errors."""


class MalformedRow(PPIKitError):
    """A row of an input file violates the data model."""
    def __init__(self, line: int, reason: str):
        self.line = line
        self.reason = reason
        super().__init__(f"Malformed row on line {line}: {reason}")


class MissingColumn(PPIKitError):
    """A column named in the schema is absent from the file."""
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"Column '{name}' not found in input")


class EmptyLabeledSet(PPIKitError):
    """The input contains no labeled rows."""


class RankDeficientDesign(PPIKitError):
    """A Gram matrix is singular or numerically ill-conditioned."""


class InsufficientLabeled(PPIKitError):
    """Too few labeled rows for the requested computation."""


class MissingPredictions(PPIKitError):
    """Predictions are absent or do not cover every row."""


class EmptyUnlabeled(PPIKitError):
    """The dataset has no unlabeled rows."""


class InvalidLevel(PPIKitError):
    """A confidence level outside (0, 1)."""


class TooFewLabeled(PPIKitError):
    """More folds than labeled rows."""


class DegenerateTraining(PPIKitError):
    """Training data cannot support the requested learner."""


class FoldMismatch(PPIKitError):
    """A fold plan does not cover exactly the labeled rows."""


class TooFewSamples(PPIKitError):
    """A sample is too small for the requested statistic."""


class DegenerateScale(PPIKitError):
    """Zero pooled spread with differing means."""


class EmptySample(PPIKitError):
    """A sample without observations."""


class DimensionMismatch(PPIKitError):
    """Samples with incompatible column counts."""


class InvalidSpec(PPIKitError):
    """A configuration object violates its invariants."""


class InfeasibleMechanism(PPIKitError):
    """A labeling mechanism implies probabilities above one."""
