"""Module with the result types of the assumption diagnostics."""

from dataclasses import dataclass, field
from typing import Optional

import pandas as pd

from ppikit.classes.configs import DiagnosticThresholds
from ppikit.establishing.constants import FLAGS, SCHEMA_VERSION, VARIANTS
from ppikit.utils import InvalidSpec

__all__ = ["DiagnosticReport", "Recommendation", "COVARIATE_CAVEAT"]

COVARIATE_CAVEAT = (
    "Outcomes are unobserved for unlabeled rows, so these checks compare "
    "covariates only; selection driven by the outcome itself can be invisible "
    "in X.  Flags are advisory and cannot prove that (A1) or (A2) hold.")


class DiagnosticReport:
    """Battery of checks of the identification assumptions (A1)-(A3)."""
    @property
    def per_covariate(self) -> pd.DataFrame:
        """Balance statistics per covariate: name, smd, ks_stat, ks_pvalue."""
        return self._per_covariate.copy()

    @property
    def energy_distance(self) -> float:
        return self._energy_distance

    @property
    def energy_pvalue(self) -> Optional[float]:
        """Permutation p-value, None when no permutations were run."""
        return self._energy_pvalue

    @property
    def prediction_shift(self) -> Optional[dict]:
        """One-sample t-test of labeled residuals, None without predictions."""
        return None if self._shift is None else dict(self._shift)

    @property
    def missingness(self) -> dict:
        return dict(self._missingness)

    @property
    def flags(self) -> frozenset:
        return self._flags

    @property
    def triggers(self) -> dict:
        """For each raised flag, the checks that raised it."""
        return {k: list(v) for k, v in self._triggers.items()}

    @property
    def thresholds(self) -> DiagnosticThresholds:
        return self._thresholds

    @property
    def has_pretrained(self) -> bool:
        return self._has_pretrained

    def __init__(
        self,
        per_covariate: pd.DataFrame,
        energy_distance: float,
        energy_pvalue: Optional[float],
        prediction_shift: Optional[dict],
        missingness: dict,
        triggers: dict,
        thresholds: DiagnosticThresholds,
        has_pretrained: bool
    ) -> None:
        columns = ["name", "smd", "ks_stat", "ks_pvalue"]
        if list(per_covariate.columns) != columns:
            raise InvalidSpec(f"Per-covariate table needs columns {columns}")
        if not per_covariate["ks_stat"].between(0, 1).all():
            raise InvalidSpec("KS statistics must lie in [0, 1]")
        if energy_distance < 0:
            raise InvalidSpec("Energy distance must be non-negative")
        unknown = set(triggers) - set(FLAGS)
        if unknown:
            raise InvalidSpec(f"Unknown flag(s): {', '.join(sorted(unknown))}")
        self._per_covariate = per_covariate.reset_index(drop=True)
        self._energy_distance = float(energy_distance)
        self._energy_pvalue = energy_pvalue
        self._shift = prediction_shift
        self._missingness = missingness
        self._triggers = {k: tuple(v) for k, v in triggers.items() if v}
        self._flags = frozenset(self._triggers)
        self._thresholds = thresholds
        self._has_pretrained = bool(has_pretrained)

    def __repr__(self) -> str:
        flags = ", ".join(sorted(self._flags)) or "none"
        return f"DiagnosticReport(flags={flags})"

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "per_covariate": self._per_covariate.to_dict(orient="records"),
            "energy_distance": self._energy_distance,
            "energy_pvalue": self._energy_pvalue,
            "prediction_shift": self.prediction_shift,
            "missingness": self.missingness,
            "flags": sorted(self._flags),
            "triggers": self.triggers,
            "thresholds": self._thresholds.to_dict(),
            "has_pretrained": self._has_pretrained,
            "caveat": COVARIATE_CAVEAT,
        }

    def render(self) -> str:
        """Human-readable summary with the covariate balance table."""
        table = self._per_covariate.to_string(index=False, float_format="{:.4f}".format)
        lines = ["Covariate balance (labeled vs. unlabeled)", table, ""]
        pvalue = "n/a" if self._energy_pvalue is None else f"{self._energy_pvalue:.4f}"
        lines.append(f"Energy distance: {self._energy_distance:.4f} (p-value {pvalue})")
        if self._shift is not None:
            lines.append(
                f"Prediction shift: mean residual {self._shift['mean_residual']:.4f}, "
                f"t = {self._shift['t_stat']:.3f}, p-value {self._shift['pvalue']:.4f}")
        miss = self._missingness
        lines.append(f"Labeled: {miss['n_l']:,} of {miss['n_l'] + miss['n_u']:,} "
                     f"({miss['labeled_fraction']:.1%}); rows rejected for missing "
                     f"covariates: {miss['rejected_rows']:,}")
        lines.append(f"Thresholds: |SMD| > {self._thresholds.smd}, "
                     f"p < {self._thresholds.pvalue}")
        if self._flags:
            for flag in sorted(self._flags):
                lines.append(f"Flag {flag}: {'; '.join(self._triggers[flag])}")
        else:
            lines.append("Flags: none")
        lines.append(COVARIATE_CAVEAT)
        return "\n".join(lines)


@dataclass(frozen=True)
class Recommendation:
    """Variant suggested by the decision flowchart, with reasons."""
    variant: str
    reasons: tuple = field(default_factory=tuple)

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise InvalidSpec(f"Unknown variant '{self.variant}'")
        object.__setattr__(self, "reasons", tuple(self.reasons))

    def to_dict(self) -> dict:
        return {"variant": self.variant, "reasons": list(self.reasons),
                "advisory": True}
