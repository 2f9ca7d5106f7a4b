"""Module with the results of estimation: point estimates with covariance,
confidence intervals and the PPI-versus-CC variance gap.
"""

from dataclasses import dataclass
from typing import Literal, Optional, Sequence

import numpy as np
from scipy.stats import norm
from typing_extensions import Self

from ppikit.establishing.constants import COVARIANCE_TOL, DEFAULT_LEVEL, \
    METHODS, REFERENCE_METHODS, SCHEMA_VERSION
from ppikit.utils import InvalidLevel, InvalidSpec

__all__ = ["Estimate", "ConfidenceInterval", "VarianceGap"]


class Estimate:
    """Point estimate of the target parameter with its asymptotic
    covariance, already scaled by sample size.
    """
    @property
    def theta(self) -> np.ndarray:
        """Estimated parameter vector."""
        return self._theta

    @property
    def covariance(self) -> np.ndarray:
        """Symmetric positive semidefinite (d, d) covariance of theta."""
        return self._covariance

    @property
    def se(self) -> np.ndarray:
        """Standard errors, the square roots of the covariance diagonal."""
        return np.sqrt(np.clip(np.diag(self._covariance), 0.0, None))

    @property
    def method(self) -> str:
        """One of Classical, PPI, PPIpp, CrossPPI, CrossPPBoot (or Oracle
        for simulation references).
        """
        return self._method

    @property
    def lambda_(self) -> Optional[float]:
        """The power-tuning parameter used by PPIpp."""
        return self._lambda

    @property
    def n_l(self) -> int:
        return self._n_l

    @property
    def n_u(self) -> int:
        return self._n_u

    @property
    def d(self) -> int:
        return self._theta.size

    @property
    def coefficient_names(self) -> list[str]:
        return list(self._names)

    @property
    def metadata(self) -> dict:
        """Additional information, e.g. fold count and bootstrap variant."""
        return dict(self._metadata)

    def __init__(
        self,
        theta: Sequence[float],
        covariance,
        method: str,
        n_l: int,
        n_u: int,
        lambda_: Optional[float] = None,
        coefficient_names: Optional[Sequence[str]] = None,
        metadata: Optional[dict] = None
    ) -> None:
        """Representation of an estimate.

        Raises
        ------
        InvalidSpec
            If the method tag is unknown, shapes disagree, or the covariance
            is not symmetric positive semidefinite within tolerance.
        """
        if method not in METHODS + REFERENCE_METHODS:
            raise InvalidSpec(f"Unknown method tag '{method}'")
        if (method == "PPIpp") != (lambda_ is not None):
            raise InvalidSpec("A lambda is recorded for PPIpp estimates only")
        theta = np.atleast_1d(np.asarray(theta, dtype=np.float64)).ravel()
        cov = np.atleast_2d(np.asarray(covariance, dtype=np.float64))
        d = theta.size
        if cov.shape != (d, d):
            raise InvalidSpec(f"Covariance must have shape ({d}, {d})")
        scale = max(1.0, float(np.abs(cov).max(initial=0.0)))
        if np.abs(cov - cov.T).max(initial=0.0) > COVARIANCE_TOL * scale:
            raise InvalidSpec("Covariance matrix is not symmetric")
        cov = (cov + cov.T) / 2
        if np.linalg.eigvalsh(cov).min() < -COVARIANCE_TOL * scale:
            raise InvalidSpec("Covariance matrix is not positive semidefinite")
        if coefficient_names is None:
            coefficient_names = [f"theta{j}" for j in range(d)]
        if len(coefficient_names) != d:
            raise InvalidSpec("One name per coefficient is required")

        theta.setflags(write=False)
        cov.setflags(write=False)
        self._theta = theta
        self._covariance = cov
        self._method = method
        self._lambda = None if lambda_ is None else float(lambda_)
        self._n_l = int(n_l)
        self._n_u = int(n_u)
        self._names = tuple(coefficient_names)
        self._metadata = dict(metadata or {})

    def __repr__(self) -> str:
        return f"Estimate(method={self.method}, d={self.d}, "\
               f"n_l={self.n_l}, n_u={self.n_u})"

    def describe(self) -> str:
        """One-line summary used in logs."""
        theta = ", ".join(f"{t:.6g}" for t in self._theta)
        text = f"theta=[{theta}]"
        if self._lambda is not None:
            text += f", lambda={self._lambda:.4g}"
        return text

    def confidence_interval(self, level: float = DEFAULT_LEVEL) -> "ConfidenceInterval":
        """Normal-quantile interval theta +/- z_{(1+level)/2} * se."""
        _check_level(level)
        z = norm.ppf((1 + level) / 2)
        half = z * self.se
        return ConfidenceInterval(level, self._theta - half, self._theta + half,
                                  kind="normal", theta=self._theta)

    def to_dict(self, interval: Optional["ConfidenceInterval"] = None) -> dict:
        """JSON-ready representation of the estimate and an interval.

        Parameters
        ----------
        interval : ConfidenceInterval (optional, default=None)
            The interval to report.  If None, a normal interval at the
            default level is computed.
        """
        interval = interval or self.confidence_interval()
        out = {"schema_version": SCHEMA_VERSION, "method": self.method}
        if self._lambda is not None:
            out["lambda"] = self._lambda
        out.update({
            "coefficients": list(self._names),
            "theta": self._theta.tolist(),
            "se": self.se.tolist(),
            "ci_level": interval.level,
            "ci_kind": interval.kind,
            "ci_lower": interval.lower.tolist(),
            "ci_upper": interval.upper.tolist(),
            "n_l": self.n_l,
            "n_u": self.n_u,
        })
        if self._metadata:
            out["metadata"] = self.metadata
        return out


def _check_level(level: float) -> None:
    if not isinstance(level, (int, float)) or not 0 < level < 1:
        raise InvalidLevel(f"Confidence level must lie in (0, 1), got {level}")


class ConfidenceInterval:
    """Componentwise confidence interval for theta."""
    @property
    def level(self) -> float:
        return self._level

    @property
    def lower(self) -> np.ndarray:
        return self._lower

    @property
    def upper(self) -> np.ndarray:
        return self._upper

    @property
    def kind(self) -> str:
        """'normal' for CLT intervals, 'percentile' for bootstrap ones."""
        return self._kind

    @property
    def width(self) -> np.ndarray:
        return self._upper - self._lower

    def __init__(
        self,
        level: float,
        lower: Sequence[float],
        upper: Sequence[float],
        kind: Literal["normal", "percentile"] = "normal",
        theta: Optional[Sequence[float]] = None
    ) -> None:
        """Representation of an interval.

        Normal intervals must contain `theta` if given; percentile
        intervals only need ordered endpoints.

        Raises
        ------
        InvalidLevel
            If level is not in (0, 1).
        InvalidSpec
            If endpoints are unordered or miss theta.
        """
        _check_level(level)
        lower = np.atleast_1d(np.asarray(lower, dtype=np.float64)).copy()
        upper = np.atleast_1d(np.asarray(upper, dtype=np.float64)).copy()
        if lower.shape != upper.shape:
            raise InvalidSpec("Interval endpoints must have equal length")
        if np.any(lower > upper):
            raise InvalidSpec("Lower endpoints must not exceed upper endpoints")
        if kind not in ("normal", "percentile"):
            raise InvalidSpec(f"Unknown interval kind '{kind}'")
        if kind == "normal" and theta is not None:
            theta = np.asarray(theta, dtype=np.float64)
            if np.any(lower > theta) or np.any(theta > upper):
                raise InvalidSpec("Normal interval must contain theta")
        lower.setflags(write=False)
        upper.setflags(write=False)
        self._level = float(level)
        self._lower = lower
        self._upper = upper
        self._kind = kind

    def __repr__(self) -> str:
        return f"ConfidenceInterval(level={self.level}, kind={self.kind}, "\
               f"lower={self.lower.tolist()}, upper={self.upper.tolist()})"

    def contains(self, values: Sequence[float]) -> np.ndarray:
        """Componentwise containment of `values`."""
        values = np.asarray(values, dtype=np.float64)
        return (self._lower <= values) & (values <= self._upper)


@dataclass(frozen=True)
class VarianceGap:
    """Difference V(PPI) - V(CC) of the mean estimators for a fixed
    predictor, with its plug-in components.
    """
    gap: float
    var_pred: float
    cov_y_pred: float
    pi: float
    n: int

    def __post_init__(self):
        if self.gap != self.formula(self.var_pred, self.cov_y_pred, self.pi, self.n):
            raise InvalidSpec("Gap does not match its components")

    @staticmethod
    def formula(var_pred: float, cov_y_pred: float, pi: float, n: int) -> float:
        return var_pred / (pi * (1 - pi) * n) - 2 * cov_y_pred / (pi * n)

    @classmethod
    def from_components(
            cls,
            var_pred: float,
            cov_y_pred: float,
            pi: float,
            n: int
    ) -> Self:
        if not 0 < pi < 1 or n < 1:
            raise InvalidSpec(f"Need 0 < pi < 1 and n >= 1, got pi={pi}, n={n}")
        gap = cls.formula(var_pred, cov_y_pred, pi, n)
        return cls(gap, float(var_pred), float(cov_y_pred), float(pi), int(n))

    @property
    def ppi_favored(self) -> bool:
        """Whether PPI is expected to beat complete-case analysis."""
        return self.gap < 0
