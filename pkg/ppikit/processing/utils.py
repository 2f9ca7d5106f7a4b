"""Module with utility functions for the numerical processing in ppikit."""

from itertools import islice
from typing import Iterable

import numpy as np

from ppikit.establishing.constants import CONDITION_LIMIT, METHODS, REFERENCE_METHODS
from ppikit.utils import InvalidSpec, RankDeficientDesign

__all__ = ["chunk_list", "check_conditioning", "solve_gram", "gram",
           "sample_covariance", "sandwich", "rng_stream", "canonical_method"]


def chunk_list(data: Iterable, size: int) -> list[list]:
    """Chunk an iterable into bins of a given size and merge the last if
    necessary.
    """
    data_iter = iter(data)
    chunks = list(iter(lambda: list(islice(data_iter, size)), []))
    if not chunks:
        return chunks

    # Merge last chunk into previous if smaller than half the chunk size
    if len(chunks[-1]) <= size // 2 and len(chunks) > 1:
        chunks[-2].extend(chunks.pop())

    return chunks


def check_conditioning(gram: np.ndarray, label: str = "design") -> None:
    """Raise `RankDeficientDesign` if `gram` is singular or its condition
    number exceeds the limit.
    """
    singular_values = np.linalg.svd(gram, compute_uv=False)
    if singular_values[-1] <= 0 or \
            singular_values[0] / singular_values[-1] > CONDITION_LIMIT:
        msg = f"The {label} Gram matrix is rank deficient or ill-conditioned "\
              f"(condition number above {CONDITION_LIMIT:.0e})"
        raise RankDeficientDesign(msg)


def solve_gram(gram: np.ndarray, rhs: np.ndarray, label: str = "design") -> np.ndarray:
    """Solve `gram @ x = rhs` after checking the conditioning of `gram`."""
    check_conditioning(gram, label)
    return np.linalg.solve(gram, rhs)


def gram(X: np.ndarray) -> np.ndarray:
    """Averaged Gram matrix (1/m) X'X."""
    return X.T @ X / X.shape[0]


def sample_covariance(scores: np.ndarray) -> np.ndarray:
    """Sample covariance (ddof=1) of the rows of `scores`; zero for fewer
    than two rows.
    """
    scores = np.asarray(scores, dtype=np.float64)
    if scores.ndim == 1:
        scores = scores.reshape(-1, 1)
    d = scores.shape[1]
    if scores.shape[0] < 2:
        return np.zeros((d, d))
    return np.atleast_2d(np.cov(scores, rowvar=False, ddof=1)).reshape(d, d)


def sandwich(bread_inv: np.ndarray, meat: np.ndarray) -> np.ndarray:
    """Symmetrized H^-1 M H^-1."""
    cov = bread_inv @ meat @ bread_inv.T
    return (cov + cov.T) / 2


def rng_stream(seed: int, *keys: int) -> np.random.Generator:
    """Independent random generator keyed by `seed` and `keys`, identical
    regardless of the order in which streams are created.
    """
    entropy = [int(seed), *map(int, keys)]
    if any(e < 0 for e in entropy):
        raise InvalidSpec(f"Seeds must be non-negative integers, got {entropy}")
    return np.random.default_rng(entropy)


_METHOD_ALIASES = {m.lower(): m for m in METHODS + REFERENCE_METHODS}
_METHOD_ALIASES.update({"cc": "Classical", "ppi++": "PPIpp"})


def canonical_method(name: str) -> str:
    """Map a case-insensitive method name or alias (cc, ppi++) onto its
    tag, e.g. "ppipp" -> "PPIpp".
    """
    try:
        return _METHOD_ALIASES[str(name).strip().lower()]
    except KeyError:
        choices = ", ".join(METHODS + REFERENCE_METHODS)
        raise InvalidSpec(f"Unknown method '{name}', choose from {choices}") from None
