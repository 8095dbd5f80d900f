"""Entropies and closed-form key-rate bounds.

The asymptotic rate is assembled as r = H(A|X=x', E) - H(A|B, X=x', Y=y'),
where the first term comes either from the CHSH score (optionally with
noisy preprocessing) or from the semidefinite relaxation in
:mod:`diqkdsps.relaxation`.
"""

import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.special import entr

from diqkdsps.analysis import CHSH_PAIRING, apply_preprocessing, chsh_score
from diqkdsps.constants import GOLDEN_TOL, KEY_INPUTS, Q_GRID_POINTS, Q_MAX, Q_SEARCH_MAX, TSIRELSON
from diqkdsps.enums import ErrorCode, RateMethod
from diqkdsps.exceptions import DiqkdError
from diqkdsps.photonic import Behavior

logger = logging.getLogger(__name__)

_LN2 = np.log(2.0)
_SCORE_TOL = 1e-6


@dataclass(frozen=True)
class RatePoint:
    """Asymptotic key rate per heralded round and the two entropies behind it.

    Attributes:
        h_ae: Lower bound on H(A|X=x', E).
        h_ab: H(A|B, X=x', Y=y') of the (preprocessed) key cell.
        method: How ``h_ae`` was obtained.
        q: Preprocessing bit-flip probability.
        chsh: CHSH score of the behavior, when known.
        settings: Flat snapshot of the settings the point was evaluated at.
    """
    h_ae: float
    h_ab: float
    method: RateMethod
    q: float = 0.0
    chsh: Optional[float] = None
    settings: Optional[Tuple[float, ...]] = None

    @property
    def rate(self) -> float:
        return self.h_ae - self.h_ab


def binary_entropy(p: float) -> float:
    """Binary entropy in bits with 0 log 0 = 0.

    Examples:
        >>> binary_entropy(0.5)
        1.0
    """
    if not np.isfinite(p) or p < 0.0 or p > 1.0:
        raise DiqkdError(f"probability must lie in [0, 1], got {p}", ErrorCode.INVALID_PARAMETER)
    return float((entr(p) + entr(1.0 - p)) / _LN2)


def shannon_entropy(probabilities: np.ndarray) -> float:
    """Entropy in bits of a probability array of any shape."""
    return float(entr(np.clip(np.asarray(probabilities, dtype=float), 0.0, None)).sum() / _LN2)


def conditional_entropy_ab(b: Behavior, key: Tuple[int, int] = KEY_INPUTS, q: float = 0.0) -> float:
    """H(A|B) = H(AB) - H(B) of the key cell after Alice's bit flip with probability q.

    Args:
        b: Heralded behavior.
        key: Key inputs (x', y').
        q: Preprocessing flip probability.

    Returns:
        The error-correction cost in bits per key round, never negative.
    """
    x, y = key
    cell = apply_preprocessing(b, q, key).p[:, :, x, y]
    return max(0.0, shannon_entropy(cell) - shannon_entropy(cell.sum(axis=0)))


def _check_score(score: float) -> float:
    if not np.isfinite(score) or abs(score) > TSIRELSON + _SCORE_TOL:
        raise DiqkdError(f"CHSH score {score} exceeds the quantum bound", ErrorCode.INVALID_PARAMETER)
    return min(max(score, 2.0), TSIRELSON)


def chsh_entropy_bound(score: float) -> float:
    """1 - h((1 + sqrt((S/2)^2 - 1)) / 2), equal to 0 for S <= 2.

    Args:
        score: CHSH score S.

    Returns:
        Lower bound on H(A|E) in bits.

    Raises:
        DiqkdError: If ``|S|`` exceeds 2 sqrt(2) by more than rounding.

    Examples:
        >>> chsh_entropy_bound(2.0)
        0.0
        >>> round(chsh_entropy_bound(2.0 * 2.0 ** 0.5), 6)
        1.0
    """
    s = _check_score(score)
    return 1.0 - binary_entropy((1.0 + np.sqrt(max(0.0, (s / 2.0) ** 2 - 1.0))) / 2.0)


def preprocessing_gain(score: float, q: float) -> float:
    """h((1 + sqrt(1 - q(1-q)(8 - S^2))) / 2), Eve's extra ignorance from the flip."""
    if not np.isfinite(q) or q < 0.0 or q > Q_MAX:
        raise DiqkdError(f"q must lie in [0, 0.5], got {q}", ErrorCode.INVALID_PARAMETER)
    s = _check_score(score)
    radicand = max(0.0, 1.0 - q * (1.0 - q) * (8.0 - s * s))
    return binary_entropy(min(1.0, (1.0 + np.sqrt(radicand)) / 2.0))


def chsh_analytic_rate(score: float, h_ab: float) -> float:
    """Key rate from the CHSH score alone; below S = 2 the bound term is 0."""
    return chsh_entropy_bound(score) - h_ab


def chsh_preprocessing_rate(score: float, h_ab: float, q: float) -> float:
    """Key rate from the CHSH score with Alice's noisy preprocessing.

    ``h_ab`` must be evaluated on the preprocessed key cell.
    """
    return chsh_entropy_bound(score) + preprocessing_gain(score, q) - h_ab


def optimize_preprocessing(b: Behavior, key: Tuple[int, int] = KEY_INPUTS,
                           pairing: Tuple[int, int, int, int] = CHSH_PAIRING) -> RatePoint:
    """Choose q in [0, 0.5) maximizing the preprocessed CHSH rate.

    A grid over [0, Q_SEARCH_MAX] picks the best cell and a bounded scalar
    search refines it. The rate tends to 0 as q -> 1/2 whatever the
    behavior, so the grid keeps the search on the interior maximum instead of
    that limit. q = 0 is a grid point and wins ties, so the result never
    falls below the plain analytic rate.

    Args:
        b: Heralded behavior.
        key: Key inputs (x', y').
        pairing: CHSH relabeling used for the score.

    Returns:
        RatePoint with method ANALYTIC_PREPROCESSING and the chosen q.
    """
    score = chsh_score(b, pairing).score

    def rate_at(q: float) -> float:
        return chsh_preprocessing_rate(score, conditional_entropy_ab(b, key, q), q)

    grid = np.linspace(0.0, Q_SEARCH_MAX, Q_GRID_POINTS)
    values = np.array([rate_at(q) for q in grid])
    i = int(np.argmax(values))
    q, best = float(grid[i]), float(values[i])
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, grid.size - 1)]
    found = minimize_scalar(lambda v: -rate_at(v), bounds=(lo, hi), method="bounded",
                            options={"xatol": GOLDEN_TOL})
    if -found.fun > best:
        q = float(found.x)
    h_ab = conditional_entropy_ab(b, key, q)
    h_ae = chsh_entropy_bound(score) + preprocessing_gain(score, q)
    logger.debug("preprocessing q=%.5f S=%.6f rate=%.6f", q, score, h_ae - h_ab)
    return RatePoint(h_ae=h_ae, h_ab=h_ab, method=RateMethod.ANALYTIC_PREPROCESSING, q=q, chsh=score)


def analytic_rate_point(b: Behavior, preprocessing: bool = False, key: Tuple[int, int] = KEY_INPUTS,
                        pairing: Tuple[int, int, int, int] = CHSH_PAIRING) -> RatePoint:
    """RatePoint from the CHSH closed form, with or without optimized preprocessing."""
    if preprocessing:
        return optimize_preprocessing(b, key, pairing)
    score = chsh_score(b, pairing).score
    return RatePoint(h_ae=chsh_entropy_bound(score), h_ab=conditional_entropy_ab(b, key),
                     method=RateMethod.ANALYTIC, chsh=score)
