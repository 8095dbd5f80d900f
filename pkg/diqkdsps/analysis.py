"""Statistics derived from a heralded behavior.

Correlators, CHSH scores, membership in the 2-input/2-output local polytope
and the noisy-preprocessing bit flip on the key cell.
"""

import logging
from dataclasses import dataclass, field, replace
from itertools import product
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import linprog, minimize

from diqkdsps.constants import KEY_INPUTS, NONLOCAL_TOL, Q_MAX
from diqkdsps.enums import ErrorCode
from diqkdsps.exceptions import DiqkdError
from diqkdsps.photonic import Behavior, MeasurementSettings, OverlapModel, PhysicalParams, behavior

logger = logging.getLogger(__name__)

CHSH_PAIRING = (0, 1, 0, 1)
"""Default (x0, x1, y0, y1): Bob's third input is reserved for the key."""


@dataclass(frozen=True)
class ChshReport:
    """CHSH score together with the correlators it was assembled from."""
    score: float
    pairing: Tuple[int, int, int, int]
    correlators: Dict[Tuple[int, int], float] = field(default_factory=dict)


@dataclass(frozen=True)
class ChshOptimum:
    """Best CHSH score found over angles (and t) for fixed hardware."""
    report: ChshReport
    settings: MeasurementSettings
    small_t: float


def _check_inputs(x: int, y: int) -> None:
    if x not in (0, 1) or y not in (0, 1, 2):
        raise DiqkdError(f"input pair ({x}, {y}) out of range", ErrorCode.INVALID_PARAMETER)


def correlator(b: Behavior, x: int, y: int) -> float:
    """E(x, y) = sum over a, b of (-1)^(a xor b) p(a, b | x, y).

    Raises:
        DiqkdError: If x is not in {0, 1} or y not in {0, 1, 2}.
    """
    _check_inputs(x, y)
    cell = b.p[:, :, x, y]
    return float(cell[0, 0] + cell[1, 1] - cell[0, 1] - cell[1, 0])


def chsh_score(b: Behavior, pairing: Tuple[int, int, int, int] = CHSH_PAIRING) -> ChshReport:
    """S = E(x0,y0) + E(x1,y0) + E(x0,y1) - E(x1,y1).

    Args:
        b: Heralded behavior.
        pairing: Inputs (x0, x1, y0, y1) entering the score.

    Returns:
        A :class:`ChshReport` with the score and the four correlators.
    """
    x0, x1, y0, y1 = pairing
    corr = {(x, y): correlator(b, x, y) for x in (x0, x1) for y in (y0, y1)}
    score = corr[(x0, y0)] + corr[(x1, y0)] + corr[(x0, y1)] - corr[(x1, y1)]
    return ChshReport(score=score, pairing=tuple(pairing), correlators=corr)


def is_nonlocal_2222(b: Behavior, xs: Sequence[int] = (0, 1), ys: Sequence[int] = (0, 1),
                     tol: float = NONLOCAL_TOL) -> bool:
    """True if any of the eight CHSH symmetrizations exceeds 2 + tol.

    In the two-input two-output scenario these facets, together with the
    positivity constraints, describe the whole local polytope, so the test
    agrees with :func:`lp_local_membership`.

    Args:
        b: Heralded behavior.
        xs: Alice's two inputs to restrict to.
        ys: Bob's two inputs to restrict to.
        tol: Margin above the local bound of 2.
    """
    e = np.array([[correlator(b, x, y) for y in ys] for x in xs])
    total = e.sum()
    return bool(np.any(np.abs(total - 2.0 * e) > 2.0 + tol))


def lp_local_membership(b: Behavior, xs: Sequence[int] = (0, 1), ys: Sequence[int] = (0, 1),
                        tol: float = NONLOCAL_TOL) -> bool:
    """Decide 2222 locality with a linear program over deterministic strategies.

    Minimizes the largest deviation between the restricted behavior and a
    convex mixture of the 16 deterministic strategies; the behavior is local
    when that deviation is at most ``tol``.
    """
    strategies = list(product((0, 1), repeat=4))
    rows = []
    target = []
    for a, bb, i, j in product((0, 1), (0, 1), range(len(xs)), range(len(ys))):
        rows.append([float(s[i] == a and s[2 + j] == bb) for s in strategies])
        target.append(b.p[a, bb, xs[i], ys[j]])
    mix = np.array(rows)
    target = np.array(target)
    n = len(strategies)
    # variables: 16 weights and the deviation bound eps
    ones = np.ones((mix.shape[0], 1))
    a_ub = np.vstack([np.hstack([mix, -ones]), np.hstack([-mix, -ones])])
    b_ub = np.concatenate([target, -target])
    a_eq = np.hstack([np.ones((1, n)), np.zeros((1, 1))])
    cost = np.zeros(n + 1)
    cost[-1] = 1.0
    result = linprog(cost, A_ub=a_ub, b_ub=b_ub, A_eq=a_eq, b_eq=[1.0],
                     bounds=[(0.0, None)] * (n + 1), method="highs")
    if not result.success:
        raise DiqkdError(f"local-polytope LP failed: {result.message}", ErrorCode.SOLVER_FAILURE)
    return bool(result.fun <= tol)


def apply_preprocessing(b: Behavior, q: float, key: Tuple[int, int] = KEY_INPUTS) -> Behavior:
    """Flip Alice's outcome with probability q in the key cell (x', y') only.

    Args:
        b: Heralded behavior.
        q: Flip probability in [0, 1/2].
        key: Key inputs (x', y').

    Returns:
        A copy of ``b``; every cell other than the key cell is unchanged.

    Raises:
        DiqkdError: If ``q`` is outside [0, 1/2] or the key inputs are out of range.
    """
    if not np.isfinite(q) or q < 0.0 or q > Q_MAX:
        raise DiqkdError(f"q must lie in [0, 0.5], got {q}", ErrorCode.INVALID_PARAMETER)
    x, y = key
    _check_inputs(x, y)
    p = np.array(b.p)
    cell = p[:, :, x, y].copy()
    p[:, :, x, y] = (1.0 - q) * cell + q * cell[::-1, :]
    return replace(b, p=p)


def max_chsh_over_settings(params: PhysicalParams, overlaps: OverlapModel, seeds: int = 8,
                           rng: Optional[np.random.Generator] = None,
                           optimize_t: bool = True) -> ChshOptimum:
    """Maximize S over the four CHSH angles (and t) with restarted Nelder-Mead.

    Bob's key angle is held at zero; it does not enter the score. Points
    where the CHS never heralds score -4 instead of raising.

    Args:
        params: Hardware parameters; ``small_t`` is used when ``optimize_t`` is False.
        overlaps: Photon overlap model.
        seeds: Number of random restarts.
        rng: Source of the starting points, seeded with 0 when omitted.
        optimize_t: Also search the CHS splitter transmittance.

    Returns:
        The best :class:`ChshOptimum` over all restarts.
    """
    rng = rng if rng is not None else np.random.default_rng(0)

    def unpack(v: np.ndarray) -> Tuple[float, MeasurementSettings]:
        t = float(v[0]) if optimize_t else params.small_t
        return t, MeasurementSettings((v[1], v[2]), (v[3], v[4], 0.0))

    def negative_score(v: np.ndarray) -> float:
        t, settings = unpack(v)
        try:
            return -chsh_score(behavior(replace(params, small_t=t), overlaps, settings)).score
        except DiqkdError:
            return 4.0

    bounds = [(0.0, 1.0)] + [(0.0, 2.0 * np.pi)] * 4
    best_v, best_f = None, np.inf
    for _ in range(seeds):
        x0 = np.concatenate([[rng.uniform(0.05, 0.95)], rng.uniform(0.0, 2.0 * np.pi, 4)])
        res = minimize(negative_score, x0, method="Nelder-Mead", bounds=bounds,
                       options={"xatol": 1e-8, "fatol": 1e-10, "maxiter": 2000})
        if res.fun < best_f:
            best_v, best_f = res.x, res.fun
    t, settings = unpack(best_v)
    report = chsh_score(behavior(replace(params, small_t=t), overlaps, settings))
    logger.debug("max CHSH %.6f at t=%.4f", report.score, t)
    return ChshOptimum(report=report, settings=settings, small_t=t)
