"""Brute-force reference for the photonic model.

Builds the full transfer matrix of the setup by composing one unitary per
optical element on a 20-mode space, then sums the heralded probability over
every photon-to-output assignment and every label permutation. It shares no
amplitude code with :mod:`diqkdsps.photonic` and is slow; the engine is
checked against it in the tests and by ``diqkdsps self-check``.
"""

import logging
from itertools import permutations, product
from typing import Sequence

import numpy as np

from diqkdsps.photonic import (
    Behavior,
    MeasurementSettings,
    OverlapModel,
    PhysicalParams,
    behavior_from_clicks,
    g2_to_p2,
)

logger = logging.getLogger(__name__)

N_MODES = 20
# 0-3   CHS arm of AH, AV, BH, BV; after the CHS these are D1, D2, D3, D4
# 4-7   local arm of AH, AV, BH, BV; after the wave plates A+, A-, B+, B-
# 8-11  loss before the tap
# 12-15 channel loss
# 16-19 local detector loss
D1, D2, D3, D4 = 0, 1, 2, 3
A_PLUS, A_MINUS, B_PLUS, B_MINUS = 4, 5, 6, 7

_INPUT_MODES = (0, 1, 2, 3)


def _two_mode(i: int, j: int, block) -> np.ndarray:
    u = np.eye(N_MODES, dtype=complex)
    u[np.ix_([i, j], [i, j])] = block
    return u


def _attenuator(i: int, j: int, eta: float) -> np.ndarray:
    a, b = np.sqrt(eta), np.sqrt(1.0 - eta)
    return _two_mode(i, j, [[a, -b], [b, a]])


def _wave_plate(i: int, j: int, theta: float) -> np.ndarray:
    c, s = np.cos(2.0 * theta), np.sin(2.0 * theta)
    return _two_mode(i, j, [[c, -s], [s, c]])


def transfer_matrix(params: PhysicalParams, theta_a: float, theta_b: float) -> np.ndarray:
    """Return the 20 x 4 matrix from the four source modes to every output mode."""
    stages = []
    for m in range(4):
        stages.append(_attenuator(m, 8 + m, params.eta1))
    for m in range(4):
        tap, ref = np.sqrt(params.big_t), 1j * np.sqrt(1.0 - params.big_t)
        stages.append(_two_mode(m, 4 + m, [[tap, ref], [ref, tap]]))
    for m in range(4):
        stages.append(_attenuator(m, 12 + m, params.eta_t))
        stages.append(_attenuator(4 + m, 16 + m, params.eta2))
    t = params.small_t
    splitter = [[np.sqrt(1.0 - t), -np.sqrt(t)], [np.sqrt(t), np.sqrt(1.0 - t)]]
    # Alice's H and V enter on modes 0 and 1, Bob's on 2 and 3; o1 leaves on 0/1.
    stages.append(_two_mode(0, 2, splitter))
    stages.append(_two_mode(1, 3, splitter))
    diagonal = np.array([[1.0, 1.0], [1.0, -1.0]]) / np.sqrt(2.0)
    stages.append(_two_mode(0, 1, diagonal))
    stages.append(_two_mode(2, 3, diagonal))
    stages.append(_wave_plate(A_PLUS, A_MINUS, theta_a))
    stages.append(_wave_plate(B_PLUS, B_MINUS, theta_b))

    u = np.eye(N_MODES, dtype=complex)
    for stage in stages:
        u = stage @ u
    return u[:, _INPUT_MODES]


def _clicks(plus: int, minus: int) -> int:
    if plus and minus:
        return 3
    if minus:
        return 2
    return 1 if plus else 0


def _pattern_probabilities(u: np.ndarray, modes: Sequence[int], gram: np.ndarray) -> np.ndarray:
    n = len(modes)
    reachable = []
    for m in modes:
        outs = [o for o in range(N_MODES) if o not in (D1, D4) and abs(u[o, m]) > 1e-15]
        reachable.append(outs)
    table = np.zeros((4, 4))
    for d in product(*reachable):
        if d.count(D2) != 1 or d.count(D3) != 1:
            continue
        amp = np.prod([u[d[k], modes[k]] for k in range(n)])
        total = 0.0 + 0.0j
        for sigma in permutations(range(n)):
            overlap = np.prod([gram[k, sigma[k]] for k in range(n)])
            if overlap == 0.0:
                continue
            total += amp * np.conj(np.prod([u[d[sigma[k]], modes[k]] for k in range(n)])) * overlap
        alice = _clicks(d.count(A_PLUS), d.count(A_MINUS))
        bob = _clicks(d.count(B_PLUS), d.count(B_MINUS))
        table[alice, bob] += total.real
    return table


def oracle_click_table(params: PhysicalParams, overlaps: OverlapModel,
                       theta_a: Sequence[float], theta_b: Sequence[float]) -> np.ndarray:
    """Unnormalized click-class table with the same layout as the engine's."""
    p2 = g2_to_p2(params.g2, 1.0)
    table = np.zeros((len(theta_a), len(theta_b), 4, 4))
    for x, ta in enumerate(theta_a):
        for y, tb in enumerate(theta_b):
            u = transfer_matrix(params, ta, tb)
            table[x, y] += (1.0 - 4.0 * p2) * _pattern_probabilities(u, (0, 1, 2, 3), overlaps.gram[:4, :4])
            if p2 > 0.0:
                gram5 = overlaps.with_extra_photon().gram
                for k in range(4):
                    table[x, y] += p2 * _pattern_probabilities(u, (0, 1, 2, 3, k), gram5)
    return table


def oracle_herald_probability(params: PhysicalParams, overlaps: OverlapModel) -> float:
    """P_h from the brute-force click table."""
    return float(oracle_click_table(params, overlaps, (0.0,), (0.0,)).sum())


def oracle_behavior(params: PhysicalParams, overlaps: OverlapModel, settings: MeasurementSettings) -> Behavior:
    """Behavior computed from the brute-force click table."""
    clicks = oracle_click_table(params, overlaps, settings.theta_a, settings.theta_b)
    p_herald = float(clicks[0, 0].sum())
    logger.debug("oracle heralding probability %.6e", p_herald)
    return behavior_from_clicks(clicks, p_herald)
