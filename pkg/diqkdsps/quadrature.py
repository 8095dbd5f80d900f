"""Gauss-Radau quadrature on [0, 1] with the fixed node at 1."""

import logging
from dataclasses import dataclass
from typing import Tuple

import numpy as np
from scipy.linalg import eigh_tridiagonal

from diqkdsps.enums import ErrorCode
from diqkdsps.exceptions import DiqkdError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class QuadratureRule:
    """Nodes (increasing, last one equal to 1) and positive weights summing to 1."""
    m: int
    nodes: Tuple[float, ...]
    weights: Tuple[float, ...]

    def integrate(self, f) -> float:
        return float(sum(w * f(t) for t, w in zip(self.nodes, self.weights)))


def gauss_radau(m: int) -> QuadratureRule:
    """Build the m-node Gauss-Radau rule for the Lebesgue measure on [0, 1].

    Uses the Golub-Welsch method on the shifted-Legendre Jacobi matrix, with
    the last diagonal entry modified so that 1 is an eigenvalue.

    Examples:
        >>> [round(t, 6) for t in gauss_radau(2).nodes]
        [0.333333, 1.0]
    """
    if not isinstance(m, (int, np.integer)) or m < 2:
        raise DiqkdError(f"Gauss-Radau rule needs m >= 2 nodes, got {m}", ErrorCode.INVALID_PARAMETER)
    k = np.arange(1, m, dtype=float)
    beta = k * k / (4.0 * (4.0 * k * k - 1.0))
    alpha = np.full(m, 0.5)

    # monic shifted-Legendre values at x = 1
    p_prev, p_cur = 0.0, 1.0
    for j in range(m - 1):
        p_prev, p_cur = p_cur, (1.0 - alpha[j]) * p_cur - (beta[j - 1] * p_prev if j > 0 else 0.0)
    alpha[-1] = 1.0 - beta[-1] * p_prev / p_cur

    nodes, vectors = eigh_tridiagonal(alpha, np.sqrt(beta))
    weights = vectors[0, :] ** 2
    order = np.argsort(nodes)
    nodes, weights = nodes[order], weights[order]
    nodes[-1] = 1.0
    logger.debug("Gauss-Radau m=%d nodes=%s", m, nodes)
    return QuadratureRule(m=int(m), nodes=tuple(float(t) for t in nodes),
                          weights=tuple(float(w) for w in weights))
