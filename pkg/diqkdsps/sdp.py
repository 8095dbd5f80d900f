"""Dense primal-dual interior-point solver for moment-matrix SDPs.

A :class:`SemidefiniteProgram` is a linear matrix inequality in moment form::

    minimize    c^T y + offset
    subject to  G(y) = C0 + sum_k y_k A_k  >= 0

where every entry of G is either a constant (``ids == -1``) or exactly one
variable (``A_k`` is the 0/1 indicator of ``ids == k``). The solver works on
the pair

    (P)  min <C0, X>   s.t. <A_k, X> = c_k,  X >= 0
    (D)  max c^T u     s.t. sum_k u_k A_k + S = C0,  S >= 0

with ``y = -u``, so the moment optimum is ``offset - c^T u`` and every
feasible X certifies the lower bound ``offset - <C0, X>``.
"""

import logging
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve, eigvalsh, lstsq

from diqkdsps.constants import SDP_MAX_ITER, SDP_TOL
from diqkdsps.enums import ErrorCode, SolverStatus
from diqkdsps.exceptions import DiqkdError

logger = logging.getLogger(__name__)

_BLOWUP = 1e10
_STEP_DAMPING = 0.95


@dataclass(frozen=True, eq=False)
class SemidefiniteProgram:
    """Moment-form SDP; see the module docstring for the sign conventions.

    Attributes:
        ids: (n, n) symmetric integer matrix, variable index or -1.
        const: (n, n) symmetric matrix of constant entries (zero where ``ids >= 0``).
        c: Objective coefficients, one per variable.
        offset: Constant added to the objective.
    """
    ids: np.ndarray = field(repr=False)
    const: np.ndarray = field(repr=False)
    c: np.ndarray = field(repr=False)
    offset: float = 0.0

    def __post_init__(self) -> None:
        ids = np.asarray(self.ids, dtype=np.intp)
        const = np.asarray(self.const, dtype=float)
        c = np.asarray(self.c, dtype=float)
        if ids.ndim != 2 or ids.shape[0] != ids.shape[1] or const.shape != ids.shape:
            raise DiqkdError("ids and const must be square matrices of equal size", ErrorCode.INVALID_PARAMETER)
        if not np.array_equal(ids, ids.T) or not np.allclose(const, const.T):
            raise DiqkdError("SDP data must be symmetric", ErrorCode.INVALID_PARAMETER)
        if ids.max(initial=-1) >= c.size or np.any(ids < -1):
            raise DiqkdError("variable index out of range", ErrorCode.INVALID_PARAMETER)
        for name, value in (("ids", ids), ("const", const), ("c", c)):
            value.setflags(write=False)
            object.__setattr__(self, name, value)

    @property
    def size(self) -> int:
        return self.ids.shape[0]

    @property
    def num_vars(self) -> int:
        return self.c.size

    def matrix(self, y: np.ndarray) -> np.ndarray:
        """G(y) = C0 + sum_k y_k A_k."""
        padded = np.append(np.asarray(y, dtype=float), 0.0)
        return self.const + padded[self.ids]

    def apply(self, z: np.ndarray) -> np.ndarray:
        """The map Z -> (<A_k, Z>)_k."""
        mask = self.ids >= 0
        return np.bincount(self.ids[mask], weights=z[mask], minlength=self.num_vars)

    def positions(self, k: int) -> Tuple[np.ndarray, np.ndarray]:
        return np.nonzero(self.ids == k)


@dataclass(frozen=True)
class SdpResult:
    """Outcome of one solve.

    ``value`` is the moment-side objective at the returned moments and
    ``lower_bound`` the certificate from the dual matrix; both include the
    offset.
    """
    status: SolverStatus
    value: float
    lower_bound: float
    gap: float
    iterations: int
    primal_residual: float
    dual_residual: float
    y: Optional[np.ndarray] = field(default=None, repr=False, compare=False)


def _max_step(m: np.ndarray, dm: np.ndarray) -> float:
    """Largest alpha with m + alpha dm still positive semidefinite."""
    try:
        lower = np.linalg.cholesky(m)
    except np.linalg.LinAlgError:
        return 0.0
    inv = np.linalg.inv(lower)
    lam = eigvalsh(inv @ dm @ inv.T).min()
    return np.inf if lam >= 0.0 else -1.0 / lam


class _Schur:
    """Builds M_ij = tr(A_i X A_j S^-1) column by column."""

    def __init__(self, program: SemidefiniteProgram) -> None:
        self.program = program
        mask = program.ids >= 0
        self.flat_ids = program.ids[mask]
        self.mask = mask
        rows, cols = np.nonzero(mask)
        order = np.argsort(self.flat_ids, kind="stable")
        bounds = np.searchsorted(self.flat_ids[order], np.arange(program.num_vars + 1))
        self.groups = [(rows[order[a:b]], cols[order[a:b]]) for a, b in zip(bounds[:-1], bounds[1:])]

    def build(self, x: np.ndarray, s_inv: np.ndarray) -> np.ndarray:
        nv = self.program.num_vars
        m = np.empty((nv, nv))
        for j, (rows, cols) in enumerate(self.groups):
            block = x[:, rows] @ s_inv[cols, :]
            m[:, j] = np.bincount(self.flat_ids, weights=block.T[self.mask], minlength=nv)
        return 0.5 * (m + m.T)


def _solve_schur(m: np.ndarray, rhs: np.ndarray, factor) -> np.ndarray:
    if factor is not None:
        return cho_solve(factor, rhs)
    return lstsq(m, rhs)[0]


def solve_sdp(program: SemidefiniteProgram, tol: float = SDP_TOL, max_iter: int = SDP_MAX_ITER) -> SdpResult:
    """Solve with an infeasible-start HKM path-following method.

    Each iteration takes a predictor step to choose the centering parameter
    (sigma = (mu_aff / mu)^3) and then a centered step; both reuse one
    Cholesky factor of the Schur complement.
    """
    n, nv = program.size, program.num_vars
    c0, b = program.const, program.c
    schur = _Schur(program)
    xi = 10.0 * max(1.0, np.sqrt(n))
    x = xi * np.eye(n)
    s = xi * np.eye(n)
    u = np.zeros(nv)
    norm_b = 1.0 + np.linalg.norm(b)
    norm_c = 1.0 + np.linalg.norm(c0)
    status = SolverStatus.MAX_ITER
    it = 0
    rel_gap = p_res = d_res = np.inf

    for it in range(1, max_iter + 1):
        rp = b - program.apply(x)
        rd = c0 - s - (program.matrix(u) - c0)
        pobj = float(np.sum(c0 * x))
        dobj = float(b @ u)
        mu = float(np.sum(x * s)) / n
        rel_gap = abs(pobj - dobj) / (1.0 + abs(pobj) + abs(dobj))
        p_res = float(np.linalg.norm(rp)) / norm_b
        d_res = float(np.linalg.norm(rd)) / norm_c
        logger.debug("sdp it=%d pobj=%.9e dobj=%.9e gap=%.2e pres=%.2e dres=%.2e",
                     it, pobj, dobj, rel_gap, p_res, d_res)
        if rel_gap <= tol and p_res <= tol and d_res <= tol:
            status = SolverStatus.OPTIMAL
            break
        if np.abs(x).max() > _BLOWUP:
            status = SolverStatus.INFEASIBLE
            break
        try:
            s_inv = np.linalg.inv(s)
            m = schur.build(x, s_inv)
        except np.linalg.LinAlgError:
            status = SolverStatus.NUMERICAL_ERROR
            break
        try:
            factor = cho_factor(m)
        except LinAlgError:
            factor = None
        base = b + program.apply(x @ rd @ s_inv)
        a_sinv = program.apply(s_inv)

        def direction(sigma: float):
            du = _solve_schur(m, base - sigma * mu * a_sinv, factor)
            ds = rd - (program.matrix(du) - c0)
            dx = sigma * mu * s_inv - x - x @ ds @ s_inv
            return du, 0.5 * (dx + dx.T), ds

        du, dx, ds = direction(0.0)
        ap = min(1.0, _STEP_DAMPING * _max_step(x, dx))
        ad = min(1.0, _STEP_DAMPING * _max_step(s, ds))
        mu_aff = float(np.sum((x + ap * dx) * (s + ad * ds))) / n
        sigma = min(1.0, max(0.0, (mu_aff / mu) ** 3)) if mu > 0.0 else 0.0
        du, dx, ds = direction(sigma)
        ap = min(1.0, _STEP_DAMPING * _max_step(x, dx))
        ad = min(1.0, _STEP_DAMPING * _max_step(s, ds))
        if not np.all(np.isfinite(du)) or max(ap, ad) < 1e-12:
            status = SolverStatus.NUMERICAL_ERROR
            break
        x = x + ap * dx
        s = s + ad * ds
        u = u + ad * du

    pobj = float(np.sum(c0 * x))
    dobj = float(b @ u)
    result = SdpResult(
        status=status,
        value=program.offset - dobj,
        lower_bound=program.offset - pobj,
        gap=rel_gap,
        iterations=it,
        primal_residual=p_res,
        dual_residual=d_res,
        y=-u,
    )
    if status is not SolverStatus.OPTIMAL:
        logger.warning("SDP solve ended with status %s after %d iterations", status.value, it)
    return result


def solve_with_cvxpy(program: SemidefiniteProgram, solver: Optional[str] = None) -> float:
    """Solve the moment problem with cvxpy as an external reference.

    Requires the optional ``crosscheck`` extra.
    """
    try:
        import cvxpy as cp
    except ImportError as exc:
        raise DiqkdError("cvxpy is not installed; install the 'crosscheck' extra",
                         ErrorCode.SOLVER_FAILURE) from exc
    n = program.size
    gamma = cp.Variable((n, n), symmetric=True)
    y = cp.Variable(program.num_vars)
    rows, cols = np.nonzero(program.ids >= 0)
    fixed_rows, fixed_cols = np.nonzero(program.ids < 0)
    constraints = [
        gamma >> 0,
        gamma[rows, cols] == y[program.ids[rows, cols]],
        gamma[fixed_rows, fixed_cols] == program.const[fixed_rows, fixed_cols],
    ]
    problem = cp.Problem(cp.Minimize(program.c @ y + program.offset), constraints)
    problem.solve(solver=solver)
    if problem.status not in ("optimal", "optimal_inaccurate"):
        raise DiqkdError(f"cvxpy reported {problem.status}", ErrorCode.SOLVER_FAILURE)
    return float(problem.value)
