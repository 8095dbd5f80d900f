"""Lower bound on H(A|X=x', E) from a Gauss-Radau sequence of moment relaxations.

For each quadrature node t_i < 1 Eve gets one operator Z_a per Alice
outcome and the relaxation minimizes

    sum_a < M_a (Z_a + Z_a* + (1 - t_i) Z_a* Z_a) + t_i Z_a Z_a* >

over moment matrices consistent with the observed behavior, where M_a are
Alice's (possibly bit-flipped) key POVM elements. With c_i = w_i / (t_i ln 2)
the entropy is bounded by sum_i c_i (1 + optimum_i); the endpoint node t_m = 1
is left out, which keeps the bound valid.
"""

import logging
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from diqkdsps.algebra import (
    IDENTITY,
    Word,
    adjoint,
    alice,
    bob,
    canonical,
    eve,
    eve_dag,
    format_word,
    monomial_basis,
)
from diqkdsps.constants import DEFAULT_Y_SET, KEY_INPUTS, Q_MAX, SIGNALING_TOL
from diqkdsps.enums import ErrorCode, SolverStatus
from diqkdsps.exceptions import DiqkdError
from diqkdsps.photonic import Behavior
from diqkdsps.quadrature import QuadratureRule, gauss_radau
from diqkdsps.sdp import SdpResult, SemidefiniteProgram, solve_sdp

logger = logging.getLogger(__name__)

_LN2 = np.log(2.0)


@dataclass(frozen=True, eq=False)
class _Structure:
    basis: Tuple[Word, ...]
    keys: Tuple[Word, ...]
    ids: np.ndarray
    known_at: Dict[Word, List[Tuple[int, int]]]


@lru_cache(maxsize=None)
def _structure(level: int, extras: bool, y_set: Tuple[int, ...]) -> _Structure:
    basis = monomial_basis(level, extras)
    if level == 1:
        # each objective term needs a principal minor to be bounded
        for x in range(2):
            for a in range(2):
                for z in (eve(a), eve_dag(a)):
                    word = (alice(x), z)
                    if word not in basis:
                        basis.append(word)
    known = {IDENTITY}
    known.update((alice(x),) for x in range(2))
    known.update((bob(y),) for y in y_set)
    known.update((alice(x), bob(y)) for x in range(2) for y in y_set)

    n = len(basis)
    ids = np.full((n, n), -1, dtype=np.intp)
    index: Dict[Word, int] = {}
    known_at: Dict[Word, List[Tuple[int, int]]] = {w: [] for w in known}
    for i in range(n):
        left = adjoint(basis[i])
        for j in range(i, n):
            word = canonical(left + basis[j])
            if word in known:
                known_at[word].append((i, j))
                continue
            k = index.setdefault(word, len(index))
            ids[i, j] = ids[j, i] = k
    keys = tuple(sorted(index, key=index.get))
    logger.debug("moment matrix %dx%d with %d free moments (level=%d, extras=%s)",
                 n, n, len(keys), level, extras)
    return _Structure(basis=tuple(basis), keys=keys, ids=ids, known_at=known_at)


def observed_moments(b: Behavior, y_set: Sequence[int] = DEFAULT_Y_SET) -> Dict[Word, float]:
    """Moments fixed by the behavior: <1>, <A_x>, <B_y>, <A_x B_y> for y in ``y_set``.

    Raises:
        DiqkdError: CONSTRAINT_ERROR if a marginal depends on the remote input
            by more than the signaling tolerance.
    """
    p = b.p
    moments: Dict[Word, float] = {IDENTITY: 1.0}
    for x in range(2):
        marg = np.array([p[0, :, x, y].sum() for y in y_set])
        if np.ptp(marg) > SIGNALING_TOL:
            raise DiqkdError(f"Alice's marginal for x={x} depends on y by {np.ptp(marg):.2e}",
                             ErrorCode.CONSTRAINT_ERROR)
        moments[(alice(x),)] = float(marg.mean())
    for y in y_set:
        marg = np.array([p[:, 0, x, y].sum() for x in range(2)])
        if np.ptp(marg) > SIGNALING_TOL:
            raise DiqkdError(f"Bob's marginal for y={y} depends on x by {np.ptp(marg):.2e}",
                             ErrorCode.CONSTRAINT_ERROR)
        moments[(bob(y),)] = float(marg.mean())
        for x in range(2):
            moments[(alice(x), bob(y))] = float(p[0, 0, x, y])
    return moments


def objective_terms(t: float, q: float, key_input: int) -> Dict[Word, float]:
    """Coefficients of the per-node objective on canonical words."""
    flip = 1.0 - 2.0 * q
    povm = ((q, flip), (1.0 - q, -flip))  # M_a = c0 + c1 A_{x'}
    terms: Dict[Word, float] = {}

    def add(word: Word, coef: float) -> None:
        key = canonical(word)
        terms[key] = terms.get(key, 0.0) + coef

    a_key = (alice(key_input),)
    for a, (c0, c1) in enumerate(povm):
        z, zd = (eve(a),), (eve_dag(a),)
        for word, factor in ((z, 1.0), (zd, 1.0), (zd + z, 1.0 - t)):
            add(word, c0 * factor)
            add(a_key + word, c1 * factor)
        add(z + zd, t)
    return terms


@dataclass(frozen=True, eq=False)
class MomentProblem:
    """One semidefinite program per Gauss-Radau node t_i < 1.

    Attributes:
        basis: Monomial basis indexing the moment matrix.
        keys: Canonical word of every free moment, in variable order.
        rule: Quadrature rule the nodes come from.
        programs: SDP of node i for i = 1, ..., m - 1.
        level: NPA level of the basis.
        extras: Whether the words A B Z and A Z* Z were added.
        y_set: Bob inputs whose statistics are imposed.
        key_input: Alice's key-generating input x'.
        q: Preprocessing bit-flip probability.
    """
    basis: Tuple[Word, ...] = field(repr=False)
    keys: Tuple[Word, ...] = field(repr=False)
    rule: QuadratureRule
    programs: Tuple[SemidefiniteProgram, ...] = field(repr=False)
    level: int = 2
    extras: bool = True
    y_set: Tuple[int, ...] = DEFAULT_Y_SET
    key_input: int = KEY_INPUTS[0]
    q: float = 0.0

    @property
    def coefficients(self) -> Tuple[float, ...]:
        """c_i = w_i / (t_i ln 2) for the solved nodes."""
        return tuple(w / (t * _LN2) for t, w in zip(self.rule.nodes[:-1], self.rule.weights[:-1]))

    def describe_basis(self) -> List[str]:
        return [format_word(w) for w in self.basis]


@dataclass(frozen=True)
class SolverReport:
    """Aggregate of the node solves and the resulting entropy bound.

    ``primal`` and ``dual`` are the coefficient-weighted sums of the moment-side
    values and of the certified lower bounds; ``bound`` is the certified
    entropy bound clamped to [0, 1] and ``raw_bound`` the unclamped value.
    """
    status: SolverStatus
    primal: float
    dual: float
    gap: float
    iterations: int
    bound: float
    raw_bound: float
    nodes: Tuple[SdpResult, ...] = field(default=(), repr=False)


def build_problem(b: Behavior, key_input: int = KEY_INPUTS[0], m: int = 8, q: float = 0.0,
                  level: int = 2, extras: bool = True,
                  y_set: Sequence[int] = DEFAULT_Y_SET) -> MomentProblem:
    """Assemble the moment relaxations that bound H(A|X=key_input, E) for ``b``.

    One semidefinite program is built per Gauss-Radau node except the
    endpoint t = 1, which the bound leaves out.
    All programs share the moment matrix structure and the observed
    moments; only the objective changes with the node.

    Args:
        b: Heralded behavior supplying the observed moments.
        key_input: Alice's key input x'.
        m: Number of Gauss-Radau nodes.
        q: Preprocessing flip probability folded into the objective.
        level: Hierarchy level, 1 or 2.
        extras: Add the Eve-dependent words beyond the plain level.
        y_set: Bob's inputs whose statistics constrain the relaxation.

    Returns:
        A :class:`MomentProblem` ready for :func:`solve` or SDPA export.

    Raises:
        DiqkdError: INVALID_PARAMETER for an unknown level, key input, q or
            y-set; CONSTRAINT_ERROR when an objective word has no entry in
            the moment matrix.
    """
    if level not in (1, 2):
        raise DiqkdError(f"NPA level must be 1 or 2, got {level}", ErrorCode.INVALID_PARAMETER)
    if key_input not in (0, 1):
        raise DiqkdError(f"key input must be 0 or 1, got {key_input}", ErrorCode.INVALID_PARAMETER)
    if not np.isfinite(q) or q < 0.0 or q > Q_MAX:
        raise DiqkdError(f"q must lie in [0, 0.5], got {q}", ErrorCode.INVALID_PARAMETER)
    y_set = tuple(sorted(set(int(y) for y in y_set)))
    if not y_set or any(y not in (0, 1, 2) for y in y_set):
        raise DiqkdError(f"invalid constrained y-set {y_set}", ErrorCode.INVALID_PARAMETER)
    rule = gauss_radau(m)
    structure = _structure(level, extras, y_set)
    moments = observed_moments(b, y_set)

    n = len(structure.basis)
    const = np.zeros((n, n))
    for word, cells in structure.known_at.items():
        for i, j in cells:
            const[i, j] = const[j, i] = moments[word]

    index = {word: k for k, word in enumerate(structure.keys)}
    programs = []
    for t in rule.nodes[:-1]:
        c = np.zeros(len(structure.keys))
        offset = 0.0
        for word, coef in objective_terms(t, q, key_input).items():
            if word in index:
                c[index[word]] += coef
            elif word in moments:
                offset += coef * moments[word]
            else:
                raise DiqkdError(f"objective word {format_word(word)} is not in the moment matrix",
                                 ErrorCode.CONSTRAINT_ERROR)
        programs.append(SemidefiniteProgram(ids=structure.ids, const=const, c=c, offset=offset))
    return MomentProblem(basis=structure.basis, keys=structure.keys, rule=rule, programs=tuple(programs),
                         level=level, extras=extras, y_set=y_set, key_input=key_input, q=q)


def solve(problem: MomentProblem, tol: Optional[float] = None) -> SolverReport:
    """Solve every node and combine them into the entropy bound.

    The bound uses the dual lower bounds of the node programs, so it stays
    valid when the solver stops short of optimality. It is clipped to
    [0, 1]; ``raw_bound`` keeps the unclipped value.

    Args:
        problem: Output of :func:`build_problem`.
        tol: Solver tolerance, the solver default when omitted.
    """
    kwargs = {} if tol is None else {"tol": tol}
    results = tuple(solve_sdp(program, **kwargs) for program in problem.programs)
    coefs = problem.coefficients
    primal = sum(c * r.value for c, r in zip(coefs, results))
    dual = sum(c * r.lower_bound for c, r in zip(coefs, results))
    raw = sum(coefs) + dual
    status = next((r.status for r in results if r.status is not SolverStatus.OPTIMAL), SolverStatus.OPTIMAL)
    report = SolverReport(
        status=status,
        primal=primal,
        dual=dual,
        gap=max(r.gap for r in results),
        iterations=sum(r.iterations for r in results),
        bound=min(1.0, max(0.0, raw)),
        raw_bound=raw,
        nodes=results,
    )
    logger.debug("entropy bound %.9f (raw %.9f, status %s)", report.bound, raw, status.value)
    return report


def entropy_bound(b: Behavior, key_input: int = KEY_INPUTS[0], m: int = 8, q: float = 0.0,
                  level: int = 2, extras: bool = True, y_set: Sequence[int] = DEFAULT_Y_SET) -> float:
    """Certified lower bound on H(A|X=key_input, E) in bits, within [0, 1].

    Raises:
        DiqkdError: SOLVER_FAILURE when a node solve is infeasible or breaks down.
    """
    report = solve(build_problem(b, key_input, m, q, level, extras, y_set))
    if report.status in (SolverStatus.INFEASIBLE, SolverStatus.NUMERICAL_ERROR):
        raise DiqkdError(f"entropy relaxation failed with status {report.status.value}",
                         ErrorCode.SOLVER_FAILURE)
    return report.bound
