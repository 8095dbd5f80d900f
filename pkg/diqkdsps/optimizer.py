"""Key-rate optimization over the experimental settings.

Seeds are drawn at random until the CHSH test inputs violate the 2222 local
polytope. Every seed is refined with Nelder-Mead against a cheap bound
(stage 1, small m); seeds that do not reach a positive rate are dropped and
the survivors are refined again against the tight bound (stage 2, large m).
When no seed survives, the best stage-1 seed is refined anyway.

Where the rate is not positive the objective ranks points by their CHSH
score first, so a simplex never settles on the flat no-key region around
product states.
"""

import logging
from dataclasses import dataclass, field, replace
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.optimize import minimize

from diqkdsps.analysis import chsh_score, is_nonlocal_2222
from diqkdsps.constants import (
    BIG_T_BOUNDS,
    DEFAULT_Y_SET,
    KEY_INPUTS,
    POSITIVE_RATE_TOL,
    Q_MAX,
    Q_SEARCH_MAX,
    SIMPLEX_FRACTION,
    TSIRELSON,
)
from diqkdsps.entropy import (
    RatePoint,
    chsh_entropy_bound,
    conditional_entropy_ab,
    optimize_preprocessing,
    preprocessing_gain,
)
from diqkdsps.enums import ErrorCode, RateMethod
from diqkdsps.exceptions import DiqkdError
from diqkdsps.photonic import MeasurementSettings, OverlapModel, PhysicalParams, behavior
from diqkdsps.relaxation import entropy_bound

logger = logging.getLogger(__name__)

_TWO_PI = 2.0 * np.pi
_FAILED_OBJECTIVE = 100.0
_CHSH_WEIGHT = 4.0


@dataclass(frozen=True)
class SettingsVector:
    """Everything the optimizer varies: t, the five angles, q and optionally T."""
    small_t: float
    theta_a: Tuple[float, float]
    theta_b: Tuple[float, float, float]
    q: float = 0.0
    big_t: Optional[float] = None

    def __post_init__(self) -> None:
        if not np.isfinite(self.small_t) or not 0.0 <= self.small_t <= 1.0:
            raise DiqkdError(f"t must lie in [0, 1], got {self.small_t}", ErrorCode.INVALID_PARAMETER)
        if not np.isfinite(self.q) or not 0.0 <= self.q <= Q_MAX:
            raise DiqkdError(f"q must lie in [0, 0.5], got {self.q}", ErrorCode.INVALID_PARAMETER)
        if self.big_t is not None and not 0.0 < self.big_t < 1.0:
            raise DiqkdError(f"T must lie in (0, 1), got {self.big_t}", ErrorCode.INVALID_PARAMETER)
        measurement = MeasurementSettings(tuple(self.theta_a), tuple(self.theta_b))
        object.__setattr__(self, "theta_a", measurement.theta_a)
        object.__setattr__(self, "theta_b", measurement.theta_b)

    def measurement(self) -> MeasurementSettings:
        return MeasurementSettings(self.theta_a, self.theta_b)

    def apply(self, params: PhysicalParams) -> PhysicalParams:
        """Hardware parameters with this vector's t (and T, when set)."""
        if self.big_t is None:
            return replace(params, small_t=self.small_t)
        return replace(params, small_t=self.small_t, big_t=self.big_t)

    def as_tuple(self) -> Tuple[float, ...]:
        big_t = np.nan if self.big_t is None else self.big_t
        return (self.small_t, *self.theta_a, *self.theta_b, self.q, big_t)


@dataclass(frozen=True)
class OptimizerConfig:
    """Method, budgets and reproducibility knobs of :func:`optimize_rate`.

    With ``optimize_q`` the SDP method searches q together with the angles,
    while the analytic preprocessing method solves for the best q at every
    evaluation.
    """
    method: RateMethod = RateMethod.SDP
    seeds: int = 200
    max_seed_attempts: int = 1000
    stage1_m: int = 2
    stage2_m: int = 8
    stage1_iter: int = 400
    stage2_iter: int = 200
    tol: float = 1e-6
    optimize_q: bool = False
    optimize_big_t: bool = False
    level: int = 2
    extras: bool = True
    y_set: Tuple[int, ...] = DEFAULT_Y_SET
    key: Tuple[int, int] = KEY_INPUTS
    rng_seed: int = 0
    pool: int = 1


@dataclass(frozen=True)
class NelderMeadResult:
    x: np.ndarray = field(repr=False)
    fun: float
    evaluations: int
    iterations: int
    converged: bool


@dataclass(frozen=True)
class SeedTrace:
    """Path of one seed through both stages; stage 2 is None for dropped seeds."""
    index: int
    seed: SettingsVector
    stage1: float
    stage2: Optional[float]
    settings: SettingsVector
    evaluations: int


@dataclass(frozen=True)
class OptimizationResult:
    """Best settings and rate, with the full per-seed trace."""
    settings: Optional[SettingsVector]
    rate: RatePoint
    trace: Tuple[SeedTrace, ...]
    evaluations: int
    rng_seed: int
    diagnostics: str = ""

    @property
    def best_trace(self) -> Optional[SeedTrace]:
        refined = [t for t in self.trace if t.stage2 is not None]
        if not refined:
            return None
        return max(refined, key=lambda t: (t.stage2, t.stage1, -t.index))


def evaluate_rate(params: PhysicalParams, overlaps: OverlapModel, settings: SettingsVector,
                  method: RateMethod = RateMethod.SDP, m: int = 8, level: int = 2, extras: bool = True,
                  y_set: Sequence[int] = DEFAULT_Y_SET, key: Tuple[int, int] = KEY_INPUTS,
                  optimize_q: bool = False) -> RatePoint:
    """Asymptotic rate per heralded round at one settings vector.

    Args:
        params: Hardware parameters; t and T are taken from ``settings``.
        overlaps: Internal-state overlaps of the photons.
        settings: Splitter, angles and flip probability.
        method: Entropy bound to use. ANALYTIC ignores ``settings.q``.
        m, level, extras, y_set: Relaxation knobs of the SDP method.
        key: Key inputs (x', y').
        optimize_q: With ANALYTIC_PREPROCESSING, replace ``settings.q`` by the
            best flip probability for this behavior.

    Raises:
        DiqkdError: MODEL_ERROR when the settings never herald, or the
            relaxation's errors for the SDP method.
    """
    b = behavior(settings.apply(params), overlaps, settings.measurement())
    score = chsh_score(b).score
    if method is RateMethod.ANALYTIC_PREPROCESSING and optimize_q:
        best = optimize_preprocessing(b, key)
        return replace(best, settings=replace(settings, q=min(best.q, Q_MAX)).as_tuple())
    q = settings.q if method is not RateMethod.ANALYTIC else 0.0
    h_ab = conditional_entropy_ab(b, key, q)
    if method is RateMethod.ANALYTIC:
        h_ae = chsh_entropy_bound(score)
    elif method is RateMethod.ANALYTIC_PREPROCESSING:
        h_ae = chsh_entropy_bound(score) + preprocessing_gain(score, q)
    else:
        h_ae = entropy_bound(b, key[0], m, q, level, extras, y_set)
    return RatePoint(h_ae=h_ae, h_ab=h_ab, method=method, q=q, chsh=score, settings=settings.as_tuple())


def sample_nonlocal_seed(params: PhysicalParams, overlaps: OverlapModel, rng: np.random.Generator,
                         max_attempts: int = 1000, optimize_q: bool = False,
                         optimize_big_t: bool = False) -> SettingsVector:
    """Draw random settings until the behavior leaves the 2222 local polytope.

    Raises:
        DiqkdError: SAMPLING_EXHAUSTED after ``max_attempts`` local draws.
    """
    best_score = -np.inf
    for attempt in range(1, max_attempts + 1):
        t = rng.uniform(0.0, 1.0)
        angles = rng.uniform(0.0, _TWO_PI, 5)
        q = rng.uniform(0.0, Q_SEARCH_MAX) if optimize_q else 0.0
        big_t = params.big_t if optimize_big_t else None
        candidate = SettingsVector(t, tuple(angles[:2]), tuple(angles[2:]), q, big_t)
        try:
            b = behavior(candidate.apply(params), overlaps, candidate.measurement())
        except DiqkdError:
            continue
        if is_nonlocal_2222(b):
            logger.debug("nonlocal seed after %d attempts", attempt)
            return candidate
        best_score = max(best_score, chsh_score(b).score)
    raise DiqkdError(f"no nonlocal seed in {max_attempts} attempts (best CHSH {best_score:.6f})",
                     ErrorCode.SAMPLING_EXHAUSTED)


def nelder_mead(objective: Callable[[np.ndarray], float], x0: Sequence[float],
                bounds: Sequence[Tuple[float, float]], tol: float = 1e-6, max_iter: int = 400,
                step: Union[float, Sequence[float]] = 0.1) -> NelderMeadResult:
    """Bounded Nelder-Mead from an axis-aligned initial simplex.

    Args:
        objective: Function to minimize.
        x0: Start point, clipped into ``bounds``.
        bounds: (lower, upper) per coordinate.
        tol: Absolute tolerance on both x and the objective.
        max_iter: Iteration cap; evaluations are capped at four times this.
        step: Edge length of the initial simplex, one value or one per
            coordinate. A vertex that would leave the box steps the other way.

    Returns:
        The best vertex. Running out of iterations is not an error: the
        result then has ``converged=False``.

    Examples:
        >>> result = nelder_mead(lambda v: (v[0] - 0.25) ** 2, [0.5], [(0.0, 1.0)], tol=1e-10)
        >>> round(float(result.x[0]), 6)
        0.25
    """
    x0 = np.asarray(x0, dtype=float)
    lower = np.array([b[0] for b in bounds], dtype=float)
    upper = np.array([b[1] for b in bounds], dtype=float)
    steps = np.broadcast_to(np.asarray(step, dtype=float), x0.shape)
    x0 = np.clip(x0, lower, upper)
    simplex = [x0]
    for i in range(x0.size):
        vertex = x0.copy()
        vertex[i] = vertex[i] + steps[i] if vertex[i] + steps[i] <= upper[i] else vertex[i] - steps[i]
        simplex.append(vertex)
    result = minimize(objective, x0, method="Nelder-Mead", bounds=list(zip(lower, upper)),
                      options={"initial_simplex": np.array(simplex), "xatol": tol, "fatol": tol,
                               "maxiter": max_iter, "maxfev": 4 * max_iter})
    if not result.success:
        logger.debug("Nelder-Mead stopped after %d iterations: %s", result.nit, result.message)
    return NelderMeadResult(x=result.x, fun=float(result.fun), evaluations=int(result.nfev),
                            iterations=int(result.nit), converged=bool(result.success))


def shaped_objective(point: RatePoint) -> float:
    """Negated rate, or a CHSH-margin penalty where there is no key.

    Every positive rate scores below every point without key; among the
    latter a higher CHSH score wins before a smaller error-correction cost.
    """
    if point.rate > POSITIVE_RATE_TOL:
        return -point.rate
    score = point.chsh if point.chsh is not None else 0.0
    return _CHSH_WEIGHT * max(0.0, TSIRELSON - score) + max(0.0, -point.rate)


class _Objective:
    """Maps a flat vector to a SettingsVector and scores it with :func:`shaped_objective`."""

    def __init__(self, params: PhysicalParams, overlaps: OverlapModel, config: OptimizerConfig, m: int):
        self.params = params
        self.overlaps = overlaps
        self.config = config
        self.m = m

    def bounds(self) -> List[Tuple[float, float]]:
        bounds = [(0.0, 1.0)] + [(0.0, _TWO_PI)] * 5
        if self.uses_q:
            bounds.append((0.0, Q_SEARCH_MAX))
        if self.config.optimize_big_t:
            bounds.append(tuple(np.log10(BIG_T_BOUNDS)))
        return bounds

    def steps(self) -> np.ndarray:
        return SIMPLEX_FRACTION * np.array([hi - lo for lo, hi in self.bounds()])

    @property
    def uses_q(self) -> bool:
        return self.config.optimize_q and self.config.method is RateMethod.SDP

    def encode(self, s: SettingsVector) -> np.ndarray:
        v = [s.small_t, *s.theta_a, *s.theta_b]
        if self.uses_q:
            v.append(min(s.q, Q_SEARCH_MAX))
        if self.config.optimize_big_t:
            v.append(np.log10(s.big_t if s.big_t is not None else self.params.big_t))
        return np.array(v)

    def decode(self, v: np.ndarray) -> SettingsVector:
        v = np.asarray(v, dtype=float)
        q = float(np.clip(v[6], 0.0, Q_SEARCH_MAX)) if self.uses_q else 0.0
        big_t = None
        if self.config.optimize_big_t:
            lo, hi = BIG_T_BOUNDS
            big_t = float(np.clip(10.0 ** v[-1], lo, hi))
        return SettingsVector(float(np.clip(v[0], 0.0, 1.0)), tuple(v[1:3]), tuple(v[3:6]), q, big_t)

    def rate(self, s: SettingsVector) -> RatePoint:
        c = self.config
        return evaluate_rate(self.params, self.overlaps, s, c.method, self.m, c.level, c.extras, c.y_set, c.key,
                             optimize_q=c.optimize_q)

    def rate_or_none(self, s: SettingsVector) -> Optional[RatePoint]:
        try:
            return self.rate(s)
        except DiqkdError as exc:
            logger.debug("objective failed at %s: %s", s.as_tuple(), exc.message)
            return None

    def __call__(self, v: np.ndarray) -> float:
        point = self.rate_or_none(self.decode(v))
        return _FAILED_OBJECTIVE if point is None else shaped_objective(point)

    def refine(self, start: SettingsVector, max_iter: int) -> Tuple[SettingsVector, float, int]:
        """Nelder-Mead from ``start``; returns the settings, their rate and the evaluation count."""
        found = nelder_mead(self, self.encode(start), self.bounds(), self.config.tol, max_iter, self.steps())
        settings = self.decode(found.x)
        point = self.rate_or_none(settings)
        rate = -np.inf if point is None else point.rate
        if point is not None and point.settings is not None:
            settings = replace(settings, q=point.settings[6])
        return settings, float(rate), found.evaluations + 1


def optimize_rate(params: PhysicalParams, overlaps: OverlapModel,
                  config: OptimizerConfig = OptimizerConfig()) -> OptimizationResult:
    """Two-stage maximization of the key rate over the settings.

    Seed exhaustion is reported through a zero rate and ``diagnostics``; it
    is not an error. When no seed reaches a positive stage-1 rate the best
    one still goes through stage 2 and the diagnostics say so.
    """
    rng = np.random.default_rng(config.rng_seed)
    stage1 = _Objective(params, overlaps, config, config.stage1_m)
    stage2 = _Objective(params, overlaps, config, config.stage2_m)
    traces: List[SeedTrace] = []
    evaluations = 0
    diagnostics = ""

    for index in range(config.seeds):
        try:
            seed = sample_nonlocal_seed(params, overlaps, rng, config.max_seed_attempts,
                                        stage1.uses_q, config.optimize_big_t)
        except DiqkdError as exc:
            logger.warning("seed sampling stopped at seed %d: %s", index, exc.message)
            diagnostics = exc.message
            break
        settings, rate, used = stage1.refine(seed, config.stage1_iter)
        evaluations += used
        traces.append(SeedTrace(index=index, seed=seed, stage1=rate, stage2=None, settings=settings,
                                evaluations=used))

    chosen = [pos for pos, t in enumerate(traces) if t.stage1 > POSITIVE_RATE_TOL]
    if len(chosen) < len(traces):
        logger.info("discarded %d of %d seeds with non-positive stage-1 rate", len(traces) - len(chosen), len(traces))
    if traces and not chosen:
        fallback = max(range(len(traces)), key=lambda pos: (traces[pos].stage1, -pos))
        chosen = [fallback]
        diagnostics = "no seed reached a positive stage-1 rate; refined the best one"
        logger.warning("%s (seed %d, stage 1 %.6g)", diagnostics, fallback, traces[fallback].stage1)
    for pos in chosen:
        trace = traces[pos]
        settings, rate, used = stage2.refine(trace.settings, config.stage2_iter)
        evaluations += used
        traces[pos] = replace(trace, stage2=rate, settings=settings, evaluations=trace.evaluations + used)

    result = OptimizationResult(settings=None, rate=RatePoint(0.0, 0.0, config.method), trace=tuple(traces),
                                evaluations=evaluations, rng_seed=config.rng_seed, diagnostics=diagnostics)
    best = result.best_trace
    if best is None or not np.isfinite(best.stage2):
        logger.info("optimization found no rate (%s)", result.diagnostics)
        return result
    point = stage2.rate(best.settings)
    if point.rate <= POSITIVE_RATE_TOL and not diagnostics:
        diagnostics = "no seed reached a positive rate"
    logger.info("best rate %.6f from seed %d (stage 1 %.6f)", point.rate, best.index, best.stage1)
    return replace(result, settings=best.settings, rate=point, diagnostics=diagnostics)


def threshold_search(rate_fn: Callable[[float], float], lo: float, hi: float, points: int = 8) -> float:
    """Bisect for the value where ``rate_fn`` turns positive.

    The bracket is assumed to hold rate(lo) <= 0 < rate(hi); only ``points``
    midpoints are evaluated and the centre of the final bracket is returned.
    """
    if not lo < hi or points < 1:
        raise DiqkdError(f"invalid bracket [{lo}, {hi}] with {points} points", ErrorCode.INVALID_PARAMETER)
    for _ in range(points):
        mid = 0.5 * (lo + hi)
        if rate_fn(mid) > 0.0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)
