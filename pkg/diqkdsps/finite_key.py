"""Finite-round key length and key rate per second versus distance.

The key length after n rounds follows the entropy-accumulation shape

    l = n_succ h - sqrt(n_succ) k - n_succ H(A|B) - delta

with a second-order penalty k = c1 sqrt(log2(1/eps_sound)) + c2 and a
constant overhead delta = c3 log2(1/eps_complete). By default n counts
heralded rounds, so the rate per second is nu P_h l / n and only the channel
loss ties the reach to the run length through P_h. The constants are
configurable and can be fitted to known reach targets with
:func:`calibrate_penalty`.
"""

import logging
from dataclasses import dataclass, replace
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import minimize_scalar, nnls

from diqkdsps.constants import (
    BIG_T_BOUNDS,
    DEFAULT_EPS_COMPLETE,
    DEFAULT_EPS_SOUND,
    DEFAULT_L0_KM,
    DEFAULT_NU_HZ,
    DEFAULT_PENALTY_C1,
    DEFAULT_PENALTY_C2,
    DEFAULT_PENALTY_C3,
    DEFAULT_ROUNDS_SEMANTICS,
    DEFAULT_Y_SET,
    KEY_INPUTS,
)
from diqkdsps.entropy import RatePoint
from diqkdsps.enums import ErrorCode, RateMethod
from diqkdsps.exceptions import DiqkdError
from diqkdsps.optimizer import SettingsVector, evaluate_rate
from diqkdsps.photonic import OverlapModel, PhysicalParams, heralding_probability, transmission_efficiency

logger = logging.getLogger(__name__)

ROUNDS_SEMANTICS = ("heralded", "attempts")


@dataclass(frozen=True)
class FiniteKeyConfig:
    """Round count, clock, security parameters and penalty constants.

    Attributes:
        n: Protocol rounds; heralded rounds or emission attempts depending
            on ``rounds_semantics``.
        nu_hz: Source repetition rate.
        eps_sound: Soundness parameter.
        eps_complete: Completeness parameter.
        l0_km: Fiber attenuation length.
        c1, c2, c3: Penalty constants.
        rounds_semantics: ``"heralded"`` (n_succ = n, tau = n / (nu P_h)) or
            ``"attempts"`` (n_succ = n P_h, tau = n / nu).

    Raises:
        DiqkdError: INVALID_PARAMETER for a non-positive n, clock or L0, an
            epsilon outside (0, 1), a negative constant or an unknown
            semantics.

    Examples:
        >>> cfg = FiniteKeyConfig(c1=1.0, c2=0.0, eps_sound=0.5)
        >>> float(cfg.penalty)
        1.0
    """
    n: float = 1e10
    nu_hz: float = DEFAULT_NU_HZ
    eps_sound: float = DEFAULT_EPS_SOUND
    eps_complete: float = DEFAULT_EPS_COMPLETE
    l0_km: float = DEFAULT_L0_KM
    c1: float = DEFAULT_PENALTY_C1
    c2: float = DEFAULT_PENALTY_C2
    c3: float = DEFAULT_PENALTY_C3
    rounds_semantics: str = DEFAULT_ROUNDS_SEMANTICS

    def __post_init__(self) -> None:
        if not np.isfinite(self.n) or self.n < 1:
            raise DiqkdError(f"n must be >= 1, got {self.n}", ErrorCode.INVALID_PARAMETER)
        if not np.isfinite(self.nu_hz) or self.nu_hz <= 0.0:
            raise DiqkdError(f"nu must be positive, got {self.nu_hz}", ErrorCode.INVALID_PARAMETER)
        for name in ("eps_sound", "eps_complete"):
            eps = getattr(self, name)
            if not 0.0 < eps < 1.0:
                raise DiqkdError(f"{name} must lie in (0, 1), got {eps}", ErrorCode.INVALID_PARAMETER)
        if not np.isfinite(self.l0_km) or self.l0_km <= 0.0:
            raise DiqkdError(f"L0 must be positive, got {self.l0_km}", ErrorCode.INVALID_PARAMETER)
        if min(self.c1, self.c2, self.c3) < 0.0:
            raise DiqkdError("penalty constants must be non-negative", ErrorCode.INVALID_PARAMETER)
        if self.rounds_semantics not in ROUNDS_SEMANTICS:
            raise DiqkdError(f"rounds_semantics must be one of {ROUNDS_SEMANTICS}", ErrorCode.INVALID_PARAMETER)

    @property
    def penalty(self) -> float:
        """Second-order coefficient k."""
        return self.c1 * np.sqrt(np.log2(1.0 / self.eps_sound)) + self.c2

    @property
    def overhead(self) -> float:
        """Constant overhead delta."""
        return self.c3 * np.log2(1.0 / self.eps_complete)


@dataclass(frozen=True)
class DistanceRow:
    distance_km: float
    big_t: float
    p_herald: float
    n: float
    key_length: float
    rate_bps: float


@dataclass(frozen=True)
class DistanceCurve:
    """Key rate per second on a distance grid for one round count."""
    rows: Tuple[DistanceRow, ...]
    n: float
    nu_hz: float

    @property
    def duration_s(self) -> float:
        return self.n / self.nu_hz


def successful_rounds(p_herald: float, cfg: FiniteKeyConfig) -> float:
    """Rounds that feed the entropy bound: n, or n P_h when n counts attempts.

    Examples:
        >>> successful_rounds(0.01, FiniteKeyConfig(n=1e8, rounds_semantics="attempts"))
        1000000.0
    """
    return cfg.n * p_herald if cfg.rounds_semantics == "attempts" else cfg.n


def protocol_duration(p_herald: float, cfg: FiniteKeyConfig) -> float:
    """Wall-clock time tau of the n rounds in seconds."""
    if cfg.rounds_semantics == "attempts":
        return cfg.n / cfg.nu_hz
    return np.inf if p_herald <= 0.0 else cfg.n / (cfg.nu_hz * p_herald)


def eat_key_length(h_bound: float, h_ab: float, n_succ: float, cfg: FiniteKeyConfig) -> float:
    """Extractable key length in bits, never negative.

    Args:
        h_bound: Lower bound on H(A|X=x', E) per round, in [0, 1].
        h_ab: Error-correction cost H(A|B) per round.
        n_succ: Rounds entering the bound.
        cfg: Penalty constants and security parameters.

    Raises:
        DiqkdError: INVALID_PARAMETER for a bound outside [0, 1] or a
            negative round count.

    Examples:
        >>> eat_key_length(0.5, 0.1, 100.0, FiniteKeyConfig(c1=0.0, c2=1.0, c3=0.0))
        30.0
    """
    if not np.isfinite(h_bound) or not -1e-12 <= h_bound <= 1.0 + 1e-12:
        raise DiqkdError(f"entropy bound must lie in [0, 1], got {h_bound}", ErrorCode.INVALID_PARAMETER)
    if not np.isfinite(n_succ) or n_succ < 0.0:
        raise DiqkdError(f"successful rounds must be >= 0, got {n_succ}", ErrorCode.INVALID_PARAMETER)
    length = n_succ * h_bound - np.sqrt(n_succ) * cfg.penalty - n_succ * h_ab - cfg.overhead
    return float(max(0.0, length))


def _row(params: PhysicalParams, overlaps: OverlapModel, settings: SettingsVector, distance_km: float,
         cfg: FiniteKeyConfig, point: Optional[RatePoint], rate_kwargs: dict) -> DistanceRow:
    hardware = replace(params, eta_t=transmission_efficiency(distance_km, cfg.l0_km))
    if point is None:
        point = evaluate_rate(hardware, overlaps, settings, **rate_kwargs)
    p_herald = heralding_probability(settings.apply(hardware), overlaps)
    length = eat_key_length(min(1.0, max(0.0, point.h_ae)), point.h_ab, successful_rounds(p_herald, cfg), cfg)
    tau = protocol_duration(p_herald, cfg)
    rate = 0.0 if not np.isfinite(tau) else length / tau
    big_t = settings.big_t if settings.big_t is not None else params.big_t
    return DistanceRow(distance_km=float(distance_km), big_t=big_t, p_herald=p_herald, n=cfg.n,
                       key_length=length, rate_bps=rate)


def rate_per_second(params: PhysicalParams, overlaps: OverlapModel, settings: SettingsVector,
                    distance_km: float, cfg: FiniteKeyConfig, method: RateMethod = RateMethod.SDP,
                    m: int = 8, level: int = 2, extras: bool = True,
                    y_set: Sequence[int] = DEFAULT_Y_SET, key: Tuple[int, int] = KEY_INPUTS,
                    point: Optional[RatePoint] = None) -> float:
    """Key bits per second at one distance.

    ``point`` reuses an already computed per-round rate; otherwise the rate is
    evaluated at the distance's channel transmission.
    """
    kwargs = dict(method=method, m=m, level=level, extras=extras, y_set=y_set, key=key)
    return _row(params, overlaps, settings, distance_km, cfg, point, kwargs).rate_bps


def distance_curve(params: PhysicalParams, overlaps: OverlapModel, settings: SettingsVector,
                   cfg: FiniteKeyConfig, distances_km: Sequence[float], optimize_big_t: bool = False,
                   method: RateMethod = RateMethod.SDP, m: int = 8, level: int = 2, extras: bool = True,
                   y_set: Sequence[int] = DEFAULT_Y_SET, key: Tuple[int, int] = KEY_INPUTS,
                   point: Optional[RatePoint] = None) -> DistanceCurve:
    """Rate per second over a distance grid, optionally maximizing over T per row.

    The channel transmission at every distance comes from
    :func:`transmission_efficiency` with ``cfg.l0_km``. With
    ``optimize_big_t`` a bounded search over log10 T replaces a row only when
    it improves on the configured T.

    Args:
        params: Hardware at zero distance.
        overlaps: Photon overlap model.
        settings: Measurement settings; ``big_t`` overrides ``params.big_t``.
        cfg: Finite-key parameters.
        distances_km: Distances to evaluate, in any order.
        optimize_big_t: Search T at each distance.
        method: Per-round rate method.
        m: Gauss-Radau nodes for the SDP method.
        level: Hierarchy level for the SDP method.
        extras: Extra monomials for the SDP method.
        y_set: Constrained Bob inputs for the SDP method.
        key: Key inputs (x', y').
        point: Per-round rate to reuse at every distance instead of
            recomputing it.

    Returns:
        A :class:`DistanceCurve` with rows sorted by distance.
    """
    kwargs = dict(method=method, m=m, level=level, extras=extras, y_set=y_set, key=key)
    rows: List[DistanceRow] = []
    for distance in sorted(float(d) for d in distances_km):
        row = _row(params, overlaps, settings, distance, cfg, point, kwargs)
        if optimize_big_t:
            def negative(log_t: float) -> float:
                trial = replace(settings, big_t=float(10.0 ** log_t))
                try:
                    return -_row(params, overlaps, trial, distance, cfg, point, kwargs).rate_bps
                except DiqkdError:
                    return 0.0

            lo, hi = np.log10(BIG_T_BOUNDS)
            found = minimize_scalar(negative, bounds=(lo, hi), method="bounded", options={"xatol": 1e-3})
            best = _row(params, overlaps, replace(settings, big_t=float(10.0 ** found.x)), distance, cfg,
                        point, kwargs)
            if best.rate_bps >= row.rate_bps:
                row = best
        logger.debug("L=%.1f km T=%.4g rate=%.4g bit/s", row.distance_km, row.big_t, row.rate_bps)
        rows.append(row)
    return DistanceCurve(rows=tuple(rows), n=cfg.n, nu_hz=cfg.nu_hz)


def distance_at_rate(curve: DistanceCurve, target_bps: float = 0.1) -> float:
    """Distance where the curve first falls below ``target_bps`` (log-interpolated).

    Returns NaN when the curve never crosses the target on its grid.
    """
    rows = curve.rows
    for left, right in zip(rows[:-1], rows[1:]):
        if left.rate_bps >= target_bps > right.rate_bps:
            if right.rate_bps > 0.0:
                frac = (np.log(left.rate_bps) - np.log(target_bps)) / (np.log(left.rate_bps) - np.log(right.rate_bps))
            else:
                frac = (left.rate_bps - target_bps) / left.rate_bps
            return float(left.distance_km + frac * (right.distance_km - left.distance_km))
    logger.warning("curve for n=%.3g never crosses %.3g bit/s", curve.n, target_bps)
    return float("nan")


def scan_big_t(params: PhysicalParams, overlaps: OverlapModel, settings: SettingsVector,
               cfg: FiniteKeyConfig, candidates: Sequence[float], distance_km: float = 0.0,
               method: RateMethod = RateMethod.SDP, m: int = 8, level: int = 2, extras: bool = True,
               y_set: Sequence[int] = DEFAULT_Y_SET, key: Tuple[int, int] = KEY_INPUTS) -> DistanceRow:
    """Row with the highest rate per second over the tap transmittances ``candidates``.

    The per-round rate is re-evaluated for every candidate, since a larger T
    raises P_h but lets more multi-photon events reach the CHS. Ties go to
    the smaller T.
    """
    kwargs = dict(method=method, m=m, level=level, extras=extras, y_set=y_set, key=key)
    best: Optional[DistanceRow] = None
    for big_t in sorted(float(t) for t in candidates):
        try:
            row = _row(params, overlaps, replace(settings, big_t=big_t), distance_km, cfg, None, kwargs)
        except DiqkdError as exc:
            logger.debug("T=%.4g skipped: %s", big_t, exc.message)
            continue
        logger.debug("T=%.4g P_h=%.4g rate=%.4g bit/s", big_t, row.p_herald, row.rate_bps)
        if best is None or row.rate_bps > best.rate_bps:
            best = row
    if best is None:
        raise DiqkdError("no tap transmittance could be evaluated", ErrorCode.INVALID_PARAMETER)
    logger.info("best T=%.4g at L=%.1f km (%.4g bit/s)", best.big_t, distance_km, best.rate_bps)
    return best


@dataclass(frozen=True)
class PenaltyTarget:
    """A run that should reach exactly the target rate per second.

    Attributes:
        rate: Asymptotic key rate per round at the target distance.
        p_herald: Heralding probability at the target distance.
        n: Round count of the run.
    """
    rate: float
    p_herald: float
    n: float


def penalty_target(params: PhysicalParams, overlaps: OverlapModel, settings: SettingsVector,
                   point: RatePoint, distance_km: float, n: float,
                   l0_km: float = DEFAULT_L0_KM) -> PenaltyTarget:
    """Target built from the heralding probability of ``settings`` at ``distance_km``."""
    hardware = replace(params, eta_t=transmission_efficiency(distance_km, l0_km))
    return PenaltyTarget(rate=point.rate, p_herald=heralding_probability(settings.apply(hardware), overlaps), n=n)


def calibrate_overhead(points: Sequence[Tuple[float, float]], n_threshold: float,
                       cfg: FiniteKeyConfig = FiniteKeyConfig()) -> FiniteKeyConfig:
    """Set c3 so that no key is left at ``n_threshold`` rounds for any point.

    ``points`` are ``(asymptotic rate, P_h)`` pairs; the returned config has
    l(n_threshold) = 0 exactly for the most favourable one.
    """
    run = replace(cfg, n=n_threshold)
    needed = 0.0
    for rate, p_herald in points:
        n_succ = successful_rounds(p_herald, run)
        needed = max(needed, n_succ * rate - np.sqrt(n_succ) * cfg.penalty)
    c3 = needed / np.log2(1.0 / cfg.eps_complete)
    logger.info("calibrated c3=%.6g for no key at n=%.3g", c3, n_threshold)
    return replace(cfg, c3=float(c3))


def calibrate_penalty(targets: Sequence[PenaltyTarget], cfg: FiniteKeyConfig = FiniteKeyConfig(),
                      target_bps: float = 0.1, n_threshold: Optional[float] = 1e7) -> FiniteKeyConfig:
    """Fit c1 and c3 so that every target run lands on ``target_bps``.

    Each target asks for l(n) = target_bps tau, which is linear in k and
    delta; the system is solved in the non-negative least-squares sense, so
    two targets are met exactly when a non-negative solution exists. c2 is
    kept. When ``n_threshold`` is set, c3 is raised where needed so that no
    target rate yields a key at that round count.

    Args:
        targets: Runs with their asymptotic rate, P_h and round count.
        cfg: Config supplying the semantics, clock, epsilons and c2.
        target_bps: Rate every target run should reach.
        n_threshold: Round count that must leave no key, or None.

    Raises:
        DiqkdError: INVALID_PARAMETER without targets, or for a target that
            never heralds.

    Examples:
        >>> targets = [PenaltyTarget(0.21, 1e-3, 1e8), PenaltyTarget(0.1101, 1e-3, 1e10)]
        >>> base = FiniteKeyConfig(nu_hz=1e6, eps_sound=0.5, c2=0.0)
        >>> cfg = calibrate_penalty(targets, base, target_bps=100.0, n_threshold=None)
        >>> round(cfg.c1), round(float(cfg.overhead))
        (1000, 1000000)
    """
    if not targets:
        raise DiqkdError("at least one penalty target is required", ErrorCode.INVALID_PARAMETER)
    rows, rhs = [], []
    for target in targets:
        run = replace(cfg, n=target.n)
        n_succ = successful_rounds(target.p_herald, run)
        tau = protocol_duration(target.p_herald, run)
        if n_succ <= 0.0 or not np.isfinite(tau):
            raise DiqkdError(f"target with P_h={target.p_herald} never heralds", ErrorCode.INVALID_PARAMETER)
        rows.append([1.0 / np.sqrt(n_succ), 1.0 / n_succ])
        rhs.append(target.rate - cfg.c2 / np.sqrt(n_succ) - target_bps * tau / n_succ)
    design = np.array(rows)
    scale = np.linalg.norm(design, axis=0)
    solution, residual = nnls(design / scale, np.array(rhs))
    k_extra, delta = solution / scale
    if residual > 1e-9:
        logger.warning("penalty targets met only approximately (residual %.3g)", residual)
    out = replace(cfg, c1=float(k_extra / np.sqrt(np.log2(1.0 / cfg.eps_sound))),
                  c3=float(delta / np.log2(1.0 / cfg.eps_complete)))
    if n_threshold is not None:
        guard = calibrate_overhead([(t.rate, t.p_herald) for t in targets], n_threshold, out)
        if guard.c3 > out.c3:
            logger.info("raised c3 from %.6g to %.6g to keep n=%.3g keyless", out.c3, guard.c3, n_threshold)
            out = guard
    logger.info("calibrated c1=%.6g c3=%.6g (k=%.6g bits, delta=%.6g bits)", out.c1, out.c3,
                out.penalty, out.overhead)
    return out
