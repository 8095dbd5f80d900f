from dataclasses import replace

import numpy as np
import pytest

from diqkdsps.analysis import max_chsh_over_settings
from diqkdsps.entropy import RatePoint
from diqkdsps.enums import ErrorCode, RateMethod
from diqkdsps.exceptions import DiqkdError
from diqkdsps.finite_key import (
    DistanceCurve,
    DistanceRow,
    FiniteKeyConfig,
    PenaltyTarget,
    calibrate_overhead,
    calibrate_penalty,
    distance_at_rate,
    distance_curve,
    eat_key_length,
    penalty_target,
    protocol_duration,
    rate_per_second,
    scan_big_t,
    successful_rounds,
)
from diqkdsps.optimizer import SettingsVector, evaluate_rate
from diqkdsps.photonic import (
    PhysicalParams,
    heralding_probability,
    local_efficiency_params,
    overlaps_from_visibility,
    transmission_efficiency,
)

POINT = RatePoint(h_ae=0.9, h_ab=0.1, method=RateMethod.ANALYTIC)
TAPPED = PhysicalParams(big_t=0.1)
SETTINGS = SettingsVector(0.5, (0.0, np.pi / 2), (np.pi / 4, -np.pi / 4, 0.0))
FITTED_TARGETS = [PenaltyTarget(0.21, 1e-3, 1e8), PenaltyTarget(0.1101, 1e-3, 1e10)]
FITTED_BASE = FiniteKeyConfig(nu_hz=1e6, eps_sound=0.5, c2=0.0)
FAR_KM = np.arange(100.0, 352.0, 2.0)


def curve_of(rates, distances=None):
    distances = distances or [10.0 * i for i in range(len(rates))]
    rows = tuple(DistanceRow(d, 0.01, 1e-3, 1e10, r * 1e10 / 7.5e7, r) for d, r in zip(distances, rates))
    return DistanceCurve(rows=rows, n=1e10, nu_hz=7.5e7)


def bits_per_second(rate, p_herald, n, cfg):
    run = replace(cfg, n=n)
    return eat_key_length(rate, 0.0, successful_rounds(p_herald, run), run) / protocol_duration(p_herald, run)


def ideal_source():
    params = PhysicalParams(big_t=0.0622)
    return params, overlaps_from_visibility(1.0, 1.0)


def realistic_source():
    params = local_efficiency_params(PhysicalParams(big_t=0.0106, g2=0.01), 0.957)
    return params, overlaps_from_visibility(0.975, 0.975, extra_photon=True)


def key_settings(params, overlaps, distance_km):
    """CHSH-optimal angles with Bob's key input aligned to Alice's A0."""
    hardware = replace(params, eta_t=transmission_efficiency(distance_km))
    optimum = max_chsh_over_settings(hardware, overlaps)
    s = optimum.settings
    return SettingsVector(optimum.small_t, s.theta_a, (s.theta_b[0], s.theta_b[1], s.theta_a[0]))


def sdp_point(params, overlaps, settings, distance_km, **kwargs):
    hardware = replace(params, eta_t=transmission_efficiency(distance_km))
    return evaluate_rate(hardware, overlaps, settings, RateMethod.SDP, **kwargs)


class TestFiniteKeyConfig:
    """Penalty constants and validation."""

    def test_penalty_and_overhead(self):
        """k = c1 sqrt(log2 1/eps_s) + c2 and delta = c3 log2 1/eps_c."""
        cfg = FiniteKeyConfig(eps_sound=0.25, eps_complete=0.125, c1=2.0, c2=1.0, c3=3.0)
        assert cfg.penalty == pytest.approx(2.0 * np.sqrt(2.0) + 1.0)
        assert cfg.overhead == pytest.approx(9.0)

    @pytest.mark.parametrize("kwargs", [{"n": 0.0}, {"nu_hz": -1.0}, {"eps_sound": 1.0}, {"l0_km": 0.0},
                                        {"c3": -1.0}, {"rounds_semantics": "pulses"}])
    def test_invalid(self, kwargs):
        """Every out-of-range field is rejected."""
        with pytest.raises(DiqkdError) as exc_info:
            FiniteKeyConfig(**kwargs)
        assert exc_info.value.code == ErrorCode.INVALID_PARAMETER

    def test_heralded_is_default(self):
        """n counts heralded rounds unless configured otherwise."""
        assert FiniteKeyConfig().rounds_semantics == "heralded"

    def test_attempt_semantics(self):
        """n counts emission attempts: n P_h successes in n / nu seconds."""
        cfg = FiniteKeyConfig(n=1e6, nu_hz=1e6, rounds_semantics="attempts")
        assert successful_rounds(1e-3, cfg) == pytest.approx(1e3)
        assert protocol_duration(1e-3, cfg) == pytest.approx(1.0)

    def test_heralded_semantics(self):
        """n counts heralded rounds: it takes n / (nu P_h) seconds to collect them."""
        cfg = FiniteKeyConfig(n=1e6, nu_hz=1e6, rounds_semantics="heralded")
        assert successful_rounds(1e-3, cfg) == pytest.approx(1e6)
        assert protocol_duration(1e-3, cfg) == pytest.approx(1e3)
        assert protocol_duration(0.0, cfg) == np.inf


class TestDefaultPenalty:
    """Default constants against the round counts that matter."""

    @pytest.mark.parametrize("n", [1e5, 1e6, 1e7])
    def test_no_key_up_to_ten_million_rounds(self, n):
        """Even a perfect bit per round is eaten by the penalty."""
        assert eat_key_length(1.0, 0.0, n, FiniteKeyConfig(n=n)) == 0.0

    def test_nearly_asymptotic_at_1e12(self):
        """The penalty costs well under a percent of a 0.1 bit rate."""
        cfg = FiniteKeyConfig(n=1e12)
        assert eat_key_length(0.1, 0.0, 1e12, cfg) / 1e12 == pytest.approx(0.1, rel=1e-2)

    def test_key_at_tens_of_millions(self):
        """A realistic rate keeps a key at 6e7 rounds."""
        assert eat_key_length(0.5, 0.0, 6e7, FiniteKeyConfig(n=6e7)) > 0.0


class TestKeyLength:
    """l = n h - sqrt(n) k - n H(A|B) - delta."""

    def test_value(self):
        """Hand-computed length with k = 1 and no overhead."""
        cfg = FiniteKeyConfig(c1=0.0, c2=1.0, c3=0.0)
        assert eat_key_length(0.5, 0.1, 100.0, cfg) == pytest.approx(30.0)

    def test_never_negative(self):
        """A penalty larger than the asymptotic length clamps to zero."""
        assert eat_key_length(0.2, 0.19, 1e4, FiniteKeyConfig()) == 0.0

    def test_grows_with_rounds(self):
        """More rounds, longer key."""
        cfg = FiniteKeyConfig()
        assert eat_key_length(0.8, 0.1, 1e10, cfg) > eat_key_length(0.8, 0.1, 1e9, cfg) > 0.0

    @pytest.mark.parametrize("h_bound, n_succ", [(1.5, 10.0), (float("nan"), 10.0), (0.5, -1.0)])
    def test_invalid(self, h_bound, n_succ):
        """Entropy outside [0, 1] or a negative round count."""
        with pytest.raises(DiqkdError):
            eat_key_length(h_bound, 0.0, n_succ, FiniteKeyConfig())


class TestDistanceCurve:
    """Rate per second versus fiber length."""

    def test_sorted_and_non_increasing(self, ideal_overlaps):
        """Rows come back sorted, with P_h and the rate falling along the fiber."""
        curve = distance_curve(TAPPED, ideal_overlaps, SETTINGS, FiniteKeyConfig(), [40.0, 0.0, 100.0, 20.0],
                               point=POINT)
        distances = [row.distance_km for row in curve.rows]
        assert distances == [0.0, 20.0, 40.0, 100.0]
        rates = [row.rate_bps for row in curve.rows]
        assert all(a >= b for a, b in zip(rates, rates[1:]))
        heralds = [row.p_herald for row in curve.rows]
        assert all(a > b for a, b in zip(heralds, heralds[1:]))
        assert rates[0] > 0.0

    def test_single_distance_matches_curve(self, ideal_overlaps):
        """rate_per_second is one row of distance_curve."""
        cfg = FiniteKeyConfig()
        curve = distance_curve(TAPPED, ideal_overlaps, SETTINGS, cfg, [20.0], point=POINT)
        assert rate_per_second(TAPPED, ideal_overlaps, SETTINGS, 20.0, cfg, point=POINT) == \
            pytest.approx(curve.rows[0].rate_bps)

    def test_more_rounds_help(self, ideal_overlaps):
        """At fixed distance a longer run amortizes the finite-size penalty."""
        short = rate_per_second(TAPPED, ideal_overlaps, SETTINGS, 20.0, FiniteKeyConfig(n=1e8), point=POINT)
        long = rate_per_second(TAPPED, ideal_overlaps, SETTINGS, 20.0, FiniteKeyConfig(n=1e10), point=POINT)
        assert long >= short

    def test_heralded_rate_scales_with_herald_probability(self, ideal_overlaps):
        """With n heralded rounds the rate per second is nu P_h l / n."""
        cfg = FiniteKeyConfig(n=1e12)
        row = distance_curve(TAPPED, ideal_overlaps, SETTINGS, cfg, [30.0], point=POINT).rows[0]
        expected = cfg.nu_hz * row.p_herald * eat_key_length(0.9, 0.1, 1e12, cfg) / 1e12
        assert row.rate_bps == pytest.approx(expected)

    def test_duration(self):
        """n / nu seconds of source clock."""
        assert curve_of([1.0]).duration_s == pytest.approx(1e10 / 7.5e7)


class TestDistanceAtRate:
    """Reach at a target rate."""

    def test_log_interpolation(self):
        """Halfway in log-rate between 1 and 0.01 bit/s."""
        assert distance_at_rate(curve_of([1.0, 0.01]), 0.1) == pytest.approx(5.0)

    def test_drop_to_zero(self):
        """Linear interpolation when the right end has no key."""
        assert distance_at_rate(curve_of([0.2, 0.0]), 0.1) == pytest.approx(5.0)

    def test_never_crosses(self):
        """A curve that stays above the target has no reach on its grid."""
        assert np.isnan(distance_at_rate(curve_of([5.0, 2.0, 1.0]), 0.1))


class TestScanBigT:
    """Tap transmittance picked by rate per second."""

    def test_best_candidate(self, ideal_overlaps):
        """The returned row beats every other candidate."""
        cfg = FiniteKeyConfig(n=1e12)
        candidates = [1e-3, 1e-2, 0.1]
        best = scan_big_t(TAPPED, ideal_overlaps, SETTINGS, cfg, candidates, distance_km=50.0,
                          method=RateMethod.ANALYTIC)
        assert best.big_t in candidates
        for big_t in candidates:
            rate = rate_per_second(TAPPED, ideal_overlaps, replace(SETTINGS, big_t=big_t), 50.0, cfg,
                                   method=RateMethod.ANALYTIC)
            assert best.rate_bps >= rate

    def test_invalid_candidates_skipped(self, ideal_overlaps):
        """A T outside (0, 1) is skipped, not fatal."""
        best = scan_big_t(TAPPED, ideal_overlaps, SETTINGS, FiniteKeyConfig(n=1e12), [0.0, 0.05],
                          method=RateMethod.ANALYTIC)
        assert best.big_t == 0.05

    def test_nothing_to_evaluate(self, ideal_overlaps):
        """Every candidate outside (0, 1)."""
        with pytest.raises(DiqkdError) as exc_info:
            scan_big_t(TAPPED, ideal_overlaps, SETTINGS, FiniteKeyConfig(), [0.0, 1.5], method=RateMethod.ANALYTIC)
        assert exc_info.value.code == ErrorCode.INVALID_PARAMETER


class TestCalibrateOverhead:
    """Overhead chosen so that a threshold round count yields no key."""

    def test_no_key_at_threshold(self):
        """Exactly zero length at the threshold, a key ten times later."""
        cfg = calibrate_overhead([(0.5, 1.0)], 1e9)
        assert eat_key_length(0.6, 0.1, 1e9, cfg) == pytest.approx(0.0, abs=1e-3)
        assert eat_key_length(0.6, 0.1, 1e10, cfg) > 0.0

    def test_most_favourable_point_wins(self):
        """The largest asymptotic rate sets the overhead."""
        cfg = calibrate_overhead([(0.1, 1.0), (0.5, 1.0)], 1e9)
        assert cfg.c3 == pytest.approx(calibrate_overhead([(0.5, 1.0)], 1e9).c3)


class TestCalibratePenalty:
    """c1 and c3 fitted to reach targets."""

    def test_known_solution(self):
        """Targets built from k = 1000 and delta = 1e6 give those constants back."""
        cfg = calibrate_penalty(FITTED_TARGETS, FITTED_BASE, target_bps=100.0, n_threshold=None)
        assert cfg.c1 == pytest.approx(1000.0, rel=1e-6)
        assert cfg.overhead == pytest.approx(1e6, rel=1e-6)
        assert cfg.c2 == 0.0

    def test_targets_land_on_rate(self):
        """Both fitted runs reach exactly the target rate per second."""
        cfg = calibrate_penalty(FITTED_TARGETS, FITTED_BASE, target_bps=100.0, n_threshold=None)
        for target in FITTED_TARGETS:
            assert bits_per_second(target.rate, target.p_herald, target.n, cfg) == pytest.approx(100.0, rel=1e-5)

    def test_threshold_guard_raises_overhead(self):
        """A threshold the fit would leave keyed pushes delta up, never k."""
        fitted = calibrate_penalty(FITTED_TARGETS, FITTED_BASE, target_bps=100.0, n_threshold=None)
        guarded = calibrate_penalty(FITTED_TARGETS, FITTED_BASE, target_bps=100.0, n_threshold=1e9)
        assert guarded.c1 == pytest.approx(fitted.c1)
        assert guarded.c3 > fitted.c3
        assert eat_key_length(0.21, 0.0, 1e9, guarded) == pytest.approx(0.0, abs=1e-2)

    def test_threshold_already_keyless(self):
        """The fit leaves n = 1e7 without key, so the guard changes nothing."""
        fitted = calibrate_penalty(FITTED_TARGETS, FITTED_BASE, target_bps=100.0, n_threshold=None)
        guarded = calibrate_penalty(FITTED_TARGETS, FITTED_BASE, target_bps=100.0, n_threshold=1e7)
        assert guarded.c3 == pytest.approx(fitted.c3)

    def test_requires_targets(self):
        """Fitting needs at least one target."""
        with pytest.raises(DiqkdError) as exc_info:
            calibrate_penalty([])
        assert exc_info.value.code == ErrorCode.INVALID_PARAMETER

    def test_target_that_never_heralds(self):
        """P_h = 0 gives an infinite run time."""
        with pytest.raises(DiqkdError):
            calibrate_penalty([PenaltyTarget(0.2, 0.0, 1e8)])

    def test_penalty_target_uses_channel(self, ideal_overlaps):
        """P_h of the target is the one at the target distance."""
        target = penalty_target(TAPPED, ideal_overlaps, SETTINGS, POINT, 100.0, 3e7)
        hardware = replace(TAPPED, eta_t=transmission_efficiency(100.0))
        assert target.p_herald == pytest.approx(heralding_probability(SETTINGS.apply(hardware), ideal_overlaps))
        assert target.rate == pytest.approx(0.8)
        assert target.n == 3e7


@pytest.mark.slow
class TestReach:
    """Reach at 0.1 bit/s for the ideal and the realistic source."""

    @pytest.fixture(scope="class")
    def sources(self):
        out = {}
        for name, (params, overlaps), far_km in (("ideal", ideal_source(), 250.0),
                                                 ("realistic", realistic_source(), 170.0)):
            settings = key_settings(params, overlaps, far_km)
            point = sdp_point(params, overlaps, settings, far_km)
            out[name] = (params, overlaps, settings, point)
        return out

    @pytest.fixture(scope="class")
    def calibrated(self, sources):
        targets = [penalty_target(*sources["ideal"], 230.0, 3e7),
                   penalty_target(*sources["realistic"], 144.0, 6e7)]
        return calibrate_penalty(targets)

    def reach(self, source, cfg):
        params, overlaps, settings, point = source
        curve = distance_curve(params, overlaps, settings, cfg, FAR_KM, point=point)
        return distance_at_rate(curve, 0.1)

    @pytest.mark.parametrize("name, km", [("ideal", 292.0), ("realistic", 200.0)])
    def test_long_run_reach(self, sources, calibrated, name, km):
        """n = 1e12 is close to the asymptotic reach."""
        assert self.reach(sources[name], replace(calibrated, n=1e12)) == pytest.approx(km, abs=10.0)

    @pytest.mark.parametrize("name, n, km", [("ideal", 3e7, 230.0), ("realistic", 6e7, 144.0)])
    def test_short_run_reach(self, sources, calibrated, name, n, km):
        """The fitted runs sit on their target distances."""
        assert self.reach(sources[name], replace(calibrated, n=n)) == pytest.approx(km, abs=10.0)

    @pytest.mark.parametrize("cfg_name", ["calibrated", "default"])
    @pytest.mark.parametrize("name", ["ideal", "realistic"])
    def test_no_key_at_ten_million(self, sources, calibrated, cfg_name, name):
        """No distance yields a key at n = 1e7."""
        params, overlaps, settings, point = sources[name]
        cfg = calibrated if cfg_name == "calibrated" else FiniteKeyConfig()
        curve = distance_curve(params, overlaps, settings, replace(cfg, n=1e7), [0.0, 50.0, 150.0], point=point)
        assert all(row.rate_bps == 0.0 for row in curve.rows)

    @pytest.mark.parametrize("name, km", [("ideal", 292.0), ("realistic", 200.0)])
    def test_default_constants_reach(self, sources, name, km):
        """The shipped constants reproduce the long-run reach."""
        assert self.reach(sources[name], FiniteKeyConfig(n=1e12)) == pytest.approx(km, abs=10.0)


@pytest.mark.slow
class TestOptimalTap:
    """Best T near the reach, with the per-round rate re-evaluated per T."""

    @pytest.mark.parametrize("source, far_km, candidates, lo, hi", [
        (ideal_source, 250.0, [0.02, 0.04, 0.06, 0.08, 0.12, 0.2], 0.0422, 0.0822),
        (realistic_source, 170.0, [0.003, 0.006, 0.01, 0.015, 0.03, 0.06], 0.0006, 0.0206),
    ])
    def test_optimal_tap(self, source, far_km, candidates, lo, hi):
        """The tap that maximizes the rate per second near the reach."""
        params, overlaps = source()
        settings = key_settings(params, overlaps, far_km)
        best = scan_big_t(params, overlaps, settings, FiniteKeyConfig(n=1e12), candidates, distance_km=far_km,
                          m=4, extras=False)
        assert lo <= best.big_t <= hi
