import numpy as np
import pytest

from diqkdsps.constants import Q_SEARCH_MAX, TSIRELSON
from diqkdsps.entropy import (
    RatePoint,
    analytic_rate_point,
    binary_entropy,
    chsh_analytic_rate,
    chsh_entropy_bound,
    chsh_preprocessing_rate,
    conditional_entropy_ab,
    optimize_preprocessing,
    preprocessing_gain,
    shannon_entropy,
)
from diqkdsps.enums import ErrorCode, RateMethod
from diqkdsps.exceptions import DiqkdError
from tests.conftest import behavior_from_correlators


def werner(v):
    r = 1.0 / np.sqrt(2.0)
    return behavior_from_correlators([[v * r, v * r, v], [v * r, -v * r, 0.0]])


class TestEntropies:
    """Binary, Shannon and conditional entropies."""

    def test_binary_entropy_values(self):
        """h(0) = h(1) = 0 and h(1/2) = 1."""
        assert binary_entropy(0.0) == 0.0
        assert binary_entropy(1.0) == 0.0
        assert binary_entropy(0.5) == pytest.approx(1.0)
        assert binary_entropy(0.11) == pytest.approx(binary_entropy(0.89))

    def test_binary_entropy_domain(self):
        """Arguments outside [0, 1] are rejected."""
        with pytest.raises(DiqkdError) as exc_info:
            binary_entropy(1.5)
        assert exc_info.value.code == ErrorCode.INVALID_PARAMETER

    def test_shannon_entropy(self):
        """Four equally likely outcomes carry two bits."""
        assert shannon_entropy(np.full(4, 0.25)) == pytest.approx(2.0)

    def test_conditional_entropy_perfect_correlation(self, tsirelson_behavior):
        """A perfectly correlated key cell leaves no uncertainty."""
        assert conditional_entropy_ab(tsirelson_behavior) == pytest.approx(0.0, abs=1e-12)

    def test_conditional_entropy_uniform(self, uniform_behavior):
        """Independent uniform bits leave one bit."""
        assert conditional_entropy_ab(uniform_behavior) == pytest.approx(1.0)

    def test_conditional_entropy_with_flip(self, tsirelson_behavior):
        """Flipping with probability q leaves h(q)."""
        assert conditional_entropy_ab(tsirelson_behavior, q=0.1) == pytest.approx(binary_entropy(0.1))


class TestChshBounds:
    """Closed-form CHSH entropy bounds."""

    def test_end_points(self):
        """No entropy at S = 2, one bit at Tsirelson."""
        assert chsh_entropy_bound(2.0) == pytest.approx(0.0)
        assert chsh_entropy_bound(TSIRELSON) == pytest.approx(1.0)
        assert chsh_entropy_bound(1.5) == pytest.approx(0.0)

    def test_monotone(self):
        """The bound grows with S."""
        values = [chsh_entropy_bound(s) for s in np.linspace(2.0, TSIRELSON, 20)]
        assert all(b >= a for a, b in zip(values, values[1:]))

    def test_above_tsirelson_rejected(self):
        """Scores beyond the quantum bound are a domain error."""
        with pytest.raises(DiqkdError) as exc_info:
            chsh_entropy_bound(3.0)
        assert exc_info.value.code == ErrorCode.INVALID_PARAMETER

    def test_preprocessing_gain(self):
        """No gain without flipping; a fair coin hides the bit entirely."""
        assert preprocessing_gain(2.5, 0.0) == pytest.approx(0.0)
        assert preprocessing_gain(2.0, 0.5) == pytest.approx(1.0)
        assert preprocessing_gain(TSIRELSON, 0.2) == pytest.approx(0.0, abs=1e-12)

    def test_rates(self):
        """Rates subtract H(A|B)."""
        assert chsh_analytic_rate(TSIRELSON, 0.0) == pytest.approx(1.0)
        s = 2.6
        assert chsh_preprocessing_rate(s, 0.3, 0.0) == pytest.approx(chsh_analytic_rate(s, 0.3))


class TestPreprocessingOptimization:
    """Choice of the flip probability."""

    def test_never_worse_than_plain(self):
        """Optimized preprocessing is at least the q = 0 rate."""
        for v in (0.8, 0.9, 0.95, 0.99):
            b = werner(v)
            plain = analytic_rate_point(b)
            best = optimize_preprocessing(b)
            assert best.rate >= plain.rate - 1e-12
            assert 0.0 <= best.q <= 0.5
            assert best.method == RateMethod.ANALYTIC_PREPROCESSING

    def test_helps_for_noisy_data(self):
        """Just below the plain threshold a positive q restores a positive rate."""
        b = werner(0.85)
        plain = analytic_rate_point(b)
        best = analytic_rate_point(b, preprocessing=True)
        assert plain.rate < 0.0
        assert best.q > 0.0
        assert best.rate > 0.0

    def test_interior_optimum(self):
        """The search settles on the interior maximum, not on the q -> 1/2 limit where the rate vanishes."""
        best = optimize_preprocessing(werner(0.85))
        assert 0.03 < best.q < 0.25
        assert best.rate > 0.01

    def test_q_stays_below_half(self):
        """Even without any key q is never pushed onto 1/2."""
        best = optimize_preprocessing(werner(0.5))
        assert best.q <= Q_SEARCH_MAX
        assert best.rate <= 0.0 or best.rate > 1e-6

    def test_rate_point(self):
        """rate = h_ae - h_ab."""
        point = RatePoint(h_ae=0.7, h_ab=0.2, method=RateMethod.SDP)
        assert point.rate == pytest.approx(0.5)
