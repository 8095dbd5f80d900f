import numpy as np
import pytest

from diqkdsps.analysis import (
    apply_preprocessing,
    chsh_score,
    correlator,
    is_nonlocal_2222,
    lp_local_membership,
    max_chsh_over_settings,
)
from diqkdsps.constants import TSIRELSON
from diqkdsps.enums import ErrorCode
from diqkdsps.exceptions import DiqkdError
from diqkdsps.photonic import PhysicalParams, default_overlaps, local_efficiency_params
from tests.conftest import behavior_from_correlators


class TestChsh:
    """Correlators and the CHSH score."""

    def test_tsirelson_point(self, tsirelson_behavior):
        """The optimal qubit strategy reaches 2 sqrt(2)."""
        report = chsh_score(tsirelson_behavior)
        assert report.score == pytest.approx(TSIRELSON)
        assert report.pairing == (0, 1, 0, 1)
        assert set(report.correlators) == {(0, 0), (0, 1), (1, 0), (1, 1)}

    def test_correlator_of_key_cell(self, tsirelson_behavior):
        """A0 and B2 are perfectly correlated."""
        assert correlator(tsirelson_behavior, 0, 2) == pytest.approx(1.0)

    def test_correlator_input_range(self, tsirelson_behavior):
        """x in {0, 1}, y in {0, 1, 2}."""
        with pytest.raises(DiqkdError) as exc_info:
            correlator(tsirelson_behavior, 2, 0)
        assert exc_info.value.code == ErrorCode.INVALID_PARAMETER


class TestLocality:
    """The 2222 local-polytope test and its LP cross-check."""

    def test_nonlocal(self, tsirelson_behavior):
        """The Tsirelson behavior violates a CHSH facet."""
        assert is_nonlocal_2222(tsirelson_behavior)
        assert not lp_local_membership(tsirelson_behavior)

    def test_uniform_is_local(self, uniform_behavior):
        """White noise sits inside the local polytope."""
        assert not is_nonlocal_2222(uniform_behavior)
        assert lp_local_membership(uniform_behavior)

    def test_relabeled_violation_detected(self):
        """A violation of a relabeled facet (minus sign moved) is found too."""
        r = 1.0 / np.sqrt(2.0)
        b = behavior_from_correlators([[-r, r, 0.0], [r, r, 0.0]])
        assert chsh_score(b).score < 2.0
        assert is_nonlocal_2222(b)
        assert not lp_local_membership(b)

    def test_methods_agree_on_noisy_behaviors(self):
        """Facet test and LP agree across the Werner family."""
        r = 1.0 / np.sqrt(2.0)
        for v in np.linspace(0.5, 1.0, 11):
            b = behavior_from_correlators([[v * r, v * r, v], [v * r, -v * r, 0.0]])
            assert is_nonlocal_2222(b) == (not lp_local_membership(b))


class TestPreprocessing:
    """Noisy preprocessing of Alice's key bit."""

    def test_only_key_cell_changes(self, tsirelson_behavior):
        """CHSH cells are untouched, the key cell gets flipped with probability q."""
        flipped = apply_preprocessing(tsirelson_behavior, 0.1)
        mask = np.zeros((2, 3), dtype=bool)
        mask[0, 2] = True
        for x in range(2):
            for y in range(3):
                same = np.allclose(flipped.p[:, :, x, y], tsirelson_behavior.p[:, :, x, y])
                assert same != mask[x, y]
        assert correlator(flipped, 0, 2) == pytest.approx(0.8)

    def test_q_range(self, tsirelson_behavior):
        """q beyond 1/2 is rejected."""
        with pytest.raises(DiqkdError) as exc_info:
            apply_preprocessing(tsirelson_behavior, 0.6)
        assert exc_info.value.code == ErrorCode.INVALID_PARAMETER


class TestMaxChsh:
    """CHSH maximization over the settings of the photonic setup."""

    def test_ideal_setup_violates(self):
        """Perfect detectors and photons give a clear violation."""
        params = PhysicalParams(big_t=1e-3)
        optimum = max_chsh_over_settings(params, default_overlaps(params), seeds=4,
                                         rng=np.random.default_rng(0))
        assert optimum.report.score > 2.5
        assert 0.0 <= optimum.small_t <= 1.0

    @pytest.mark.slow
    def test_detection_threshold(self):
        """S crosses 2 near a local efficiency of two thirds."""
        base = PhysicalParams(big_t=1e-3)

        def score(eta_l):
            params = local_efficiency_params(base, eta_l)
            return max_chsh_over_settings(params, default_overlaps(params), seeds=8,
                                          rng=np.random.default_rng(1)).report.score

        assert score(0.69) > 2.0
        assert score(0.65) < 2.0 + 1e-6
