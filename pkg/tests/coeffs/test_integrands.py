"""Tests for the perturbation coefficient integrands."""

import math

import numpy as np
import pytest

from fiber_nlc.coeffs.integrands import (
    TERM2_RATIO,
    check_branch_continuity,
    fo_compensated_integrand,
    fo_integrand,
    loss_profile,
    normalized_distance,
    term1_integrand,
    term2_integrand,
)
from fiber_nlc.core.errors import NumericDomainError


class TestIntegrands:
    @pytest.mark.parametrize("integrand", [term1_integrand, term2_integrand])
    @pytest.mark.parametrize("m, n, k", [(1, 2, 0), (-2, 1, 1), (3, 0, -1)])
    def test_symmetric_in_m_and_n(self, integrand, m, n, k, pulse, short_link):
        z, s = 100e3, 30e3
        assert integrand(z, s, (m, n, k), pulse, short_link) == pytest.approx(
            integrand(z, s, (n, m, k), pulse, short_link), rel=1e-12
        )

    @pytest.mark.parametrize("m, n", [(1, 2), (-1, 3)])
    def test_fo_symmetric(self, m, n, pulse, short_link):
        assert fo_integrand(20e3, m, n, pulse, short_link, 90e3) == pytest.approx(
            fo_integrand(20e3, n, m, pulse, short_link, 90e3), rel=1e-12
        )
        assert fo_compensated_integrand(50e3, m, n, pulse, short_link) == pytest.approx(
            fo_compensated_integrand(50e3, -m, -n, pulse, short_link), rel=1e-12
        )

    @pytest.mark.parametrize("m, n, k", [(0, 0, 0), (1, 0, 0), (1, -1, 1)])
    def test_closed_form_at_launch(self, m, n, k, pulse, short_link):
        """Without accumulated dispersion the kernels reduce to Gaussian overlaps."""
        r2 = (pulse.T / pulse.tau) ** 2
        overlap = math.exp(-r2 * (k**2 + m**2 + m * n + n**2))

        assert term1_integrand(0.0, 0.0, (m, n, k), pulse, short_link) == pytest.approx(-overlap)
        assert term2_integrand(0.0, 0.0, (m, n, k), pulse, short_link) == pytest.approx(TERM2_RATIO * overlap)

    @pytest.mark.parametrize("m, n", [(0, 0), (1, 1), (2, -1)])
    def test_fo_closed_form_at_launch(self, m, n, pulse, short_link):
        r2 = (pulse.T / pulse.tau) ** 2
        expected = 1j * math.exp(-r2 * (m**2 + m * n + n**2))

        assert fo_compensated_integrand(0.0, m, n, pulse, short_link) == pytest.approx(expected)
        assert fo_integrand(0.0, m, n, pulse, short_link, 0.0) == pytest.approx(expected)

    def test_requires_ordered_distances(self, pulse, short_link):
        with pytest.raises(NumericDomainError) as excinfo:
            term1_integrand(10e3, 20e3, (0, 0, 0), pulse, short_link)
        assert excinfo.value.details == {"z": 10e3, "s": 20e3}

        with pytest.raises(NumericDomainError):
            fo_compensated_integrand(-1.0, 0, 0, pulse, short_link)


class TestProfiles:
    def test_normalized_distance(self, pulse, short_link):
        assert normalized_distance(80e3, pulse, short_link) == pytest.approx(
            short_link.beta2 * 80e3 / pulse.tau**2
        )

    def test_loss_profile(self, short_link):
        """The profile restarts at inner span boundaries and takes its left limit at the link end."""
        end_of_span = math.exp(-short_link.alpha * short_link.span_length)
        profile = loss_profile(np.array([0.0, 80e3, 120e3, 160e3]), short_link)

        np.testing.assert_allclose(profile, [1.0, 1.0, math.exp(-short_link.alpha * 40e3), end_of_span])


class TestBranchContinuity:
    def test_smooth_roots_pass(self):
        check_branch_continuity((np.exp(1j * np.linspace(0, 1, 20)),))

    def test_sign_flip_detected(self):
        roots = np.array([[1.0, 1.0 + 0.1j, -1.0]])
        with pytest.raises(NumericDomainError) as excinfo:
            check_branch_continuity((np.ones((1, 3)), roots), axis=1)
        assert excinfo.value.details["root"] == 1
