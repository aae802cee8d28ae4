"""Tests for the receiver chain."""

import numpy as np
import pytest
from scipy import special

from fiber_nlc.channel.amplifier import NoiseModel
from fiber_nlc.channel.link import propagate_link
from fiber_nlc.channel.ssfm import SpanPlan, spectral_occupancy
from fiber_nlc.core.errors import LengthError, ParameterError
from fiber_nlc.model.modulation import qam16_constellation, qam16_map, random_bits
from fiber_nlc.model.shaping import rrc_taps, shape
from fiber_nlc.model.types import SampledField, SymbolGrid
from fiber_nlc.receiver.dsp import (
    DbpConfig,
    apply_gain,
    dbp,
    edc,
    estimate_delay,
    inverse_link,
    known_data_gain,
    matched_filter_downsample,
    ml_detect,
    normalize_power,
)
from fiber_nlc.receiver.metrics import snr_db


@pytest.fixture
def symbols():
    rng = np.random.default_rng(21)
    return SymbolGrid(qam16_map(random_bits(4 * 512, rng)), qam16_map(random_bits(4 * 512, rng)), 32e9)


@pytest.fixture
def launched(symbols):
    """Symbols shaped at 2 samples per symbol and scaled to about 1 mW per polarization."""
    return shape(symbols, rrc_taps(0.1, 32, 2), 2).scaled(np.sqrt(1e-3 * 2))


class TestDbpConfig:
    @pytest.mark.parametrize("kwargs", [{"steps_per_span": 0}, {"steps_per_span": 1.5}, {"samples_per_symbol": 1}])
    def test_invalid(self, kwargs):
        with pytest.raises(ParameterError):
            DbpConfig(**kwargs)


class TestLinearCompensation:
    def test_inverse_link(self, short_link):
        inverse = inverse_link(short_link)
        assert inverse.alpha == -short_link.alpha
        assert inverse.beta2 == -short_link.beta2
        assert inverse.gamma == -short_link.gamma

    def test_edc_undoes_dispersion(self, launched, short_link):
        """EDC over the full length inverts a linear noiseless link."""
        link = short_link.with_params(gamma=0.0)
        noise = NoiseModel.for_link(link, enabled=False)

        received = propagate_link(launched, link, SpanPlan.from_steps(link.span_length, 1), noise)
        restored = edc(received, link, link.total_length)

        assert restored.distance(launched) < 1e-9

    def test_edc_zero_length(self, launched, short_link):
        assert edc(launched, short_link, 0.0) is launched


class TestDbp:
    @pytest.mark.parametrize("steps", [1, 3])
    def test_inverts_noiseless_link(self, launched, short_link, steps):
        """Back-propagation with the forward step layout undoes the channel exactly."""
        noise = NoiseModel.for_link(short_link, enabled=False)
        plan = SpanPlan.from_steps(short_link.span_length, steps)

        received = propagate_link(launched, short_link, plan, noise)
        restored = dbp(received, short_link, DbpConfig(steps_per_span=steps))

        assert received.distance(launched) > 0.1
        assert restored.distance(launched) < 1e-8

    def test_noisy_two_sample_field(self, launched, short_link):
        """White noise fills the band at 2 samples per symbol; back-propagation still runs."""
        rng = np.random.default_rng(5)
        noise = 1e-3 * (rng.standard_normal((2, len(launched))) + 1j * rng.standard_normal((2, len(launched))))
        noisy = launched.with_arrays(launched.x + noise[0], launched.y + noise[1])
        assert spectral_occupancy(noisy) > 0.9

        restored = dbp(noisy, short_link, DbpConfig(steps_per_span=1, samples_per_symbol=2))

        assert len(restored) == len(noisy)
        assert np.all(np.isfinite(restored.x)) and np.all(np.isfinite(restored.y))

    def test_span_override(self, launched, short_link):
        """Zero spans leaves the field untouched."""
        assert dbp(launched, short_link, DbpConfig(), n_spans=0) is launched

    def test_more_steps_improve_snr(self, symbols, short_link):
        """Against a finely stepped nonlinear link, back-propagation SNR rises from 1 to 4 steps per span."""
        field = shape(symbols, rrc_taps(0.1, 32, 4), 4).scaled(np.sqrt(1e-2 * 4))
        noise = NoiseModel.for_link(short_link, enabled=False)
        received = propagate_link(field, short_link, SpanPlan.from_steps(short_link.span_length, 64), noise)
        sent = np.concatenate([field.x, field.y])

        snr = {}
        for steps in (1, 2, 4):
            restored = dbp(received, short_link, DbpConfig(steps_per_span=steps, samples_per_symbol=4))
            snr[steps] = snr_db(sent, np.concatenate([restored.x, restored.y]))

        assert snr[1] < snr[2] < snr[4]
        assert snr[4] - snr[1] > 3.0


class TestMatchedFilter:
    def test_too_short(self):
        field = SampledField(np.ones(8), np.ones(8), 64e9)
        with pytest.raises(LengthError):
            matched_filter_downsample(field, rrc_taps(0.1, 32, 2), 2)

    def test_estimate_delay(self, symbols):
        """The correlation peak sits at the combined filter delay."""
        taps = rrc_taps(0.1, 32, 2)
        field = shape(symbols, taps, 2)
        assert estimate_delay(field, taps, 2, symbols) == len(taps) - 1


class TestGainAndDetection:
    def test_known_data_gain(self, symbols):
        rotated = symbols.with_arrays(symbols.x * 0.5j, symbols.y * 2.0)

        gains = known_data_gain(rotated, symbols)

        np.testing.assert_allclose(gains, [-2j, 0.5])
        restored = apply_gain(rotated, gains)
        np.testing.assert_allclose(restored.x, symbols.x)

    def test_known_data_gain_length(self, symbols):
        with pytest.raises(LengthError):
            known_data_gain(symbols.trimmed(1), symbols)

    def test_zero_energy_gain(self, symbols):
        dark = symbols.scaled(0.0)
        np.testing.assert_array_equal(known_data_gain(dark, symbols), [1.0, 1.0])

    def test_normalize_power(self, symbols):
        normalized = normalize_power(symbols.scaled(3.0))
        energy = np.mean(np.abs(normalized.x) ** 2 + np.abs(normalized.y) ** 2) / 2
        assert energy == pytest.approx(1.0, rel=1e-6)
        dark = symbols.scaled(0.0)
        assert normalize_power(dark) is dark

    def test_ml_detect(self, symbols):
        noisy = symbols.with_arrays(symbols.x + 0.05, symbols.y - 0.05j)

        decided, bits = ml_detect(noisy)

        np.testing.assert_allclose(decided.x, symbols.x)
        np.testing.assert_allclose(decided.y, symbols.y)
        assert bits.shape == (2, 4 * len(symbols))
        assert set(np.unique(decided.x)) <= set(qam16_constellation().points)

    @pytest.mark.parametrize("es_n0_db", [10.0, 14.0])
    def test_ml_detect_symbol_error_rate(self, es_n0_db):
        """Nearest-point decisions in white Gaussian noise follow the square 16-QAM error curve."""
        rng = np.random.default_rng(40)
        points = qam16_constellation().points
        n = 200_000
        sent = points[rng.integers(0, 16, size=(2, n))]
        sigma = np.sqrt(0.5 * 10 ** (-es_n0_db / 10))
        noisy = sent + sigma * (rng.standard_normal((2, n)) + 1j * rng.standard_normal((2, n)))

        decided, _ = ml_detect(SymbolGrid(noisy[0], noisy[1], 32e9))

        ser = np.mean(np.concatenate([decided.x != sent[0], decided.y != sent[1]]))
        rail = 0.75 * special.erfc(np.sqrt(0.1 * 10 ** (es_n0_db / 10)))
        assert ser == pytest.approx(1 - (1 - rail) ** 2, rel=0.05)
