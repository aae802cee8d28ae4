"""Tests for BER, SNR and Q-factor metrics."""

import math

import mpmath
import numpy as np
import pytest

from fiber_nlc.core.errors import ExperimentError, LengthError
from fiber_nlc.receiver.metrics import (
    FEC_BER_THRESHOLD,
    FEC_Q_DB,
    SNR_CAP_DB,
    MetricsRow,
    attach_q_gain,
    ber_from_q_db,
    capped_q_db,
    combine_rows,
    metrics,
    q_db_from_ber,
    q_gain_at_optimum,
    snr_db,
)


def make_row(technique, power, q_db, n_spans=35, **kwargs):
    values = {
        "technique": technique,
        "n_spans": n_spans,
        "launch_power_dbm": power,
        "ber": 1e-3,
        "snr_db": 15.0,
        "q_db": q_db,
        "bit_errors": 1,
        "counted_bits": 1000,
    }
    values.update(kwargs)
    return MetricsRow(**values)


class TestQFactor:
    def test_fec_threshold_matches_high_precision(self):
        """The FEC Q limit agrees with an arbitrary-precision evaluation."""
        mpmath.mp.dps = 30
        expected = 20 * mpmath.log10(mpmath.sqrt(2) * mpmath.erfinv(1 - 2 * mpmath.mpf(FEC_BER_THRESHOLD)))
        assert FEC_Q_DB == pytest.approx(float(expected), abs=1e-9)
        assert FEC_Q_DB == pytest.approx(6.25, abs=0.01)

    @pytest.mark.parametrize("ber", [1e-2, 1e-4, 0.3])
    def test_inverse(self, ber):
        assert ber_from_q_db(q_db_from_ber(ber)) == pytest.approx(ber, rel=1e-9)

    def test_limits(self):
        assert q_db_from_ber(0.5) == -math.inf
        assert q_db_from_ber(0.0) == math.inf

    @pytest.mark.parametrize(
        "errors, counted, ber, capped",
        [(0, 1000, 1e-3, True), (20, 1000, 2e-2, False), (500, 1000, 0.499, True), (900, 1000, 0.499, True)],
    )
    def test_capped_q(self, errors, counted, ber, capped):
        q, limited = capped_q_db(errors, counted)
        assert q == pytest.approx(q_db_from_ber(ber))
        assert limited is capped

    @pytest.mark.parametrize("counted", [1, 2, 3, 8])
    def test_capped_q_tiny_counts_stay_finite(self, counted):
        assert math.isfinite(capped_q_db(0, counted)[0])
        assert math.isfinite(capped_q_db(counted, counted)[0])

    def test_row_rejects_infinite_q(self):
        with pytest.raises(ValueError):
            make_row("edc", 0.0, -math.inf)


class TestSnr:
    def test_scalar_gain_removed(self):
        """A common complex gain does not degrade the SNR."""
        tx = np.exp(1j * np.linspace(0, 6, 100))
        noise = 0.01 * np.random.default_rng(0).standard_normal(100)

        clean = snr_db(tx, (tx + noise) * 0.3j)

        assert clean == pytest.approx(snr_db(tx, tx + noise), rel=1e-9)
        assert clean == pytest.approx(40.0, abs=1.5)

    def test_noiseless_is_infinite(self):
        tx = np.ones(4)
        assert snr_db(tx, tx) == math.inf


class TestMetrics:
    def test_counts_errors(self):
        tx_bits = np.zeros(100, dtype=np.uint8)
        rx_bits = tx_bits.copy()
        rx_bits[:2] = 1
        symbols = np.exp(1j * np.arange(25))
        rx = symbols + 0.1

        row = metrics(tx_bits, rx_bits, symbols, rx, launch_power_dbm=1.0, technique="so", n_spans=35)

        assert row.bit_errors == 2
        assert row.ber == pytest.approx(0.02)
        assert row.q_db == pytest.approx(q_db_from_ber(0.02))
        assert not row.capped
        assert row.n_spans == 35

    def test_error_free_frame_is_capped(self):
        """No errors and no noise cap SNR at 100 dB and Q at the one-error value."""
        bits = np.ones(400, dtype=np.uint8)
        symbols = np.ones(100, dtype=complex)

        row = metrics(bits, bits, symbols, symbols, launch_power_dbm=0.0, technique="edc")

        assert row.capped
        assert row.snr_db == SNR_CAP_DB
        assert row.q_db == pytest.approx(q_db_from_ber(1 / 400))
        assert row.ber == 0.0

    def test_every_bit_wrong_gives_finite_q(self):
        """A BER at or above one half keeps a finite Q so rows serialize as plain JSON."""
        tx_bits = np.zeros(400, dtype=np.uint8)
        symbols = np.ones(100, dtype=complex)

        row = metrics(tx_bits, 1 - tx_bits, symbols, -symbols, launch_power_dbm=9.0, technique="fo")

        assert row.ber == 1.0
        assert row.capped
        assert row.q_db == pytest.approx(q_db_from_ber(0.5 - 1 / 400))
        assert "Infinity" not in row.model_dump_json()

    def test_size_mismatch(self):
        with pytest.raises(LengthError):
            metrics(np.zeros(4), np.zeros(8), np.ones(1), np.ones(1), launch_power_dbm=0.0, technique="edc")
        with pytest.raises(LengthError):
            metrics(np.zeros(4), np.zeros(4), np.ones(1), np.ones(2), launch_power_dbm=0.0, technique="edc")

    def test_no_bits(self):
        with pytest.raises(ExperimentError):
            metrics(np.zeros(0), np.zeros(0), np.ones(0), np.ones(0), launch_power_dbm=0.0, technique="edc")


class TestCombine:
    def test_sums_errors_and_averages_linear_snr(self):
        rows = [
            make_row("fo", 0.0, 7.0, ber=0.01, bit_errors=10),
            make_row("fo", 0.0, 7.0, ber=0.03, bit_errors=30),
        ]

        combined = combine_rows(rows, [10.0, 20.0])

        assert combined.bit_errors == 40
        assert combined.counted_bits == 2000
        assert combined.ber == pytest.approx(0.02)
        assert combined.q_db == pytest.approx(FEC_Q_DB)
        assert combined.snr_db == pytest.approx(10 * math.log10(55.0))
        assert not combined.capped

    def test_infinite_snr_marks_capped(self):
        rows = [make_row("fo", 0.0, 7.0), make_row("fo", 0.0, 7.0)]
        combined = combine_rows(rows, [math.inf, 10.0])
        assert combined.capped
        assert combined.snr_db == pytest.approx(10.0)

    def test_all_error_free(self):
        rows = [make_row("fo", 0.0, 7.0, ber=0.0, bit_errors=0)]
        combined = combine_rows(rows, [math.inf])
        assert combined.capped
        assert combined.snr_db == SNR_CAP_DB
        assert combined.q_db == pytest.approx(q_db_from_ber(1 / 1000))

    def test_empty(self):
        with pytest.raises(ExperimentError):
            combine_rows([], [])


class TestQGain:
    def test_attach_q_gain(self):
        rows = [
            make_row("edc", 0.0, 6.0),
            make_row("edc", 1.0, 6.5),
            make_row("so", 0.0, 7.0),
            make_row("so", 1.0, 8.0),
            make_row("so", 1.0, 8.0, n_spans=20),
        ]

        result = attach_q_gain(rows)

        assert [row.delta_q_db for row in result] == [
            0.0,
            0.0,
            pytest.approx(1.0),
            pytest.approx(1.5),
            None,
        ]

    def test_q_gain_at_optimum(self):
        rows = [make_row("edc", 0.0, 6.0), make_row("edc", 1.0, 6.5), make_row("so", 2.0, 7.3)]
        gains = q_gain_at_optimum(rows)
        assert gains["so"] == pytest.approx(0.8)
        assert gains["edc"] == 0.0

    def test_q_gain_needs_baseline(self):
        with pytest.raises(ExperimentError):
            q_gain_at_optimum([make_row("so", 0.0, 7.0)])
