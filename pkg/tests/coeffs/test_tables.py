"""Tests for coefficient tables."""

import os

import numpy as np
import pytest

from fiber_nlc.coeffs.quadrature import fo_coeff
from fiber_nlc.coeffs.tables import (
    REFERENCE_INDEX,
    CoeffTable,
    build_table,
    candidate_indices,
    canonical_indices,
    default_quant_step,
    histogram_db,
    quantize_combine,
    table_growth,
    table_stats,
    truncate,
)
from fiber_nlc.coeffs.types import CoeffIndex, CoeffOrder, QuadratureSpec
from fiber_nlc.core.config import Config
from fiber_nlc.core.context import RunContext
from fiber_nlc.core.errors import DegenerateQuantizationError, ParameterError
from fiber_nlc.model.types import LinkConfig, PulseParams


@pytest.fixture
def table():
    """Hand-made SO table with entries at 0, -12, -20, -40 dB."""
    entries = {
        REFERENCE_INDEX: 1.0 + 0j,
        CoeffIndex(1, 0, 0): 0.26 + 0.24j,
        CoeffIndex(0, 1, 0): 0.24 + 0.26j,
        CoeffIndex(1, 1, 0): 0.1j,
        CoeffIndex(1, 1, 1): 0.01 + 0j,
    }
    return CoeffTable(order=CoeffOrder.SO_TERM1, entries=entries, window=4, mu_db=-45.0, reference=1.0 + 0j)


class TestIndices:
    def test_candidates(self):
        fo = candidate_indices(CoeffOrder.FO, 4)
        assert fo.shape == (25, 3)
        assert np.all(fo[:, 2] == 0)
        assert candidate_indices(CoeffOrder.SO_TERM2, 2).shape == (27, 3)

    def test_canonical_collapses_symmetric_indices(self):
        indices = np.array([[1, 2, 0], [2, 1, 0], [-1, -2, 0], [-2, -1, 0], [1, 1, 1]])

        unique, inverse = canonical_indices(indices)

        assert unique.shape[0] == 2
        assert len(set(inverse[:4].tolist())) == 1
        assert inverse[4] != inverse[0]


class TestCoeffTable:
    def test_access(self, table):
        assert len(table) == 5
        assert CoeffIndex(1, 0, 0) in table
        assert table.get((5, 5, 5)) == 0j
        assert table.half_window == 2

    def test_arrays_sorted(self, table):
        indices, values = table.arrays()
        assert indices.tolist() == sorted(indices.tolist())
        assert values[0] == table.get(indices[0])

    def test_ratio_db(self, table):
        ratios = dict(zip(map(tuple, table.arrays()[0].tolist()), table.ratio_db()))
        assert ratios[(1, 1, 1)] == pytest.approx(-40.0)
        assert ratios[(0, 0, 0)] == pytest.approx(0.0)

    def test_unquantized_grouped(self, table):
        indices, owner, values = table.grouped()
        np.testing.assert_array_equal(owner, np.arange(5))
        assert values.size == 5


class TestTruncate:
    def test_stricter_threshold(self, table):
        truncated = truncate(table, -25.0)
        assert set(truncated.entries) == {REFERENCE_INDEX, (1, 0, 0), (0, 1, 0), (1, 1, 0)}
        assert truncated.mu_db == -25.0
        assert len(table) == 5

    def test_reference_always_kept(self, table):
        assert set(truncate(table, 10.0).entries) == {REFERENCE_INDEX}

    def test_cannot_loosen(self, table):
        with pytest.raises(ParameterError):
            truncate(table, -60.0)

    def test_filters_groups(self, table):
        quantized = quantize_combine(table, 0.1)
        truncated = truncate(quantized, -15.0)
        members = [idx for group in truncated.groups.values() for idx in group]
        assert sorted(members) == sorted(truncated.entries)


class TestQuantize:
    def test_combines_equal_values(self, table):
        quantized = quantize_combine(table, 0.25)

        assert quantized.quantized
        assert quantized.quant_scale == 0.25
        assert quantized.dropped_zero == 2
        assert quantized.groups == {(4, 0): [REFERENCE_INDEX], (1, 1): [CoeffIndex(0, 1, 0), CoeffIndex(1, 0, 0)]}
        assert quantized.get((1, 0, 0)) == 0.25 + 0.25j

        indices, owner, values = quantized.grouped()
        assert owner.tolist() == [0, 0, 1]
        np.testing.assert_allclose(values, [0.25 + 0.25j, 1.0])
        assert indices.tolist() == [[0, 1, 0], [1, 0, 0], [0, 0, 0]]

    def test_default_step(self, table):
        assert default_quant_step(table) == pytest.approx(1 / 32)
        assert default_quant_step(table, 8.0) == pytest.approx(1 / 8)
        assert quantize_combine(table).quant_scale == pytest.approx(1 / 32)

    def test_reference_rounding_to_zero(self, table):
        with pytest.raises(DegenerateQuantizationError) as excinfo:
            quantize_combine(table, 4.0)
        assert excinfo.value.details["quant_step"] == 4.0

    @pytest.mark.parametrize("step", [0.0, -1.0, float("inf")])
    def test_invalid_step(self, table, step):
        with pytest.raises(ParameterError):
            quantize_combine(table, step)

    def test_already_quantized(self, table):
        with pytest.raises(ParameterError):
            quantize_combine(quantize_combine(table, 0.25), 0.25)


class TestStats:
    def test_table_stats(self, table):
        stats = table_stats(quantize_combine(table, 0.25))
        assert stats == {
            "order": "so-term1",
            "window": 4,
            "mu_db": -45.0,
            "entries": 3,
            "groups": 2,
            "quantized": True,
            "quant_scale": 0.25,
            "dropped_zero": 2,
            "reference": [1.0, 0.0],
        }

    def test_histogram(self, table):
        counts = histogram_db(table, [-50, -30, -15, -5, 5])
        assert counts.tolist() == [1, 1, 2, 1]


class TestBuildTable:
    def test_fo_table(self, pulse, short_link, context):
        """Retained entries clear the threshold and respect the index symmetries."""
        quad = QuadratureSpec()
        table = build_table(CoeffOrder.FO, 6, -40.0, pulse, short_link, quad, context=context)

        assert table.reference == pytest.approx(fo_coeff(0, 0, pulse, short_link, quad), rel=1e-6)
        assert np.all(table.ratio_db() >= -40.0)
        assert all(abs(m) <= 3 and abs(n) <= 3 and k == 0 for m, n, k in table.entries)
        for (m, n, k), value in table.entries.items():
            assert table.get((n, m, k)) == value
            assert table.get((-m, -n, -k)) == value
        assert table.metadata["link"]["n_spans"] == 2

    def test_odd_window(self, pulse, short_link):
        with pytest.raises(ParameterError):
            build_table(CoeffOrder.FO, 5, -40.0, pulse, short_link, QuadratureSpec())

    def test_growth_with_distance(self, pulse, short_link):
        """Longer links keep at least as many FO entries."""
        growth = table_growth(CoeffOrder.FO, [1, 4], 8, -30.0, pulse, short_link, QuadratureSpec())
        assert [spans for spans, _ in growth] == [1, 4]
        assert growth[0][1] <= growth[1][1]


@pytest.mark.full
class TestFullScaleTables:
    """Second-order tables of the 35 x 80 km link with a 100-symbol window."""

    @pytest.fixture(scope="class")
    def tables(self):
        config = Config.from_overrides({"runtime.workers": os.cpu_count() or 1})
        context = RunContext(run_id="full-scale-tables", config=config)
        pulse = PulseParams.from_symbol_rate(32e9, tau_over_t=0.5, P0=1e-3, rrc_rolloff=0.1)
        link = LinkConfig.from_table_units(n_spans=35)
        return {
            order: build_table(order, 100, -40.0, pulse, link, QuadratureSpec(), context=context)
            for order in (CoeffOrder.SO_TERM1, CoeffOrder.SO_TERM2)
        }

    def test_retained_count(self, tables):
        retained = sum(len(table) for table in tables.values())
        assert retained == pytest.approx(160606, rel=0.25)

    def test_term2_below_term1(self, tables):
        assert len(tables[CoeffOrder.SO_TERM2]) < len(tables[CoeffOrder.SO_TERM1])
        edges = [-40.0, -30.0, -20.0, -10.0, 0.0, 40.0]
        term1 = histogram_db(tables[CoeffOrder.SO_TERM1], edges)
        term2 = histogram_db(tables[CoeffOrder.SO_TERM2], edges)
        assert term2.sum() < term1.sum()

    def test_quantized_groups(self, tables):
        retained = sum(len(table) for table in tables.values())
        groups = sum(table_stats(quantize_combine(table))["groups"] for table in tables.values())
        assert groups <= 0.02 * retained
