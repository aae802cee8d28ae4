"""Tests for the EDC, DBP and perturbation-based techniques."""

import numpy as np
import pytest

from fiber_nlc.coeffs.lut import save_table, table_filename
from fiber_nlc.coeffs.tables import REFERENCE_INDEX, CoeffTable, quantize_combine
from fiber_nlc.coeffs.types import CoeffIndex, CoeffOrder
from fiber_nlc.core.config import Config
from fiber_nlc.core.context import RunContext
from fiber_nlc.core.errors import ConfigurationError
from fiber_nlc.core.technique import LinkSetup
from fiber_nlc.model.types import LinkConfig, SampledField, SymbolGrid
from fiber_nlc.receiver.dsp import edc
from fiber_nlc.techniques.dbp import DbpTechnique
from fiber_nlc.techniques.edc import EdcTechnique
from fiber_nlc.techniques.pbnlc import (
    EPSILON_EXTRA,
    FoPbnlcTechnique,
    SoPbnlcTechnique,
    load_tables,
    tables_key,
)


def make_table(order, n_entries):
    entries = {REFERENCE_INDEX: 1.0 + 0j}
    for i in range(1, n_entries):
        entries[CoeffIndex(i % 3, -(i % 2), 0 if order is CoeffOrder.FO else i % 2)] = 0.5 / i + 0j
    return CoeffTable(order=order, entries=entries, window=6, mu_db=-40.0, reference=1.0 + 0j)


@pytest.fixture
def tables():
    return {
        CoeffOrder.FO: make_table(CoeffOrder.FO, 3),
        CoeffOrder.SO_TERM1: make_table(CoeffOrder.SO_TERM1, 5),
        CoeffOrder.SO_TERM2: make_table(CoeffOrder.SO_TERM2, 4),
    }


@pytest.fixture
def setup(pulse):
    return LinkSetup(
        link=LinkConfig.from_table_units(n_spans=35), pulse=pulse, launch_power_dbm=1.0, samples_per_symbol=16
    )


@pytest.fixture
def loaded(context, tables):
    """Context with the 35-span tables already cached."""
    context.set_resource(tables_key(35), dict(tables))
    return context


@pytest.fixture
def field():
    t = np.arange(256)
    return SampledField(np.exp(0.1j * t), np.exp(-0.05j * t), 64e9)


class TestEdcTechnique:
    def test_receive(self, setup, field, context):
        result = EdcTechnique("edc", {}).receive(field, setup, context)
        expected = edc(field, setup.link, setup.link.total_length)
        np.testing.assert_allclose(result.x, expected.x)
        assert EdcTechnique("edc", {}).mults_per_symbol(setup, context) == 0.0


class TestDbpTechnique:
    def test_config(self):
        technique = DbpTechnique("dbp-2", {"steps_per_span": 2, "n_fft": 1024, "n_samples": 1024})
        assert (technique.steps_per_span, technique.n_fft, technique.n_samples) == (2, 1024, 1024)

    def test_receive_uses_rx_sampling(self, setup, field, context, mocker):
        dbp = mocker.patch("fiber_nlc.techniques.dbp.dbp", return_value=field)

        DbpTechnique("dbp-4", {"steps_per_span": 4}).receive(field, setup, context)

        _, link, cfg = dbp.call_args[0]
        assert link is setup.link
        assert (cfg.steps_per_span, cfg.samples_per_symbol) == (4, 2)

    def test_mults_per_symbol(self, setup, context):
        assert DbpTechnique("dbp", {}).mults_per_symbol(setup, context) == pytest.approx(6300.0)


class TestLoadTables:
    def test_from_context(self, loaded, tables):
        result = load_tables(loaded, 35, [CoeffOrder.FO])
        assert result[CoeffOrder.FO] is tables[CoeffOrder.FO]

    def test_from_disk_and_cached(self, tmp_path, tables):
        save_table(tables[CoeffOrder.FO], tmp_path / table_filename(CoeffOrder.FO, 20))
        context = RunContext("t", Config.from_overrides({"runtime.workers": 1, "runtime.tables_dir": str(tmp_path)}))

        result = load_tables(context, 20, [CoeffOrder.FO])

        assert result[CoeffOrder.FO].entries == tables[CoeffOrder.FO].entries
        assert CoeffOrder.FO in context.get_resource(tables_key(20))

    def test_missing(self, tmp_path):
        context = RunContext("t", Config.from_overrides({"runtime.tables_dir": str(tmp_path)}))
        with pytest.raises(ConfigurationError) as excinfo:
            load_tables(context, 35, [CoeffOrder.SO_TERM1])
        assert excinfo.value.details == {"order": "so-term1", "n_spans": 35}


class TestFoPbnlc:
    def test_predistort_config(self, setup, loaded, tables):
        technique = FoPbnlcTechnique("fo", {"epsilon": 0.6, "window": 4})

        cfg = technique.predistort_config(setup, loaded)

        assert (cfg.epsilon_fo, cfg.epsilon_so, cfg.window) == (0.6, 0.0, 4)
        assert cfg.gamma == setup.link.gamma
        assert cfg.peak_power == setup.pulse.P0
        assert cfg.fo_table is tables[CoeffOrder.FO]
        assert technique.predistort_config(setup, loaded, epsilon=0.1).epsilon_fo == 0.1

    def test_tuned_config(self, setup, loaded):
        """Per-power epsilons in the setup extras replace the configured ones."""
        technique = FoPbnlcTechnique("fo", {"epsilon": 0.6, "window": 4})
        setup.extras[EPSILON_EXTRA] = {"fo": (0.25, 0.0), "so": (0.5, 0.5)}

        assert technique.tuned_config(setup, loaded).epsilon_fo == 0.25

    def test_transmit_with_zero_epsilon(self, setup, loaded):
        symbols = SymbolGrid(np.ones(8), 1j * np.ones(8), 32e9)
        result = FoPbnlcTechnique("fo", {"epsilon": 0.0, "window": 4}).transmit(symbols, setup, loaded)
        np.testing.assert_array_equal(result.x, symbols.x)

    def test_prepare_requires_tables(self, setup, tmp_path):
        context = RunContext("t", Config.from_overrides({"runtime.tables_dir": str(tmp_path)}))
        with pytest.raises(ConfigurationError):
            FoPbnlcTechnique("fo", {}).prepare(setup, context)

    def test_mults_counts_groups(self, setup, loaded, tables):
        technique = FoPbnlcTechnique("fo", {})
        assert technique.mults_per_symbol(setup, loaded) == 2 * (4 * 3 + 3)

        loaded.set_resource(tables_key(35), {CoeffOrder.FO: quantize_combine(tables[CoeffOrder.FO], 0.5)})
        assert technique.mults_per_symbol(setup, loaded) == 2 * (4 * 2 + 3)


class TestSoPbnlc:
    def test_orders(self):
        assert SoPbnlcTechnique("so", {}).required_orders() == [CoeffOrder.FO, CoeffOrder.SO_TERM1]
        assert SoPbnlcTechnique("so", {"use_term2": True}).required_orders() == [
            CoeffOrder.FO,
            CoeffOrder.SO_TERM1,
            CoeffOrder.SO_TERM2,
        ]

    def test_epsilon_fo_defaults_to_epsilon(self):
        assert SoPbnlcTechnique("so", {"epsilon": 0.7}).epsilon_fo == 0.7
        assert SoPbnlcTechnique("so", {"epsilon": 0.7, "epsilon_fo": 0.2}).epsilon_fo == 0.2

    def test_predistort_config(self, setup, loaded, tables):
        technique = SoPbnlcTechnique("so", {"epsilon": 0.9, "epsilon_fo": 0.4, "window": 4, "use_term2": True})

        cfg = technique.predistort_config(setup, loaded)

        assert (cfg.epsilon_fo, cfg.epsilon_so, cfg.use_term2) == (0.4, 0.9, True)
        assert cfg.so_term2_table is tables[CoeffOrder.SO_TERM2]

    def test_mults_charge_second_order_tables(self, setup, loaded):
        """The SO count covers Term 1, plus Term 2 when enabled."""
        assert SoPbnlcTechnique("so", {}).mults_per_symbol(setup, loaded) == 2 * (4 * 5 + 3)
        assert SoPbnlcTechnique("so", {"use_term2": True}).mults_per_symbol(setup, loaded) == 2 * (4 * 9 + 3)

    def test_execute_transmit(self, setup, loaded):
        """Predistortion through the technique lifecycle changes the symbols."""
        symbols = SymbolGrid(np.full(8, 0.5 + 0.5j), np.full(8, 0.5 - 0.5j), 32e9)
        technique = SoPbnlcTechnique("so", {"epsilon": 1.0, "window": 4})

        result = technique.execute("transmit", symbols, setup, loaded)

        assert not np.array_equal(result.x, symbols.x)
