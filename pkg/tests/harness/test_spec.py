"""Tests for the typed experiment spec."""

import pytest

import fiber_nlc.techniques  # noqa: F401
from fiber_nlc.core.config import Config
from fiber_nlc.core.errors import ConfigurationError
from fiber_nlc.harness.spec import TABLE_PEAK_POWER, ExperimentSpec
from fiber_nlc.model.types import dbm_to_w, peak_power_from_launch
from fiber_nlc.techniques.dbp import DbpTechnique
from fiber_nlc.techniques.edc import EdcTechnique
from fiber_nlc.techniques.pbnlc import FoPbnlcTechnique, SoPbnlcTechnique


def make_spec(overrides=None):
    return ExperimentSpec.from_config(Config.from_overrides(overrides))


@pytest.fixture
def spec():
    return make_spec()


@pytest.fixture
def small_spec():
    """Two spans and a short frame."""
    return make_spec({"link.n_spans": 2, "experiment.n_symbols_per_frame": 400})


class TestValidation:
    def test_defaults(self, spec):
        assert spec.link.n_spans == 35
        assert spec.symbol_rate == 32e9
        assert spec.experiment.techniques == ["edc", "fo", "so", "dbp"]

    def test_error_details(self):
        """Every pydantic message is reported with its dotted location."""
        with pytest.raises(ConfigurationError) as excinfo:
            make_spec({"link.n_spans": 0, "link.unknown": 1})
        errors = excinfo.value.details["errors"]
        assert any(message.startswith("link.n_spans:") for message in errors)
        assert any(message.startswith("link.unknown:") for message in errors)

    def test_odd_window(self):
        with pytest.raises(ConfigurationError) as excinfo:
            make_spec({"coefficients.window": 5})
        assert any(message.startswith("coefficients.window:") for message in excinfo.value.details["errors"])

    @pytest.mark.parametrize("key", ["experiment.techniques", "experiment.span_grid", "predistortion.epsilon_grid"])
    def test_empty_grid(self, key):
        with pytest.raises(ConfigurationError):
            make_spec({key: []})

    def test_frame_must_hold_window_and_guards(self):
        with pytest.raises(ConfigurationError) as excinfo:
            make_spec({"experiment.n_symbols_per_frame": 1000})
        assert any("n_symbols_per_frame" in message for message in excinfo.value.details["errors"])

    def test_frozen(self, spec):
        with pytest.raises(Exception):
            spec.link.n_spans = 3


class TestDerived:
    def test_edge_guard(self, spec, small_spec):
        """Half window, RRC span and the dispersion memory in symbols."""
        assert spec.edge_guard() == 50 + 32 + 406
        assert small_spec.edge_guard() == 50 + 32 + 24

    def test_link_config(self, spec):
        link = spec.link_config(10)
        assert link.n_spans == 10
        assert link.span_length == pytest.approx(80e3)
        assert spec.link_config().n_spans == 35

    def test_pulse_and_setup(self, spec):
        assert spec.pulse().P0 == TABLE_PEAK_POWER

        setup = spec.setup(3.0)

        assert setup.launch_power_dbm == 3.0
        assert (setup.samples_per_symbol, setup.rx_samples_per_symbol) == (16, 2)
        assert setup.pulse.P0 == pytest.approx(peak_power_from_launch(dbm_to_w(3.0), spec.pulse()))

    def test_quadrature(self, spec):
        quad = spec.quadrature()
        assert (quad.rule, quad.order, quad.panels_z, quad.rel_tol) == ("gauss-legendre", 8, 4, 1e-6)

    def test_to_config_round_trip(self, small_spec):
        assert ExperimentSpec.from_config(small_spec.to_config()) == small_spec


class TestWithSpans:
    def test_changes_link_only(self, small_spec):
        longer = small_spec.with_spans(4)
        assert longer.link.n_spans == 4
        assert longer.experiment == small_spec.experiment

    def test_revalidates(self, small_spec):
        """A frame that holds the guards of 2 spans is too short for 35."""
        with pytest.raises(ConfigurationError):
            small_spec.with_spans(35)
        with pytest.raises(ConfigurationError):
            small_spec.with_spans(0)


class TestTechniques:
    @pytest.mark.parametrize(
        "label, expected",
        [
            ("edc", {"type": "edc"}),
            ("fo", {"type": "fo", "epsilon": 1.0, "window": 100}),
            ("so", {"type": "so", "epsilon": 1.0, "epsilon_fo": 1.0, "window": 100, "use_term2": False}),
            ("dbp", {"type": "dbp", "steps_per_span": 1, "n_fft": 4096, "n_samples": 4096}),
            ("DBP-4", {"type": "dbp", "steps_per_span": 4, "n_fft": 4096, "n_samples": 4096}),
        ],
    )
    def test_technique_config(self, spec, label, expected):
        assert spec.technique_config(label) == expected

    def test_invalid_dbp_label(self, spec):
        with pytest.raises(ConfigurationError):
            spec.technique_config("dbp-x")

    def test_instances_in_order(self):
        spec = make_spec({"experiment.techniques": ["edc", "fo", "so", "dbp-2"]})

        techniques = spec.techniques()

        assert [t.id for t in techniques] == ["edc", "fo", "so", "dbp-2"]
        assert [type(t) for t in techniques] == [EdcTechnique, FoPbnlcTechnique, SoPbnlcTechnique, DbpTechnique]
        assert techniques[3].steps_per_span == 2

    def test_unknown_technique(self):
        spec = make_spec({"experiment.techniques": ["volterra"]})
        with pytest.raises(ConfigurationError):
            spec.techniques()
