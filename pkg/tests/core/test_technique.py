"""Tests for the Technique base class and factory."""

import time
from unittest.mock import Mock

import numpy as np
import pytest

from fiber_nlc.core.errors import ConfigurationError, NumericDomainError, RuntimeExceededError
from fiber_nlc.core.technique import RECEIVE, TRANSMIT, LinkSetup, Technique, TechniqueFactory
from fiber_nlc.model.types import SampledField, SymbolGrid


class HalvingTechnique(Technique):
    """Scales the transmit symbols and the received field by one half."""

    def transmit(self, symbols, setup, context):
        return symbols.scaled(0.5)

    def receive(self, field, setup, context):
        return field.scaled(0.5)


class NanTechnique(Technique):
    """Produces non-finite output."""

    def receive(self, field, setup, context):
        return field.with_arrays(field.x * np.nan, field.y)


class SlowTechnique(Technique):
    """Sleeps longer than its time limit."""

    def receive(self, field, setup, context):
        time.sleep(0.05)
        return field


@pytest.fixture
def setup(short_link, pulse):
    return LinkSetup(link=short_link, pulse=pulse, launch_power_dbm=0.0, samples_per_symbol=16)


@pytest.fixture
def symbols():
    return SymbolGrid(np.ones(8), 1j * np.ones(8), 32e9)


@pytest.fixture
def field():
    return SampledField(np.ones(16, dtype=complex), np.zeros(16, dtype=complex), 64e9)


class TestTechnique:
    """Tests for the Technique lifecycle."""

    def test_init(self):
        """Test Technique initialization."""
        technique = HalvingTechnique("half", {"timeout_seconds": 5})
        assert technique.id == "half"
        assert technique.config == {"timeout_seconds": 5}
        assert technique.timeout == 5

    def test_execute_transmit(self, context, setup, symbols):
        """The transmit step runs the transmit hook."""
        result = HalvingTechnique("half", {}).execute(TRANSMIT, symbols, setup, context)
        np.testing.assert_allclose(result.x, 0.5)

    def test_execute_receive_emits_events(self, setup, field, context):
        """Start and complete events carry the technique and step."""
        context.get_stream_manager().log_level = "debug"
        subscriber = Mock()
        context.get_stream_manager().add_subscriber(subscriber)

        result = HalvingTechnique("half", {}).execute(RECEIVE, field, setup, context)

        np.testing.assert_allclose(result.x, 0.5)
        events = [call[0][0] for call in subscriber.call_args_list]
        assert [e.event_type for e in events] == ["stage_start", "stage_complete"]
        assert {e.stage_id for e in events} == {"half.receive"}
        assert events[0].data["config"]["n_spans"] == 2

    def test_default_transmit_is_identity(self, context, setup, symbols):
        """Receiver-only techniques pass the symbols through."""
        assert NanTechnique("nan", {}).execute(TRANSMIT, symbols, setup, context) is symbols

    def test_non_finite_output(self, context, setup, field):
        """Non-finite samples raise and emit an error event."""
        subscriber = Mock()
        context.get_stream_manager().add_subscriber(subscriber)

        with pytest.raises(NumericDomainError) as excinfo:
            NanTechnique("nan", {}).execute(RECEIVE, field, setup, context)

        assert excinfo.value.stage_id == "nan.receive"
        assert subscriber.call_args[0][0].event_type == "stage_error"

    def test_non_finite_input(self, context, setup, field):
        """Non-finite input is rejected before the hook runs."""
        bad = field.with_arrays(field.x * np.inf, field.y)
        technique = HalvingTechnique("half", {})
        technique.receive = Mock()

        with pytest.raises(NumericDomainError):
            technique.execute(RECEIVE, bad, setup, context)
        technique.receive.assert_not_called()

    def test_timeout(self, context, setup, field):
        """Steps slower than the limit raise RuntimeExceededError."""
        with pytest.raises(RuntimeExceededError):
            SlowTechnique("slow", {"timeout_seconds": 0.001}).execute(RECEIVE, field, setup, context)

    def test_defaults(self, context, setup):
        """Default hooks cost nothing and describe the class."""
        technique = HalvingTechnique("half", {})
        technique.prepare(setup, context)
        assert technique.mults_per_symbol(setup, context) == 0.0
        assert "one half" in technique.get_description()

    def test_setup_n_spans(self, setup):
        assert setup.n_spans == 2
        assert setup.rx_samples_per_symbol == 2


class TestTechniqueFactory:
    """Tests for the TechniqueFactory class."""

    def test_create_technique(self):
        """Registered types are instantiated with label and config."""
        technique = TechniqueFactory.create_technique("dbp", "dbp-4", {"steps_per_span": 4})
        assert technique.id == "dbp-4"
        assert technique.steps_per_span == 4

    def test_create_unknown(self):
        with pytest.raises(ConfigurationError):
            TechniqueFactory.create_technique("magic", "magic", {})

    @pytest.mark.parametrize(
        "label, expected",
        [
            ("edc", {"type": "edc"}),
            ("SO", {"type": "so"}),
            ("dbp", {"type": "dbp"}),
            ("dbp-2", {"type": "dbp", "steps_per_span": 2}),
        ],
    )
    def test_parse_label(self, label, expected):
        assert TechniqueFactory.parse_label(label) == expected

    @pytest.mark.parametrize("label", ["dbp-", "dbp-0", "dbp-x"])
    def test_parse_label_invalid(self, label):
        with pytest.raises(ConfigurationError):
            TechniqueFactory.parse_label(label)
