"""Tests for the event stream."""

import json
from unittest.mock import Mock

from fiber_nlc.core.errors import ParameterError
from fiber_nlc.core.stream import RunEvent, StreamManager


def test_run_event_to_dict():
    """Test converting a RunEvent to a dictionary."""
    event = RunEvent(
        event_type="stage_start",
        run_id="run-1",
        stage_id="so.transmit",
        data={"key": "value"},
        timestamp=1234567890.0,
    )

    event_dict = event.to_dict()
    assert event_dict == {
        "event_type": "stage_start",
        "run_id": "run-1",
        "stage_id": "so.transmit",
        "timestamp": 1234567890.0,
        "data": {"key": "value"},
    }


def test_run_event_default_timestamp():
    """Events get the current time when none is given."""
    event = RunEvent("log", "run-1", "edc", {})
    assert event.timestamp > 0


def test_run_event_json_round_trip():
    """Test creating a RunEvent from its JSON form."""
    event = RunEvent("progress", "run-1", "frames", {"progress": 0.5}, timestamp=1.0)

    parsed = RunEvent.from_json(event.to_json())
    assert parsed.event_type == "progress"
    assert parsed.stage_id == "frames"
    assert parsed.data == {"progress": 0.5}
    assert parsed.timestamp == 1.0
    assert json.loads(event.to_json())["run_id"] == "run-1"


class TestStreamManager:
    """Tests for the StreamManager class."""

    def test_add_remove_subscriber(self):
        """Test adding and removing subscribers."""
        sm = StreamManager(run_id="run-1")
        subscriber = Mock()

        sm.add_subscriber(subscriber)
        sm.add_subscriber(subscriber)
        assert sm.subscribers == [subscriber]

        sm.remove_subscriber(subscriber)
        assert sm.subscribers == []

    def test_emit(self):
        """Subscribers receive emitted events."""
        sm = StreamManager(run_id="run-1")
        subscriber = Mock()
        sm.add_subscriber(subscriber)

        sm.emit("run_start", "run", {"n_frames": 4})

        event = subscriber.call_args[0][0]
        assert event.event_type == "run_start"
        assert event.run_id == "run-1"
        assert event.data == {"n_frames": 4}

    def test_disabled(self):
        """A disabled manager emits nothing."""
        sm = StreamManager(run_id="run-1", enabled=False)
        subscriber = Mock()
        sm.add_subscriber(subscriber)

        sm.emit("run_start", "run", {})
        subscriber.assert_not_called()

    def test_level_filter(self):
        """Events below the configured level are dropped."""
        sm = StreamManager(run_id="run-1", log_level="warning")
        subscriber = Mock()
        sm.add_subscriber(subscriber)

        sm.emit_log("edc", "quiet", level="info")
        sm.emit_start("edc.receive")
        sm.emit_log("edc", "loud", level="warning")

        assert subscriber.call_count == 1
        assert subscriber.call_args[0][0].data["message"] == "loud"

    def test_progress_throttle(self):
        """Rapid progress events of a stage are throttled, the final one always passes."""
        sm = StreamManager(run_id="run-1", throttle_ms=10_000)
        subscriber = Mock()
        sm.add_subscriber(subscriber)

        sm.emit_progress("frames", 0.1)
        sm.emit_progress("frames", 0.2)
        sm.emit_progress("other", 0.2)
        sm.emit_progress("frames", 1.0)

        progress = [call[0][0].data["progress"] for call in subscriber.call_args_list]
        assert progress == [0.1, 0.2, 1.0]

    def test_emit_error_with_library_error(self):
        """Library errors carry their code in the event."""
        sm = StreamManager(run_id="run-1")
        subscriber = Mock()
        sm.add_subscriber(subscriber)

        sm.emit_error("so.transmit", ParameterError("bad epsilon"))

        event = subscriber.call_args[0][0]
        assert event.event_type == "stage_error"
        assert event.data["code"] == "parameter_error"
        assert event.data["type"] == "ParameterError"

    def test_emit_error_with_message(self):
        """Plain messages become generic errors."""
        sm = StreamManager(run_id="run-1")
        subscriber = Mock()
        sm.add_subscriber(subscriber)

        sm.emit_error("run", "went wrong")
        assert subscriber.call_args[0][0].data == {"message": "went wrong", "type": "Error"}

    def test_broken_subscriber_does_not_abort(self, capsys):
        """A failing subscriber is reported and the others still run."""
        sm = StreamManager(run_id="run-1")
        broken = Mock(side_effect=RuntimeError("boom"))
        healthy = Mock()
        sm.add_subscriber(broken)
        sm.add_subscriber(healthy)

        sm.emit("run_start", "run", {})

        healthy.assert_called_once()
        assert "Error in event subscriber: boom" in capsys.readouterr().err

    def test_clear(self):
        """Test clearing subscribers and throttle state."""
        sm = StreamManager(run_id="run-1")
        sm.add_subscriber(Mock())
        sm.emit_progress("frames", 0.5)

        sm.clear()
        assert sm.subscribers == []
        assert sm._last_event_time == {}
