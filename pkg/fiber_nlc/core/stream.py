"""Event stream used for progress reporting and logging during runs."""

import json
import sys
import threading
import time
from typing import Any, Callable, Dict, List, Optional, Union

from fiber_nlc.core.errors import FiberNlcError

LOG_LEVELS = {"debug": 0, "info": 1, "warning": 2, "error": 3}


class RunEvent:
    """Represents one event emitted while a run executes.

    Attributes:
        event_type: Type of the event (e.g., stage_start, progress, stage_complete)
        run_id: ID of the run that generated the event
        stage_id: ID of the stage (technique, table build, sweep point) that generated it
        timestamp: Unix timestamp when the event was generated
        data: Additional event data
    """

    def __init__(
        self,
        event_type: str,
        run_id: str,
        stage_id: str,
        data: Dict[str, Any],
        timestamp: Optional[float] = None,
    ):
        """Initialize a new RunEvent.

        Args:
            event_type: Type of the event
            run_id: ID of the run
            stage_id: ID of the stage
            data: Additional event data
            timestamp: Unix timestamp (default: current time)
        """
        self.event_type = event_type
        self.run_id = run_id
        self.stage_id = stage_id
        self.data = data
        self.timestamp = timestamp or time.time()

    def to_dict(self) -> Dict[str, Any]:
        """Convert the event to a dictionary.

        Returns:
            Dictionary representation of the event
        """
        return {
            "event_type": self.event_type,
            "run_id": self.run_id,
            "stage_id": self.stage_id,
            "timestamp": self.timestamp,
            "data": self.data,
        }

    def to_json(self) -> str:
        """Convert the event to a JSON string.

        Returns:
            JSON representation of the event
        """
        return json.dumps(self.to_dict(), default=str)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "RunEvent":
        """Create a RunEvent from a dictionary.

        Args:
            data: Dictionary representation of the event

        Returns:
            A new RunEvent instance
        """
        return cls(
            event_type=data["event_type"],
            run_id=data["run_id"],
            stage_id=data["stage_id"],
            data=data["data"],
            timestamp=data.get("timestamp"),
        )

    @classmethod
    def from_json(cls, json_str: str) -> "RunEvent":
        """Create a RunEvent from a JSON string."""
        return cls.from_dict(json.loads(json_str))


class StreamManager:
    """Fans run events out to subscribers.

    This class handles:
    - Emitting events while techniques, table builds and sweeps execute
    - Level filtering of log-like events
    - Throttling of high-rate progress events
    """

    def __init__(
        self,
        run_id: str,
        enabled: bool = True,
        log_level: str = "info",
        throttle_ms: int = 100,
    ):
        """Initialize a new StreamManager.

        Args:
            run_id: ID of the run being executed
            enabled: Whether events are emitted at all
            log_level: Minimum level to emit (debug, info, warning, error)
            throttle_ms: Minimum interval between progress events of the same stage
        """
        self.run_id = run_id
        self.enabled = enabled
        self.log_level = log_level
        self.throttle_ms = throttle_ms
        self.subscribers: List[Callable[[RunEvent], None]] = []

        self._last_event_time: Dict[str, float] = {}
        # Worker threads emit concurrently.
        self._lock = threading.Lock()

    def emit(
        self, event_type: str, stage_id: str, data: Dict[str, Any], level: str = "info"
    ) -> None:
        """Emit a run event.

        Args:
            event_type: Type of the event
            stage_id: ID of the stage that generated the event
            data: Additional event data
            level: Level of the event (debug, info, warning, error)
        """
        if not self.enabled:
            return

        if LOG_LEVELS.get(level, 0) < LOG_LEVELS.get(self.log_level, 1):
            return

        with self._lock:
            if event_type == "progress":
                key = f"{event_type}:{stage_id}"
                now = time.time()
                last = self._last_event_time.get(key)
                final = data.get("progress", 0.0) >= 1.0
                if last is not None and not final and (now - last) * 1000 < self.throttle_ms:
                    return
                self._last_event_time[key] = now

            event = RunEvent(
                event_type=event_type,
                run_id=self.run_id,
                stage_id=stage_id,
                data=data,
            )
            subscribers = list(self.subscribers)

        for subscriber in subscribers:
            try:
                subscriber(event)
            except Exception as e:
                # A broken subscriber must not abort the run
                sys.stderr.write(f"Error in event subscriber: {e}\n")

    def add_subscriber(self, subscriber: Callable[[RunEvent], None]) -> None:
        """Add a subscriber to receive run events.

        Args:
            subscriber: Callback function to receive events
        """
        if subscriber not in self.subscribers:
            self.subscribers.append(subscriber)

    def remove_subscriber(self, subscriber: Callable[[RunEvent], None]) -> None:
        """Remove a subscriber."""
        if subscriber in self.subscribers:
            self.subscribers.remove(subscriber)

    def emit_error(self, stage_id: str, error: Union[str, Exception]) -> None:
        """Emit an error event.

        Args:
            stage_id: ID of the stage that generated the error
            error: The error message or exception
        """
        if isinstance(error, Exception):
            error_data: Dict[str, Any] = {
                "message": str(error),
                "type": error.__class__.__name__,
            }
            if isinstance(error, FiberNlcError):
                error_data.update(error.to_dict())
        else:
            error_data = {"message": error, "type": "Error"}

        self.emit("stage_error", stage_id, error_data, level="error")

    def emit_start(self, stage_id: str, config: Optional[Dict[str, Any]] = None) -> None:
        """Emit a stage start event.

        Args:
            stage_id: ID of the stage that started
            config: Stage parameters worth recording
        """
        data: Dict[str, Any] = {"message": f"Starting {stage_id}"}
        if config:
            data["config"] = dict(config)
        self.emit("stage_start", stage_id, data, level="debug")

    def emit_progress(self, stage_id: str, progress: float, message: Optional[str] = None) -> None:
        """Emit a progress event.

        Args:
            stage_id: ID of the stage
            progress: Progress value between 0 and 1
            message: Optional short status message
        """
        data: Dict[str, Any] = {"progress": progress}
        if message is not None:
            data["message"] = message
        self.emit("progress", stage_id, data)

    def emit_complete(self, stage_id: str, result: Optional[Dict[str, Any]] = None) -> None:
        """Emit a stage completion event.

        Args:
            stage_id: ID of the stage
            result: Summary values of the stage, if any
        """
        data: Dict[str, Any] = {"message": f"{stage_id} completed"}
        if result is not None:
            data["result"] = result
        self.emit("stage_complete", stage_id, data, level="debug")

    def emit_log(self, stage_id: str, message: str, level: str = "info") -> None:
        """Emit a log event.

        Args:
            stage_id: ID of the stage
            message: Log message
            level: Log level
        """
        self.emit("log", stage_id, {"message": message, "level": level}, level=level)

    def clear(self) -> None:
        """Clear all subscribers and throttling state."""
        self.subscribers.clear()
        self._last_event_time.clear()
