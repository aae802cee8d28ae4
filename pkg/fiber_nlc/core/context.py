"""Execution context shared by the stages of a run."""

import threading
from concurrent.futures import ThreadPoolExecutor
from typing import Any, Callable, Dict, List, Optional, Sequence, TypeVar

from fiber_nlc.core.config import Config
from fiber_nlc.core.stream import StreamManager

T = TypeVar("T")
R = TypeVar("R")


class RunContext:
    """Execution context for one run.

    This class provides access to:
    - Configuration
    - The stream manager for events and logging
    - Shared resources (loaded coefficient tables, filter taps) keyed by name
    - A deterministic parallel map over independent work items
    """

    def __init__(
        self,
        run_id: str,
        config: Config,
        stream_manager: Optional[StreamManager] = None,
        resources: Optional[Dict[str, Any]] = None,
    ):
        """Initialize a new RunContext.

        Args:
            run_id: ID of the run being executed
            config: Configuration instance
            stream_manager: Stream manager for event emission
            resources: Initial shared resources
        """
        self.run_id = run_id
        self.config = config
        self._resources: Dict[str, Any] = dict(resources or {})
        self._lock = threading.Lock()

        if stream_manager is None:
            self._stream_manager = StreamManager(
                run_id=run_id,
                log_level=config.get("log_level", "info"),
                throttle_ms=config.get("runtime.throttle_ms", 100),
            )
        else:
            self._stream_manager = stream_manager

    def get_stream_manager(self) -> StreamManager:
        """Get the stream manager."""
        return self._stream_manager

    def get_resource(self, key: str, default: Any = None) -> Any:
        """Get a shared resource.

        Args:
            key: The resource name
            default: Default value to return if the resource is missing

        Returns:
            The resource, or the default value if not found
        """
        with self._lock:
            return self._resources.get(key, default)

    def set_resource(self, key: str, value: Any) -> None:
        """Set a shared resource."""
        with self._lock:
            self._resources[key] = value

    def get_or_create_resource(self, key: str, factory: Callable[[], Any]) -> Any:
        """Return a shared resource, building it once with ``factory`` if missing."""
        with self._lock:
            if key not in self._resources:
                self._resources[key] = factory()
            return self._resources[key]

    def get_workers(self) -> int:
        """Get the configured worker count."""
        return max(1, int(self.config.get("runtime.workers", 1)))

    def get_max_runtime_seconds(self) -> float:
        """Get the maximum run time in seconds (0 disables the check)."""
        return float(self.config.get("runtime.max_runtime_seconds", 0) or 0)

    def map(
        self,
        fn: Callable[[T], R],
        items: Sequence[T],
        stage_id: Optional[str] = None,
    ) -> List[R]:
        """Apply ``fn`` to every item on the worker pool.

        Results are returned in item order regardless of completion order.

        Args:
            fn: Function applied to each item
            items: Work items
            stage_id: When given, progress events are emitted under this id

        Returns:
            List of results aligned with ``items``
        """
        workers = self.get_workers()
        results: List[Any] = [None] * len(items)
        if workers == 1 or len(items) <= 1:
            for i, item in enumerate(items):
                results[i] = fn(item)
                if stage_id:
                    self.report_progress(stage_id, (i + 1) / len(items))
            return results

        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = {pool.submit(fn, item): i for i, item in enumerate(items)}
            done = 0
            for future, index in futures.items():
                results[index] = future.result()
                done += 1
                if stage_id:
                    self.report_progress(stage_id, done / len(items))
        return results

    def report_progress(self, stage_id: str, progress: float, message: Optional[str] = None) -> None:
        """Report progress of a stage to the stream."""
        if 0 <= progress <= 1:
            self._stream_manager.emit_progress(stage_id, progress, message)

    def log(self, stage_id: str, message: str, level: str = "info") -> None:
        """Log a message to the stream.

        Args:
            stage_id: ID of the stage
            message: The message
            level: Log level (debug, info, warning, error)
        """
        self._stream_manager.emit_log(stage_id, message, level)

    def clone(self) -> "RunContext":
        """Create a clone of this context sharing config and stream."""
        return RunContext(
            run_id=self.run_id,
            config=self.config,
            stream_manager=self._stream_manager,
            resources=dict(self._resources),
        )
