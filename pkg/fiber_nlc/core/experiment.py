"""Experiment execution engine: techniques x launch powers x frames."""

import time
import uuid
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple

from fiber_nlc.core.config import Config
from fiber_nlc.core.context import RunContext
from fiber_nlc.core.errors import ExperimentError, FiberNlcError, RuntimeExceededError
from fiber_nlc.core.stream import RunEvent, StreamManager
from fiber_nlc.core.technique import LinkSetup, Technique
from fiber_nlc.receiver.metrics import MetricsRow, combine_rows


@dataclass(frozen=True)
class FrameOutcome:
    """Metrics of one frame plus its uncapped SNR for averaging."""

    row: MetricsRow
    snr_db: float


FrameRunner = Callable[[Technique, LinkSetup, int, RunContext], FrameOutcome]
SetupFactory = Callable[[float], LinkSetup]


class Experiment:
    """Experiment execution engine.

    This class is responsible for:
    - Preparing every technique for the link
    - Running every (technique, launch power, frame) on the worker pool
    - Combining frames into one result row per technique and launch power
    - Streaming run events and enforcing the runtime limit
    """

    def __init__(
        self,
        techniques: Sequence[Technique],
        setup_factory: SetupFactory,
        frame_runner: FrameRunner,
        config: Optional[Config] = None,
        run_id: Optional[str] = None,
        context: Optional[RunContext] = None,
    ):
        """Initialize a new Experiment.

        Args:
            techniques: Techniques to compare
            setup_factory: Builds the link setup of a launch power in dBm
            frame_runner: Simulates one frame of one technique
            config: Configuration instance (default: defaults only)
            run_id: Run identifier (default: a new UUID)
            context: Existing context to share resources with

        Raises:
            ExperimentError: If no technique is given or labels repeat
        """
        if not techniques:
            raise ExperimentError("Experiment needs at least one technique")
        labels = [t.id for t in techniques]
        if len(set(labels)) != len(labels):
            raise ExperimentError(f"Duplicate technique labels: {labels}")

        self.techniques = list(techniques)
        self.setup_factory = setup_factory
        self.frame_runner = frame_runner

        if context is not None:
            self.context = context
            self.config = context.config
            self.run_id = context.run_id
        else:
            self.config = config or Config.from_overrides()
            self.run_id = run_id or str(uuid.uuid4())
            self.context = RunContext(run_id=self.run_id, config=self.config)
        self.stream_manager: StreamManager = self.context.get_stream_manager()

    def add_subscriber(self, subscriber: Callable[[RunEvent], None]) -> None:
        """Add a subscriber to receive run events."""
        self.stream_manager.add_subscriber(subscriber)

    def remove_subscriber(self, subscriber: Callable[[RunEvent], None]) -> None:
        """Remove a subscriber."""
        self.stream_manager.remove_subscriber(subscriber)

    def execute(self, launch_powers_dbm: Sequence[float], n_frames: int) -> List[MetricsRow]:
        """Run every technique at every launch power.

        Args:
            launch_powers_dbm: Launch power grid
            n_frames: Independent frames per point

        Returns:
            One row per (technique, launch power), techniques in the order given
            and powers in grid order

        Raises:
            ExperimentError: If the grid is empty, a technique fails or the run
                exceeds ``runtime.max_runtime_seconds``
        """
        powers = [float(p) for p in launch_powers_dbm]
        if not powers:
            raise ExperimentError("Launch power grid is empty")
        if n_frames < 1:
            raise ExperimentError(f"n_frames must be at least 1, got {n_frames}")

        self.stream_manager.emit(
            event_type="run_start",
            stage_id="run",
            data={
                "run_id": self.run_id,
                "techniques": [t.id for t in self.techniques],
                "launch_power_dbm": powers,
                "n_frames": n_frames,
            },
        )

        try:
            start_time = time.time()
            max_runtime = self.context.get_max_runtime_seconds()
            setups = {power: self.setup_factory(power) for power in powers}

            for technique in self.techniques:
                self._guard(technique, lambda t=technique: t.prepare(setups[powers[0]], self.context))

            tasks: List[Tuple[int, float, int]] = [
                (i, power, frame)
                for i in range(len(self.techniques))
                for power in powers
                for frame in range(n_frames)
            ]

            def run(task: Tuple[int, float, int]) -> FrameOutcome:
                elapsed = time.time() - start_time
                if max_runtime and elapsed > max_runtime:
                    raise RuntimeExceededError(
                        f"Experiment exceeded maximum runtime of {max_runtime} seconds",
                        details={"elapsed_time": elapsed, "max_runtime": max_runtime},
                    )
                index, power, frame = task
                technique = self.techniques[index]
                return self._guard(
                    technique, lambda: self.frame_runner(technique, setups[power], frame, self.context)
                )

            outcomes = self.context.map(run, tasks, stage_id="frames")

            grouped: Dict[Tuple[int, float], List[FrameOutcome]] = {}
            for (index, power, _), outcome in zip(tasks, outcomes):
                grouped.setdefault((index, power), []).append(outcome)
            rows = [
                combine_rows([o.row for o in frames], [o.snr_db for o in frames])
                for frames in grouped.values()
            ]

            self.stream_manager.emit(
                event_type="run_complete",
                stage_id="run",
                data={
                    "run_id": self.run_id,
                    "execution_time": time.time() - start_time,
                    "rows": len(rows),
                },
            )
            return rows

        except Exception as e:
            self.stream_manager.emit(
                "run_error", "run", {"message": str(e), "type": e.__class__.__name__}, level="error"
            )
            if not isinstance(e, FiberNlcError):
                raise ExperimentError(
                    f"Experiment execution error: {e}",
                    details={"error_type": e.__class__.__name__},
                ) from e
            raise

    @staticmethod
    def _guard(technique: Technique, action: Callable[[], object]):
        """Run ``action`` and tag failures with the technique label."""
        try:
            return action()
        except FiberNlcError as e:
            if e.stage_id is None:
                e.stage_id = technique.id
            raise
        except Exception as e:
            raise ExperimentError(
                f"Error in technique {technique.id}: {e}",
                stage_id=technique.id,
                details={"error_type": e.__class__.__name__},
            ) from e
