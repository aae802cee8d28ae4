"""Base Technique class for the nonlinearity compensation experiments."""

import time
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Any, Dict, Optional

import numpy as np

from fiber_nlc.core.context import RunContext
from fiber_nlc.core.errors import ConfigurationError, NumericDomainError, RuntimeExceededError
from fiber_nlc.model.types import LinkConfig, PulseParams, SampledField, SymbolGrid

TRANSMIT = "transmit"
RECEIVE = "receive"


@dataclass(frozen=True)
class LinkSetup:
    """Everything a technique needs to know about the link it runs on.

    ``pulse.P0`` is the Gaussian model peak power of the launch power.
    """

    link: LinkConfig
    pulse: PulseParams
    launch_power_dbm: float
    samples_per_symbol: int
    rx_samples_per_symbol: int = 2
    extras: Dict[str, Any] = field(default_factory=dict)

    @property
    def n_spans(self) -> int:
        return self.link.n_spans


class Technique(ABC):
    """Abstract base class for all compensation techniques.

    A technique may reshape the transmit symbols (predistortion) and must
    equalize the received field (dispersion compensation or
    back-propagation). Both steps run through :meth:`execute`, which emits
    stage events and checks the result.
    """

    def __init__(self, technique_id: str, config: Dict[str, Any]):
        """Initialize a new Technique.

        Args:
            technique_id: Label of this technique instance, used in result rows
            config: Technique configuration
        """
        self.id = technique_id
        self.config = config

        # Per-step limit in seconds, 0 disables it
        self.timeout = config.get("timeout_seconds", 0)

    def execute(self, step: str, data: Any, setup: LinkSetup, context: RunContext) -> Any:
        """Run one step of the technique.

        This method handles the execution lifecycle:
        1. Emit start event
        2. Validate the input
        3. Run the step
        4. Validate the output
        5. Emit complete event

        Args:
            step: ``"transmit"`` or ``"receive"``
            data: Symbols for transmit, sampled field for receive
            setup: Link parameters of the run
            context: Execution context

        Returns:
            The step output

        Raises:
            NumericDomainError: If the input or output holds non-finite samples
            RuntimeExceededError: If the step exceeded its time limit
        """
        stream = context.get_stream_manager()
        stage_id = f"{self.id}.{step}"
        stream.emit_start(stage_id, {"launch_power_dbm": setup.launch_power_dbm, "n_spans": setup.n_spans})

        try:
            self.validate_input(data, stage_id)

            start_time = time.time()
            if step == TRANSMIT:
                result = self.transmit(data, setup, context)
            else:
                result = self.receive(data, setup, context)

            execution_time = time.time() - start_time
            if self.timeout and execution_time > self.timeout:
                raise RuntimeExceededError(
                    f"Technique step exceeded its limit of {self.timeout} seconds",
                    stage_id=stage_id,
                    details={"execution_time": execution_time, "timeout": self.timeout},
                )

            self.validate_output(result, stage_id)
            stream.emit_complete(stage_id, {"execution_time": execution_time})
            return result

        except Exception as e:
            stream.emit_error(stage_id, e)
            raise

    def prepare(self, setup: LinkSetup, context: RunContext) -> None:
        """Load resources for a link before any frame runs.

        Default implementation does nothing.
        """

    def transmit(self, symbols: SymbolGrid, setup: LinkSetup, context: RunContext) -> SymbolGrid:
        """Transform the transmit symbols; the default passes them through."""
        return symbols

    @abstractmethod
    def receive(self, field: SampledField, setup: LinkSetup, context: RunContext) -> SampledField:
        """Equalize the received field.

        Args:
            field: Received field at ``setup.rx_samples_per_symbol``
            setup: Link parameters of the run
            context: Execution context

        Returns:
            Equalized field on the same grid
        """

    def mults_per_symbol(self, setup: LinkSetup, context: RunContext) -> float:
        """Real multiplications per symbol charged to this technique."""
        return 0.0

    def validate_input(self, data: Any, stage_id: str) -> None:
        """Reject non-finite samples."""
        _check_finite(data, stage_id, "input")

    def validate_output(self, data: Any, stage_id: str) -> None:
        """Reject non-finite samples."""
        _check_finite(data, stage_id, "output")

    def get_description(self) -> str:
        """Get a description of this technique."""
        return self.__doc__ or "No description available"

    def report_progress(self, context: RunContext, progress: float, message: Optional[str] = None) -> None:
        context.report_progress(self.id, progress, message)

    def log(self, context: RunContext, message: str, level: str = "info") -> None:
        context.log(self.id, message, level)


def _check_finite(data: Any, stage_id: str, where: str) -> None:
    arrays = [data.x, data.y] if hasattr(data, "x") and hasattr(data, "y") else []
    for array in arrays:
        if not np.all(np.isfinite(array)):
            raise NumericDomainError(f"Non-finite samples in technique {where}", stage_id=stage_id)


class TechniqueFactory:
    """Factory for creating technique instances."""

    @staticmethod
    def create_technique(technique_type: str, technique_id: str, config: Dict[str, Any]) -> Technique:
        """Create a technique instance.

        Args:
            technique_type: The registered type name
            technique_id: Label of the instance
            config: Technique configuration

        Returns:
            A new Technique instance

        Raises:
            ConfigurationError: If the type is not registered
        """
        from fiber_nlc.core.registry import TechniqueRegistry

        technique_class = TechniqueRegistry.get(technique_type)
        return technique_class(technique_id, config)

    @staticmethod
    def parse_label(label: str) -> Dict[str, Any]:
        """Split a technique label into its type and settings.

        ``"dbp-4"`` is back-propagation with 4 steps per span; other labels
        are plain type names.
        """
        label = label.strip().lower()
        if label.startswith("dbp-"):
            steps = label[4:]
            if not steps.isdigit() or int(steps) < 1:
                raise ConfigurationError(f"Invalid DBP label: {label}; expected dbp-<steps per span>")
            return {"type": "dbp", "steps_per_span": int(steps)}
        return {"type": label}
