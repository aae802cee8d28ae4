"""Digital back-propagation."""

from typing import Any, Dict

from fiber_nlc.complexity import ComplexityParams, mult_dbp
from fiber_nlc.core.context import RunContext
from fiber_nlc.core.registry import register_technique
from fiber_nlc.core.technique import LinkSetup, Technique
from fiber_nlc.model.types import SampledField
from fiber_nlc.receiver.dsp import DbpConfig, dbp


@register_technique("dbp")
class DbpTechnique(Technique):
    """Back-propagate the received field through the link with negated parameters.

    Config:
        steps_per_span: Split steps per span (default 1)
        n_fft: FFT size charged in the complexity count
        n_samples: New samples per FFT block in the complexity count
    """

    def __init__(self, technique_id: str, config: Dict[str, Any]):
        super().__init__(technique_id, config)
        self.steps_per_span = int(config.get("steps_per_span", 1))
        self.n_fft = int(config.get("n_fft", 4096))
        self.n_samples = int(config.get("n_samples", 4096))

    def receive(self, field: SampledField, setup: LinkSetup, context: RunContext) -> SampledField:
        cfg = DbpConfig(steps_per_span=self.steps_per_span, samples_per_symbol=setup.rx_samples_per_symbol)
        return dbp(field, setup.link, cfg)

    def mults_per_symbol(self, setup: LinkSetup, context: RunContext) -> float:
        return mult_dbp(
            ComplexityParams(
                n_steps=self.steps_per_span,
                n_spans=setup.n_spans,
                n_fft=self.n_fft,
                n_samples=self.n_samples,
            )
        )
