"""Electronic dispersion compensation."""

from fiber_nlc.core.context import RunContext
from fiber_nlc.core.registry import register_technique
from fiber_nlc.core.technique import LinkSetup, Technique
from fiber_nlc.model.types import SampledField
from fiber_nlc.receiver.dsp import edc


@register_technique("edc")
class EdcTechnique(Technique):
    """Linear baseline: undo the accumulated dispersion of the whole link."""

    def receive(self, field: SampledField, setup: LinkSetup, context: RunContext) -> SampledField:
        return edc(field, setup.link, setup.link.total_length)
