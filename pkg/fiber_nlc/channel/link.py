"""Multi-span link: split-step spans followed by EDFAs."""

from typing import Optional

from fiber_nlc.channel.amplifier import NoiseModel, edfa
from fiber_nlc.channel.ssfm import SpanPlan, check_occupancy, ssfm_span
from fiber_nlc.model.types import LinkConfig, SampledField


def propagate_link(
    field: SampledField,
    link: LinkConfig,
    plan: SpanPlan,
    noise: NoiseModel,
    n_spans: Optional[int] = None,
) -> SampledField:
    """Propagate a field through the link.

    Args:
        field: Launched field
        link: Link parameters
        plan: Step layout of every span
        noise: ASE settings; one generator seeded from ``noise.seed`` feeds all spans
        n_spans: Span count override (default: ``link.n_spans``; 0 returns the input)

    Returns:
        Field after the last amplifier
    """
    spans = link.n_spans if n_spans is None else int(n_spans)
    if spans <= 0:
        return field
    check_occupancy(field)
    rng = noise.generator()
    for span in range(spans):
        field = ssfm_span(field, link, plan, span_index=span, check=False)
        field = edfa(field, link, noise, rng)
    return field
