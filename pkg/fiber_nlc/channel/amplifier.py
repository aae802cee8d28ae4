"""Lumped EDFA with amplified spontaneous emission."""

import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
from scipy import constants

from fiber_nlc.core.errors import ParameterError
from fiber_nlc.model.types import LinkConfig, SampledField, db_to_linear

Seed = Union[int, np.random.SeedSequence]


@dataclass(frozen=True)
class NoiseModel:
    """ASE settings of the in-line amplifiers."""

    noise_figure_db: float
    center_frequency: float
    seed: Seed = 0
    enabled: bool = True

    def __post_init__(self) -> None:
        if not math.isfinite(self.noise_figure_db):
            raise ParameterError(f"noise_figure_db must be finite, got {self.noise_figure_db}")
        if not self.center_frequency > 0:
            raise ParameterError(f"center_frequency must be positive, got {self.center_frequency}")

    @classmethod
    def for_link(cls, link: LinkConfig, seed: Seed = 0, enabled: bool = True) -> "NoiseModel":
        return cls(link.noise_figure_db, link.center_frequency, seed, enabled)

    def ase_power(self, gain: float, sample_rate: float) -> float:
        """ASE power per polarization over the simulation bandwidth, in W."""
        if not self.enabled:
            return 0.0
        nsp = db_to_linear(self.noise_figure_db) / 2.0
        return nsp * constants.h * self.center_frequency * (gain - 1.0) * sample_rate

    def generator(self) -> np.random.Generator:
        return np.random.default_rng(self.seed)


def edfa(
    field: SampledField,
    link: LinkConfig,
    noise: NoiseModel,
    rng: Optional[np.random.Generator] = None,
) -> SampledField:
    """Amplify a field by the span loss and add ASE.

    Args:
        field: Field at the span output
        link: Link whose span loss sets the gain
        noise: ASE settings
        rng: Noise generator (default: a fresh one from ``noise.seed``)

    Returns:
        Amplified field
    """
    gain = link.span_gain
    amplitude = math.sqrt(gain)
    x = field.x * amplitude
    y = field.y * amplitude
    power = noise.ase_power(gain, field.sample_rate)
    if power > 0.0:
        rng = rng or noise.generator()
        sigma = math.sqrt(power / 2.0)
        n = len(field)
        x = x + sigma * (rng.standard_normal(n) + 1j * rng.standard_normal(n))
        y = y + sigma * (rng.standard_normal(n) + 1j * rng.standard_normal(n))
    return field.with_arrays(x, y)
