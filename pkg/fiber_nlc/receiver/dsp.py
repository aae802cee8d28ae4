"""Receiver chain: dispersion compensation, back-propagation, matched filter, detection."""

import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy import signal

from fiber_nlc.channel.ssfm import SpanPlan, ssfm_span
from fiber_nlc.core.errors import LengthError, ParameterError
from fiber_nlc.model.modulation import labels_to_bits, nearest_labels, qam16_constellation
from fiber_nlc.model.shaping import upsample
from fiber_nlc.model.types import Constellation, LinkConfig, SampledField, SymbolGrid


@dataclass(frozen=True)
class DbpConfig:
    """Back-propagation settings."""

    steps_per_span: int = 1
    samples_per_symbol: int = 2

    def __post_init__(self) -> None:
        if int(self.steps_per_span) != self.steps_per_span or self.steps_per_span < 1:
            raise ParameterError(f"steps_per_span must be an integer >= 1, got {self.steps_per_span}")
        if self.samples_per_symbol < 2:
            raise ParameterError(f"samples_per_symbol must be at least 2, got {self.samples_per_symbol}")


def edc(field: SampledField, link: LinkConfig, total_length: float) -> SampledField:
    """Undo the accumulated chromatic dispersion of ``total_length`` meters."""
    if total_length == 0:
        return field
    w = field.angular_frequency()
    response = np.exp(-0.5j * link.beta2 * w**2 * total_length)
    spectrum = np.fft.fft(np.vstack([field.x, field.y]), axis=-1) * response
    u = np.fft.ifft(spectrum, axis=-1)
    return field.with_arrays(u[0], u[1])


def inverse_link(link: LinkConfig) -> LinkConfig:
    """Link with negated loss, dispersion and nonlinearity."""
    return link.with_params(alpha=-link.alpha, beta2=-link.beta2, gamma=-link.gamma)


def dbp(
    field: SampledField, link: LinkConfig, cfg: DbpConfig, n_spans: Optional[int] = None
) -> SampledField:
    """Digital back-propagation through the link.

    Spans are undone in reverse order: the amplifier gain is removed, then the
    span is propagated with negated parameters. The received field carries
    in-band noise up to its Nyquist edge, so no occupancy check is made.

    Args:
        field: Received field at ``cfg.samples_per_symbol``
        link: Forward link parameters
        cfg: Back-propagation settings
        n_spans: Span count override (default: ``link.n_spans``)

    Returns:
        Back-propagated field
    """
    spans = link.n_spans if n_spans is None else int(n_spans)
    backward = inverse_link(link)
    plan = SpanPlan.from_steps(link.span_length, cfg.steps_per_span)
    inverse_gain = 1.0 / math.sqrt(link.span_gain)
    for span in reversed(range(spans)):
        field = field.scaled(inverse_gain)
        field = ssfm_span(field, backward, plan, span_index=span, check=False)
    return field


def matched_filter_downsample(
    field: SampledField, taps: np.ndarray, samples_per_symbol: int, delay: Optional[int] = None
) -> SymbolGrid:
    """Filter with the matched taps and pick one sample per symbol.

    Args:
        field: Field shaped by :func:`fiber_nlc.model.shaping.shape` with the same taps
        taps: Matched filter taps at the field's rate
        samples_per_symbol: Oversampling factor of the field
        delay: Sample index of the first symbol after filtering
            (default: ``len(taps) - 1``, the combined delay of both filters)

    Returns:
        Symbol grid aligned with the transmit slots
    """
    taps = np.asarray(taps, dtype=float)
    n_symbols = (len(field) - len(taps) + 1) // samples_per_symbol
    if n_symbols <= 0:
        raise LengthError(f"Field of {len(field)} samples is shorter than the filter")
    delay = len(taps) - 1 if delay is None else int(delay)
    x = np.convolve(field.x, taps)[delay::samples_per_symbol][:n_symbols]
    y = np.convolve(field.y, taps)[delay::samples_per_symbol][:n_symbols]
    if x.size < n_symbols:
        raise LengthError(f"Delay {delay} leaves {x.size} of {n_symbols} symbols")
    return SymbolGrid(x, y, field.sample_rate / samples_per_symbol)


def estimate_delay(
    field: SampledField, taps: np.ndarray, samples_per_symbol: int, reference: SymbolGrid
) -> int:
    """Sample lag of the filtered field against known symbols (correlation peak)."""
    taps = np.asarray(taps, dtype=float)
    score = None
    for received, known in ((field.x, reference.x), (field.y, reference.y)):
        filtered = np.convolve(received, taps)
        corr = signal.correlate(filtered, upsample(known, samples_per_symbol), mode="full", method="fft")
        score = np.abs(corr) if score is None else score + np.abs(corr)
    lags = signal.correlation_lags(len(field) + len(taps) - 1, len(reference) * samples_per_symbol, mode="full")
    return int(lags[int(np.argmax(score))])


def known_data_gain(received: SymbolGrid, transmitted: SymbolGrid) -> np.ndarray:
    """Least-squares complex gain per polarization mapping received onto transmitted."""
    if len(received) != len(transmitted):
        raise LengthError(f"Grids differ in length: {len(received)} vs {len(transmitted)}")
    gains = np.empty(2, dtype=np.complex128)
    for i, (rx, tx) in enumerate(((received.x, transmitted.x), (received.y, transmitted.y))):
        energy = np.vdot(rx, rx).real
        gains[i] = np.vdot(rx, tx) / energy if energy > 0 else 1.0
    return gains


def apply_gain(grid: SymbolGrid, gains: np.ndarray) -> SymbolGrid:
    return grid.with_arrays(grid.x * gains[0], grid.y * gains[1])


def normalize_power(grid: SymbolGrid) -> SymbolGrid:
    """Blind scalar normalization to unit average energy per polarization."""
    energy = np.mean(np.abs(grid.x) ** 2 + np.abs(grid.y) ** 2) / 2.0
    if energy == 0:
        return grid
    return grid.scaled(1.0 / np.sqrt(energy))


def ml_detect(
    received: SymbolGrid, constellation: Optional[Constellation] = None
) -> Tuple[SymbolGrid, np.ndarray]:
    """Nearest-point decisions per symbol and polarization.

    Returns:
        Decided symbols and a ``(2, bits_per_symbol * K)`` bit array
    """
    constellation = constellation or qam16_constellation()
    labels_x = nearest_labels(received.x, constellation)
    labels_y = nearest_labels(received.y, constellation)
    decided = received.with_arrays(constellation.points[labels_x], constellation.points[labels_y])
    bits = np.vstack(
        [
            labels_to_bits(labels_x, constellation.bits_per_symbol),
            labels_to_bits(labels_y, constellation.bits_per_symbol),
        ]
    )
    return decided, bits
