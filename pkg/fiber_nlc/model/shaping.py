"""Root-raised-cosine pulse shaping and spectral resampling."""

import numpy as np
from scipy import signal

from fiber_nlc.core.errors import LengthError, ParameterError
from fiber_nlc.model.types import SampledField, SymbolGrid

MIN_SPAN_SYMBOLS = 8


def rrc_taps(rolloff: float, span_symbols: int, samples_per_symbol: int) -> np.ndarray:
    """Root-raised-cosine filter taps.

    The filter covers ``span_symbols`` symbol periods with the peak at the
    center tap and is normalized to unit energy.

    Args:
        rolloff: Roll-off factor in [0, 1]
        span_symbols: Number of symbol periods covered by the filter
        samples_per_symbol: Oversampling factor

    Returns:
        Real tap array of length ``span_symbols * samples_per_symbol + 1``

    Raises:
        ParameterError: If any argument is out of range
    """
    if not 0.0 <= rolloff <= 1.0:
        raise ParameterError(f"Roll-off must lie in [0, 1], got {rolloff}")
    if span_symbols < MIN_SPAN_SYMBOLS:
        raise ParameterError(f"Filter span must be at least {MIN_SPAN_SYMBOLS} symbols, got {span_symbols}")
    if samples_per_symbol < 2:
        raise ParameterError(f"samples_per_symbol must be at least 2, got {samples_per_symbol}")

    n_taps = span_symbols * samples_per_symbol + 1
    t = (np.arange(n_taps) - (n_taps - 1) / 2) / samples_per_symbol
    beta = rolloff
    taps = np.empty(n_taps)

    center = np.isclose(t, 0.0)
    if beta > 0:
        singular = np.isclose(np.abs(t), 1.0 / (4.0 * beta)) & ~center
    else:
        singular = np.zeros(n_taps, dtype=bool)
    regular = ~(center | singular)

    taps[center] = 1.0 + beta * (4.0 / np.pi - 1.0)
    if singular.any():
        taps[singular] = (
            beta
            * ((1.0 + 2.0 / np.pi) * np.sin(np.pi / (4.0 * beta)) + (1.0 - 2.0 / np.pi) * np.cos(np.pi / (4.0 * beta)))
            / np.sqrt(2.0)
        )
    tr = t[regular]
    taps[regular] = (
        np.sin(np.pi * tr * (1.0 - beta)) + 4.0 * beta * tr * np.cos(np.pi * tr * (1.0 + beta))
    ) / (np.pi * tr * (1.0 - (4.0 * beta * tr) ** 2))

    return taps / np.sqrt(np.sum(taps**2))


def upsample(symbols: np.ndarray, samples_per_symbol: int) -> np.ndarray:
    """Insert ``samples_per_symbol - 1`` zeros after every symbol."""
    train = np.zeros(len(symbols) * samples_per_symbol, dtype=np.complex128)
    train[::samples_per_symbol] = symbols
    return train


def shape(symbols: SymbolGrid, taps: np.ndarray, samples_per_symbol: int) -> SampledField:
    """Pulse-shape both polarizations of a symbol grid.

    The output is the full linear convolution of the upsampled symbols with
    the taps, so symbol ``k`` peaks at sample ``k * sps + (len(taps) - 1) / 2``.

    Args:
        symbols: Symbol grid
        taps: Unit-energy filter taps
        samples_per_symbol: Oversampling factor

    Returns:
        Field at ``symbol_rate * samples_per_symbol``
    """
    if samples_per_symbol < 1:
        raise ParameterError(f"samples_per_symbol must be positive, got {samples_per_symbol}")
    taps = np.asarray(taps, dtype=float)
    x = np.convolve(upsample(symbols.x, samples_per_symbol), taps)
    y = np.convolve(upsample(symbols.y, samples_per_symbol), taps)
    return SampledField(x, y, symbols.symbol_rate * samples_per_symbol)


def resample(field: SampledField, samples_per_symbol: int, symbol_rate: float) -> SampledField:
    """Band-limited resampling of a field to a new oversampling factor.

    Args:
        field: Input field
        samples_per_symbol: Target oversampling factor
        symbol_rate: Symbol rate the field was shaped at

    Returns:
        Field at ``symbol_rate * samples_per_symbol``

    Raises:
        LengthError: If the field length does not map to a whole number of samples
    """
    current = field.sample_rate / symbol_rate
    if np.isclose(current, samples_per_symbol):
        return field
    n_out = len(field) * samples_per_symbol / current
    if not np.isclose(n_out, round(n_out)):
        raise LengthError(
            f"Cannot resample {len(field)} samples from {current:g} to {samples_per_symbol} samples per symbol"
        )
    n_out = int(round(n_out))
    x = signal.resample(field.x, n_out)
    y = signal.resample(field.y, n_out)
    return SampledField(x, y, symbol_rate * samples_per_symbol, field.center_time_offset)
