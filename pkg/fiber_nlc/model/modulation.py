"""16-QAM mapping with the rectangular Gray labeling."""

from functools import lru_cache
from typing import Optional

import numpy as np

from fiber_nlc.core.errors import LengthError
from fiber_nlc.model.types import Constellation

BITS_PER_SYMBOL = 4

# Two Gray-coded bits per rail: 00 -> -3, 01 -> -1, 11 -> +1, 10 -> +3
_GRAY_LEVELS = {0b00: -3.0, 0b01: -1.0, 0b11: 1.0, 0b10: 3.0}


@lru_cache(maxsize=None)
def qam16_constellation() -> Constellation:
    """The unit-energy 16-QAM alphabet.

    The first two bits of a label select the in-phase level, the last two the
    quadrature level.
    """
    scale = np.sqrt(3.0 / (2.0 * (16 - 1)))
    points = np.empty(16, dtype=np.complex128)
    for label in range(16):
        i_level = _GRAY_LEVELS[label >> 2]
        q_level = _GRAY_LEVELS[label & 0b11]
        points[label] = scale * (i_level + 1j * q_level)
    return Constellation(points=points, bits_per_symbol=BITS_PER_SYMBOL)


def _bits_to_labels(bits: np.ndarray, bits_per_symbol: int) -> np.ndarray:
    bits = np.asarray(bits).astype(np.int64).ravel()
    if bits.size % bits_per_symbol:
        raise LengthError(
            f"Bit count {bits.size} is not a multiple of {bits_per_symbol}",
            details={"bit_count": int(bits.size)},
        )
    groups = bits.reshape(-1, bits_per_symbol)
    weights = 1 << np.arange(bits_per_symbol - 1, -1, -1)
    return groups @ weights


def labels_to_bits(labels: np.ndarray, bits_per_symbol: int = BITS_PER_SYMBOL) -> np.ndarray:
    """Expand integer labels into a flat MSB-first bit array."""
    labels = np.asarray(labels, dtype=np.int64)
    shifts = np.arange(bits_per_symbol - 1, -1, -1)
    return ((labels[:, None] >> shifts[None, :]) & 1).astype(np.uint8).ravel()


def qam16_map(bits: np.ndarray, constellation: Optional[Constellation] = None) -> np.ndarray:
    """Map a bit sequence to 16-QAM symbols for one polarization.

    Args:
        bits: Bit sequence whose length is a multiple of 4
        constellation: Alphabet to use (default: :func:`qam16_constellation`)

    Returns:
        Complex symbol array of length ``len(bits) // 4``

    Raises:
        LengthError: If the bit count is not a multiple of 4
    """
    constellation = constellation or qam16_constellation()
    labels = _bits_to_labels(bits, constellation.bits_per_symbol)
    return constellation.points[labels]


def nearest_labels(symbols: np.ndarray, constellation: Optional[Constellation] = None) -> np.ndarray:
    """Label of the closest constellation point for every symbol."""
    constellation = constellation or qam16_constellation()
    symbols = np.asarray(symbols, dtype=np.complex128)
    distances = np.abs(symbols[:, None] - constellation.points[None, :])
    return np.argmin(distances, axis=1)


def qam16_demap(symbols: np.ndarray, constellation: Optional[Constellation] = None) -> np.ndarray:
    """Hard-decision demapping of symbols back to bits."""
    constellation = constellation or qam16_constellation()
    return labels_to_bits(nearest_labels(symbols, constellation), constellation.bits_per_symbol)


def random_bits(n_bits: int, rng: np.random.Generator) -> np.ndarray:
    """Draw ``n_bits`` uniform bits."""
    return rng.integers(0, 2, size=n_bits, dtype=np.uint8)
