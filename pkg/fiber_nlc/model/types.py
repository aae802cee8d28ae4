"""Domain types shared by the transmitter, channel and receiver.

All quantities are SI: seconds, meters, watts, 1/m for attenuation (power),
s^2/m for group velocity dispersion and 1/(W m) for the nonlinearity.
"""

import dataclasses
import math
from dataclasses import dataclass
from typing import Any, Dict, Mapping, Tuple

import numpy as np
from scipy import constants

from fiber_nlc.core.errors import LengthError, ParameterError

PS2_PER_KM = 1e-27  # s^2/m


def db_to_linear(value_db: float) -> float:
    """Convert a power ratio in dB to linear scale."""
    return 10.0 ** (value_db / 10.0)


def dbm_to_w(power_dbm: float) -> float:
    """Convert a power in dBm to watts."""
    return 1e-3 * 10.0 ** (power_dbm / 10.0)


def w_to_dbm(power_w: float) -> float:
    """Convert a power in watts to dBm."""
    return 10.0 * math.log10(power_w / 1e-3)


def alpha_from_db_per_km(alpha_db_per_km: float) -> float:
    """Convert a fiber loss in dB/km to a power attenuation coefficient in 1/m."""
    return alpha_db_per_km * math.log(10.0) / 10.0 / 1e3


@dataclass(frozen=True, eq=False)
class Constellation:
    """A labeled symbol alphabet.

    ``points[label]`` is the symbol for the integer label whose binary
    expansion (most significant bit first) is the bit pattern.
    """

    points: np.ndarray
    bits_per_symbol: int

    def __post_init__(self) -> None:
        points = np.asarray(self.points, dtype=np.complex128)
        object.__setattr__(self, "points", points)
        if points.size != 2 ** self.bits_per_symbol:
            raise ParameterError(
                f"{points.size} points cannot carry {self.bits_per_symbol} bits per symbol"
            )
        if np.unique(np.round(points, 12)).size != points.size:
            raise ParameterError("Constellation labeling is not a bijection")
        energy = float(np.mean(np.abs(points) ** 2))
        if abs(energy - 1.0) > 1e-12:
            raise ParameterError(f"Constellation must have unit average energy, got {energy}")

    @property
    def labeling(self) -> Dict[Tuple[int, ...], complex]:
        """Bit pattern to point map."""
        mapping = {}
        for label, point in enumerate(self.points):
            bits = tuple((label >> (self.bits_per_symbol - 1 - i)) & 1 for i in range(self.bits_per_symbol))
            mapping[bits] = complex(point)
        return mapping

    @property
    def min_distance(self) -> float:
        """Smallest distance between two distinct points."""
        diff = np.abs(self.points[:, None] - self.points[None, :])
        return float(np.min(diff[diff > 0]))


@dataclass(frozen=True, eq=False)
class SymbolGrid:
    """Dual-polarization symbol sequences at the symbol rate."""

    x: np.ndarray
    y: np.ndarray
    symbol_rate: float

    def __post_init__(self) -> None:
        x = np.asarray(self.x, dtype=np.complex128)
        y = np.asarray(self.y, dtype=np.complex128)
        if x.shape != y.shape or x.ndim != 1:
            raise LengthError(
                f"Polarizations must be 1-D and of equal length, got {x.shape} and {y.shape}"
            )
        if not self.symbol_rate > 0:
            raise ParameterError(f"symbol_rate must be positive, got {self.symbol_rate}")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    def __len__(self) -> int:
        return int(self.x.size)

    @property
    def period(self) -> float:
        """Symbol period T in seconds."""
        return 1.0 / self.symbol_rate

    def with_arrays(self, x: np.ndarray, y: np.ndarray) -> "SymbolGrid":
        """Return a grid with the same rate and new symbols."""
        return SymbolGrid(x, y, self.symbol_rate)

    def swapped(self) -> "SymbolGrid":
        """Return the grid with polarizations exchanged."""
        return SymbolGrid(self.y, self.x, self.symbol_rate)

    def scaled(self, factor: complex) -> "SymbolGrid":
        """Return the grid multiplied by a scalar."""
        return SymbolGrid(self.x * factor, self.y * factor, self.symbol_rate)

    def trimmed(self, guard: int) -> "SymbolGrid":
        """Drop ``guard`` symbols from both ends."""
        if guard == 0:
            return self
        if 2 * guard >= len(self):
            raise LengthError(f"Guard of {guard} symbols leaves nothing of {len(self)}")
        return SymbolGrid(self.x[guard:-guard], self.y[guard:-guard], self.symbol_rate)

    def stacked(self) -> np.ndarray:
        """Both polarizations as a (2, K) array."""
        return np.vstack([self.x, self.y])


@dataclass(frozen=True, eq=False)
class SampledField:
    """Dual-polarization complex baseband field on a uniform time grid.

    The angular frequency grid follows numpy's FFT ordering with the
    ``exp(-j w t)`` analysis convention.
    """

    x: np.ndarray
    y: np.ndarray
    sample_rate: float
    center_time_offset: float = 0.0

    def __post_init__(self) -> None:
        x = np.asarray(self.x, dtype=np.complex128)
        y = np.asarray(self.y, dtype=np.complex128)
        if x.shape != y.shape or x.ndim != 1:
            raise LengthError(
                f"Polarizations must be 1-D and of equal length, got {x.shape} and {y.shape}"
            )
        if not self.sample_rate > 0:
            raise ParameterError(f"sample_rate must be positive, got {self.sample_rate}")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    def __len__(self) -> int:
        return int(self.x.size)

    @property
    def dt(self) -> float:
        """Sample spacing in seconds."""
        return 1.0 / self.sample_rate

    def time_axis(self) -> np.ndarray:
        """Sample instants, centered on ``center_time_offset``."""
        n = len(self)
        return (np.arange(n) - n // 2) * self.dt + self.center_time_offset

    def angular_frequency(self) -> np.ndarray:
        """Angular frequency of every FFT bin in rad/s."""
        return 2.0 * np.pi * np.fft.fftfreq(len(self), d=self.dt)

    def power(self) -> float:
        """Mean total power over both polarizations."""
        return float(np.mean(np.abs(self.x) ** 2 + np.abs(self.y) ** 2))

    def with_arrays(self, x: np.ndarray, y: np.ndarray) -> "SampledField":
        """Return a field on the same grid with new samples."""
        return SampledField(x, y, self.sample_rate, self.center_time_offset)

    def scaled(self, factor: complex) -> "SampledField":
        """Return the field multiplied by a scalar."""
        return self.with_arrays(self.x * factor, self.y * factor)

    def norm(self) -> float:
        """L2 norm over both polarizations."""
        return float(np.sqrt(np.sum(np.abs(self.x) ** 2 + np.abs(self.y) ** 2)))

    def distance(self, other: "SampledField") -> float:
        """Relative L2 distance ``|self - other| / |other|``."""
        diff = np.sqrt(np.sum(np.abs(self.x - other.x) ** 2 + np.abs(self.y - other.y) ** 2))
        return float(diff / other.norm())


@dataclass(frozen=True)
class PulseParams:
    """Gaussian model pulse used inside the coefficient formulas."""

    T: float
    tau: float
    P0: float
    rrc_rolloff: float

    def __post_init__(self) -> None:
        if not self.T > 0:
            raise ParameterError(f"Symbol period must be positive, got {self.T}")
        if not self.tau > 0:
            raise ParameterError(f"Pulse width must be positive, got {self.tau}")
        if not self.P0 > 0:
            raise ParameterError(f"Peak power must be positive, got {self.P0}")
        if not 0.0 <= self.rrc_rolloff <= 1.0:
            raise ParameterError(f"Roll-off must lie in [0, 1], got {self.rrc_rolloff}")

    @classmethod
    def from_symbol_rate(
        cls,
        symbol_rate: float,
        tau_over_t: float = 0.5,
        P0: float = 1e-3,
        rrc_rolloff: float = 0.1,
    ) -> "PulseParams":
        """Build pulse parameters for a symbol rate with ``tau = tau_over_t * T``."""
        T = 1.0 / symbol_rate
        return cls(T=T, tau=tau_over_t * T, P0=P0, rrc_rolloff=rrc_rolloff)

    @property
    def symbol_rate(self) -> float:
        return 1.0 / self.T

    def with_peak_power(self, P0: float) -> "PulseParams":
        return dataclasses.replace(self, P0=P0)

    def to_dict(self) -> Dict[str, float]:
        return dataclasses.asdict(self)


def peak_power_from_launch(launch_power_w: float, pulse: PulseParams) -> float:
    """Peak power of the Gaussian model pulse carrying a given launch power.

    The launch power covers both polarizations. Energy matching a unit-energy
    symbol per period gives ``P0 = (P/2) T / (tau sqrt(pi))``.
    """
    return 0.5 * launch_power_w * pulse.T / (pulse.tau * math.sqrt(math.pi))


@dataclass(frozen=True)
class LinkConfig:
    """Fiber and amplifier parameters of a multi-span link."""

    alpha: float
    beta2: float
    gamma: float
    span_length: float
    n_spans: int
    noise_figure_db: float = 5.5
    center_wavelength: float = 1550e-9

    def __post_init__(self) -> None:
        for name in ("alpha", "beta2", "gamma", "span_length", "noise_figure_db", "center_wavelength"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise ParameterError(f"{name} must be finite, got {value}")
        if not self.span_length > 0:
            raise ParameterError(f"span_length must be positive, got {self.span_length}")
        if int(self.n_spans) != self.n_spans or self.n_spans < 1:
            raise ParameterError(f"n_spans must be an integer >= 1, got {self.n_spans}")

    @classmethod
    def from_table_units(
        cls,
        alpha_db_per_km: float = 0.2,
        beta2_ps2_per_km: float = -20.47,
        gamma_per_w_per_km: float = 1.22,
        span_length_km: float = 80.0,
        n_spans: int = 35,
        noise_figure_db: float = 5.5,
        center_wavelength_nm: float = 1550.0,
    ) -> "LinkConfig":
        """Build a link from the customary engineering units."""
        return cls(
            alpha=alpha_from_db_per_km(alpha_db_per_km),
            beta2=beta2_ps2_per_km * PS2_PER_KM,
            gamma=gamma_per_w_per_km / 1e3,
            span_length=span_length_km * 1e3,
            n_spans=int(n_spans),
            noise_figure_db=noise_figure_db,
            center_wavelength=center_wavelength_nm * 1e-9,
        )

    @property
    def total_length(self) -> float:
        return self.span_length * self.n_spans

    @property
    def span_gain(self) -> float:
        """Amplifier power gain that offsets one span of loss."""
        return math.exp(self.alpha * self.span_length)

    @property
    def center_frequency(self) -> float:
        return constants.c / self.center_wavelength

    def with_params(self, **changes: Any) -> "LinkConfig":
        """Return a copy with some fields replaced."""
        return dataclasses.replace(self, **changes)

    def power_profile(self, z: np.ndarray) -> np.ndarray:
        """Signal power relative to launch at distance ``z`` with lumped amplification."""
        z = np.asarray(z, dtype=float)
        return np.exp(-self.alpha * np.mod(z, self.span_length))

    def to_dict(self) -> Mapping[str, float]:
        return dataclasses.asdict(self)
