"""Symmetric split-step Fourier solver of the Manakov equation.

The field is propagated in the physical (lossy) frame with the ``exp(-j w t)``
analysis convention: a linear step of length ``h`` multiplies the spectrum by
``exp(j beta2 w^2 h / 2 - alpha h / 2)``.
"""

import math
from dataclasses import dataclass

import numpy as np

from fiber_nlc.core.errors import NumericDomainError, ParameterError
from fiber_nlc.model.types import LinkConfig, SampledField

MANAKOV_FACTOR = 8.0 / 9.0
OCCUPANCY_LIMIT = 0.8
OCCUPANCY_ENERGY = 0.9999


@dataclass(frozen=True)
class SpanPlan:
    """Step layout of one span.

    ``step_size`` is the nominal step; the span is cut into
    ``steps_per_span`` equal steps of ``span_length / steps_per_span``.
    """

    step_size: float
    steps_per_span: int
    scheme: str = "symmetric"

    def __post_init__(self) -> None:
        if not self.step_size > 0:
            raise ParameterError(f"step_size must be positive, got {self.step_size}")
        if int(self.steps_per_span) != self.steps_per_span or self.steps_per_span < 1:
            raise ParameterError(f"steps_per_span must be an integer >= 1, got {self.steps_per_span}")
        if self.scheme != "symmetric":
            raise ParameterError(f"Unsupported split-step scheme: {self.scheme}")

    @classmethod
    def from_step_size(cls, span_length: float, step_size: float) -> "SpanPlan":
        """Plan with the smallest step count whose steps do not exceed ``step_size``."""
        if not step_size > 0:
            raise ParameterError(f"step_size must be positive, got {step_size}")
        steps = max(1, math.ceil(span_length / step_size - 1e-9))
        return cls(step_size=step_size, steps_per_span=steps)

    @classmethod
    def from_steps(cls, span_length: float, steps_per_span: int) -> "SpanPlan":
        return cls(step_size=span_length / steps_per_span, steps_per_span=steps_per_span)

    def step_length(self, link: LinkConfig) -> float:
        """Actual step length for a link; must be within one nominal step of the plan."""
        if abs(self.steps_per_span * self.step_size - link.span_length) > self.step_size:
            raise ParameterError(
                f"{self.steps_per_span} steps of {self.step_size} m do not cover a {link.span_length} m span"
            )
        return link.span_length / self.steps_per_span


def dispersed_gaussian(t: np.ndarray, z: float, tau: float, beta2: float) -> np.ndarray:
    """Unit-peak Gaussian launched with width ``tau`` after lossless dispersion over ``z``."""
    q = tau**2 - 1j * beta2 * z
    return tau / np.sqrt(q) * np.exp(-np.asarray(t) ** 2 / (2.0 * q))


def effective_length(alpha: float, h: float) -> float:
    """``(1 - exp(-alpha h)) / alpha``, equal to ``h`` without loss."""
    if alpha == 0.0:
        return h
    return -math.expm1(-alpha * h) / alpha


def linear_operator(w: np.ndarray, link: LinkConfig, h: float) -> np.ndarray:
    """Spectral transfer function of dispersion and loss over ``h``."""
    return np.exp(0.5j * link.beta2 * w**2 * h - 0.5 * link.alpha * h)


def nonlinear_step(u: np.ndarray, link: LinkConfig, h: float) -> np.ndarray:
    """Kerr phase rotation of both polarizations over one step.

    ``u`` is the field at the step midpoint, shape ``(2, N)``.
    """
    power = np.abs(u[0]) ** 2 + np.abs(u[1]) ** 2
    length = effective_length(link.alpha, h) * math.exp(0.5 * link.alpha * h)
    return u * np.exp(1j * MANAKOV_FACTOR * link.gamma * length * power)


def spectral_occupancy(field: SampledField, energy_fraction: float = OCCUPANCY_ENERGY) -> float:
    """Fraction of the Nyquist band holding ``energy_fraction`` of the energy."""
    spectrum = np.abs(np.fft.fft(field.x)) ** 2 + np.abs(np.fft.fft(field.y)) ** 2
    total = spectrum.sum()
    if total == 0.0:
        return 0.0
    freq = np.abs(np.fft.fftfreq(len(field), d=field.dt))
    order = np.argsort(freq, kind="stable")
    cumulative = np.cumsum(spectrum[order]) / total
    edge = freq[order][min(np.searchsorted(cumulative, energy_fraction), len(freq) - 1)]
    return float(edge / (0.5 * field.sample_rate))


def check_occupancy(field: SampledField, limit: float = OCCUPANCY_LIMIT) -> None:
    """Raise if the field's spectrum fills too much of the Nyquist band.

    Raises:
        ParameterError: If the occupancy reaches ``limit``
    """
    occupancy = spectral_occupancy(field)
    if occupancy >= limit:
        raise ParameterError(
            f"Spectrum occupies {occupancy:.0%} of the Nyquist band; raise the sample rate",
            details={"occupancy": occupancy, "limit": limit},
        )


def _check_finite(u: np.ndarray, span: int, step: int) -> None:
    if not np.all(np.isfinite(u)):
        raise NumericDomainError(
            "Non-finite field during split-step propagation",
            details={"span": span, "step": step},
        )


def ssfm_span(
    field: SampledField, link: LinkConfig, plan: SpanPlan, span_index: int = 0, check: bool = True
) -> SampledField:
    """Propagate a field through one span.

    Adjacent linear half steps are merged, so a span is
    ``D(h/2) N D(h) N ... N D(h/2)`` with ``N`` evaluated at step midpoints.

    Args:
        field: Input field
        link: Fiber parameters (negated for back-propagation)
        plan: Step layout
        span_index: Span number reported in errors
        check: Whether to check the Nyquist occupancy first

    Returns:
        Field at the span output, before amplification

    Raises:
        ParameterError: If the field is undersampled
        NumericDomainError: If the field becomes non-finite
    """
    if check:
        check_occupancy(field)
    h = plan.step_length(link)
    w = field.angular_frequency()
    half = linear_operator(w, link, 0.5 * h)
    full = half * half

    spectrum = np.fft.fft(np.vstack([field.x, field.y]), axis=-1) * half
    for step in range(plan.steps_per_span):
        u = nonlinear_step(np.fft.ifft(spectrum, axis=-1), link, h)
        _check_finite(u, span_index, step)
        operator = half if step == plan.steps_per_span - 1 else full
        spectrum = np.fft.fft(u, axis=-1) * operator
    u = np.fft.ifft(spectrum, axis=-1)
    _check_finite(u, span_index, plan.steps_per_span)
    return field.with_arrays(u[0], u[1])
