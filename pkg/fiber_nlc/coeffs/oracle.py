"""Direct evolution of the perturbative fields, used to validate the quadrature.

The first- and second-order source equations are integrated in the
interaction picture on a time grid. The zeroth-order pulses are dispersed
Gaussians in closed form; the first-order field is accumulated as
``V1(z) = j int p(s) D(-s) S1(s) ds`` and the second-order field as
``V2 = j int p(z) D(-z) S2(z) dz``, both with the trapezoidal rule on nodes
aligned to the span boundaries. Coefficients are read at ``t = 0`` of the
launch-referred field, which is how the quadrature kernels are normalized.
"""

import math
from typing import Optional

import numpy as np

from fiber_nlc.channel.ssfm import dispersed_gaussian
from fiber_nlc.coeffs.types import CoeffIndex, CoeffOrder
from fiber_nlc.core.errors import ParameterError
from fiber_nlc.model.types import LinkConfig, PulseParams


class PropagationOracle:
    """Brute-force evaluator of first- and second-order coefficients.

    Args:
        pulse: Gaussian model pulse
        link: Fiber parameters
        steps_per_span: Trapezoid steps in every span
        max_index: Largest pulse index magnitude the time window must hold
        samples_per_tau: Time-grid density
        width_factor: Window margin in dispersed pulse widths
    """

    def __init__(
        self,
        pulse: PulseParams,
        link: LinkConfig,
        steps_per_span: int = 256,
        max_index: int = 4,
        samples_per_tau: int = 6,
        width_factor: float = 8.0,
    ):
        if steps_per_span < 2:
            raise ParameterError(f"steps_per_span must be at least 2, got {steps_per_span}")
        self.pulse = pulse
        self.link = link
        self.steps_per_span = steps_per_span
        self.max_index = max_index

        spread = math.sqrt(1.0 + (link.beta2 * link.total_length / pulse.tau**2) ** 2)
        half_window = (2 * max_index) * pulse.T + width_factor * pulse.tau * spread
        dt = pulse.tau / samples_per_tau
        n_samples = 1 << int(math.ceil(math.log2(2.0 * half_window / dt)))
        self.t = (np.arange(n_samples) - n_samples // 2) * dt
        self.origin = n_samples // 2
        w = 2.0 * np.pi * np.fft.fftfreq(n_samples, d=dt)
        self._phase = 0.5 * link.beta2 * w**2

        # Span-aligned nodes; every span boundary appears twice so the power
        # profile takes its left limit at the end of a span
        local = np.linspace(0.0, link.span_length, steps_per_span + 1)
        self.z = (np.arange(link.n_spans)[:, None] * link.span_length + local[None, :]).ravel()
        self.profile = np.tile(np.exp(-link.alpha * local), link.n_spans)
        self._dz = np.diff(self.z)

    def _pulse(self, slot: int, z: float) -> np.ndarray:
        return dispersed_gaussian(self.t - slot * self.pulse.T, z, self.pulse.tau, self.link.beta2)

    def _disperse(self, spectrum: np.ndarray, z: float) -> np.ndarray:
        """Time-domain field of a launch-referred spectrum after ``z``."""
        return np.fft.ifft(spectrum * np.exp(1j * self._phase * z))

    def _refer(self, field: np.ndarray, z: float) -> np.ndarray:
        """Spectrum of ``field`` at ``z`` referred back to the launch point."""
        return np.fft.fft(field) * np.exp(-1j * self._phase * z)

    def _at_origin(self, spectrum: np.ndarray) -> complex:
        return complex(np.fft.ifft(spectrum)[self.origin])

    def _triplet(self, m: int, n: int, l: int, z: float) -> np.ndarray:
        return self._pulse(m, z) * self._pulse(n, z) * np.conj(self._pulse(l, z))

    def fo_coefficient(self, m: int, n: int) -> complex:
        """Launch-referred first-order coefficient of the triplet ``(m, n, m + n)``."""
        return self.triplet_coefficient(m, n, m + n)

    def triplet_coefficient(self, m: int, n: int, l: int) -> complex:
        """First-order coefficient of an arbitrary triplet at ``t = 0``."""
        values = np.array(
            [
                1j * p * self._at_origin(self._refer(self._triplet(m, n, l, z), z))
                for z, p in zip(self.z, self.profile)
            ]
        )
        return complex(np.sum(0.5 * self._dz * (values[1:] + values[:-1])))

    def quintuplet_coefficient(self, m: int, n: int, l: int, k: int, p: int, term: CoeffOrder) -> complex:
        """Second-order coefficient of five pulses without phase-matching shortcuts.

        Args:
            m: Slot of the first unconjugated triplet pulse
            n: Slot of the second unconjugated triplet pulse
            l: Slot of the conjugated triplet pulse
            k: Slot of the first zeroth-order pulse
            p: Slot of the second zeroth-order pulse
            term: ``SO_TERM1`` pairs ``g_k g_p*`` with the first-order field,
                ``SO_TERM2`` pairs ``g_k g_p`` with its conjugate

        Returns:
            Complex coefficient at ``t = 0``
        """
        term = CoeffOrder(term)
        if not term.is_second_order:
            raise ParameterError(f"Quintuplet coefficient needs a second-order term, got {term.value}")

        first = np.zeros(self.t.size, dtype=np.complex128)
        previous_source: Optional[np.ndarray] = None
        previous_value = 0j
        total = 0j
        for i, (z, power) in enumerate(zip(self.z, self.profile)):
            source = 1j * power * self._refer(self._triplet(m, n, l, z), z)
            if previous_source is not None:
                first += 0.5 * self._dz[i - 1] * (source + previous_source)
            previous_source = source

            u1 = self._disperse(first, z)
            if term is CoeffOrder.SO_TERM1:
                mixed = self._pulse(k, z) * np.conj(self._pulse(p, z)) * u1
            else:
                mixed = self._pulse(k, z) * self._pulse(p, z) * np.conj(u1)
            value = 1j * power * self._at_origin(self._refer(mixed, z))
            if i:
                total += 0.5 * self._dz[i - 1] * (value + previous_value)
            previous_value = value
        return complex(total)

    def so_coefficient(self, order: CoeffOrder, idx: CoeffIndex) -> complex:
        """Direct evolution of the indexed second-order term.

        Term 1 uses ``l = m + n, p = k``. Term 2 places both zeroth-order
        pulses at slot ``k``, the pairing of the closed-form Term-2 kernel,
        which equals this value times
        :data:`fiber_nlc.coeffs.integrands.TERM2_RATIO`.
        """
        m, n, k = CoeffIndex(*idx)
        return self.quintuplet_coefficient(m, n, m + n, k, k, order)
