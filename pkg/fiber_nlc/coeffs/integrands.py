"""Integrands of the first- and second-order perturbation coefficients.

Every kernel is evaluated in normalized distance ``x = beta2 z / tau^2`` and
``y = beta2 s / tau^2`` with ``r = T / tau``. The physical powers of ``tau``
cancel between the prefactor and the square roots, so the integrands below
are dimensionless and the coefficients carry units of m (FO) and m^2 (SO).

The index dependence of every exponent is linear in a handful of index
polynomials. Each kernel therefore splits into an index-free ``amplitude``
and a ``basis`` stack so that the exponent for any index is
``polynomials(idx) @ basis``. The quadrature exploits this to evaluate many
indices on a shared node set.
"""

import math
from typing import NamedTuple, Tuple

import numpy as np

from fiber_nlc.core.errors import NumericDomainError
from fiber_nlc.model.types import LinkConfig, PulseParams


class KernelTerms(NamedTuple):
    """Index-free parts of a kernel on a node set."""

    amplitude: np.ndarray
    basis: np.ndarray
    roots: Tuple[np.ndarray, ...]


def normalized_distance(z: np.ndarray, pulse: PulseParams, link: LinkConfig) -> np.ndarray:
    """Accumulated dispersion ``beta2 z / tau^2``."""
    return link.beta2 * np.asarray(z, dtype=float) / pulse.tau**2


def loss_profile(z: np.ndarray, link: LinkConfig) -> np.ndarray:
    """Power profile with lumped amplification, left limit at the end of the link."""
    z = np.asarray(z, dtype=float)
    local = np.mod(z, link.span_length)
    at_end = (local == 0.0) & (z >= link.total_length) & (z > 0.0)
    local = np.where(at_end, link.span_length, local)
    return np.exp(-link.alpha * local)


# Term 1 -----------------------------------------------------------------------


def term1_polynomials(m: np.ndarray, n: np.ndarray, k: np.ndarray) -> np.ndarray:
    """Index polynomials of the Term-1 exponent, stacked on the last axis."""
    m, n, k = (np.asarray(v, dtype=float) for v in (m, n, k))
    a_chk = k**2 + m**2 + m * n + n**2
    b_chk = m**2 + (n - 2.0 * k) * m - 2.0 * k * n + n**2
    c_chk = k**2 - 1.5 * m * n
    d_chk = (m**2 + n**2) - m * n / 3.0
    e_chk = (4.0 / 3.0) * ((k - 1.5 * n) * m + k * n)
    return np.stack([a_chk, b_chk, c_chk, d_chk, e_chk, k**2, m * n], axis=-1)


def term1_kernel(x: np.ndarray, y: np.ndarray, r: float) -> KernelTerms:
    """Index-free parts of the Term-1 kernel at normalized distances."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    a_t = 1j - 3.0 * (y + 2.0 * x / 3.0) - 6j * (y - 7.0 * x / 6.0) * x - 5.0 * y * x**2
    b_t = 1j + y
    root = np.sqrt(-a_t * b_t)
    scale = r**2 / (a_t * b_t)
    basis = np.stack(
        [
            scale,
            scale * 2j * x,
            scale * 2j * y,
            scale * 3.0 * x**2,
            scale * -3.0 * x * y,
            scale * 3.0 * y**2,
            scale * -5j * y * x**2,
        ]
    )
    return KernelTerms(amplitude=-1.0 / root, basis=basis, roots=(root,))


# Term 2 -----------------------------------------------------------------------

# Closed-form Term-2 kernel over the directly evolved Term-2 field, the same
# for every index. Tables store the closed form; field sums divide by this.
TERM2_RATIO = math.sqrt(3.0) * complex(math.cos(math.pi / 4), -math.sin(math.pi / 4))


def term2_polynomials(m: np.ndarray, n: np.ndarray, k: np.ndarray) -> np.ndarray:
    """Index polynomials of the Term-2 exponent, stacked on the last axis."""
    m, n, k = (np.asarray(v, dtype=float) for v in (m, n, k))
    a_chk = k**2 + m**2 + m * n + n**2
    a_brv = -6.0 * k**2 + 4.0 * (m + n) * k - 3.0 * m**2 + m * n - 3.0 * n**2
    b_brv = 2.0 * k**2 - 3.0 * m * n
    c_brv = -4.0 * k**2 + 4.0 * k * (m + n) - 5.0 * m * n
    return np.stack([a_chk, a_brv, b_brv, c_brv, k**2], axis=-1)


def term2_kernel(x: np.ndarray, y: np.ndarray, r: float) -> KernelTerms:
    """Index-free parts of the Term-2 kernel at normalized distances."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    a_h = 1j + 1j * y * x + 3.0 * (y - x)
    b_h = 1.0 - 3j * (y - 7.0 * x / 3.0) + 5.0 * y * x
    c_h = 1j + x
    d_h = 1.0 + y * x + 3j * (y - x)
    e_h = 1j - y
    b_t = 1j + y

    root_a = np.sqrt(a_h)
    root_bc = np.sqrt(b_h * c_h)
    root_bd = np.sqrt(-b_t * d_h)
    amplitude = np.sqrt(3.0) * root_a / (root_bc * np.conj(root_bd))

    scale = -1j * r**2 / (b_h * e_h)
    basis = np.stack(
        [
            scale,
            scale * -1j * x,
            scale * -1j * y,
            scale * x * y,
            scale * (3.0 * y**2 + 2j * y**2 * x),
        ]
    )
    return KernelTerms(amplitude=amplitude, basis=basis, roots=(root_a, root_bc, root_bd))


# First order ------------------------------------------------------------------


def fo_polynomials(m: np.ndarray, n: np.ndarray) -> np.ndarray:
    """Index polynomials of the FO exponent: (m^2 + mn + n^2, m^2 + n^2, mn)."""
    m, n = (np.asarray(v, dtype=float) for v in (m, n))
    return np.stack([m**2 + m * n + n**2, m**2 + n**2, m * n], axis=-1)


def fo_kernel(y: np.ndarray, x: np.ndarray, r: float) -> KernelTerms:
    """Index-free parts of the FO kernel for a source at ``y`` observed at ``x``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    b_t = 1j + y
    d_h = 1.0 + y * x + 3j * (y - x)
    root = np.sqrt(-1j * b_t * d_h)
    scale = -1j * r**2 / (b_t * d_h)
    basis = np.stack(
        [
            scale,
            scale * -1j * x,
            scale * (-1j * (3.0 * y - x) - x * y),
        ]
    )
    return KernelTerms(amplitude=1j / root, basis=basis, roots=(root,))


def fo_compensated_kernel(y: np.ndarray, r: float) -> KernelTerms:
    """FO kernel referred back to the launch point (observation at zero dispersion)."""
    y = np.asarray(y, dtype=float)
    q = 1.0 + 2j * y + 3.0 * y**2
    root = np.sqrt(q)
    scale = -(r**2) / q
    basis = np.stack([scale, np.zeros_like(scale), scale * -3j * y])
    return KernelTerms(amplitude=1j / root, basis=basis, roots=(root,))


# Point evaluation -------------------------------------------------------------


def _checked(value: np.ndarray, z: float, s: float, idx: Tuple[int, ...]) -> complex:
    value = complex(value)
    if not np.isfinite(value):
        raise NumericDomainError(
            "Non-finite integrand value",
            details={"z": float(z), "s": float(s), "idx": list(idx)},
        )
    return value


def _check_order(s: float, z: float) -> None:
    if not 0.0 <= s <= z:
        raise NumericDomainError(
            f"Integrand requires 0 <= s <= z, got s={s}, z={z}", details={"z": z, "s": s}
        )


def term1_integrand(
    z: float, s: float, idx: Tuple[int, int, int], pulse: PulseParams, link: LinkConfig
) -> complex:
    """Term-1 integrand of the second-order coefficient.

    Args:
        z: Observation distance in m
        s: Source distance in m, with ``0 <= s <= z``
        idx: Coefficient index ``(m, n, k)``
        pulse: Gaussian model pulse
        link: Fiber parameters

    Returns:
        Complex integrand value

    Raises:
        NumericDomainError: On a non-finite value or an invalid ``(z, s)`` pair
    """
    _check_order(s, z)
    m, n, k = idx
    r = pulse.T / pulse.tau
    terms = term1_kernel(normalized_distance(z, pulse, link), normalized_distance(s, pulse, link), r)
    exponent = term1_polynomials(m, n, k) @ terms.basis
    value = loss_profile(z, link) * loss_profile(s, link) * terms.amplitude * np.exp(exponent)
    return _checked(value, z, s, idx)


def term2_integrand(
    z: float, s: float, idx: Tuple[int, int, int], pulse: PulseParams, link: LinkConfig
) -> complex:
    """Term-2 integrand of the second-order coefficient.

    Same contract as :func:`term1_integrand`.
    """
    _check_order(s, z)
    m, n, k = idx
    r = pulse.T / pulse.tau
    terms = term2_kernel(normalized_distance(z, pulse, link), normalized_distance(s, pulse, link), r)
    exponent = term2_polynomials(m, n, k) @ terms.basis
    value = loss_profile(z, link) * loss_profile(s, link) * terms.amplitude * np.exp(exponent)
    return _checked(value, z, s, idx)


def fo_integrand(
    s: float, m: int, n: int, pulse: PulseParams, link: LinkConfig, z: float
) -> complex:
    """First-order kernel at ``t = 0`` for a source at ``s`` observed at ``z >= s``."""
    _check_order(s, z)
    r = pulse.T / pulse.tau
    terms = fo_kernel(normalized_distance(s, pulse, link), normalized_distance(z, pulse, link), r)
    exponent = fo_polynomials(m, n) @ terms.basis
    value = loss_profile(s, link) * terms.amplitude * np.exp(exponent)
    return _checked(value, z, s, (m, n))


def fo_compensated_integrand(
    s: float, m: int, n: int, pulse: PulseParams, link: LinkConfig
) -> complex:
    """First-order kernel with the accumulated dispersion removed.

    This is the kernel the predistorter's FO coefficient integrates over the
    whole link.
    """
    if s < 0.0:
        raise NumericDomainError(f"Source distance must be non-negative, got {s}", details={"s": s})
    r = pulse.T / pulse.tau
    terms = fo_compensated_kernel(normalized_distance(s, pulse, link), r)
    exponent = fo_polynomials(m, n) @ terms.basis
    value = loss_profile(s, link) * terms.amplitude * np.exp(exponent)
    return _checked(value, 0.0, s, (m, n))


def check_branch_continuity(roots: Tuple[np.ndarray, ...], axis: int = -1) -> None:
    """Flag sign flips of principal square roots between neighboring nodes.

    Raises:
        NumericDomainError: If any root turns by more than a right angle between
            consecutive nodes along ``axis``
    """
    for i, root in enumerate(roots):
        root = np.moveaxis(np.asarray(root), axis, -1)
        if root.shape[-1] < 2:
            continue
        turn = np.real(np.conj(root[..., :-1]) * root[..., 1:])
        if np.any(turn < 0.0):
            position = np.argwhere(turn < 0.0)[0].tolist()
            raise NumericDomainError(
                "Square-root branch crossing along the integration line",
                details={"root": i, "position": position},
            )
