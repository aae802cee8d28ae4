"""Composite Gauss-Legendre quadrature of the perturbation coefficients.

The second-order coefficients are double integrals over the triangle
``0 <= s <= z <= L``; the first-order coefficient is a single integral over
``[0, L]``. Panels are laid out per span so that every panel edge set
contains the span boundaries where the power profile jumps. Within a span
the triangle is covered by rectangular blocks: the spans already passed by
``z`` contribute full ``s`` lines and the current span a partial line.

Many indices are integrated on one node set at a time. The kernel's
index-free parts are computed once per block and the exponent for a chunk of
indices is a single matrix product.
"""

from functools import lru_cache
from typing import Iterator, Optional, Sequence, Tuple

import numpy as np
from numpy.polynomial import legendre

from fiber_nlc.coeffs.integrands import (
    KernelTerms,
    check_branch_continuity,
    fo_compensated_kernel,
    fo_polynomials,
    loss_profile,
    normalized_distance,
    term1_kernel,
    term1_polynomials,
    term2_kernel,
    term2_polynomials,
)
from fiber_nlc.coeffs.types import CoeffIndex, CoeffOrder, QuadratureSpec
from fiber_nlc.core.context import RunContext
from fiber_nlc.core.errors import NumericDomainError, ParameterError, QuadratureError
from fiber_nlc.model.types import LinkConfig, PulseParams

# Upper bound on the exponent matrix built at once (indices x nodes)
MAX_ELEMENTS = 4_000_000
BLOCK_NODES = 1 << 18
TASK_SIZE = 512

Blocks = Iterator[Tuple[np.ndarray, np.ndarray, np.ndarray]]


@lru_cache(maxsize=64)
def unit_rule(order: int, panels: int) -> Tuple[np.ndarray, np.ndarray]:
    """Composite Gauss-Legendre nodes and weights on ``[0, 1]``."""
    x, w = legendre.leggauss(order)
    edges = np.linspace(0.0, 1.0, panels + 1)
    a = edges[:-1, None]
    h = np.diff(edges)[:, None]
    nodes = (a + 0.5 * h * (x[None, :] + 1.0)).ravel()
    weights = (0.5 * h * w[None, :]).ravel()
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


def span_line_nodes(link: LinkConfig, panels: int, order: int) -> Tuple[np.ndarray, np.ndarray]:
    """Nodes over ``[0, L]`` with ``panels`` panels in every span."""
    u, w = unit_rule(order, panels)
    starts = np.arange(link.n_spans)[:, None] * link.span_length
    nodes = (starts + link.span_length * u[None, :]).ravel()
    weights = np.tile(link.span_length * w, link.n_spans)
    return nodes, weights


def triangle_blocks(link: LinkConfig, panels_z: int, panels_s: int, order: int) -> Blocks:
    """Rectangular node blocks covering ``0 <= s <= z <= L``.

    Yields:
        ``(z, s, w)`` arrays of equal 2-D shape; ``s`` increases along axis 1
    """
    span = link.span_length
    uz, wz = unit_rule(order, panels_z)
    us, ws = unit_rule(order, panels_s)
    for j in range(link.n_spans):
        z = j * span + span * uz
        z_weights = span * wz
        s_full = (np.arange(j)[:, None] * span + span * us[None, :]).ravel()
        w_full = np.tile(span * ws, j)
        n_line = s_full.size + us.size
        rows = max(1, BLOCK_NODES // n_line)
        for start in range(0, z.size, rows):
            zb = z[start : start + rows]
            h = zb - j * span
            s_part = j * span + h[:, None] * us[None, :]
            w_part = h[:, None] * ws[None, :]
            s = np.concatenate([np.broadcast_to(s_full, (zb.size, s_full.size)), s_part], axis=1)
            w = np.concatenate([np.broadcast_to(w_full, (zb.size, w_full.size)), w_part], axis=1)
            w = w * z_weights[start : start + rows, None]
            yield np.broadcast_to(zb[:, None], s.shape), s, w


def index_polynomials(order: CoeffOrder, indices: np.ndarray) -> np.ndarray:
    """Index polynomials of ``order`` for an ``(E, 3)`` index array."""
    indices = np.asarray(indices, dtype=np.int64).reshape(-1, 3)
    m, n, k = indices[:, 0], indices[:, 1], indices[:, 2]
    if order is CoeffOrder.SO_TERM1:
        return term1_polynomials(m, n, k)
    if order is CoeffOrder.SO_TERM2:
        return term2_polynomials(m, n, k)
    return fo_polynomials(m, n)


def _so_terms(order: CoeffOrder, z: np.ndarray, s: np.ndarray, pulse: PulseParams, link: LinkConfig) -> KernelTerms:
    r = pulse.T / pulse.tau
    kernel = term1_kernel if order is CoeffOrder.SO_TERM1 else term2_kernel
    return kernel(normalized_distance(z, pulse, link), normalized_distance(s, pulse, link), r)


def _check_amplitude(amplitude: np.ndarray, z: np.ndarray, s: np.ndarray) -> None:
    bad = ~np.isfinite(amplitude)
    if np.any(bad):
        position = tuple(np.argwhere(bad)[0])
        raise NumericDomainError(
            "Non-finite kernel amplitude",
            details={"z": float(z[position]), "s": float(s[position])},
        )


def _accumulate(polys: np.ndarray, basis: np.ndarray, amplitude: np.ndarray, out: np.ndarray) -> None:
    basis = basis.reshape(basis.shape[0], -1)
    amplitude = amplitude.ravel()
    chunk = max(1, MAX_ELEMENTS // amplitude.size)
    for start in range(0, polys.shape[0], chunk):
        out[start : start + chunk] += np.exp(polys[start : start + chunk] @ basis) @ amplitude


def integrate_so(
    order: CoeffOrder,
    indices: np.ndarray,
    pulse: PulseParams,
    link: LinkConfig,
    panels_z: int,
    panels_s: int,
    rule_order: int,
) -> np.ndarray:
    """Second-order coefficients of many indices at one panel setting."""
    indices = np.asarray(indices, dtype=np.int64).reshape(-1, 3)
    polys = index_polynomials(order, indices).astype(np.complex128)
    out = np.zeros(indices.shape[0], dtype=np.complex128)
    for z, s, w in triangle_blocks(link, panels_z, panels_s, rule_order):
        terms = _so_terms(order, z, s, pulse, link)
        _check_amplitude(terms.amplitude, z, s)
        check_branch_continuity(terms.roots, axis=1)
        amplitude = w * loss_profile(z, link) * loss_profile(s, link) * terms.amplitude
        _accumulate(polys, terms.basis, amplitude, out)
    _check_values(out, indices)
    return out


def integrate_fo(
    indices: np.ndarray, pulse: PulseParams, link: LinkConfig, panels: int, rule_order: int
) -> np.ndarray:
    """First-order coefficients of many indices at one panel setting."""
    indices = np.asarray(indices, dtype=np.int64).reshape(-1, 3)
    polys = index_polynomials(CoeffOrder.FO, indices).astype(np.complex128)
    s, w = span_line_nodes(link, panels, rule_order)
    terms = fo_compensated_kernel(normalized_distance(s, pulse, link), pulse.T / pulse.tau)
    _check_amplitude(terms.amplitude, np.zeros_like(s), s)
    check_branch_continuity(terms.roots)
    amplitude = w * loss_profile(s, link) * terms.amplitude
    out = np.zeros(indices.shape[0], dtype=np.complex128)
    _accumulate(polys, terms.basis, amplitude, out)
    _check_values(out, indices)
    return out


def _check_values(values: np.ndarray, indices: np.ndarray) -> None:
    bad = ~np.isfinite(values)
    if np.any(bad):
        first = int(np.flatnonzero(bad)[0])
        raise NumericDomainError(
            "Non-finite coefficient value",
            details={"idx": indices[first].tolist(), "count": int(bad.sum())},
        )


def integrate(
    order: CoeffOrder,
    indices: np.ndarray,
    pulse: PulseParams,
    link: LinkConfig,
    quad: QuadratureSpec,
    context: Optional[RunContext] = None,
    stage_id: Optional[str] = None,
) -> np.ndarray:
    """Coefficients of ``order`` at the panel setting of ``quad``.

    With a context, fixed-size index chunks are spread over the worker pool;
    chunk boundaries depend only on the index count, so the result does not
    depend on the number of workers.
    """
    indices = np.asarray(indices, dtype=np.int64).reshape(-1, 3)

    def run(chunk: np.ndarray) -> np.ndarray:
        if order is CoeffOrder.FO:
            return integrate_fo(chunk, pulse, link, quad.panels_s, quad.order)
        return integrate_so(order, chunk, pulse, link, quad.panels_z, quad.panels_s, quad.order)

    if context is None or indices.shape[0] <= TASK_SIZE:
        return run(indices)
    chunks = [indices[i : i + TASK_SIZE] for i in range(0, indices.shape[0], TASK_SIZE)]
    return np.concatenate(context.map(run, chunks, stage_id=stage_id))


def refine(
    order: CoeffOrder,
    indices: np.ndarray,
    pulse: PulseParams,
    link: LinkConfig,
    quad: QuadratureSpec,
    floor: float = 0.0,
    initial: Optional[np.ndarray] = None,
    context: Optional[RunContext] = None,
    stage_id: Optional[str] = None,
) -> np.ndarray:
    """Panel doubling until every coefficient has settled.

    An index has settled when ``|C(2p) - C(p)| <= rel_tol * max(|C(2p)|, floor)``.
    The finest estimate is returned.

    Args:
        order: Coefficient kind
        indices: ``(E, 3)`` index array
        pulse: Gaussian model pulse
        link: Fiber parameters
        quad: Base quadrature settings
        floor: Absolute magnitude below which changes count as settled
        initial: Values at the base panel setting, if already known
        context: Optional run context for parallel evaluation
        stage_id: Stage id for progress events

    Returns:
        Complex coefficient array aligned with ``indices``

    Raises:
        QuadratureError: If some index has not settled after ``quad.max_doublings``
    """
    indices = np.asarray(indices, dtype=np.int64).reshape(-1, 3)
    if initial is None:
        values = integrate(order, indices, pulse, link, quad, context, stage_id)
    else:
        values = np.array(initial, dtype=np.complex128)
    active = np.arange(indices.shape[0])
    change = np.zeros(0)

    for doubling in range(1, quad.max_doublings + 1):
        if active.size == 0:
            break
        finer = integrate(order, indices[active], pulse, link, quad.doubled(doubling), context, stage_id)
        change = np.abs(finer - values[active])
        values[active] = finer
        settled = change <= quad.rel_tol * np.maximum(np.abs(finer), floor)
        active = active[~settled]
        change = change[~settled]

    if active.size:
        first = int(active[0])
        estimate = values[first]
        raise QuadratureError(
            f"{active.size} coefficient(s) did not settle after {quad.max_doublings} panel doublings",
            details={
                "idx": indices[first].tolist(),
                "estimate": [float(estimate.real), float(estimate.imag)],
                "relative_change": float(change[0] / max(abs(estimate), floor, 1e-300)),
                "unsettled": int(active.size),
            },
        )
    return values


def so_coeff(
    order: CoeffOrder, idx: Sequence[int], pulse: PulseParams, link: LinkConfig, quad: QuadratureSpec
) -> complex:
    """One second-order coefficient, refined to ``quad.rel_tol``."""
    order = CoeffOrder(order)
    if not order.is_second_order:
        raise ParameterError(f"so_coeff needs a second-order term, got {order.value}")
    return complex(refine(order, np.array([tuple(CoeffIndex(*idx))]), pulse, link, quad)[0])


def fo_coeff(m: int, n: int, pulse: PulseParams, link: LinkConfig, quad: QuadratureSpec) -> complex:
    """One first-order coefficient, refined to ``quad.rel_tol``."""
    return complex(refine(CoeffOrder.FO, np.array([[m, n, 0]]), pulse, link, quad)[0])
