"""Coefficient tables: building, truncation, quantization and statistics."""

import dataclasses
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from fiber_nlc.coeffs.quadrature import integrate, refine
from fiber_nlc.coeffs.types import CoeffIndex, CoeffOrder, QuadratureSpec
from fiber_nlc.core.context import RunContext
from fiber_nlc.core.errors import DegenerateQuantizationError, ParameterError
from fiber_nlc.model.types import LinkConfig, PulseParams

GroupKey = Tuple[int, int]

REFERENCE_INDEX = CoeffIndex(0, 0, 0)


@dataclass(frozen=True, eq=False)
class CoeffTable:
    """Sparse coefficient tensor with truncation and quantization metadata.

    ``reference`` is the unquantized coefficient at the origin index that the
    truncation threshold is measured against. ``groups`` maps a quantized
    value, as integer multiples of ``quant_scale``, to the indices sharing it.
    """

    order: CoeffOrder
    entries: Dict[CoeffIndex, complex]
    window: int
    mu_db: float
    reference: complex
    quantized: bool = False
    quant_scale: float = 0.0
    groups: Optional[Dict[GroupKey, List[CoeffIndex]]] = None
    dropped_zero: int = 0
    metadata: Dict[str, Any] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, idx: object) -> bool:
        return idx in self.entries

    def get(self, idx: Sequence[int], default: complex = 0j) -> complex:
        return self.entries.get(CoeffIndex(*idx), default)

    @property
    def half_window(self) -> int:
        return self.window // 2

    def sorted_indices(self) -> List[CoeffIndex]:
        return sorted(self.entries)

    def arrays(self) -> Tuple[np.ndarray, np.ndarray]:
        """Indices as an ``(E, 3)`` int array and values, sorted by ``(m, n, k)``."""
        keys = self.sorted_indices()
        indices = np.array(keys, dtype=np.int64).reshape(-1, 3)
        values = np.array([self.entries[key] for key in keys], dtype=np.complex128)
        return indices, values

    def ratio_db(self) -> np.ndarray:
        """Entry magnitudes relative to the reference, in dB, in sorted order."""
        _, values = self.arrays()
        with np.errstate(divide="ignore"):
            return 20.0 * np.log10(np.abs(values) / abs(self.reference))

    def grouped(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Entries arranged for grouped evaluation.

        Returns:
            ``(indices, group_of_entry, group_values)``; an unquantized table
            puts every entry in its own group
        """
        if not self.quantized or self.groups is None:
            indices, values = self.arrays()
            return indices, np.arange(len(values)), values
        keys = sorted(self.groups)
        indices: List[CoeffIndex] = []
        owner: List[int] = []
        for g, key in enumerate(keys):
            members = sorted(self.groups[key])
            indices.extend(members)
            owner.extend([g] * len(members))
        group_values = np.array([complex(a, b) * self.quant_scale for a, b in keys], dtype=np.complex128)
        return (
            np.array(indices, dtype=np.int64).reshape(-1, 3),
            np.array(owner, dtype=np.int64),
            group_values,
        )

    def with_entries(self, entries: Dict[CoeffIndex, complex], **changes: Any) -> "CoeffTable":
        return dataclasses.replace(self, entries=entries, **changes)


def candidate_indices(order: CoeffOrder, window: int) -> np.ndarray:
    """All indices of a window, as an ``(E, 3)`` array."""
    half = window // 2
    span = np.arange(-half, half + 1)
    if order is CoeffOrder.FO:
        m, n = np.meshgrid(span, span, indexing="ij")
        return np.stack([m.ravel(), n.ravel(), np.zeros(m.size, dtype=np.int64)], axis=1)
    m, n, k = np.meshgrid(span, span, span, indexing="ij")
    return np.stack([m.ravel(), n.ravel(), k.ravel()], axis=1)


def canonical_indices(indices: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Collapse the ``m <-> n`` and global sign symmetries of the kernels.

    Every exponent polynomial is quadratic and symmetric in ``m`` and ``n``,
    so ``(m, n, k)``, ``(n, m, k)`` and their negations share one value.

    Returns:
        ``(unique, inverse)`` with ``unique[inverse]`` the canonical form of
        every input row
    """
    swapped = indices[:, [1, 0, 2]]
    variants = np.stack([indices, swapped, -indices, -swapped], axis=1)
    order = np.lexsort((variants[:, :, 2], variants[:, :, 1], variants[:, :, 0]), axis=-1)
    first = variants[np.arange(indices.shape[0]), order[:, 0]]
    unique, inverse = np.unique(first, axis=0, return_inverse=True)
    return unique, inverse.reshape(-1)


def _threshold(reference: complex, mu_db: float) -> float:
    return abs(reference) * 10.0 ** (mu_db / 20.0)


def build_table(
    order: CoeffOrder,
    window: int,
    mu_db: float,
    pulse: PulseParams,
    link: LinkConfig,
    quad: QuadratureSpec,
    screen_margin_db: float = 6.0,
    context: Optional[RunContext] = None,
) -> CoeffTable:
    """Compute the truncated coefficient table of one order.

    Every candidate index is first integrated at the base panel setting.
    Candidates more than ``screen_margin_db`` below the threshold are dropped;
    the rest are refined by panel doubling and kept if they clear ``mu_db``.

    Args:
        order: Coefficient kind
        window: Symbol window size (even)
        mu_db: Truncation threshold relative to the reference coefficient
        pulse: Gaussian model pulse
        link: Fiber parameters
        quad: Quadrature settings
        screen_margin_db: Margin of the coarse screening pass
        context: Optional run context for parallel evaluation and progress

    Returns:
        The truncated table

    Raises:
        ParameterError: If the window is not a positive even number
        QuadratureError: If a retained coefficient does not settle
    """
    order = CoeffOrder(order)
    if window <= 0 or window % 2:
        raise ParameterError(f"Window must be a positive even number, got {window}")
    stage_id = f"build_{order.value}"

    reference = complex(refine(order, np.array([REFERENCE_INDEX]), pulse, link, quad)[0])
    floor = _threshold(reference, mu_db)

    unique, inverse = canonical_indices(candidate_indices(order, window))
    if context:
        context.log(stage_id, f"Screening {unique.shape[0]} canonical indices")
    coarse = integrate(order, unique, pulse, link, quad, context, stage_id)

    screen = np.abs(coarse) >= _threshold(reference, mu_db - screen_margin_db)
    screen |= np.all(unique == 0, axis=1)
    survivors = np.flatnonzero(screen)
    if context:
        context.log(stage_id, f"Refining {survivors.size} indices above the screening margin")
    refined = refine(
        order, unique[survivors], pulse, link, quad, floor=floor, initial=coarse[survivors],
        context=context, stage_id=stage_id,
    )

    values = np.zeros(unique.shape[0], dtype=np.complex128)
    values[survivors] = refined
    keep = np.zeros(unique.shape[0], dtype=bool)
    keep[survivors] = np.abs(refined) >= floor
    keep |= np.all(unique == 0, axis=1)

    candidates = candidate_indices(order, window)
    selected = np.flatnonzero(keep[inverse])
    entries = {
        CoeffIndex(*map(int, candidates[i])): complex(values[inverse[i]]) for i in selected
    }
    entries[REFERENCE_INDEX] = reference

    return CoeffTable(
        order=order,
        entries=entries,
        window=window,
        mu_db=float(mu_db),
        reference=reference,
        metadata={"link": link.to_dict(), "pulse": pulse.to_dict(), "quad": quad.to_dict()},
    )


def truncate(table: CoeffTable, mu_db: float) -> CoeffTable:
    """Derive a table with a stricter truncation threshold.

    Raises:
        ParameterError: If ``mu_db`` is below the table's own threshold
    """
    if mu_db < table.mu_db:
        raise ParameterError(
            f"Cannot loosen truncation from {table.mu_db} dB to {mu_db} dB without recomputing"
        )
    floor = _threshold(table.reference, mu_db)
    entries = {
        idx: value
        for idx, value in table.entries.items()
        if abs(value) >= floor or idx == REFERENCE_INDEX
    }
    groups = None
    if table.groups is not None:
        groups = {}
        for key, members in table.groups.items():
            kept = [idx for idx in members if idx in entries]
            if kept:
                groups[key] = kept
    return table.with_entries(entries, mu_db=float(mu_db), groups=groups)


def default_quant_step(table: CoeffTable, divisor: float = 32.0) -> float:
    """Quantization step as a fraction of the reference magnitude."""
    return abs(table.reference) / divisor


def quantize_combine(table: CoeffTable, quant_step: Optional[float] = None) -> CoeffTable:
    """Round coefficients to a grid and combine entries sharing a value.

    Entries whose real and imaginary parts both round to zero are dropped and
    counted in ``dropped_zero``.

    Args:
        table: Unquantized table
        quant_step: Grid step (default: ``|reference| / 32``)

    Returns:
        Quantized table with ``groups`` populated

    Raises:
        ParameterError: If the table is already quantized or the step is not positive
        DegenerateQuantizationError: If the reference coefficient rounds to zero
    """
    if table.quantized:
        raise ParameterError("Table is already quantized")
    step = default_quant_step(table) if quant_step is None else float(quant_step)
    if not step > 0 or not math.isfinite(step):
        raise ParameterError(f"Quantization step must be positive, got {quant_step}")

    if round(table.reference.real / step) == 0 and round(table.reference.imag / step) == 0:
        raise DegenerateQuantizationError(
            f"Reference coefficient quantizes to zero with step {step:g}",
            details={"quant_step": step, "reference": [table.reference.real, table.reference.imag]},
        )

    indices, values = table.arrays()
    re = np.rint(values.real / step).astype(np.int64)
    im = np.rint(values.imag / step).astype(np.int64)

    entries: Dict[CoeffIndex, complex] = {}
    groups: Dict[GroupKey, List[CoeffIndex]] = {}
    dropped = 0
    for row, a, b in zip(indices.tolist(), re.tolist(), im.tolist()):
        if a == 0 and b == 0:
            dropped += 1
            continue
        idx = CoeffIndex(*row)
        entries[idx] = complex(a * step, b * step)
        groups.setdefault((a, b), []).append(idx)

    return table.with_entries(
        entries, quantized=True, quant_scale=step, groups=groups, dropped_zero=dropped
    )


def histogram_db(table: CoeffTable, bin_edges_db: Sequence[float]) -> np.ndarray:
    """Count entries per magnitude bin relative to the reference."""
    counts, _ = np.histogram(table.ratio_db(), bins=np.asarray(bin_edges_db, dtype=float))
    return counts


def table_stats(table: CoeffTable) -> Dict[str, Any]:
    """Summary of a table for reports and the statistics file."""
    return {
        "order": table.order.value,
        "window": table.window,
        "mu_db": table.mu_db,
        "entries": len(table),
        "groups": len(table.groups) if table.groups is not None else len(table),
        "quantized": table.quantized,
        "quant_scale": table.quant_scale,
        "dropped_zero": table.dropped_zero,
        "reference": [table.reference.real, table.reference.imag],
    }


def table_growth(
    order: CoeffOrder,
    span_counts: Sequence[int],
    window: int,
    mu_db: float,
    pulse: PulseParams,
    link: LinkConfig,
    quad: QuadratureSpec,
    context: Optional[RunContext] = None,
) -> List[Tuple[int, int]]:
    """Retained entry count for every span count."""
    growth = []
    for spans in span_counts:
        table = build_table(
            order, window, mu_db, pulse, link.with_params(n_spans=int(spans)), quad, context=context
        )
        growth.append((int(spans), len(table)))
    return growth
