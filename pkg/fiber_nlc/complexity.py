"""Real-valued multiplications per symbol of the compensation techniques."""

import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

from fiber_nlc.coeffs.tables import CoeffTable
from fiber_nlc.core.errors import ParameterError


@dataclass(frozen=True)
class ComplexityParams:
    """FFT-based equalizer settings; ``M`` is the significant coefficient count."""

    n_steps: int = 1
    n_spans: int = 1
    n_fft: int = 4096
    n_samples: int = 4096
    M: int = 0

    def __post_init__(self) -> None:
        for name in ("n_steps", "n_spans", "n_fft", "n_samples"):
            if getattr(self, name) < 1:
                raise ParameterError(f"{name} must be positive, got {getattr(self, name)}")
        if self.n_fft & (self.n_fft - 1):
            raise ParameterError(f"n_fft must be a power of two, got {self.n_fft}")
        if self.M < 0:
            raise ParameterError(f"M must be non-negative, got {self.M}")


def mult_dbp(p: ComplexityParams) -> float:
    """``8 N_steps N_spans N_FFT (log2 N_FFT + 10.5) / N_s``."""
    return 8.0 * p.n_steps * p.n_spans * p.n_fft * (math.log2(p.n_fft) + 10.5) / p.n_samples


def mult_pbnlc(M: int) -> float:
    """``2 (4 M + 3)`` for M significant (or grouped) coefficients."""
    if M < 0:
        raise ParameterError(f"M must be non-negative, got {M}")
    return 2.0 * (4.0 * M + 3.0)


def mult_edc(p: ComplexityParams) -> float:
    """``8 N_FFT (log2 N_FFT + 1) / N_s``."""
    return 8.0 * p.n_fft * (math.log2(p.n_fft) + 1.0) / p.n_samples


def count_M(table: Optional[CoeffTable]) -> int:
    """Distinct quantized groups of a table, or its entry count if unquantized."""
    if table is None:
        return 0
    if table.quantized and table.groups is not None:
        return len(table.groups)
    return len(table)


@dataclass
class ComplexityRow:
    """Multiplications per symbol of every technique at one span count."""

    n_spans: int
    edc: float
    dbp: Dict[int, float] = field(default_factory=dict)
    fo: Optional[float] = None
    so: Optional[float] = None

    def to_dict(self) -> Dict[str, Any]:
        row: Dict[str, Any] = {"n_spans": self.n_spans, "edc": self.edc}
        for steps, value in sorted(self.dbp.items()):
            row[f"dbp_{steps}"] = value
        row["fo"] = self.fo
        row["so"] = self.so
        return row


def complexity_curve(
    span_counts: Sequence[int],
    M_by_spans: Mapping[str, Mapping[int, int]],
    dbp_steps: Sequence[int],
    params: ComplexityParams,
) -> List[ComplexityRow]:
    """Per-span-count multiplication counts.

    Args:
        span_counts: Span counts to evaluate
        M_by_spans: ``{"fo": {spans: M}, "so": {spans: M}}``; a missing
            technique or span count leaves that entry empty
        dbp_steps: DBP steps-per-span settings
        params: FFT settings shared by EDC and DBP

    Returns:
        One row per span count, in input order
    """
    rows = []
    for spans in span_counts:
        dbp = {
            int(steps): mult_dbp(
                ComplexityParams(
                    n_steps=int(steps), n_spans=int(spans), n_fft=params.n_fft, n_samples=params.n_samples
                )
            )
            for steps in dbp_steps
        }
        row = ComplexityRow(n_spans=int(spans), edc=mult_edc(params), dbp=dbp)
        if spans in M_by_spans.get("fo", {}):
            row.fo = mult_pbnlc(M_by_spans["fo"][spans])
        if spans in M_by_spans.get("so", {}):
            row.so = mult_pbnlc(M_by_spans["so"][spans])
        rows.append(row)
    return rows


def crossover_spans(curve: Sequence[ComplexityRow]) -> Tuple[Optional[int], List[Tuple[int, float]]]:
    """First span count from which SO stays cheaper than 1-step DBP.

    Returns:
        ``(spans, gaps)`` where ``gaps`` lists ``(n_spans, dbp_1 - so)`` for
        rows that have both counts; ``spans`` is ``None`` if SO never stays cheaper
    """
    gaps = [
        (row.n_spans, row.dbp[1] - row.so)
        for row in sorted(curve, key=lambda r: r.n_spans)
        if row.so is not None and 1 in row.dbp
    ]
    crossover = None
    for spans, gap in reversed(gaps):
        if gap <= 0:
            break
        crossover = spans
    return crossover, gaps
