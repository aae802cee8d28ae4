"""First- and second-order perturbative predistortion of symbol sequences.

Distortions are returned in symbol units (field increment over ``sqrt(P0)``).
For the pulse of interest at slot ``i`` and polarization ``x``:

    FO:      (8/9) g eps P0   sum C(m,n)   [a_m a*_{m+n}] a_{n,x}
    Term 1:  (64/81) g^2 eps P0^2 sum C1(m,n,k) 2 [a_m a*_{m+n}] a_{n,x} [|a_k|^2]
    Term 2:  (64/81) g^2 eps P0^2 sum C2(m,n,k) / R [a*_m a_{m+n}] a*_{n,x} [a_k a_{-k}]

with all slots relative to ``i`` and brackets summed over both
polarizations. Slots outside the sequence count as zero. ``R`` is
:data:`~fiber_nlc.coeffs.integrands.TERM2_RATIO`, since Term-2 tables hold
the closed-form kernel.

The channel maps ``a`` to ``a + D1[a] + D2[a]`` up to second order, so its
inverse to the same order is

    a - D1[a] - (D2[a] - dD1[a](D1[a]))

where ``dD1[a](v)`` is the first-order distortion linearized at ``a`` along
``v``. Every term is evaluated on the unmodified symbols.
"""

import dataclasses
from dataclasses import dataclass
from typing import Callable, List, Optional, Tuple

import numpy as np
from scipy import sparse

from fiber_nlc.coeffs.integrands import TERM2_RATIO
from fiber_nlc.coeffs.tables import CoeffTable
from fiber_nlc.coeffs.types import CoeffOrder
from fiber_nlc.core.context import RunContext
from fiber_nlc.core.errors import ConfigurationError, LengthError, ParameterError
from fiber_nlc.model.types import SymbolGrid

FO_FACTOR = 8.0 / 9.0
SO_FACTOR = (8.0 / 9.0) ** 2

# Upper bound on the (entries x slots) product block built at once
MAX_ELEMENTS = 4_000_000

Products = Callable[[np.ndarray, np.ndarray], Tuple[np.ndarray, np.ndarray]]


@dataclass(frozen=True)
class PredistortConfig:
    """Predistorter settings.

    ``gamma`` is the fiber nonlinearity in 1/(W m) and ``peak_power`` the
    Gaussian model peak power P0 in W. An epsilon of zero disables its order.
    """

    epsilon_fo: float = 0.0
    epsilon_so: float = 0.0
    window: int = 100
    use_term2: bool = False
    gamma: float = 1.22e-3
    peak_power: float = 1e-3
    fo_table: Optional[CoeffTable] = None
    so_term1_table: Optional[CoeffTable] = None
    so_term2_table: Optional[CoeffTable] = None

    def __post_init__(self) -> None:
        if self.epsilon_fo < 0 or self.epsilon_so < 0:
            raise ParameterError(
                f"Epsilon values must be non-negative, got fo={self.epsilon_fo}, so={self.epsilon_so}"
            )
        if self.window <= 0 or self.window % 2:
            raise ParameterError(f"Window must be a positive even number, got {self.window}")
        if not self.peak_power >= 0:
            raise ParameterError(f"peak_power must be non-negative, got {self.peak_power}")
        for name in ("fo_table", "so_term1_table", "so_term2_table"):
            table = getattr(self, name)
            if table is not None and table.window < self.window:
                raise ConfigurationError(
                    f"{name} covers a window of {table.window} symbols, smaller than {self.window}"
                )

    @property
    def half_window(self) -> int:
        return self.window // 2

    def with_epsilon(self, epsilon_fo: Optional[float] = None, epsilon_so: Optional[float] = None) -> "PredistortConfig":
        changes = {}
        if epsilon_fo is not None:
            changes["epsilon_fo"] = epsilon_fo
        if epsilon_so is not None:
            changes["epsilon_so"] = epsilon_so
        return dataclasses.replace(self, **changes)


def edge_mask(n_symbols: int, window: int) -> np.ndarray:
    """True for the first and last ``window / 2`` slots."""
    mask = np.zeros(n_symbols, dtype=bool)
    half = min(window // 2, n_symbols)
    mask[:half] = True
    mask[n_symbols - half :] = True
    return mask


def _require(table: Optional[CoeffTable], name: str, order: CoeffOrder) -> CoeffTable:
    if table is None:
        raise ConfigurationError(f"Predistortion needs the {name} table")
    if table.order is not order:
        raise ConfigurationError(f"{name} table holds {table.order.value} coefficients")
    return table


def _within(indices: np.ndarray, half: int) -> np.ndarray:
    return np.all(np.abs(indices) <= half, axis=1)


class _Padded:
    """Zero-padded polarizations addressed by slot and relative offset."""

    def __init__(self, symbols: SymbolGrid, pad: int):
        self.pad = pad
        self.x = np.pad(symbols.x, pad)
        self.y = np.pad(symbols.y, pad)

    def at(self, offsets: np.ndarray, slots: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        positions = self.pad + slots[None, :] + offsets[:, None]
        return self.x[positions], self.y[positions]


def _pad_for(indices: np.ndarray) -> int:
    if indices.size == 0:
        return 0
    m, n, k = indices[:, 0], indices[:, 1], indices[:, 2]
    return int(max(np.abs(m).max(), np.abs(n).max(), np.abs(m + n).max(), np.abs(k).max()))


def _fo_products(padded: _Padded, indices: np.ndarray) -> Products:
    m, n = indices[:, 0], indices[:, 1]

    def products(rows: np.ndarray, slots: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        xm, ym = padded.at(m[rows], slots)
        xl, yl = padded.at(m[rows] + n[rows], slots)
        xn, yn = padded.at(n[rows], slots)
        pair = xm * np.conj(xl) + ym * np.conj(yl)
        return pair * xn, pair * yn

    return products


def _fo_linear_products(padded: _Padded, direction: _Padded, indices: np.ndarray) -> Products:
    m, n = indices[:, 0], indices[:, 1]

    def products(rows: np.ndarray, slots: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        xm, ym = padded.at(m[rows], slots)
        xl, yl = padded.at(m[rows] + n[rows], slots)
        xn, yn = padded.at(n[rows], slots)
        vxm, vym = direction.at(m[rows], slots)
        vxl, vyl = direction.at(m[rows] + n[rows], slots)
        vxn, vyn = direction.at(n[rows], slots)
        pair = xm * np.conj(xl) + ym * np.conj(yl)
        moved = vxm * np.conj(xl) + xm * np.conj(vxl) + vym * np.conj(yl) + ym * np.conj(vyl)
        return moved * xn + pair * vxn, moved * yn + pair * vyn

    return products


def _term1_products(padded: _Padded, indices: np.ndarray) -> Products:
    m, n, k = indices[:, 0], indices[:, 1], indices[:, 2]

    def products(rows: np.ndarray, slots: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        xm, ym = padded.at(m[rows], slots)
        xl, yl = padded.at(m[rows] + n[rows], slots)
        xn, yn = padded.at(n[rows], slots)
        xk, yk = padded.at(k[rows], slots)
        common = 2.0 * (xm * np.conj(xl) + ym * np.conj(yl)) * (np.abs(xk) ** 2 + np.abs(yk) ** 2)
        return common * xn, common * yn

    return products


def _term2_products(padded: _Padded, indices: np.ndarray) -> Products:
    m, n, k = indices[:, 0], indices[:, 1], indices[:, 2]

    def products(rows: np.ndarray, slots: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        xm, ym = padded.at(m[rows], slots)
        xl, yl = padded.at(m[rows] + n[rows], slots)
        xn, yn = padded.at(n[rows], slots)
        xk, yk = padded.at(k[rows], slots)
        xq, yq = padded.at(-k[rows], slots)
        common = (np.conj(xm) * xl + np.conj(ym) * yl) * (xk * xq + yk * yq)
        return common * np.conj(xn), common * np.conj(yn)

    return products


def _grouped_sum(
    products: Products,
    owner: np.ndarray,
    group_values: np.ndarray,
    n_slots: int,
    context: Optional[RunContext] = None,
    stage_id: Optional[str] = None,
) -> np.ndarray:
    """Accumulate products per coefficient group, then weight each group once.

    Returns:
        ``(2, n_slots)`` array of the weighted sums for both polarizations
    """
    n_entries = owner.size
    out = np.zeros((2, n_slots), dtype=np.complex128)
    if n_entries == 0 or n_slots == 0:
        return out
    grouping = sparse.csr_matrix(
        (np.ones(n_entries), (owner, np.arange(n_entries))), shape=(group_values.size, n_entries)
    )
    rows = np.arange(n_entries)
    block = max(1, MAX_ELEMENTS // n_entries)
    starts = list(range(0, n_slots, block))

    def run(start: int) -> Tuple[int, np.ndarray]:
        slots = np.arange(start, min(start + block, n_slots))
        px, py = products(rows, slots)
        return start, np.vstack([group_values @ (grouping @ px), group_values @ (grouping @ py)])

    results: List[Tuple[int, np.ndarray]]
    if context is None:
        results = [run(start) for start in starts]
    else:
        results = context.map(run, starts, stage_id=stage_id)
    for start, values in results:
        out[:, start : start + values.shape[1]] = values
    return out


def _naive_sum(products: Products, values: np.ndarray, n_slots: int) -> np.ndarray:
    out = np.zeros((2, n_slots), dtype=np.complex128)
    slots = np.arange(n_slots)
    for e, value in enumerate(values):
        px, py = products(np.array([e]), slots)
        out[0] += value * px[0]
        out[1] += value * py[0]
    return out


def _prepare(table: CoeffTable, half: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    indices, owner, group_values = table.grouped()
    keep = _within(indices, half)
    return indices[keep], owner[keep], group_values


def _as_grid(symbols: SymbolGrid, values: np.ndarray) -> SymbolGrid:
    return symbols.with_arrays(values[0], values[1])


def fo_distortion(
    symbols: SymbolGrid, cfg: PredistortConfig, context: Optional[RunContext] = None
) -> SymbolGrid:
    """First-order distortion per slot, evaluated by coefficient group.

    Raises:
        ConfigurationError: If the FO table is missing
    """
    table = _require(cfg.fo_table, "FO", CoeffOrder.FO)
    indices, owner, group_values = _prepare(table, cfg.half_window)
    padded = _Padded(symbols, _pad_for(indices))
    total = _grouped_sum(_fo_products(padded, indices), owner, group_values, len(symbols), context, "fo_distortion")
    return _as_grid(symbols, FO_FACTOR * cfg.gamma * cfg.epsilon_fo * cfg.peak_power * total)


def fo_linearization(
    symbols: SymbolGrid, direction: SymbolGrid, cfg: PredistortConfig, context: Optional[RunContext] = None
) -> SymbolGrid:
    """First-order distortion linearized at ``symbols`` and applied to ``direction``.

    This is the real-linear part of ``fo_distortion(symbols + v) - fo_distortion(symbols)``
    in ``v``, with the same scaling as :func:`fo_distortion`.

    Raises:
        ConfigurationError: If the FO table is missing
        LengthError: If the grids differ in length
    """
    if len(direction) != len(symbols):
        raise LengthError(f"Direction has {len(direction)} slots, symbols {len(symbols)}")
    table = _require(cfg.fo_table, "FO", CoeffOrder.FO)
    indices, owner, group_values = _prepare(table, cfg.half_window)
    pad = _pad_for(indices)
    products = _fo_linear_products(_Padded(symbols, pad), _Padded(direction, pad), indices)
    total = _grouped_sum(products, owner, group_values, len(symbols), context, "fo_linearization")
    return _as_grid(symbols, FO_FACTOR * cfg.gamma * cfg.epsilon_fo * cfg.peak_power * total)


def _so_terms(cfg: PredistortConfig) -> List[Tuple[CoeffTable, Callable[[_Padded, np.ndarray], Products], complex]]:
    """SO tables with their product builders and weights.

    Term-2 tables hold the closed-form kernel; dividing by
    :data:`~fiber_nlc.coeffs.integrands.TERM2_RATIO` puts Term 2 on the scale
    of the evolved field, which Term 1 is already on.
    """
    terms = [(_require(cfg.so_term1_table, "SO Term-1", CoeffOrder.SO_TERM1), _term1_products, 1.0 + 0j)]
    if cfg.use_term2:
        table = _require(cfg.so_term2_table, "SO Term-2", CoeffOrder.SO_TERM2)
        terms.append((table, _term2_products, 1.0 / TERM2_RATIO))
    return terms


def so_distortion(
    symbols: SymbolGrid, cfg: PredistortConfig, context: Optional[RunContext] = None
) -> SymbolGrid:
    """Second-order distortion per slot, evaluated by coefficient group.

    Term 2 is included when ``cfg.use_term2`` is set.

    Raises:
        ConfigurationError: If a needed SO table is missing
    """
    total = np.zeros((2, len(symbols)), dtype=np.complex128)
    for table, build, weight in _so_terms(cfg):
        indices, owner, group_values = _prepare(table, cfg.half_window)
        padded = _Padded(symbols, _pad_for(indices))
        total += weight * _grouped_sum(
            build(padded, indices), owner, group_values, len(symbols), context, f"{table.order.value}_distortion"
        )
    scale = SO_FACTOR * cfg.gamma**2 * cfg.epsilon_so * cfg.peak_power**2
    return _as_grid(symbols, scale * total)


def fo_distortion_naive(symbols: SymbolGrid, cfg: PredistortConfig) -> SymbolGrid:
    """Term-by-term reference for :func:`fo_distortion`."""
    table = _require(cfg.fo_table, "FO", CoeffOrder.FO)
    indices, values = table.arrays()
    keep = _within(indices, cfg.half_window)
    indices, values = indices[keep], values[keep]
    padded = _Padded(symbols, _pad_for(indices))
    total = _naive_sum(_fo_products(padded, indices), values, len(symbols))
    return _as_grid(symbols, FO_FACTOR * cfg.gamma * cfg.epsilon_fo * cfg.peak_power * total)


def so_distortion_naive(symbols: SymbolGrid, cfg: PredistortConfig) -> SymbolGrid:
    """Term-by-term reference for :func:`so_distortion`."""
    total = np.zeros((2, len(symbols)), dtype=np.complex128)
    for table, build, weight in _so_terms(cfg):
        indices, values = table.arrays()
        keep = _within(indices, cfg.half_window)
        indices, values = indices[keep], values[keep]
        padded = _Padded(symbols, _pad_for(indices))
        total += weight * _naive_sum(build(padded, indices), values, len(symbols))
    scale = SO_FACTOR * cfg.gamma**2 * cfg.epsilon_so * cfg.peak_power**2
    return _as_grid(symbols, scale * total)


def predistort(
    symbols: SymbolGrid, cfg: PredistortConfig, context: Optional[RunContext] = None
) -> SymbolGrid:
    """Pre-invert the channel nonlinearity on the transmit symbols.

    The FO distortion is subtracted. The SO order subtracts the SO distortion
    less ``epsilon_so`` times the FO distortion linearized along itself, so
    the whole second-order correction scales with ``epsilon_so``. The SO order
    runs only when its epsilon is positive and the Term-1 table is present.

    Raises:
        ConfigurationError: If ``epsilon_fo > 0`` and the FO table is missing
    """
    x, y = symbols.x.copy(), symbols.y.copy()
    first = None
    if cfg.epsilon_fo > 0:
        first = fo_distortion(symbols, cfg, context)
        x -= first.x
        y -= first.y
    if cfg.epsilon_so > 0 and cfg.so_term1_table is not None:
        delta = so_distortion(symbols, cfg, context)
        x -= delta.x
        y -= delta.y
        if first is not None:
            cross = fo_linearization(symbols, first, cfg, context)
            x += cfg.epsilon_so * cross.x
            y += cfg.epsilon_so * cross.y
    return symbols.with_arrays(x, y)
