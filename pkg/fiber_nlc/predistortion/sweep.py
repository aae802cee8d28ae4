"""Epsilon scaling search for the predistorter."""

from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from fiber_nlc.core.context import RunContext
from fiber_nlc.core.errors import ParameterError
from fiber_nlc.model.types import SymbolGrid
from fiber_nlc.predistortion.predistorter import PredistortConfig, predistort

Chain = Callable[[SymbolGrid], float]
Curve = List[Tuple[float, float]]


@dataclass
class EpsilonSweep:
    """Outcome of an epsilon search; curves hold ``(epsilon, snr_db)`` pairs."""

    best_fo: float
    best_so: float
    best_snr_db: float
    fo_curve: Curve = field(default_factory=list)
    so_curve: Curve = field(default_factory=list)

    def config(self, cfg: PredistortConfig) -> PredistortConfig:
        """``cfg`` with the best epsilons applied."""
        return cfg.with_epsilon(self.best_fo, self.best_so)


def _check_grid(grid: Sequence[float], name: str) -> List[float]:
    values = [float(v) for v in grid]
    if not values:
        raise ParameterError(f"{name} grid is empty")
    if any(v < 0 for v in values):
        raise ParameterError(f"{name} grid holds negative values: {values}")
    return values


def _scan(
    symbols: SymbolGrid,
    configs: List[PredistortConfig],
    chain: Chain,
    context: Optional[RunContext],
    stage_id: str,
) -> List[float]:
    def evaluate(cfg: PredistortConfig) -> float:
        return float(chain(predistort(symbols, cfg)))

    if context is None:
        return [evaluate(cfg) for cfg in configs]
    return context.map(evaluate, configs, stage_id=stage_id)


def _best(curve: Curve) -> Tuple[float, float]:
    # first maximum wins so ties resolve to the smaller epsilon
    index = int(np.argmax([snr for _, snr in curve]))
    return curve[index]


def sweep_epsilon(
    symbols: SymbolGrid,
    cfg: PredistortConfig,
    chain: Chain,
    fo_grid: Optional[Sequence[float]] = None,
    so_grid: Optional[Sequence[float]] = None,
    context: Optional[RunContext] = None,
) -> EpsilonSweep:
    """Pick the epsilons that maximize the received SNR.

    FO is swept first with SO disabled; SO is then swept with FO held at its
    best value. A grid of ``None`` keeps the value already in ``cfg``.

    Args:
        symbols: Transmit symbols before predistortion
        cfg: Predistorter settings with tables attached
        chain: End-to-end evaluation from predistorted symbols to SNR in dB
        fo_grid: FO epsilon candidates
        so_grid: SO epsilon candidates
        context: Optional run context to evaluate grid points in parallel

    Returns:
        Best epsilons and both SNR curves

    Raises:
        ParameterError: If a given grid is empty or negative
    """
    best_fo = cfg.epsilon_fo
    fo_curve: Curve = []
    if fo_grid is not None:
        values = _check_grid(fo_grid, "FO epsilon")
        configs = [cfg.with_epsilon(eps, 0.0) for eps in values]
        fo_curve = list(zip(values, _scan(symbols, configs, chain, context, "sweep_epsilon_fo")))
        best_fo, best_snr = _best(fo_curve)

    best_so = cfg.epsilon_so
    so_curve: Curve = []
    if so_grid is not None:
        values = _check_grid(so_grid, "SO epsilon")
        configs = [cfg.with_epsilon(best_fo, eps) for eps in values]
        so_curve = list(zip(values, _scan(symbols, configs, chain, context, "sweep_epsilon_so")))
        best_so, best_snr = _best(so_curve)

    if fo_grid is None and so_grid is None:
        best_snr = float(chain(predistort(symbols, cfg)))

    return EpsilonSweep(
        best_fo=best_fo, best_so=best_so, best_snr_db=best_snr, fo_curve=fo_curve, so_curve=so_curve
    )


def is_unimodal(values: Sequence[float], tolerance: float = 0.0) -> bool:
    """Whether a sequence rises to a single peak and then falls.

    Steps smaller than ``tolerance`` against the trend are ignored.
    """
    values = np.asarray(values, dtype=float)
    if values.size < 3:
        return True
    peak = int(np.argmax(values))
    rising = np.diff(values[: peak + 1])
    falling = np.diff(values[peak:])
    return bool(np.all(rising >= -tolerance) and np.all(falling <= tolerance))
