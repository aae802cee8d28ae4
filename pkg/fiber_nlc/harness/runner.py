"""Experiment runners: power sweeps, truncation sweeps, reach and table building."""

import json
import math
import uuid
from dataclasses import dataclass, field
from functools import partial
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence

from pydantic import BaseModel, ConfigDict

from fiber_nlc.coeffs.lut import load_table, save_table, table_filename
from fiber_nlc.coeffs.tables import build_table, default_quant_step, quantize_combine, table_stats, truncate
from fiber_nlc.coeffs.types import CoeffOrder
from fiber_nlc.complexity import ComplexityParams, ComplexityRow, complexity_curve, count_M, crossover_spans, mult_pbnlc
from fiber_nlc.core.context import RunContext
from fiber_nlc.core.errors import ExperimentError
from fiber_nlc.core.experiment import Experiment
from fiber_nlc.core.stream import RunEvent
from fiber_nlc.core.technique import LinkSetup, Technique
from fiber_nlc.harness.frames import draw_frame, epsilon_chain, simulate_frame
from fiber_nlc.harness.spec import ExperimentSpec
from fiber_nlc.predistortion.sweep import sweep_epsilon
from fiber_nlc.receiver.metrics import EDC_TECHNIQUE, MetricsRow, attach_q_gain
from fiber_nlc.techniques.pbnlc import EPSILON_EXTRA, PbnlcTechnique, SoPbnlcTechnique, load_tables, tables_key

Subscriber = Callable[[RunEvent], None]

TABLE_ORDERS = [CoeffOrder.FO, CoeffOrder.SO_TERM1, CoeffOrder.SO_TERM2]
SO_TECHNIQUE = "so"


def new_context(spec: ExperimentSpec, subscribers: Sequence[Subscriber] = ()) -> RunContext:
    """Run context for a spec with the given event subscribers attached."""
    context = RunContext(run_id=str(uuid.uuid4()), config=spec.to_config())
    for subscriber in subscribers:
        context.get_stream_manager().add_subscriber(subscriber)
    return context


def _setup_factory(
    spec: ExperimentSpec, techniques: Sequence[Technique], context: RunContext
) -> Callable[[float], LinkSetup]:
    """Setups per launch power, with per-power epsilon tuning when enabled.

    Tuning runs on a frame of its own, with its own bits and noise, so the
    evaluated frames never see the data the epsilons were picked on.
    """
    if not spec.predistortion.optimize_epsilon:
        return spec.setup

    grid = spec.predistortion.epsilon_grid
    tunable = [t for t in techniques if isinstance(t, PbnlcTechnique)]

    def factory(launch_power_dbm: float) -> LinkSetup:
        setup = spec.setup(launch_power_dbm)
        # held out: evaluated frames are 0 .. n_frames - 1
        frame = draw_frame(spec, spec.experiment.n_frames)
        chain = epsilon_chain(spec, setup, frame)
        tuned = {}
        for technique in tunable:
            cfg = technique.predistort_config(setup, context)
            so_grid = grid if isinstance(technique, SoPbnlcTechnique) else None
            result = sweep_epsilon(frame.symbols, cfg, chain, fo_grid=grid, so_grid=so_grid, context=context)
            tuned[technique.id] = (result.best_fo, result.best_so)
            context.log(
                technique.id,
                f"Tuned epsilon at {launch_power_dbm} dBm: fo={result.best_fo}, so={result.best_so}",
            )
        return LinkSetup(
            link=setup.link,
            pulse=setup.pulse,
            launch_power_dbm=setup.launch_power_dbm,
            samples_per_symbol=setup.samples_per_symbol,
            rx_samples_per_symbol=setup.rx_samples_per_symbol,
            extras={EPSILON_EXTRA: tuned},
        )

    return factory


def run_experiment(
    spec: ExperimentSpec,
    context: Optional[RunContext] = None,
    subscribers: Sequence[Subscriber] = (),
    launch_powers_dbm: Optional[Sequence[float]] = None,
) -> List[MetricsRow]:
    """Run every technique of the spec over its launch power grid.

    Args:
        spec: Experiment description
        context: Context to share tables and events with (default: a new one)
        subscribers: Event subscribers for a new context
        launch_powers_dbm: Launch power grid override

    Returns:
        One row per (technique, launch power) with ``delta_q_db`` filled
        against EDC when EDC is part of the run

    Raises:
        ConfigurationError: If a coefficient table is missing
        ExperimentError: If the grid is empty or a frame fails
    """
    context = context or new_context(spec, subscribers)
    techniques = spec.techniques()
    experiment = Experiment(
        techniques,
        _setup_factory(spec, techniques, context),
        partial(simulate_frame, spec),
        context=context,
    )
    powers = spec.experiment.launch_power_dbm if launch_powers_dbm is None else launch_powers_dbm
    rows = experiment.execute(powers, spec.experiment.n_frames)
    return attach_q_gain(rows)


@dataclass
class PowerSweep:
    """Rows of a launch power sweep and the best launch power per technique."""

    rows: List[MetricsRow]
    optimum_dbm: Dict[str, float] = field(default_factory=dict)


def optimal_launch_power(rows: Sequence[MetricsRow]) -> Dict[str, float]:
    """Launch power of the highest SNR per technique; the lowest power wins ties."""
    best: Dict[str, MetricsRow] = {}
    for row in rows:
        current = best.get(row.technique)
        if current is None or row.snr_db > current.snr_db:
            best[row.technique] = row
    return {technique: row.launch_power_dbm for technique, row in best.items()}


def sweep_power(spec: ExperimentSpec, context: Optional[RunContext] = None, subscribers: Sequence[Subscriber] = ()) -> PowerSweep:
    """Launch power sweep with the nonlinear threshold of every technique."""
    rows = run_experiment(spec, context, subscribers)
    return PowerSweep(rows=rows, optimum_dbm=optimal_launch_power(rows))


class MuSweepRow(BaseModel):
    """Second-order predistortion quality and cost at one truncation threshold."""

    model_config = ConfigDict(frozen=True)

    mu_db: float
    snr_db: float
    launch_power_dbm: float
    n_coefficients: int
    mults_per_symbol: float


def _so_orders(spec: ExperimentSpec) -> List[CoeffOrder]:
    orders = [CoeffOrder.SO_TERM1]
    if spec.predistortion.use_term2:
        orders.append(CoeffOrder.SO_TERM2)
    return orders


def sweep_mu(
    spec: ExperimentSpec,
    mu_grid: Optional[Sequence[float]] = None,
    context: Optional[RunContext] = None,
    subscribers: Sequence[Subscriber] = (),
) -> List[MuSweepRow]:
    """SNR and multiplication count of SO predistortion against the truncation threshold.

    The stored second-order tables are truncated further for each threshold,
    so every value in the grid must be at or above the threshold they were
    built with. Each row reports the best SNR over the launch power grid.

    Raises:
        ParameterError: If a threshold is below the stored tables' threshold
        ExperimentError: If the grid is empty
    """
    grid = list(spec.experiment.mu_grid if mu_grid is None else mu_grid)
    if not grid:
        raise ExperimentError("Truncation threshold grid is empty")
    base = new_context(spec, subscribers) if context is None else context
    n_spans = spec.link.n_spans
    orders = [CoeffOrder.FO] + _so_orders(spec)
    tables = load_tables(base, n_spans, orders)
    so_spec = spec.model_copy(
        update={"experiment": spec.experiment.model_copy(update={"techniques": [SO_TECHNIQUE]})}
    )

    results = []
    for mu_db in grid:
        truncated = dict(tables)
        for order in _so_orders(spec):
            truncated[order] = truncate(tables[order], mu_db)
        run_context = base.clone()
        run_context.set_resource(tables_key(n_spans), truncated)
        base.log("sweep_mu", f"Running mu = {mu_db} dB")
        rows = run_experiment(so_spec, run_context)
        best = max(rows, key=lambda r: r.snr_db)
        results.append(
            MuSweepRow(
                mu_db=float(mu_db),
                snr_db=best.snr_db,
                launch_power_dbm=best.launch_power_dbm,
                n_coefficients=sum(len(truncated[order]) for order in _so_orders(spec)),
                mults_per_symbol=mult_pbnlc(sum(count_M(truncated[order]) for order in _so_orders(spec))),
            )
        )
    return results


class ReachResult(BaseModel):
    """Transmission reach of one technique at a BER threshold.

    ``bound`` is ``exact`` when the threshold is crossed inside the span grid,
    ``lower`` when it still holds at the longest simulated link and ``none``
    when it never holds (reach 0).
    """

    model_config = ConfigDict(frozen=True)

    technique: str
    reach_km: float
    spans: Optional[int]
    bound: str
    best_ber: Dict[int, float]


def _reach(technique: str, best_ber: Dict[int, float], span_length_km: float, threshold: float) -> ReachResult:
    spans = sorted(best_ber)
    passing = [n for n in spans if best_ber[n] <= threshold]
    if not passing:
        return ReachResult(technique=technique, reach_km=0.0, spans=None, bound="none", best_ber=best_ber)
    last = max(passing)
    if last == spans[-1]:
        return ReachResult(
            technique=technique, reach_km=last * span_length_km, spans=last, bound="lower", best_ber=best_ber
        )

    following = spans[spans.index(last) + 1]
    # Interpolate log10(BER) linearly in distance between the last pass and the next fail
    lo, hi = math.log10(max(best_ber[last], 1e-300)), math.log10(best_ber[following])
    target = math.log10(threshold)
    fraction = 0.0 if hi == lo else min(max((target - lo) / (hi - lo), 0.0), 1.0)
    reach_km = (last + fraction * (following - last)) * span_length_km
    return ReachResult(technique=technique, reach_km=reach_km, spans=last, bound="exact", best_ber=best_ber)


def estimate_reach(
    spec: ExperimentSpec,
    ber_threshold: Optional[float] = None,
    span_grid: Optional[Sequence[int]] = None,
    context: Optional[RunContext] = None,
    subscribers: Sequence[Subscriber] = (),
) -> Dict[str, ReachResult]:
    """Longest link per technique whose best BER over launch power meets the threshold.

    Every span count runs the full launch power sweep. PB-NLC techniques need
    the coefficient tables of every span count in the grid.

    Returns:
        Reach per technique label, in the configured technique order
    """
    threshold = spec.experiment.ber_threshold if ber_threshold is None else float(ber_threshold)
    grid = sorted({int(n) for n in (spec.experiment.span_grid if span_grid is None else span_grid)})
    if not grid:
        raise ExperimentError("Span grid is empty")
    context = context or new_context(spec, subscribers)

    best: Dict[str, Dict[int, float]] = {}
    for n_spans in grid:
        context.log("reach", f"Simulating {n_spans} spans")
        rows = run_experiment(spec.with_spans(n_spans), context)
        for row in rows:
            per_span = best.setdefault(row.technique, {})
            per_span[n_spans] = min(per_span.get(n_spans, math.inf), row.ber)

    return {
        technique: _reach(technique, per_span, spec.link.span_length_km, threshold)
        for technique, per_span in best.items()
    }


def reach_gain(results: Dict[str, ReachResult], baseline: str = EDC_TECHNIQUE) -> Dict[str, float]:
    """Reach extension over the baseline in percent.

    Raises:
        ExperimentError: If the baseline is missing or has zero reach
    """
    if baseline not in results:
        raise ExperimentError(f"Reach gain needs a {baseline} result")
    reference = results[baseline].reach_km
    if reference <= 0:
        raise ExperimentError(f"Baseline {baseline} has no reach to compare against")
    return {technique: 100.0 * (r.reach_km / reference - 1.0) for technique, r in results.items()}


def build_tables(
    spec: ExperimentSpec,
    span_counts: Optional[Sequence[int]] = None,
    context: Optional[RunContext] = None,
    subscribers: Sequence[Subscriber] = (),
) -> Dict[int, List[Dict[str, Any]]]:
    """Compute, quantize and store the FO, SO Term-1 and SO Term-2 tables.

    Each span count gets one LUT file per order in ``runtime.tables_dir`` and
    a ``stats-<n>spans.json`` summary. A ``quant_divisor`` of 0 stores
    unquantized tables.

    Returns:
        Table statistics per span count
    """
    context = context or new_context(spec, subscribers)
    stream = context.get_stream_manager()
    directory = Path(spec.runtime.tables_dir)
    directory.mkdir(parents=True, exist_ok=True)
    counts = [spec.link.n_spans] if span_counts is None else [int(n) for n in span_counts]
    coeffs = spec.coefficients

    summary: Dict[int, List[Dict[str, Any]]] = {}
    for n_spans in counts:
        link = spec.link_config(n_spans)
        stats = []
        for order in TABLE_ORDERS:
            stage_id = f"build_tables.{order.value}.{n_spans}"
            stream.emit_start(stage_id, {"order": order.value, "n_spans": n_spans})
            try:
                table = build_table(
                    order,
                    coeffs.window,
                    coeffs.mu_db,
                    spec.pulse(),
                    link,
                    spec.quadrature(),
                    screen_margin_db=coeffs.quadrature.screen_margin_db,
                    context=context,
                )
                if coeffs.quant_divisor > 0:
                    table = quantize_combine(table, default_quant_step(table, coeffs.quant_divisor))
                path = save_table(table, directory / table_filename(order, n_spans))
            except Exception as e:
                stream.emit_error(stage_id, e)
                raise
            entry = table_stats(table)
            entry["path"] = str(path)
            stats.append(entry)
            stream.emit_complete(stage_id, entry)

        with open(directory / f"stats-{n_spans}spans.json", "w", encoding="utf-8") as f:
            json.dump({"n_spans": n_spans, "tables": stats}, f, indent=2)
        summary[n_spans] = stats
    return summary


@dataclass
class ComplexityReport:
    rows: List[ComplexityRow]
    crossover_spans: Optional[int]
    gaps: List[Any]


def complexity_report(spec: ExperimentSpec, span_counts: Optional[Sequence[int]] = None) -> ComplexityReport:
    """Multiplications per symbol against link length.

    FO and SO counts come from the stored tables; span counts without tables
    leave those columns empty.
    """
    counts = list(spec.experiment.span_grid if span_counts is None else span_counts)
    directory = Path(spec.runtime.tables_dir)
    M_by_spans: Dict[str, Dict[int, int]] = {"fo": {}, "so": {}}
    for n_spans in counts:
        paths = {order: directory / table_filename(order, n_spans) for order in TABLE_ORDERS}
        if paths[CoeffOrder.FO].exists():
            M_by_spans["fo"][n_spans] = count_M(load_table(paths[CoeffOrder.FO]))
        so_paths = [paths[order] for order in _so_orders(spec)]
        if all(path.exists() for path in so_paths):
            M_by_spans["so"][n_spans] = sum(count_M(load_table(path)) for path in so_paths)

    params = ComplexityParams(n_fft=spec.complexity.n_fft, n_samples=spec.complexity.n_samples)
    rows = complexity_curve(counts, M_by_spans, spec.complexity.dbp_steps, params)
    crossover, gaps = crossover_spans(rows)
    return ComplexityReport(rows=rows, crossover_spans=crossover, gaps=gaps)
