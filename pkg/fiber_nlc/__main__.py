"""Command-line interface for the fiber nonlinearity compensation harness."""

import argparse
import json
import sys
import threading
from typing import Any, Callable, Dict, Iterator, List, Optional, Sequence, TextIO, Tuple

import yaml

import fiber_nlc.techniques  # noqa: F401  registers the techniques
from fiber_nlc.core.config import Config
from fiber_nlc.core.errors import FiberNlcError
from fiber_nlc.core.stream import RunEvent
from fiber_nlc.harness.export import FORMATS, export_rows, write_meta, write_records
from fiber_nlc.harness.runner import (
    build_tables,
    complexity_report,
    estimate_reach,
    new_context,
    reach_gain,
    run_experiment,
    sweep_mu,
    sweep_power,
)
from fiber_nlc.harness.spec import ExperimentSpec
from fiber_nlc.receiver.metrics import EDC_TECHNIQUE

MU_COLUMNS = ["mu_db", "snr_db", "launch_power_dbm", "n_coefficients", "mults_per_symbol"]
REACH_COLUMNS = ["technique", "reach_km", "spans", "bound"]

EPILOG = """\
reproductions (one command each):
  coefficient tables, 8 spans:        fiber-nlc build-tables --link-n-spans 8
  SNR vs launch power, tuned epsilon: fiber-nlc sweep-power --link-n-spans 8 --predistortion-optimize-epsilon true -o power.csv
  SO truncation threshold sweep:      fiber-nlc sweep-mu --link-n-spans 8 --mu -10 -20 -30 -40 -50 -o mu.csv
  reach at the FEC threshold:         fiber-nlc reach --experiment-span-grid 4 8 12 16 -o reach.csv
  multiplications vs link length:     fiber-nlc complexity --experiment-span-grid 20 40 60 80 -o complexity.csv

sweep-mu truncates stored tables, so build them at or below the lowest
threshold first (--coefficients-mu-db -50). reach and complexity read the
tables of every span count in the grid (build-tables --spans ...).
"""


def _leaves(tree: Dict[str, Any], prefix: str = "") -> Iterator[Tuple[str, Any]]:
    for key, value in tree.items():
        path = f"{prefix}{key}"
        if isinstance(value, dict):
            yield from _leaves(value, f"{path}.")
        else:
            yield path, value


def _parse_value(raw: str) -> Any:
    try:
        return yaml.safe_load(raw)
    except yaml.YAMLError:
        return raw


def _add_spec_flags(parser: argparse.ArgumentParser) -> None:
    """One flag per configuration key, e.g. ``--link-n-spans`` for ``link.n_spans``."""
    group = parser.add_argument_group("experiment spec")
    for path, default in _leaves(Config.DEFAULTS):
        if path == "log_level":
            continue
        flag = "--" + path.replace(".", "-").replace("_", "-")
        kwargs: Dict[str, Any] = {"dest": path, "default": argparse.SUPPRESS, "type": _parse_value}
        if isinstance(default, list):
            kwargs["nargs"] = "+"
        group.add_argument(flag, metavar=path.rsplit(".", 1)[-1].upper(), help=f"{path} (default: {default})", **kwargs)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", "-c", help="Path to a YAML or JSON configuration file")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="Dotted override, repeatable")
    common.add_argument("--output", "-o", help="Output file (default: runtime.output)")
    common.add_argument("--format", choices=FORMATS, help="Output format (default: from the file suffix)")
    common.add_argument("--seed", type=int, help="Master seed")
    common.add_argument("--workers", type=int, help="Worker threads")
    common.add_argument("--log-level", choices=["debug", "info", "warning", "error"], help="Minimum event level")
    common.add_argument("--events", help="Also write every event as JSON lines to this file")
    _add_spec_flags(common)

    parser = argparse.ArgumentParser(
        prog="fiber-nlc",
        description="Perturbation-based nonlinearity compensation experiments",
        epilog=EPILOG,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    commands = parser.add_subparsers(dest="command", required=True)

    build = commands.add_parser("build-tables", parents=[common], help="Compute and store the coefficient tables")
    build.add_argument("--spans", type=int, nargs="+", help="Span counts to build (default: link.n_spans)")
    commands.add_parser("run", parents=[common], help="Run every technique over the launch power grid")
    commands.add_parser("sweep-power", parents=[common], help="Launch power sweep with the optimum per technique")
    mu = commands.add_parser("sweep-mu", parents=[common], help="SO quality and cost against the truncation threshold")
    mu.add_argument("--mu", type=float, nargs="+", help="Thresholds in dB (default: experiment.mu_grid)")
    reach = commands.add_parser("reach", parents=[common], help="Reach per technique at a BER threshold")
    reach.add_argument("--threshold", type=float, help="BER threshold (default: experiment.ber_threshold)")
    commands.add_parser("complexity", parents=[common], help="Multiplications per symbol against link length")
    return parser


def print_event(event: RunEvent, stream: Optional[TextIO] = None) -> None:
    """Render an event as one line on stderr."""
    stream = stream or sys.stderr
    data = event.data
    if event.event_type == "log":
        line = f"[{data.get('level', 'info').upper()}] {event.stage_id}: {data.get('message', '')}"
    elif event.event_type in ("stage_error", "run_error"):
        line = f"[ERROR] {event.stage_id}: {data.get('type', 'Error')}: {data.get('message', '')}"
    elif event.event_type == "progress":
        line = f"[PROGRESS] {event.stage_id}: {100 * data.get('progress', 0):.0f}%"
    elif event.event_type == "run_start":
        line = f"Starting run {data.get('run_id', '')}: {', '.join(data.get('techniques', []))}"
    elif event.event_type == "run_complete":
        line = f"Run completed in {data.get('execution_time', 0):.2f} seconds"
    else:
        return
    print(line, file=stream)


def event_writer(path: str) -> Callable[[RunEvent], None]:
    """Subscriber appending events as JSON lines; the file stays open for the process."""
    handle = open(path, "w", encoding="utf-8")
    lock = threading.Lock()

    def write(event: RunEvent) -> None:
        with lock:
            handle.write(event.to_json() + "\n")
            handle.flush()

    return write


def load_spec(args: argparse.Namespace, argv: Sequence[str]) -> ExperimentSpec:
    """Merge defaults, environment, file and flags into a validated spec."""
    overrides = {path: value for path, value in vars(args).items() if "." in path}
    if args.seed is not None:
        overrides["experiment.seed"] = args.seed
    if args.output:
        overrides["runtime.output"] = args.output
    config = Config.load(args.config, overrides=overrides, argv=argv)
    return ExperimentSpec.from_config(config)


def execute(args: argparse.Namespace, spec: ExperimentSpec) -> Optional[Dict[str, Any]]:
    subscribers: List[Callable[[RunEvent], None]] = [print_event]
    if args.events:
        subscribers.append(event_writer(args.events))
    context = new_context(spec, subscribers)
    output = spec.runtime.output
    config = spec.model_dump()

    if args.command == "build-tables":
        summary = build_tables(spec, args.spans, context=context)
        return {"tables": {str(n): stats for n, stats in summary.items()}}

    if args.command == "run":
        rows = run_experiment(spec, context)
        path = export_rows(rows, output, args.format)
        write_meta(path, config)
        return {"output": str(path), "rows": len(rows)}

    if args.command == "sweep-power":
        result = sweep_power(spec, context)
        path = export_rows(result.rows, output, args.format)
        optimum = {"optimum_launch_power_dbm": result.optimum_dbm}
        write_meta(path, config, optimum)
        return {"output": str(path), "rows": len(result.rows), **optimum}

    if args.command == "sweep-mu":
        rows = sweep_mu(spec, args.mu, context=context)
        path = write_records((row.model_dump() for row in rows), output, MU_COLUMNS, args.format)
        write_meta(path, config)
        return {"output": str(path), "rows": len(rows)}

    if args.command == "reach":
        results = estimate_reach(spec, args.threshold, context=context)
        path = write_records((r.model_dump() for r in results.values()), output, REACH_COLUMNS, args.format)
        extra: Dict[str, Any] = {"best_ber": {t: r.best_ber for t, r in results.items()}}
        if EDC_TECHNIQUE in results and results[EDC_TECHNIQUE].reach_km > 0:
            extra["reach_gain_percent"] = reach_gain(results)
        write_meta(path, config, extra)
        return {"output": str(path), **{t: r.reach_km for t, r in results.items()}}

    if args.command == "complexity":
        report = complexity_report(spec)
        records = [row.to_dict() for row in report.rows]
        columns = list(records[0]) if records else ["n_spans", "edc", "fo", "so"]
        path = write_records(records, output, columns, args.format)
        extra = {"crossover_spans": report.crossover_spans, "gaps": report.gaps}
        write_meta(path, config, extra)
        return {"output": str(path), **extra}

    return None


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Run the CLI and return the process exit code.

    Library errors are printed to stderr as ``{"error": {...}}`` and exit
    with the error class's code; anything else exits 1.
    """
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(argv)
    try:
        spec = load_spec(args, argv)
        summary = execute(args, spec)
    except FiberNlcError as e:
        print(json.dumps({"error": e.to_dict()}, default=str), file=sys.stderr)
        return e.exit_code
    except Exception as e:
        print(json.dumps({"error": {"code": "unexpected_error", "message": str(e), "type": e.__class__.__name__}}), file=sys.stderr)
        return 1

    if summary is not None:
        print(json.dumps(summary, default=str))
    return 0


def cli() -> None:
    sys.exit(main())


if __name__ == "__main__":
    cli()
