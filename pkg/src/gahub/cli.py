"""Single entry point: serve the clearinghouse, launch swarms, analyze logs,
generate plans, and manage the canonical vectors.

Exit codes: 0 success, 1 runtime failure, 2 usage/config error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import signal
import sys
import threading
from pathlib import Path

from . import metrics, swarm, vectors
from .httpd import start_server
from .protocol import ExperimentConfig, WireError, config_from_payload
from .server import (
    DEFAULT_WATCHER_PERIOD,
    ExperimentHub,
    FileStore,
    StoreCorruptError,
    Watcher,
)

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2


class ConfigFileError(Exception):
    pass


def _load_serve_config(path: str | None) -> tuple[ExperimentConfig, dict]:
    """Config file = the /api/config payload schema plus an optional "server"
    object {host, port, data_dir, static_dir, watcher_period_seconds}."""
    if path is None:
        return ExperimentConfig(), {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigFileError(f"cannot read config file {path}: {exc}") from None
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigFileError(
            f"config file {path} line {exc.lineno} col {exc.colno}: {exc.msg}"
        ) from None
    if not isinstance(obj, dict):
        raise ConfigFileError(f"config file {path}: top level must be an object")
    server_opts = obj.get("server", {})
    if not isinstance(server_opts, dict):
        raise ConfigFileError(f"config file {path}: field 'server' must be an object")
    try:
        config = config_from_payload(obj)
    except (WireError, ValueError) as exc:
        raise ConfigFileError(f"config file {path}: {exc}") from None
    return config, server_opts


def cmd_serve(args) -> int:
    try:
        config, server_opts = _load_serve_config(args.config)
        overrides = {}
        if args.budget is not None:
            overrides["evaluation_budget"] = args.budget
        if args.generations_per_segment is not None:
            overrides["generations_per_segment"] = args.generations_per_segment
        if args.genome_length is not None:
            overrides["ga"] = dataclasses.replace(config.ga, genome_length=args.genome_length)
        if overrides:
            config = dataclasses.replace(config, **overrides)
    except (ConfigFileError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    host = args.host or server_opts.get("host", "127.0.0.1")
    port = args.port if args.port is not None else int(server_opts.get("port", 8080))
    data_dir = args.data_dir or server_opts.get("data_dir", "gahub-data")
    static_dir = args.static_dir or server_opts.get("static_dir")
    period = (
        args.watcher_period
        if args.watcher_period is not None
        else float(server_opts.get("watcher_period_seconds", DEFAULT_WATCHER_PERIOD))
    )

    try:
        store = FileStore(data_dir)
        hub = ExperimentHub(config=config, store=store)
    except StoreCorruptError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: cannot prepare data directory {data_dir}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME

    try:
        server, thread = start_server(hub, host, port, static_dir)
    except OSError as exc:
        print(f"error: cannot listen on {host}:{port}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME

    watcher = Watcher(hub, period=period)
    watcher.start()
    stop = threading.Event()

    def handle_signal(signum, frame):
        stop.set()

    signal.signal(signal.SIGINT, handle_signal)
    signal.signal(signal.SIGTERM, handle_signal)
    print(f"serving on http://{host}:{server.server_address[1]} (data dir: {data_dir})")
    sys.stdout.flush()
    try:
        stop.wait()
    finally:
        server.shutdown()
        thread.join(timeout=5)
        watcher.stop()
        hub.persist()
        print("state persisted, bye")
    return EXIT_OK


def cmd_swarm(args) -> int:
    try:
        if args.plan:
            plan = swarm.load_plan(args.plan)
        else:
            plan = swarm.make_plan(
                n_clients=args.clients,
                speed_spec=args.speed,
                churn_spec=args.churn,
                seed=args.seed,
                base_segment_delay=args.base_delay,
                join_spread=args.join_spread,
            )
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    report = swarm.run_swarm(plan, args.server, no_delay=args.no_delay)
    payload = report.to_payload()
    Path(args.out).write_text(json.dumps(payload, indent=2), encoding="utf-8")
    print(
        json.dumps(
            {
                "clients": len(report.client_summaries),
                "total_evaluations": report.total_evaluations,
                "evaluations_per_second": round(report.evaluations_per_second, 1),
                "peak_concurrency": report.peak_concurrency,
                "abnormal_exits": report.abnormal_exits,
                "report_file": str(args.out),
            }
        )
    )
    return EXIT_OK if report.abnormal_exits == 0 else EXIT_RUNTIME


def cmd_analyze(args) -> int:
    try:
        if args.format == "apache":
            loaded = metrics.parse_apache_log(
                Path(args.log).read_text(encoding="utf-8").splitlines()
            )
        else:
            loaded = metrics.load_events(args.log)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    selected = {
        "gaps": args.gaps,
        "generations": args.generations,
        "durations": args.durations,
        "series": args.series,
    }
    if not any(selected.values()):
        selected = {k: True for k in selected}

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    summary = metrics.summarize(loaded)

    if not args.summary:
        if selected["gaps"]:
            metrics.write_gaps_csv(metrics.gap_distribution(loaded.records), out_dir / "gaps.csv")
        if selected["generations"]:
            metrics.write_generations_csv(
                metrics.generations_per_client(loaded.records, display_cap=args.cap),
                out_dir / "generations_per_client.csv",
                out_dir / "generations_histogram.csv",
            )
        if selected["durations"]:
            durations = metrics.run_durations(loaded.records)
            if not durations.durations:
                print("warning: no completed experiment in log", file=sys.stderr)
            metrics.write_durations_csv(durations, out_dir / "durations.csv")
        if selected["series"]:
            metrics.write_series_csv(
                metrics.evaluations_series(loaded.records), out_dir / "evaluations_series.csv"
            )

    if args.speedup is not None:
        avg_segment, segments = args.speedup
        durations = metrics.run_durations(loaded.records)
        if durations.minimum is None:
            print("warning: no completed experiment, cannot compute speedup", file=sys.stderr)
            summary["speedup"] = None
        else:
            summary["speedup"] = {
                "avg_segment_seconds": avg_segment,
                "segments_per_experiment": segments,
                "vs_min_duration": metrics.speedup(avg_segment, segments, durations.minimum),
                "vs_median_duration": metrics.speedup(avg_segment, segments, durations.median),
            }
    print(json.dumps(summary, indent=2))
    return EXIT_OK


def cmd_gen_plan(args) -> int:
    try:
        plan = swarm.make_plan(
            n_clients=args.clients,
            speed_spec=args.speed,
            churn_spec=args.churn,
            seed=args.seed,
            base_segment_delay=args.base_delay,
            join_spread=args.join_spread,
        )
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    swarm.save_plan(plan, args.out)
    print(f"wrote {args.out} ({len(plan.profiles)} profiles)")
    return EXIT_OK


def cmd_vectors(args) -> int:
    if args.write:
        written = vectors.write_vectors(args.dir)
        print(f"wrote {len(written)} files to {args.dir}")
        return EXIT_OK
    problems = vectors.check_vectors(args.dir)
    if problems:
        for p in problems:
            print(f"vector mismatch: {p}", file=sys.stderr)
        return EXIT_RUNTIME
    print(f"vectors in {args.dir} match the current implementation")
    return EXIT_OK


def _add_plan_args(parser: argparse.ArgumentParser):
    parser.add_argument("--clients", type=int, default=4, help="number of client profiles")
    parser.add_argument(
        "--speed",
        default="lognormal:0.5",
        help="speed spec: constant:V | uniform:LO,HI | lognormal:SIGMA",
    )
    parser.add_argument(
        "--churn", default="none", help="churn spec: none | leave:FRAC,LO,HI[,rejoin]"
    )
    parser.add_argument("--seed", type=int, default=0, help="plan seed")
    parser.add_argument(
        "--base-delay",
        type=float,
        default=swarm.DEFAULT_BASE_SEGMENT_DELAY,
        help="simulated seconds per segment at speed_factor 1",
    )
    parser.add_argument(
        "--join-spread", type=float, default=0.0, help="uniform join-time spread in seconds"
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gahub",
        description="Clearinghouse server, client swarm, and analytics for a "
        "distributed bitstring GA",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("serve", help="run the clearinghouse server and watcher")
    p.add_argument("--config", help="JSON config file (same schema as /api/config)")
    p.add_argument("--host", help="listen address (default 127.0.0.1)")
    p.add_argument("--port", type=int, help="listen port (default 8080)")
    p.add_argument("--data-dir", help="state + event log directory (default gahub-data)")
    p.add_argument("--static-dir", help="browser client assets served at /")
    p.add_argument("--watcher-period", type=float, help="watcher tick period in seconds")
    p.add_argument("--budget", type=int, help="override evaluation budget")
    p.add_argument(
        "--generations-per-segment", type=int, help="override generations per segment"
    )
    p.add_argument("--genome-length", type=int, help="override genome length in bits")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("swarm", help="run a synthetic client swarm against a server")
    p.add_argument("--server", required=True, help="server base URL, e.g. http://127.0.0.1:8080")
    p.add_argument("--plan", help="plan JSON file (overrides inline plan options)")
    p.add_argument("--no-delay", action="store_true", help="disable simulated compute delays")
    p.add_argument("--out", default="swarm-report.json", help="report output file")
    _add_plan_args(p)
    p.set_defaults(func=cmd_swarm)

    p = sub.add_parser("analyze", help="analyze an event log into CSV + summary JSON")
    p.add_argument("--log", required=True, help="events.jsonl (or Apache log with --format)")
    p.add_argument("--format", choices=["jsonl", "apache"], default="jsonl")
    p.add_argument("--out", default=".", help="output directory for CSV files")
    p.add_argument("--gaps", action="store_true", help="gap-time distribution")
    p.add_argument("--generations", action="store_true", help="generations per client")
    p.add_argument("--durations", action="store_true", help="per-experiment run durations")
    p.add_argument("--series", action="store_true", help="evaluations-vs-time series")
    p.add_argument(
        "--speedup",
        nargs=2,
        type=float,
        metavar=("AVG_SEGMENT_SECONDS", "SEGMENTS_PER_EXPERIMENT"),
        help="compute speedup against completed-run durations",
    )
    p.add_argument("--summary", action="store_true", help="print summary JSON only, no CSVs")
    p.add_argument(
        "--cap",
        type=int,
        default=metrics.GENERATIONS_DISPLAY_CAP,
        help="display cap for the generations histogram",
    )
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("gen-plan", help="generate a deterministic swarm plan file")
    p.add_argument("--out", default="plan.json", help="plan output file")
    _add_plan_args(p)
    p.set_defaults(func=cmd_gen_plan)

    p = sub.add_parser("vectors", help="check or regenerate the canonical wire vectors")
    p.add_argument("--dir", default="vectors", help="vectors directory")
    p.add_argument("--write", action="store_true", help="regenerate instead of checking")
    p.set_defaults(func=cmd_vectors)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(name)s %(levelname)s %(message)s",
    )
    try:
        return args.func(args)
    except KeyboardInterrupt:
        return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
