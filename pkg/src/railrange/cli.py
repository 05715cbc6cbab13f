"""Command-line interface: run scenarios, inspect datasets, serve live runs.

Exit codes
----------
0   success (``run``: every milestone reached; ``inspect``: dataset verifies)
2   unusable input: unknown scenario, malformed document, bad arguments,
    or a dataset that fails manifest/catalog verification
3   the run executed but a scripted milestone missed its deadline
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path
from typing import List, Optional, Union

from . import __version__
from .control import ControlServer, ControlSession
from .errors import EvidenceError, MilestoneFailure, RailrangeError, SchemaError
from .evidence import package_dataset, resolve_catalog, verify_dataset
from .inspectors import render_scan_report, scan_dataset
from .scenario import (
    RunReport,
    ScenarioRuntime,
    ScenarioSpec,
    builtin_names,
    get_builtin,
    load_file,
)

EXIT_OK = 0
EXIT_BAD_INPUT = 2
EXIT_MILESTONE = 3

SEED_ENV_VAR = "RAILRANGE_SEED"
_PACING_QUANTUM_US = 1_000_000


# ---------------------------------------------------------------------------
# shared argument handling
# ---------------------------------------------------------------------------


def _resolve_spec(ref: str) -> ScenarioSpec:
    """Load a scenario from a builtin name or a JSON document path."""
    if ref in builtin_names():
        return get_builtin(ref)
    path = Path(ref)
    if not path.exists():
        raise SchemaError(
            f"unknown scenario {ref!r}: not a builtin "
            f"({', '.join(builtin_names())}) and no such file"
        )
    return load_file(str(path))


def _resolve_seed(cli_seed: Optional[int]) -> Optional[int]:
    """CLI flag wins; otherwise fall back to the RAILRANGE_SEED variable."""
    if cli_seed is not None:
        return cli_seed
    raw = os.environ.get(SEED_ENV_VAR)
    if raw is None or raw == "":
        return None
    try:
        return int(raw, 10)
    except ValueError:
        raise SchemaError(f"{SEED_ENV_VAR} must be an integer, got {raw!r}")


def _parse_speed(text: str) -> Union[float, str]:
    """Speed is a positive wall-clock ratio, or 'max' for unpaced execution."""
    if text == "max":
        return "max"
    try:
        ratio = float(text)
    except ValueError:
        raise SchemaError(f"--speed must be a number or 'max', got {text!r}")
    if not ratio > 0:
        raise SchemaError(f"--speed must be positive, got {text!r}")
    return ratio


def _fmt_sim(ts_us: Optional[int]) -> str:
    if ts_us is None:
        return "-"
    return f"+{ts_us / 1_000_000:.3f}s"


# ---------------------------------------------------------------------------
# run
# ---------------------------------------------------------------------------


def _render_report(report: RunReport, out: List[str]) -> None:
    out.append(f"scenario {report.scenario} seed {report.seed} "
               f"({report.duration_us / 1_000_000:.0f}s simulated, "
               f"{report.wall_seconds:.2f}s wall)")
    for m in report.milestones:
        mark = "ok  " if m.ok else "MISS"
        line = (f"  [{mark}] {m.step_label:<14} reached {_fmt_sim(m.reached_us)}"
                f"  (deadline {_fmt_sim(m.deadline_us)})")
        if m.missing:
            line += "  waiting on: " + "; ".join(m.missing)
        out.append(line)
    if report.outcome_name is not None:
        when = _fmt_sim(report.outcome_ts_us)
        status = "reached" if report.outcome_ts_us is not None else "NOT reached"
        out.append(f"  outcome {report.outcome_name}: {status} {when}")
    counts = ", ".join(f"{k} {v}" for k, v in sorted(report.indicator_counts.items()))
    out.append(f"  indicators: {counts}")
    out.append(f"  events {report.events_emitted}, frames delivered "
               f"{report.frame_stats.get('delivered', 0)}, blocked "
               f"{report.frame_stats.get('blocked', 0)}")


def _run_paced(runtime: ScenarioRuntime, ratio: float) -> RunReport:
    """Advance the run in one-second quanta, holding sim/wall at ``ratio``."""
    start = time.perf_counter()
    duration = runtime.spec.duration_us
    try:
        while runtime.loop.now < duration:
            target = min(runtime.loop.now + _PACING_QUANTUM_US, duration)
            runtime.advance_to(target)
            wall_due = start + (runtime.loop.now / 1_000_000) / ratio
            delay = wall_due - time.perf_counter()
            if delay > 0:
                time.sleep(delay)
    finally:
        runtime.wall_seconds = time.perf_counter() - start
    runtime.report = runtime.build_report()
    return runtime.report


def cmd_run(args: argparse.Namespace) -> int:
    spec = _resolve_spec(args.scenario)
    seed = _resolve_seed(args.seed)
    speed = _parse_speed(args.speed)

    runtime = ScenarioRuntime(spec, seed=seed, strict_milestones=True)
    try:
        report = runtime.run() if speed == "max" else _run_paced(runtime, speed)
    except MilestoneFailure as exc:
        print(f"milestone failed: {exc}", file=sys.stderr)
        return EXIT_MILESTONE

    lines: List[str] = []
    _render_report(report, lines)

    if args.out is not None:
        dataset = package_dataset(runtime, Path(args.out))
        resolution = resolve_catalog(dataset)
        lines.append(f"  dataset: {dataset} "
                     f"({resolution['resolved']}/{resolution['total']} locators resolved)")

    print("\n".join(lines))
    if not (report.milestones_ok and report.outcome_reached):
        return EXIT_MILESTONE
    return EXIT_OK


# ---------------------------------------------------------------------------
# inspect
# ---------------------------------------------------------------------------


def cmd_inspect(args: argparse.Namespace) -> int:
    dataset = Path(args.dataset)
    manifest = verify_dataset(dataset)
    print(f"dataset: {dataset}")
    print(f"manifest: OK ({len(manifest['files'])} files, "
          f"scenario {manifest['scenario']}, seed {manifest['seed']})")

    resolution = resolve_catalog(dataset)
    print(f"catalog: {resolution['resolved']}/{resolution['total']} locators resolved")
    if resolution["failures"]:
        for failure in resolution["failures"]:
            print(f"  UNRESOLVED {failure['id']}: {failure['reason']}", file=sys.stderr)
        return EXIT_BAD_INPUT

    if args.ioc_scan:
        report = scan_dataset(dataset)
        for line in render_scan_report(report):
            print(line)
    return EXIT_OK


# ---------------------------------------------------------------------------
# serve
# ---------------------------------------------------------------------------


def cmd_serve(args: argparse.Namespace) -> int:
    spec = _resolve_spec(args.scenario)
    seed = _resolve_seed(args.seed)
    speed = _parse_speed(args.speed)

    session = ControlSession(spec, seed=seed, pause_at=args.pause_at)
    server = ControlServer(session, host=args.host, port=args.port, speed=speed)
    server.start()
    host, port = server.address
    print(f"serving {spec.name} (seed {session.runtime.seed}) on http://{host}:{port}")
    print("  GET  /state     simulator snapshot")
    print("  GET  /events    ordered event stream (?since=N; SSE via Accept header)")
    print("  POST /command   operator commands")
    label = f"  pause at: {args.pause_at}" if args.pause_at else ""
    print(f"  speed: {speed if speed == 'max' else f'{speed:g}x'}{label}")
    sys.stdout.flush()
    try:
        while not server.wait_finished(timeout=0.5):
            pass
        print("run finished; still serving (Ctrl+C to exit)")
        sys.stdout.flush()
        while True:
            time.sleep(3600)
    except KeyboardInterrupt:
        pass
    finally:
        server.stop()
    return EXIT_OK


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="railrange",
        description="Deterministic railway ICS cyber range: run scripted "
                    "attack scenarios, package forensic datasets, and serve "
                    "live operator sessions.",
    )
    parser.add_argument("--version", action="version", version=f"railrange {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="execute a scenario to completion")
    run.add_argument("--scenario", required=True,
                     help=f"builtin name ({', '.join(builtin_names())}) or document path")
    run.add_argument("--seed", type=int, default=None,
                     help=f"run seed (default: ${SEED_ENV_VAR}, else scenario default)")
    run.add_argument("--out", default=None,
                     help="package the evidence dataset under this directory")
    run.add_argument("--speed", default="max",
                     help="wall-clock ratio or 'max' (default: max)")
    run.set_defaults(func=cmd_run)

    inspect = sub.add_parser("inspect", help="verify and analyze a packaged dataset")
    inspect.add_argument("--dataset", required=True, help="dataset directory")
    inspect.add_argument("--ioc-scan", action="store_true",
                         help="run indicator scanners and report recall vs the catalog")
    inspect.set_defaults(func=cmd_inspect)

    serve = sub.add_parser("serve", help="serve a live run over HTTP")
    serve.add_argument("--scenario", required=True,
                       help=f"builtin name ({', '.join(builtin_names())}) or document path")
    serve.add_argument("--seed", type=int, default=None,
                       help=f"run seed (default: ${SEED_ENV_VAR}, else scenario default)")
    serve.add_argument("--host", default="127.0.0.1", help="bind address")
    serve.add_argument("--port", type=int, default=8000, help="bind port (0 = ephemeral)")
    serve.add_argument("--pause-at", default=None, metavar="STEP_LABEL",
                       help="pause the clock when this milestone is reached")
    serve.add_argument("--speed", default="1",
                       help="wall-clock ratio or 'max' (default: 1)")
    serve.set_defaults(func=cmd_serve)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except EvidenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT
    except MilestoneFailure as exc:
        print(f"milestone failed: {exc}", file=sys.stderr)
        return EXIT_MILESTONE
    except RailrangeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT
    except json.JSONDecodeError as exc:
        print(f"error: invalid JSON: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT


if __name__ == "__main__":
    sys.exit(main())
