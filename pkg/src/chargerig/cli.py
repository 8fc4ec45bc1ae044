"""Command line entry point.

Subcommands: ``serve`` (the gateway service), ``validate`` (tree files),
``report`` (render an event log), ``export-trees`` and ``demo-scenario``
(write the built-in assets somewhere editable).

Every ``serve`` flag can also come from the environment with the
``CHARGERIG_`` prefix (e.g. ``CHARGERIG_SCENARIO``); explicit flags win.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import dsl
from .gateway import (
    EXIT_RUNTIME_FAILURE,
    EXIT_STARTUP_FAILURE,
    GatewayError,
    Service,
    ServiceConfig,
    export_assets,
)
from .report import write_report
from .sim import InvalidScenario, make_demo_scenario

ENV_PREFIX = "CHARGERIG_"


def _env(name: str, default=None):
    return os.environ.get(ENV_PREFIX + name, default)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="chargerig", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    serve = sub.add_parser("serve", help="run the mission gateway service")
    serve.add_argument("--scenario", default=_env("SCENARIO"), help="scenario JSON file (default: built-in demo)")
    serve.add_argument("--trees", default=_env("TREES"), help="directory of .tree.xml files (default: built-in)")
    serve.add_argument("--listen", default=_env("LISTEN"), help="host:port for the line-JSON protocol")
    serve.add_argument("--http", default=_env("HTTP"), help="host:port for the HTTP endpoint (state, events, UI)")
    serve.add_argument("--ui-dir", default=_env("UI_DIR"), help="static assets directory for the console UI")
    serve.add_argument("--tick-rate", type=float, default=float(_env("TICK_RATE", "100")), help="ticks per second")
    serve.add_argument("--seed", type=int, default=int(_env("SEED")) if _env("SEED") else None)
    serve.add_argument("--snapshot-dir", default=_env("SNAPSHOT_DIR", "snapshots"))
    serve.add_argument("--snapshot-every", type=int, default=int(_env("SNAPSHOT_EVERY", "100")), help="ticks between periodic snapshots")
    serve.add_argument("--headless", default=_env("HEADLESS"), help="scripted command file; disables pacing")
    serve.add_argument("--resume", default=_env("RESUME"), help="snapshot ref (filename or 'latest') to restore at startup")
    serve.add_argument("--event-log", default=_env("EVENT_LOG"), help="append every event as JSONL here")
    serve.add_argument("--max-ticks", type=int, default=int(_env("MAX_TICKS")) if _env("MAX_TICKS") else None)

    validate = sub.add_parser("validate", help="check .tree.xml files; exit 0 clean, 1 warnings, 2 errors")
    validate.add_argument("files", nargs="+")

    report = sub.add_parser("report", help="render CSV and figures from an event log")
    report.add_argument("event_log")
    report.add_argument("--out", default="report", help="output directory")

    export = sub.add_parser("export-trees", help="write the built-in phase trees as .tree.xml files")
    export.add_argument("--out", default="trees")

    demo = sub.add_parser("demo-scenario", help="write the built-in demo scenario JSON")
    demo.add_argument("--out", default="demo_scenario.json")
    demo.add_argument("--holes", type=int, default=20)
    demo.add_argument("--seed", type=int, default=42)

    return parser


def cmd_serve(args) -> int:
    config = ServiceConfig(
        scenario_path=Path(args.scenario) if args.scenario else None,
        trees_dir=Path(args.trees) if args.trees else None,
        listen=args.listen,
        http=args.http,
        ui_dir=Path(args.ui_dir) if args.ui_dir else None,
        tick_rate=args.tick_rate,
        seed=args.seed,
        snapshot_dir=Path(args.snapshot_dir),
        snapshot_every=args.snapshot_every,
        headless=Path(args.headless) if args.headless else None,
        resume=args.resume,
        event_log=Path(args.event_log) if args.event_log else None,
        max_ticks=args.max_ticks,
        realtime=args.headless is None,
    )
    try:
        service = Service(config)
    except (GatewayError, InvalidScenario, OSError) as err:
        print(f"startup failed: {err}", file=sys.stderr)
        return EXIT_STARTUP_FAILURE
    try:
        return service.run()
    except GatewayError as err:
        print(f"startup failed: {err}", file=sys.stderr)
        return EXIT_STARTUP_FAILURE
    except Exception as err:  # unrecoverable runtime error
        print(f"runtime failure: {err}", file=sys.stderr)
        return EXIT_RUNTIME_FAILURE


def cmd_validate(args) -> int:
    worst = dsl.EXIT_CLEAN
    for path in args.files:
        try:
            doc = dsl.parse_file(path)
        except dsl.DslError as err:
            print(f"{path}: error[parse] {err}")
            worst = max(worst, dsl.EXIT_ERRORS)
            continue
        diagnostics = dsl.validate(doc)
        for diag in diagnostics:
            print(f"{path}: {diag}")
        if not diagnostics:
            print(f"{path}: clean")
        worst = max(worst, dsl.exit_code(diagnostics))
    return worst


def cmd_report(args) -> int:
    outputs = write_report(args.event_log, args.out)
    for name, path in outputs.items():
        print(f"{name}: {path}")
    return 0


def cmd_export_trees(args) -> int:
    for path in export_assets(Path(args.out)):
        print(path)
    return 0


def cmd_demo_scenario(args) -> int:
    scenario = make_demo_scenario(args.holes, seed=args.seed)
    with open(args.out, "w", encoding="utf-8") as fh:
        json.dump(scenario.to_json(), fh, indent=2)
        fh.write("\n")
    print(args.out)
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handlers = {
        "serve": cmd_serve,
        "validate": cmd_validate,
        "report": cmd_report,
        "export-trees": cmd_export_trees,
        "demo-scenario": cmd_demo_scenario,
    }
    return handlers[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
