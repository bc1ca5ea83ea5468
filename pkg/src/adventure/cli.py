"""Admin command line: serve, load-kg, create-accounts, simulate, analyze, export-log.

Exit codes: 0 success, 1 usage error, 2 data error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from . import analytics
from .accounts import AccountStore
from .config import ConfigError, default_kg_path, resolve_config
from .events import read_event_file
from .knowledge_graph import GraphError, load_graph, validate_graph
from .session import Mode
from .simulate import SimLearnerProfile, simulate

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="adventure", description="Adaptive + GenAI programming practice service"
    )
    parser.add_argument("--config", help="service config JSON (or ADVENTURE_CONFIG)")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("serve", help="run the HTTP service")

    p_kg = sub.add_parser("load-kg", help="load and validate a knowledge graph file")
    p_kg.add_argument("path", help="graph JSON file")

    p_acc = sub.add_parser("create-accounts", help="create accounts from a roster CSV")
    p_acc.add_argument("--csv", required=True, help="columns: username,password,mode[,locale]")

    p_sim = sub.add_parser("simulate", help="run a deterministic simulated cohort")
    p_sim.add_argument("--mode", required=True, choices=[m.value for m in Mode])
    p_sim.add_argument("--learners", type=int, default=10)
    p_sim.add_argument("--steps", type=int, default=50)
    p_sim.add_argument("--seed", type=int, default=7)
    p_sim.add_argument("--profile", help="profile JSON (inline or @file)")
    p_sim.add_argument("--out", help="write events JSONL here")
    p_sim.add_argument("--kg", help="graph file (default: shipped sample graph)")
    p_sim.add_argument("--language", default="identity")

    p_an = sub.add_parser("analyze", help="analytics report over an event log")
    p_an.add_argument("--log", required=True, help="events JSONL file")
    p_an.add_argument("--groups", required=True, help="CSV with columns learner,group")
    p_an.add_argument("--format", choices=["json", "text", "both"], default="both")

    p_exp = sub.add_parser("export-log", help="copy the service event log to stdout")
    p_exp.add_argument("--log", help="events JSONL (default: <data_dir>/events.jsonl)")
    return parser


def _cmd_serve(args, config) -> int:
    from .service import serve

    serve(config)
    return EXIT_OK


def _cmd_load_kg(args, config) -> int:
    try:
        kg = load_graph(args.path)
    except (GraphError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    violations = validate_graph(kg)
    print(f"{len(kg.concepts)} concepts, {len(kg.exercises)} exercises")
    for violation in violations:
        print(f"{violation.severity}: [{violation.code}] {violation.message}")
    return EXIT_OK if not any(v.severity == "error" for v in violations) else EXIT_DATA


def _cmd_create_accounts(args, config) -> int:
    store = AccountStore(Path(config.data_dir) / "accounts.json")
    try:
        created = store.load_roster_csv(args.csv)
    except (KeyError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    for account in created:
        print(f"{account.learner_id}\t{account.username}\t{account.mode.value}")
    return EXIT_OK


def _cmd_simulate(args, config) -> int:
    profile = SimLearnerProfile()
    if args.profile:
        raw = args.profile
        if raw.startswith("@"):
            raw = Path(raw[1:]).read_text(encoding="utf-8")
        try:
            profile = SimLearnerProfile.from_dict(json.loads(raw))
        except (json.JSONDecodeError, TypeError, ValueError) as exc:
            print(f"error: bad profile: {exc}", file=sys.stderr)
            return EXIT_USAGE
    kg_path = args.kg or default_kg_path()
    try:
        kg = load_graph(kg_path)
    except GraphError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    events, _engine = simulate(
        kg,
        Mode(args.mode),
        n_learners=args.learners,
        n_steps=args.steps,
        seed=args.seed,
        profile=profile,
        language=args.language,
        out_path=args.out,
        params=config.elo,
    )
    print(f"{len(events)} events" + (f" -> {args.out}" if args.out else ""))
    return EXIT_OK


def _cmd_analyze(args, config) -> int:
    try:
        events = list(read_event_file(args.log))
        group_of = {}
        with open(args.groups, newline="", encoding="utf-8") as fh:
            for row in csv.DictReader(fh):
                group_of[row["learner"].strip()] = row["group"].strip()
    except (OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    doc = analytics.report(events, group_of)
    if args.format in ("json", "both"):
        print(json.dumps(doc, indent=2, sort_keys=True, ensure_ascii=False))
    if args.format in ("text", "both"):
        if args.format == "both":
            print()
        print(analytics.render_text_tables(doc))
    return EXIT_OK


def _cmd_export_log(args, config) -> int:
    path = Path(args.log) if args.log else Path(config.data_dir) / "events.jsonl"
    if not path.exists():
        print(f"error: no event log at {path}", file=sys.stderr)
        return EXIT_DATA
    for event in read_event_file(path):
        print(event.to_json())
    return EXIT_OK


_COMMANDS = {
    "serve": _cmd_serve,
    "load-kg": _cmd_load_kg,
    "create-accounts": _cmd_create_accounts,
    "simulate": _cmd_simulate,
    "analyze": _cmd_analyze,
    "export-log": _cmd_export_log,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    try:
        config = resolve_config(args.config)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return _COMMANDS[args.command](args, config)


if __name__ == "__main__":
    sys.exit(main())
