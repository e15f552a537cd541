"""Command line entry point wiring the server, client, and pipeline together.

Exit codes: 0 success, 1 validation problem (bad documents, bad usage,
failed execution), 2 server or file trouble, 3 a leak sweep fired.
"""

import argparse
import json
import socket
import sys
from dataclasses import replace
from pathlib import Path

import uvicorn

from .apps import BLUEPRINTS, load_app
from .client import AggregationClient, load_or_create_config, reset_user_id
from .errors import (
    ClientBlocked,
    DocumentError,
    ExecutionError,
    GenerationError,
    LeakDetected,
    QuerySyntaxError,
    QuotaExceeded,
    RecordingError,
    ServerUnavailable,
    StateFileError,
    SynthesisError,
)
from .executor import execute
from .harness import run_eval
from .hashing import UserId, load_or_create_salt
from .obfuscate import parse_overrides, report_document, share
from .review import LOOPBACK, ReviewSession, serve_review
from .screens import extract_entries, load_screen, screen_context
from .scripting import (
    deserialize_script,
    load_demo_trace,
    record_from_trace,
    script_to_json,
    validate,
)
from .scripting import ScreenSnapshot
from .server import AggregationServer, ServerConfig, create_app


class _Parser(argparse.ArgumentParser):
    # bad flags are a validation problem, not a server/IO one
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _read_json(path: str | Path):
    text = Path(path).read_text(encoding="utf-8")
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise DocumentError(f"{path} is not valid JSON: {exc}") from None


def _write_text(path: str | Path, text: str):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


def _client_for(args) -> AggregationClient:
    cfg = load_or_create_config(args.storage, server_url=args.server)
    return AggregationClient(cfg.user_id, server_url=cfg.server_url)


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_serve(args) -> int:
    file_defaults = {}
    if args.config:
        file_defaults = _read_json(args.config)
        if not isinstance(file_defaults, dict):
            raise DocumentError("server config must be a JSON object")
    host = args.host or file_defaults.get("host", LOOPBACK)
    port = args.port if args.port is not None \
        else int(file_defaults.get("port", 8787))
    salt_file = args.salt_file or file_defaults.get("salt_file")
    state = args.state or file_defaults.get("state")
    t = args.t if args.t is not None else float(file_defaults.get("t", 0.5))
    alpha = args.alpha if args.alpha is not None \
        else float(file_defaults.get("alpha", 0.05))

    salt = load_or_create_salt(salt_file)
    config = ServerConfig(t=t, alpha=alpha,
                          persistence_path=Path(state) if state else None)
    server = AggregationServer(salt, config)
    if config.persistence_path is not None:
        server.restore()
    print(f"aggregation server on http://{host}:{port} "
          f"(t={t:g}, alpha={alpha:g})")
    try:
        uvicorn.run(create_app(server), host=host, port=port,
                    log_level="warning")
    finally:
        if config.persistence_path is not None:
            server.persist()
    return 0


def cmd_ingest(args) -> int:
    cfg = load_or_create_config(args.storage, server_url=args.server)
    if args.reset_id:
        cfg = reset_user_id(cfg)
    user = UserId(args.user) if args.user else cfg.user_id
    client = AggregationClient(user, server_url=cfg.server_url)

    screen_dir = Path(args.screens)
    files = sorted(screen_dir.glob("*.json")) if screen_dir.is_dir() else []
    if not files:
        raise DocumentError(f"no screen files (*.json) in {screen_dir}")
    new = duplicate = 0
    for path in files:
        doc = _read_json(path)
        try:
            snap = ScreenSnapshot(context=screen_context(doc),
                                  root=load_screen(doc))
        except DocumentError as exc:
            raise DocumentError(f"{path}: {exc}") from None
        contents = sorted(e.content for e in extract_entries(snap.graph))
        if not contents:
            continue
        ack = client.ingest(snap.context, contents)
        new += ack.new
        duplicate += ack.duplicate
    print(f"{len(files)} screens ingested: {new} new entries, "
          f"{duplicate} duplicates")
    return 0


def cmd_record(args) -> int:
    events = load_demo_trace(_read_json(args.trace))
    script = record_from_trace(events, args.name or Path(args.out).stem)
    findings = validate(script)
    for finding in findings:
        print(f"warning: {finding}", file=sys.stderr)
    _write_text(args.out, script_to_json(script))
    steps = len(events)
    print(f"wrote {args.out} ({steps} demonstrated steps, "
          f"{len(script.parameters)} parameters)")
    return 0


def cmd_share(args) -> int:
    script = deserialize_script(_read_json(args.script))
    client = _client_for(args)
    overrides = {}
    if args.overrides:
        overrides = parse_overrides(Path(args.overrides)
                                    .read_text(encoding="utf-8"))

    if args.serve_review:
        session = ReviewSession(script, client, out_path=args.out)
        for entry_id, public in sorted(overrides.items()):
            session.toggle(entry_id, public)
        port = args.port or _free_port()
        print(f"review at http://{LOOPBACK}:{port}/ "
              f"(confirm in the browser to finish)")
        shared_path = serve_review(session, port=port, ui_dir=args.ui_dir)
        if args.report:
            _write_text(args.report,
                        json.dumps(report_document(session.report), indent=2)
                        + "\n")
        if shared_path is None:
            print("review ended without confirmation; nothing shared",
                  file=sys.stderr)
            return 1
        counts = session.report.counts
        print(f"wrote {shared_path} ({counts['public']} public, "
              f"{counts['personal']} hidden)")
        return 0

    result, report = share(script, client, overrides=overrides)
    _write_text(args.out, result.text)
    if args.report:
        _write_text(args.report,
                    json.dumps(report_document(report), indent=2) + "\n")
    for warning in result.warnings:
        print(f"warning: {warning}", file=sys.stderr)
    counts = report.counts
    print(f"wrote {args.out} ({counts['public']} public, "
          f"{counts['personal']} hidden)")
    return 0


def _free_port() -> int:
    with socket.socket() as sock:
        sock.bind((LOOPBACK, 0))
        return sock.getsockname()[1]


def _event_record(event) -> dict:
    rec = {"op_index": event.op_index, "kind": event.kind.value}
    if event.element_id is not None:
        rec["element_id"] = event.element_id
    if event.failure is not None:
        rec["failure"] = event.failure.value
    if event.similarity is not None:
        rec["similarity"] = event.similarity
    if event.rebuilt:
        rec["rebuilt"] = [list(pair) for pair in event.rebuilt]
    if event.detail is not None:
        rec["detail"] = event.detail
    return rec


def cmd_run(args) -> int:
    script = deserialize_script(_read_json(args.script))
    app = load_app(_read_json(args.app))
    params = {}
    for pair in args.param or []:
        name, eq, value = pair.partition("=")
        if not eq or not name:
            raise DocumentError(f"--param wants name=value, got {pair!r}")
        params[name] = value
    trace, rebuilt = execute(script, app, params=params,
                             screen_threshold=args.threshold)
    for event in trace.events:
        print(json.dumps(_event_record(event), ensure_ascii=False))
    print(json.dumps({"final_screen": trace.final_screen, "ok": trace.ok}))
    if args.rebuilt:
        _write_text(args.rebuilt, script_to_json(rebuilt))
    return 0 if trace.ok else 1


def cmd_eval(args) -> int:
    spec = args.spec
    users, t, seed = args.users, args.t, args.seed
    if spec not in BLUEPRINTS:
        doc = _read_json(spec)
        if not isinstance(doc, dict) or "app" not in doc:
            raise DocumentError(f"{spec} is neither a bundled app name "
                                f"({', '.join(sorted(BLUEPRINTS))}) nor an "
                                f"eval spec file")
        spec = doc["app"]
        users = users if users is not None else doc.get("users")
        t = t if t is not None else doc.get("t")
        seed = seed if seed is not None else doc.get("seed")
        if spec not in BLUEPRINTS:
            raise DocumentError(f"unknown app {spec!r} in eval spec")
    result = run_eval(spec, n_users=users if users is not None else 5,
                      seed=seed if seed is not None else 0,
                      t=t if t is not None else 0.5)
    print(f"{'app':<10} {'n':>4} {'n_personal':>10} {'recall':>7} "
          f"{'precision':>9} {'accuracy':>8}")
    print(f"{result.app:<10} {result.n:>4} {result.n_personal:>10} "
          f"{result.recall:>7.3f} {result.precision:>9.3f} "
          f"{result.accuracy:>8.3f}")
    if args.json:
        _write_text(args.json, json.dumps(result.document(), indent=2) + "\n")
    return 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="pinalite",
                     description="Privacy-preserving script sharing toolkit")
    sub = parser.add_subparsers(dest="command", required=True,
                                parser_class=_Parser)

    serve = sub.add_parser("serve", help="run the aggregation server")
    serve.add_argument("--config", help="JSON file with server defaults")
    serve.add_argument("--port", type=int)
    serve.add_argument("--host")
    serve.add_argument("--salt-file", help="64-byte key file "
                       "(default: PINALITE_SALT_FILE)")
    serve.add_argument("--state", help="line-delimited JSON state file")
    serve.add_argument("--t", type=float, help="uniqueness threshold")
    serve.add_argument("--alpha", type=float, help="significance level")
    serve.set_defaults(fn=cmd_serve)

    def client_flags(p):
        p.add_argument("--server", help="aggregation server URL "
                       "(default: PINALITE_SERVER_URL or stored config)")
        p.add_argument("--storage", default="~/.pinalite",
                       help="client config directory")

    ingest = sub.add_parser("ingest", help="hash and upload screen files")
    ingest.add_argument("--screens", required=True,
                        help="directory of screen JSON files")
    ingest.add_argument("--user", help="override the stored user id (UUID)")
    ingest.add_argument("--reset-id", action="store_true",
                        help="mint a fresh user id first")
    client_flags(ingest)
    ingest.set_defaults(fn=cmd_ingest)

    record = sub.add_parser("record", help="turn a demo trace into a script")
    record.add_argument("--trace", required=True)
    record.add_argument("--out", required=True)
    record.add_argument("--name", help="script name (default: output stem)")
    record.set_defaults(fn=cmd_record)

    share_p = sub.add_parser("share", help="classify and obfuscate a script")
    share_p.add_argument("--script", required=True)
    share_p.add_argument("--out", required=True)
    share_p.add_argument("--overrides",
                         help="JSON file mapping entry_id to true (public)")
    share_p.add_argument("--report", help="also write the review report here")
    share_p.add_argument("--serve-review", action="store_true",
                         help="open the loopback review endpoint and wait")
    share_p.add_argument("--port", type=int,
                         help="review port (default: any free port)")
    share_p.add_argument("--ui-dir", help="built review UI to serve")
    client_flags(share_p)
    share_p.set_defaults(fn=cmd_share)

    run_p = sub.add_parser("run", help="execute a script against an app file")
    run_p.add_argument("--script", required=True)
    run_p.add_argument("--app", required=True)
    run_p.add_argument("--param", action="append", metavar="NAME=VALUE")
    run_p.add_argument("--rebuilt", help="write the rebuilt script here")
    run_p.add_argument("--threshold", type=float, default=0.6,
                       help="same-screen similarity threshold")
    run_p.set_defaults(fn=cmd_run)

    eval_p = sub.add_parser("eval", help="grade classification on an app")
    eval_p.add_argument("--spec", required=True,
                        help="bundled app name or eval spec JSON")
    eval_p.add_argument("--users", type=int)
    eval_p.add_argument("--t", type=float)
    eval_p.add_argument("--seed", type=int)
    eval_p.add_argument("--json", help="write the full table here")
    eval_p.set_defaults(fn=cmd_eval)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if hasattr(args, "storage"):
            args.storage = Path(args.storage).expanduser()
        return args.fn(args)
    except LeakDetected as exc:
        print(f"leak sweep fired: {exc}", file=sys.stderr)
        return 3
    except (QuotaExceeded, ClientBlocked, ServerUnavailable,
            StateFileError) as exc:
        print(f"server error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 2
    except (DocumentError, QuerySyntaxError, RecordingError, SynthesisError,
            GenerationError, ExecutionError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
