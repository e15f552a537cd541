"""Loopback endpoint behind the browser review page.

The report holds plaintext personal values, so this server must never be
reachable from the network; binding is forced to 127.0.0.1. Toggles mutate
one shared report under a lock, and confirming writes the shared file and
freezes the session.
"""

import threading
from pathlib import Path

import uvicorn
from fastapi import FastAPI
from fastapi.responses import FileResponse, HTMLResponse, JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from .client import AggregationClient
from .errors import LeakDetected
from .obfuscate import apply_override, classify, obfuscate, report_document
from .queries import serialize_query
from .scripting import (
    Conditional,
    OpKind,
    Script,
    serialize_condition,
    walk_blocks,
)

LOOPBACK = "127.0.0.1"


class ReviewSession:
    """One script under review, one output path, one eventual confirmation."""

    def __init__(self, script: Script, client: AggregationClient,
                 out_path: Path | str):
        self.script = script
        self.out_path = Path(out_path)
        self.report = classify(script, client)
        self.shared_path: Path | None = None
        self.warnings: tuple[str, ...] = ()
        self.done = threading.Event()
        self._lock = threading.Lock()

    @property
    def confirmed(self) -> bool:
        return self.shared_path is not None

    def toggle(self, entry_id: int, public: bool):
        with self._lock:
            if self.confirmed:
                raise PermissionError("the share was already confirmed")
            self.report = apply_override(self.report, entry_id, public)
            return self.report.entry(entry_id)

    def confirm(self) -> tuple[Path, bool]:
        with self._lock:
            if self.confirmed:
                return self.shared_path, True
            result = obfuscate(self.script, self.report)
            self.out_path.parent.mkdir(parents=True, exist_ok=True)
            self.out_path.write_text(result.text, encoding="utf-8")
            self.shared_path = self.out_path
            self.warnings = result.warnings
            self.done.set()
            return self.shared_path, False


def _step_text(block) -> str:
    if isinstance(block, Conditional):
        return f"If {serialize_condition(block.condition)}"
    k = block.kind
    if k is OpKind.LAUNCH:
        return f"Open {block.app.package_name}"
    if k is OpKind.PAUSE:
        return "Pause until the user continues" if block.wait_for_user \
            else f"Pause {block.duration_s:g}s"
    target = serialize_query(block.target_query)
    if k is OpKind.CLICK:
        return f"Click the element matching {target}"
    if k is OpKind.LONG_CLICK:
        return f"Long-click the element matching {target}"
    if k is OpKind.SET_TEXT:
        shown = block.text_arg if isinstance(block.text_arg, str) \
            else "hidden text"
        return f"Type {shown!r} into the element matching {target}"
    if k is OpKind.EXTRACT_VALUE:
        return f"Read ${block.variable_name} from the element matching {target}"
    return f"Read out the element matching {target}"


def _preview_document(session: ReviewSession) -> dict:
    report = session.report
    by_block: dict[int, list[dict]] = {}
    for entry in report.entries:
        for loc in entry.locations:
            by_block.setdefault(loc.block_index, []).append({
                "entry_id": entry.entry_id,
                "kind": loc.kind.value,
                "content": entry.content,
                "state": "public" if entry.final_public else "personal",
                "overridden": entry.override is not None,
            })
    steps = []
    for index, block in walk_blocks(session.script.blocks):
        steps.append({"index": index,
                      "kind": block.kind.value
                      if not isinstance(block, Conditional) else "IF",
                      "text": _step_text(block),
                      "slots": by_block.get(index, [])})
    return {"script": session.script.name, "steps": steps,
            "parameters": [p.name for p in session.script.parameters],
            "confirmed": session.confirmed}


class ToggleBody(BaseModel):
    entry_id: int
    public: bool


_FALLBACK_PAGE = """<!doctype html>
<title>script review endpoint</title>
<h1>Review endpoint is running</h1>
<p>No UI build was found. The JSON API lives at:</p>
<ul>
<li>GET /api/report</li>
<li>GET /api/script-preview</li>
<li>POST /api/toggle {"entry_id": n, "public": bool}</li>
<li>POST /api/confirm</li>
</ul>
"""


def create_review_app(session: ReviewSession,
                      ui_dir: Path | str | None = None) -> FastAPI:
    app = FastAPI(docs_url=None, redoc_url=None, openapi_url=None)

    @app.get("/api/report")
    def report():
        doc = report_document(session.report)
        doc["confirmed"] = session.confirmed
        doc["out_path"] = str(session.out_path)
        return doc

    @app.get("/api/script-preview")
    def preview():
        return _preview_document(session)

    @app.post("/api/toggle")
    def toggle(body: ToggleBody):
        try:
            entry = session.toggle(body.entry_id, body.public)
        except LookupError as exc:
            return JSONResponse({"error": str(exc)}, status_code=404)
        except PermissionError as exc:
            return JSONResponse({"error": str(exc)}, status_code=409)
        return {"entry": {"entry_id": entry.entry_id,
                          "content": entry.content,
                          "public": entry.verdict_public,
                          "override": entry.override,
                          "final_public": entry.final_public},
                "counts": session.report.counts}

    @app.post("/api/confirm")
    def confirm():
        try:
            path, already = session.confirm()
        except LeakDetected as exc:
            return JSONResponse({"error": str(exc)}, status_code=409)
        return {"shared_path": str(path), "already": already,
                "counts": session.report.counts,
                "warnings": list(session.warnings)}

    if ui_dir is not None and Path(ui_dir).is_dir():
        index = Path(ui_dir) / "index.html"

        @app.get("/")
        def home():
            return FileResponse(index)

        app.mount("/", StaticFiles(directory=Path(ui_dir)), name="ui")
    else:
        @app.get("/")
        def home():
            return HTMLResponse(_FALLBACK_PAGE)

    return app


def serve_review(session: ReviewSession, port: int,
                 ui_dir: Path | str | None = None) -> Path | None:
    """Serve on loopback until the author confirms, then return the path."""
    app = create_review_app(session, ui_dir=ui_dir)
    config = uvicorn.Config(app, host=LOOPBACK, port=port, log_level="warning")
    server = uvicorn.Server(config)

    def stop_after_confirm():
        session.done.wait()
        server.should_exit = True

    watcher = threading.Thread(target=stop_after_confirm, daemon=True)
    watcher.start()
    server.run()
    return session.shared_path
