"""Unique-user aggregation service.

Clients upload salted-hash-ready digests of what their screens showed; the
server keeps, per salted hash, the set of unique user ids that reported it.
A (context, pair) query returns F (users who saw the pair), G (users who saw
the screen at all), and a one-tailed exact binomial test of whether the pair
is common enough to be public knowledge. Abusive clients are throttled by
sliding 24-hour quotas and ultimately blocked.

State is held in memory and persisted as line-delimited JSON with an end
sentinel so a torn write is detected at restore.
"""

from __future__ import annotations

import json
import math
import os
import threading
import time
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Callable

from fastapi import FastAPI, HTTPException, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .errors import ClientBlocked, DocumentError, QuotaExceeded, StateFileError
from .hashing import ClientHash, Salt, SaltedHash, UserId, salted_hash

WINDOW_SECONDS = 24 * 60 * 60
# Exact-rational evaluation is cheap up to here; log-space beyond.
_EXACT_LIMIT = 64

STATE_VERSION = "pinalite-state/1"


def exact_binomial_tail(f: int, g: int, t: float) -> float:
    """P(X >= f) for X ~ Binomial(g, t): the one-tailed exact test.

    Exact rational arithmetic for g <= 64, log-space summation beyond, so the
    result is never 0 or garbage for large g.
    """
    if not 0 <= f <= g:
        raise ValueError(f"need 0 <= f <= g, got f={f} g={g}")
    if not 0.0 < t < 1.0:
        raise ValueError(f"need 0 < t < 1, got t={t}")
    if f == 0:
        return 1.0
    if g <= _EXACT_LIMIT:
        rt = Fraction(t)
        total = Fraction(0)
        for k in range(f, g + 1):
            total += math.comb(g, k) * rt ** k * (1 - rt) ** (g - k)
        return float(total)
    log_t = math.log(t)
    log_1t = math.log1p(-t)
    log_terms = [
        math.lgamma(g + 1) - math.lgamma(k + 1) - math.lgamma(g - k + 1)
        + k * log_t + (g - k) * log_1t
        for k in range(f, g + 1)
    ]
    peak = max(log_terms)
    return min(1.0, math.exp(peak) * sum(math.exp(lt - peak) for lt in log_terms))


@dataclass(frozen=True)
class ServerConfig:
    t: float = 0.5
    alpha: float = 0.05
    quota_entries_per_day: int = 10_000
    quota_queries_per_day: int = 1_000
    persistence_path: Path | None = None

    def __post_init__(self):
        if not 0.0 < self.t < 1.0:
            raise ValueError("t must lie in (0, 1)")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must lie in (0, 1)")
        if self.quota_entries_per_day < 1 or self.quota_queries_per_day < 1:
            raise ValueError("quotas must be positive")


@dataclass(frozen=True)
class UniquenessVerdict:
    f: int
    g: int
    h: float | None
    p_value: float
    public: bool

    def __post_init__(self):
        if self.public and not (self.g > 0 and self.p_value < 1.0):
            raise ValueError("public verdict requires evidence")


@dataclass
class _QuotaWindow:
    # (timestamp, units) per request kind, pruned to the last 24 hours.
    events: dict[str, list[tuple[float, int]]] = field(default_factory=dict)

    def record(self, kind: str, units: int, now: float) -> int:
        """Add an attempt and return the window total. Rejected attempts count
        too: hammering a closed door is still hammering."""
        window = self.events.setdefault(kind, [])
        window.append((now, units))
        cutoff = now - WINDOW_SECONDS
        while window and window[0][0] <= cutoff:
            window.pop(0)
        return sum(n for _, n in window)

    def retry_after(self, kind: str, now: float) -> float:
        window = self.events.get(kind, [])
        if not window:
            return 0.0
        return max(0.0, window[0][0] + WINDOW_SECONDS - now)


class AggregationServer:
    """In-memory core, transport-agnostic; the HTTP layer is a thin shell."""

    def __init__(self, salt: Salt, config: ServerConfig = ServerConfig(),
                 clock: Callable[[], float] = time.time):
        self.salt = salt
        self.config = config
        self.clock = clock
        self._lock = threading.Lock()
        self.context_users: dict[str, set[str]] = {}
        self.entry_users: dict[str, set[str]] = {}
        self.quotas: dict[str, _QuotaWindow] = {}
        self.blocked: set[str] = set()

    # -- abuse control --

    def _check_quota(self, user: UserId, kind: str, units: int, limit: int):
        if user.uuid in self.blocked:
            raise ClientBlocked(f"user {user.uuid} is blocked")
        window = self.quotas.setdefault(user.uuid, _QuotaWindow())
        now = self.clock()
        total = window.record(kind, units, now)
        if total > 3 * limit:
            self.blocked.add(user.uuid)
            raise ClientBlocked(
                f"user {user.uuid} exceeded 3x the {kind} quota and is blocked")
        if total > limit:
            raise QuotaExceeded(
                f"{kind} quota of {limit} per 24h exceeded",
                retry_after_s=window.retry_after(kind, now))

    # -- core operations --

    def ingest(self, user: UserId, context_hash: ClientHash,
               pair_hashes: list[ClientHash]) -> tuple[int, int]:
        """Record that ``user`` saw these pairs on this screen.

        Returns (new, duplicate) counts over the pair additions. Idempotent
        per (user, hash).
        """
        if not pair_hashes:
            raise DocumentError("ingest needs at least one pair hash")
        with self._lock:
            self._check_quota(user, "ingest", len(pair_hashes),
                              self.config.quota_entries_per_day)
            ctx_key = salted_hash(context_hash, self.salt).hex
            self.context_users.setdefault(ctx_key, set()).add(user.uuid)
            new = duplicate = 0
            for pair in pair_hashes:
                key = salted_hash(pair, self.salt).hex
                users = self.entry_users.setdefault(key, set())
                if user.uuid in users:
                    duplicate += 1
                else:
                    users.add(user.uuid)
                    new += 1
            return new, duplicate

    def verdict_for(self, f: int, g: int) -> UniquenessVerdict:
        if g == 0:
            return UniquenessVerdict(f=0, g=0, h=None, p_value=1.0, public=False)
        p = exact_binomial_tail(f, g, self.config.t)
        return UniquenessVerdict(f=f, g=g, h=f / g, p_value=p,
                                 public=p < self.config.alpha)

    def uniqueness(self, user: UserId,
                   queries: list[tuple[ClientHash, ClientHash]]
                   ) -> list[tuple[SaltedHash, UniquenessVerdict]]:
        """Verdicts for (context_hash, pair_hash) queries.

        F counts only users who also reported the context, so F <= G holds
        even against a client that re-sends a pair under a different screen.
        """
        if not queries:
            raise DocumentError("uniqueness needs at least one query")
        with self._lock:
            self._check_quota(user, "query", len(queries),
                              self.config.quota_queries_per_day)
            results = []
            for context_hash, pair_hash in queries:
                ctx_key = salted_hash(context_hash, self.salt).hex
                pair_key = salted_hash(pair_hash, self.salt).hex
                context_seen = self.context_users.get(ctx_key, set())
                pair_seen = self.entry_users.get(pair_key, set())
                g = len(context_seen)
                f = len(pair_seen & context_seen)
                results.append((SaltedHash(pair_key), self.verdict_for(f, g)))
            return results

    def health(self) -> dict:
        with self._lock:
            return {"status": "ok", "entries": len(self.entry_users),
                    "contexts": len(self.context_users)}

    # -- persistence --

    def persist(self, path: Path | None = None):
        path = path or self.config.persistence_path
        if path is None:
            raise StateFileError("no persistence path configured")
        with self._lock:
            lines = [json.dumps({"kind": "meta", "version": STATE_VERSION})]
            for key in sorted(self.context_users):
                lines.append(json.dumps({
                    "kind": "context", "salted_hash": key,
                    "users": sorted(self.context_users[key])}))
            for key in sorted(self.entry_users):
                lines.append(json.dumps({
                    "kind": "entry", "salted_hash": key,
                    "users": sorted(self.entry_users[key])}))
            for uid in sorted(self.quotas):
                events = {kind: window for kind, window
                          in self.quotas[uid].events.items() if window}
                if events:
                    lines.append(json.dumps({
                        "kind": "quota", "user_id": uid, "events": events}))
            for uid in sorted(self.blocked):
                lines.append(json.dumps({"kind": "block", "user_id": uid}))
            lines.append(json.dumps({"kind": "end", "records": len(lines)}))
        payload = "\n".join(lines) + "\n"
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_suffix(path.suffix + ".tmp")
        tmp.write_text(payload, encoding="utf-8")
        os.replace(tmp, path)

    def restore(self, path: Path | None = None):
        path = path or self.config.persistence_path
        if path is None:
            raise StateFileError("no persistence path configured")
        path = Path(path)
        if not path.exists():
            return
        records = []
        for n, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
            if not line.strip():
                continue
            try:
                records.append(json.loads(line))
            except json.JSONDecodeError as err:
                raise StateFileError(f"{path}:{n}: not JSON ({err.msg})") from None
        if not records or records[-1].get("kind") != "end":
            raise StateFileError(f"{path}: missing end sentinel, file truncated?")
        sentinel = records.pop()
        if sentinel.get("records") != len(records):
            raise StateFileError(
                f"{path}: end sentinel counts {sentinel.get('records')} records,"
                f" found {len(records)}")
        if not records or records[0] != {"kind": "meta", "version": STATE_VERSION}:
            raise StateFileError(f"{path}: unknown or missing state version")

        context_users: dict[str, set[str]] = {}
        entry_users: dict[str, set[str]] = {}
        quotas: dict[str, _QuotaWindow] = {}
        blocked: set[str] = set()
        for n, record in enumerate(records[1:], 2):
            kind = record.get("kind")
            if kind == "context":
                context_users[record["salted_hash"]] = set(record["users"])
            elif kind == "entry":
                entry_users[record["salted_hash"]] = set(record["users"])
            elif kind == "quota":
                quotas[record["user_id"]] = _QuotaWindow(events={
                    k: [(float(ts), int(units)) for ts, units in window]
                    for k, window in record["events"].items()})
            elif kind == "block":
                blocked.add(record["user_id"])
            else:
                raise StateFileError(f"{path}:{n}: unknown record kind {kind!r}")
        with self._lock:
            self.context_users = context_users
            self.entry_users = entry_users
            self.quotas = quotas
            self.blocked = blocked


class IngestBody(BaseModel):
    user_id: str
    context_hash: str
    pair_hashes: list[str]


class UniquenessQuery(BaseModel):
    context_hash: str
    pair_hash: str


class UniquenessBody(BaseModel):
    user_id: str
    queries: list[UniquenessQuery]


def create_app(server: AggregationServer) -> FastAPI:
    """FastAPI shell: JSON in, JSON out, errors as 400/403/429."""
    app = FastAPI(title="pinalite aggregation server", docs_url=None, redoc_url=None)

    @app.exception_handler(RequestValidationError)
    async def malformed(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400, content={"detail": "malformed request"})

    def parse(ctor, value, what: str):
        try:
            return ctor(value)
        except (ValueError, DocumentError):
            raise HTTPException(status_code=400, detail=f"malformed {what}") from None

    def guarded(fn):
        try:
            return fn()
        except ClientBlocked as err:
            raise HTTPException(status_code=403, detail=str(err)) from None
        except QuotaExceeded as err:
            raise HTTPException(
                status_code=429, detail=str(err),
                headers={"Retry-After": str(int(err.retry_after_s) + 1)}) from None
        except DocumentError as err:
            raise HTTPException(status_code=400, detail=str(err)) from None

    @app.post("/v1/ingest")
    def ingest(body: IngestBody):
        user = parse(UserId, body.user_id, "user id")
        context = parse(ClientHash, body.context_hash, "context hash")
        pairs = [parse(ClientHash, h, "pair hash") for h in body.pair_hashes]
        new, duplicate = guarded(lambda: server.ingest(user, context, pairs))
        return {"new": new, "duplicate": duplicate}

    @app.post("/v1/uniqueness")
    def uniqueness(body: UniquenessBody):
        user = parse(UserId, body.user_id, "user id")
        queries = [(parse(ClientHash, q.context_hash, "context hash"),
                    parse(ClientHash, q.pair_hash, "pair hash"))
                   for q in body.queries]
        results = guarded(lambda: server.uniqueness(user, queries))
        return {"results": [
            {"salted_pair_hash": salted.hex, "f": v.f, "g": v.g,
             "p_value": v.p_value, "public": v.public}
            for salted, v in results]}

    @app.get("/v1/health")
    def health():
        return server.health()

    return app
