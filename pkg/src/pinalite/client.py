"""Client-side access to the aggregation server.

Everything here operates on hashes: plaintext screen content is hashed
in-process (see hashing) and only hex digests are ever serialized into a
request body.  Tests scan ``AggregationClient.wire_log`` to prove that.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from pathlib import Path

import httpx

from .errors import ClientBlocked, DocumentError, QuotaExceeded, ServerUnavailable
from .hashing import UserId, client_hash_context, client_hash_pair
from .screens import AppContext

ENV_SERVER_URL = "PINALITE_SERVER_URL"
DEFAULT_SERVER_URL = "http://127.0.0.1:8787"
_CONFIG_NAME = "config.json"


@dataclass
class ClientConfig:
    server_url: str
    user_id: UserId
    storage_dir: Path

    @property
    def path(self) -> Path:
        return self.storage_dir / _CONFIG_NAME

    def save(self) -> None:
        self.storage_dir.mkdir(parents=True, exist_ok=True)
        body = {"server_url": self.server_url, "user_id": self.user_id.uuid}
        tmp = self.path.with_suffix(".tmp")
        tmp.write_text(json.dumps(body, indent=2) + "\n", encoding="utf-8")
        os.replace(tmp, self.path)


def load_or_create_config(storage_dir: str | Path,
                          server_url: str | None = None) -> ClientConfig:
    """Read the stored config, minting a fresh user id on first run.

    Explicit ``server_url`` beats the environment, which beats the stored
    value, which beats the default.
    """
    storage_dir = Path(storage_dir)
    path = storage_dir / _CONFIG_NAME
    stored_url = None
    user_id = None
    if path.exists():
        try:
            raw = json.loads(path.read_text(encoding="utf-8"))
            stored_url = raw.get("server_url")
            user_id = UserId(raw["user_id"])
        except (ValueError, KeyError, json.JSONDecodeError) as exc:
            raise DocumentError(f"unreadable client config: {exc}",
                                path=str(path)) from exc
    if user_id is None:
        user_id = UserId.fresh()
    url = server_url or os.environ.get(ENV_SERVER_URL) or stored_url \
        or DEFAULT_SERVER_URL
    cfg = ClientConfig(server_url=url, user_id=user_id,
                       storage_dir=storage_dir)
    cfg.save()
    return cfg


def reset_user_id(cfg: ClientConfig) -> ClientConfig:
    cfg.user_id = UserId.fresh()
    cfg.save()
    return cfg


@dataclass(frozen=True)
class IngestAck:
    new: int
    duplicate: int


@dataclass(frozen=True)
class EntryVerdict:
    """Server's answer for one (context, content) pair."""

    salted_pair_hash: str
    f: int
    g: int
    p_value: float
    public: bool


class AggregationClient:
    """Thin JSON client.  Accepts any httpx.Client so tests can run
    against an in-process ASGI app instead of a socket."""

    def __init__(self, user_id: UserId,
                 http: httpx.Client | None = None,
                 server_url: str | None = None) -> None:
        if http is None:
            http = httpx.Client(base_url=server_url or DEFAULT_SERVER_URL,
                                timeout=10.0)
        self.user_id = user_id
        self._http = http
        self.wire_log: list[bytes] = []

    def close(self) -> None:
        self._http.close()

    def __enter__(self) -> "AggregationClient":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def _post(self, path: str, body: dict) -> dict:
        payload = json.dumps(body, ensure_ascii=False).encode("utf-8")
        self.wire_log.append(payload)
        try:
            resp = self._http.post(
                path, content=payload,
                headers={"content-type": "application/json"})
        except httpx.HTTPError as exc:
            raise ServerUnavailable(f"aggregation server unreachable: {exc}") \
                from exc
        if resp.status_code == 429:
            retry = float(resp.headers.get("retry-after", "0") or 0)
            raise QuotaExceeded("request quota exceeded", retry_after_s=retry)
        if resp.status_code == 403:
            raise ClientBlocked("this client id is blocked by the server")
        if resp.status_code >= 400:
            raise ServerUnavailable(
                f"server rejected request ({resp.status_code}): {resp.text}")
        return resp.json()

    def health(self) -> dict:
        try:
            resp = self._http.get("/v1/health")
        except httpx.HTTPError as exc:
            raise ServerUnavailable(f"aggregation server unreachable: {exc}") \
                from exc
        if resp.status_code >= 400:
            raise ServerUnavailable(f"health check failed ({resp.status_code})")
        return resp.json()

    def ingest(self, ctx: AppContext, contents: list[str]) -> IngestAck:
        """Hash and upload the entries observed on one screen."""
        if not contents:
            raise ValueError("nothing to ingest")
        body = {
            "user_id": self.user_id.uuid,
            "context_hash": client_hash_context(ctx).hex,
            "pair_hashes": [client_hash_pair(ctx, c).hex for c in contents],
        }
        raw = self._post("/v1/ingest", body)
        return IngestAck(new=raw["new"], duplicate=raw["duplicate"])

    def uniqueness(self, ctx: AppContext,
                   contents: list[str]) -> list[EntryVerdict]:
        """Ask for verdicts, one per content, in input order."""
        return self.uniqueness_pairs([(ctx, c) for c in contents])

    def uniqueness_pairs(self, pairs: list[tuple[AppContext, str]]
                         ) -> list[EntryVerdict]:
        """One batched round trip covering possibly many contexts."""
        if not pairs:
            return []
        body = {
            "user_id": self.user_id.uuid,
            "queries": [{"context_hash": client_hash_context(ctx).hex,
                         "pair_hash": client_hash_pair(ctx, c).hex}
                        for ctx, c in pairs],
        }
        raw = self._post("/v1/uniqueness", body)
        results = raw["results"]
        if len(results) != len(pairs):
            raise ServerUnavailable(
                f"server returned {len(results)} results for "
                f"{len(pairs)} queries")
        return [EntryVerdict(salted_pair_hash=r["salted_pair_hash"],
                             f=r["f"], g=r["g"], p_value=r["p_value"],
                             public=r["public"])
                for r in results]
