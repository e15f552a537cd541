import json

import pytest
from fastapi.testclient import TestClient

from pinalite.client import (
    AggregationClient,
    ClientConfig,
    load_or_create_config,
    reset_user_id,
)
from pinalite.errors import ClientBlocked, QuotaExceeded, ServerUnavailable
from pinalite.hashing import Salt, UserId
from pinalite.screens import AppContext
from pinalite.server import AggregationServer, ServerConfig, create_app

CTX = AppContext("com.coffee", "Order")


def make_client(tmp_path, **cfg_kw) -> AggregationClient:
    cfg = ServerConfig(persistence_path=tmp_path / "state.njson", **cfg_kw)
    server = AggregationServer(Salt(b"\x07" * 64), cfg)
    http = TestClient(create_app(server), raise_server_exceptions=False)
    return AggregationClient(UserId.fresh(), http=http)


def test_config_user_id_persists_until_reset(tmp_path):
    first = load_or_create_config(tmp_path)
    again = load_or_create_config(tmp_path)
    assert again.user_id == first.user_id
    reset = reset_user_id(again)
    assert reset.user_id != first.user_id
    assert load_or_create_config(tmp_path).user_id == reset.user_id


def test_config_url_precedence(tmp_path, monkeypatch):
    monkeypatch.delenv("PINALITE_SERVER_URL", raising=False)
    cfg = load_or_create_config(tmp_path, server_url="http://a:1")
    assert cfg.server_url == "http://a:1"
    # stored value survives when nothing overrides it
    assert load_or_create_config(tmp_path).server_url == "http://a:1"
    monkeypatch.setenv("PINALITE_SERVER_URL", "http://env:2")
    assert load_or_create_config(tmp_path).server_url == "http://env:2"
    assert load_or_create_config(tmp_path, server_url="http://x:3") \
        .server_url == "http://x:3"


def test_ingest_then_uniqueness(tmp_path):
    client = make_client(tmp_path)
    ack = client.ingest(CTX, ["latte", "Pay"])
    assert (ack.new, ack.duplicate) == (2, 0)
    assert client.ingest(CTX, ["latte"]).duplicate == 1

    [v] = client.uniqueness(CTX, ["latte"])
    assert (v.f, v.g) == (1, 1)
    assert not v.public
    assert len(v.salted_pair_hash) == 128


def test_uniqueness_preserves_input_order(tmp_path):
    client = make_client(tmp_path)
    client.ingest(CTX, ["a", "b"])
    verdicts = client.uniqueness(CTX, ["b", "missing", "a"])
    assert [v.f for v in verdicts] == [1, 0, 1]
    assert client.uniqueness(CTX, []) == []


def test_wire_log_carries_only_hex(tmp_path):
    client = make_client(tmp_path)
    client.ingest(CTX, ["Checking Account (...1234)"])
    client.uniqueness(CTX, ["Checking Account (...1234)"])
    assert len(client.wire_log) == 2
    for payload in client.wire_log:
        assert b"Checking Account" not in payload
        assert b"1234" not in payload
        body = json.loads(payload)
        hashes = body.get("pair_hashes") or [
            q["pair_hash"] for q in body["queries"]]
        assert all(len(h) == 128 and set(h) <= set("0123456789abcdef")
                   for h in hashes)


def test_quota_maps_to_typed_errors(tmp_path):
    client = make_client(tmp_path, quota_queries_per_day=2)
    client.ingest(CTX, ["x"])
    client.uniqueness(CTX, ["x"])
    client.uniqueness(CTX, ["x"])
    with pytest.raises(QuotaExceeded) as err:
        client.uniqueness(CTX, ["x"])
    assert err.value.retry_after_s > 0
    for _ in range(4):  # rejected attempts still count toward the block bar
        with pytest.raises((QuotaExceeded, ClientBlocked)):
            client.uniqueness(CTX, ["x"])
    with pytest.raises(ClientBlocked):
        client.uniqueness(CTX, ["x"])


def test_unreachable_server_is_server_unavailable():
    client = AggregationClient(UserId.fresh(),
                               server_url="http://127.0.0.1:1")
    with pytest.raises(ServerUnavailable):
        client.ingest(CTX, ["x"])
    with pytest.raises(ServerUnavailable):
        client.health()


def test_health_reports_counts(tmp_path):
    client = make_client(tmp_path)
    client.ingest(CTX, ["a", "b"])
    info = client.health()
    assert info["status"] == "ok"
    assert (info["entries"], info["contexts"]) == (2, 1)
