"""Exit codes and output of the console entry point."""

import json
import random
import socket
import threading
import time

import httpx
import pytest
import uvicorn

from pinalite.apps import (
    app_document,
    banking_app,
    banking_demo,
    coffee_app,
    coffee_demo,
    sample_banking_profile,
    sample_coffee_profile,
)
from pinalite.cli import main
from pinalite.client import AggregationClient
from pinalite.harness import gen_population
from pinalite.hashing import Salt
from pinalite.screens import extract_entries, screen_document
from pinalite.scripting import (
    demo_trace_document,
    deserialize_script,
    record_from_trace,
    script_to_json,
)
from pinalite.server import AggregationServer, ServerConfig, create_app


@pytest.fixture(autouse=True)
def clean_env(monkeypatch):
    monkeypatch.delenv("PINALITE_SERVER_URL", raising=False)
    monkeypatch.delenv("PINALITE_SALT_FILE", raising=False)


@pytest.fixture(scope="module")
def live_server():
    server = AggregationServer(Salt(b"\x42" * 64), ServerConfig())
    with socket.socket() as sock:
        sock.bind(("127.0.0.1", 0))
        port = sock.getsockname()[1]
    config = uvicorn.Config(create_app(server), host="127.0.0.1", port=port,
                            log_level="error")
    us = uvicorn.Server(config)
    thread = threading.Thread(target=us.run, daemon=True)
    thread.start()
    deadline = time.monotonic() + 10
    url = f"http://127.0.0.1:{port}"
    while time.monotonic() < deadline:
        try:
            httpx.get(f"{url}/health", timeout=1)
            break
        except httpx.HTTPError:
            time.sleep(0.05)
    else:
        pytest.fail("aggregation server never came up")
    yield url, server
    us.should_exit = True
    thread.join(timeout=5)


def write_json(path, doc):
    path.write_text(json.dumps(doc), encoding="utf-8")
    return str(path)


def upload_population(population, url):
    for member in population.members:
        client = AggregationClient(member.user_id, server_url=url)
        for name in sorted(member.app.screens):
            snap = member.app.screens[name]
            contents = sorted(e.content for e in extract_entries(snap.graph))
            client.ingest(snap.context, contents)


def banking_trace_file(tmp_path, seed=7):
    app = banking_app(sample_banking_profile(random.Random(seed)))
    trace = tmp_path / "trace.json"
    write_json(trace, demo_trace_document(banking_demo(app)))
    return app, trace


def test_record_then_run_round_trips(tmp_path, capsys):
    app, trace = banking_trace_file(tmp_path)
    out = tmp_path / "pay.json"
    assert main(["record", "--trace", str(trace), "--out", str(out)]) == 0
    assert "2 parameters" not in capsys.readouterr().out  # one bound menu

    script = deserialize_script(json.loads(out.read_text()))
    assert script.name == "pay"
    assert [p.name for p in script.parameters] == ["account"]

    app_file = write_json(tmp_path / "app.json", app_document(app))
    code = main(["run", "--script", str(out), "--app", app_file])
    assert code == 0
    lines = capsys.readouterr().out.strip().splitlines()
    records = [json.loads(line) for line in lines]
    assert records[-1]["ok"] is True
    assert records[-1]["final_screen"] == "confirm"
    assert [r["kind"] for r in records[:-1]] == ["LAUNCH", "CLICK", "CLICK"]


def test_run_honours_parameter_choices(tmp_path, capsys):
    profile = sample_coffee_profile(random.Random(3))
    app = coffee_app(profile)
    trace = write_json(tmp_path / "t.json",
                       demo_trace_document(coffee_demo(app)))
    script_file = tmp_path / "order.json"
    main(["record", "--trace", trace, "--out", str(script_file)])
    app_file = write_json(tmp_path / "app.json", app_document(app))
    capsys.readouterr()

    code = main(["run", "--script", str(script_file), "--app", app_file,
                 "--param", "size=Grande"])
    assert code == 0
    lines = [json.loads(l) for l in capsys.readouterr().out.splitlines()]
    assert any(r.get("element_id") == "size_grande" for r in lines)


def test_run_writes_the_rebuilt_script(tmp_path, capsys):
    app, trace = banking_trace_file(tmp_path)
    script_file = tmp_path / "pay.json"
    main(["record", "--trace", str(trace), "--out", str(script_file)])
    app_file = write_json(tmp_path / "app.json", app_document(app))
    rebuilt_file = tmp_path / "rebuilt.json"
    capsys.readouterr()

    assert main(["run", "--script", str(script_file), "--app", app_file,
                 "--rebuilt", str(rebuilt_file)]) == 0
    rebuilt = deserialize_script(json.loads(rebuilt_file.read_text()))
    assert rebuilt.name == "pay"


def test_run_failure_is_exit_1(tmp_path, capsys):
    # a banking script cannot launch the coffee app
    _, trace = banking_trace_file(tmp_path)
    script_file = tmp_path / "pay.json"
    main(["record", "--trace", str(trace), "--out", str(script_file)])
    other = write_json(tmp_path / "other.json",
                       app_document(coffee_app(sample_coffee_profile(random.Random(1)))))
    capsys.readouterr()

    assert main(["run", "--script", str(script_file), "--app", other]) == 1
    assert "error" in capsys.readouterr().err


def test_empty_trace_is_a_validation_error(tmp_path, capsys):
    trace = write_json(tmp_path / "empty.json", demo_trace_document([]))
    code = main(["record", "--trace", trace, "--out",
                 str(tmp_path / "x.json")])
    assert code == 1
    assert "error" in capsys.readouterr().err


def test_missing_file_is_an_io_error(tmp_path, capsys):
    code = main(["run", "--script", str(tmp_path / "nope.json"),
                 "--app", str(tmp_path / "nope2.json")])
    assert code == 2
    assert "io error" in capsys.readouterr().err


def test_bad_usage_exits_1(capsys):
    with pytest.raises(SystemExit) as excinfo:
        main(["record"])  # --trace and --out are required
    assert excinfo.value.code == 1
    assert "error" in capsys.readouterr().err


def test_unknown_command_exits_1(capsys):
    with pytest.raises(SystemExit) as excinfo:
        main(["frobnicate"])
    assert excinfo.value.code == 1
    capsys.readouterr()


def test_ingest_reports_new_then_duplicate(tmp_path, capsys, live_server):
    url, server = live_server
    app = banking_app(sample_banking_profile(random.Random(11)))
    screens = tmp_path / "screens"
    screens.mkdir()
    for name, snap in app.screens.items():
        write_json(screens / f"{name}.json",
                   screen_document(snap.root, snap.context))

    before = server.health()["entries"]
    argv = ["ingest", "--screens", str(screens),
            "--server", url, "--storage", str(tmp_path / "cfg")]
    assert main(argv) == 0
    first = capsys.readouterr().out
    assert "3 screens ingested" in first
    assert " 0 duplicates" in first
    assert server.health()["entries"] > before

    assert main(argv) == 0
    second = capsys.readouterr().out
    assert "0 new entries" in second


def test_ingest_needs_screen_files(tmp_path, capsys):
    empty = tmp_path / "none"
    empty.mkdir()
    code = main(["ingest", "--screens", str(empty),
                 "--server", "http://127.0.0.1:1", "--storage",
                 str(tmp_path / "cfg")])
    assert code == 1
    assert "no screen files" in capsys.readouterr().err


def test_client_config_is_reused_across_invocations(tmp_path, capsys,
                                                    live_server):
    url, _ = live_server
    app = banking_app(sample_banking_profile(random.Random(12)))
    screens = tmp_path / "screens"
    screens.mkdir()
    snap = app.screens[app.initial]
    write_json(screens / "home.json",
               screen_document(snap.root, snap.context))
    storage = tmp_path / "cfg"

    main(["ingest", "--screens", str(screens), "--server", url,
          "--storage", str(storage)])
    first = json.loads((storage / "config.json").read_text())
    main(["ingest", "--screens", str(screens), "--storage", str(storage)])
    second = json.loads((storage / "config.json").read_text())
    capsys.readouterr()
    assert first["user_id"] == second["user_id"]
    assert second["server_url"] == url  # stored url fills in when omitted

    main(["ingest", "--screens", str(screens), "--storage", str(storage),
          "--reset-id"])
    third = json.loads((storage / "config.json").read_text())
    capsys.readouterr()
    assert third["user_id"] != second["user_id"]


def test_server_url_env_fills_in(tmp_path, capsys, live_server, monkeypatch):
    url, _ = live_server
    monkeypatch.setenv("PINALITE_SERVER_URL", url)
    app = banking_app(sample_banking_profile(random.Random(13)))
    screens = tmp_path / "screens"
    screens.mkdir()
    snap = app.screens[app.initial]
    write_json(screens / "home.json",
               screen_document(snap.root, snap.context))
    assert main(["ingest", "--screens", str(screens),
                 "--storage", str(tmp_path / "cfg")]) == 0
    capsys.readouterr()


def test_share_against_a_dead_server_is_exit_2(tmp_path, capsys):
    _, trace = banking_trace_file(tmp_path)
    script_file = tmp_path / "pay.json"
    main(["record", "--trace", str(trace), "--out", str(script_file)])
    capsys.readouterr()

    out = tmp_path / "shared.json"
    code = main(["share", "--script", str(script_file), "--out", str(out),
                 "--server", "http://127.0.0.1:9", "--storage",
                 str(tmp_path / "cfg")])
    assert code == 2
    assert not out.exists()
    assert "server error" in capsys.readouterr().err


def test_share_hides_personal_content(tmp_path, capsys, live_server):
    url, _ = live_server
    population = gen_population("banking", 5, seed=21)
    upload_population(population, url)

    script = record_from_trace(banking_demo(population.author.app), "pay")
    script_file = tmp_path / "pay.json"
    script_file.write_text(script_to_json(script), encoding="utf-8")

    out = tmp_path / "shared.json"
    report_file = tmp_path / "report.json"
    code = main(["share", "--script", str(script_file), "--out", str(out),
                 "--report", str(report_file),
                 "--server", url, "--storage", str(tmp_path / "cfg")])
    assert code == 0
    assert "hidden" in capsys.readouterr().out
    shared = out.read_text(encoding="utf-8")
    assert population.author.profile["checking"] not in shared
    assert population.author.profile["owner_name"] not in shared
    report = json.loads(report_file.read_text())
    assert report["counts"]["personal"] >= 2

    # overriding the checking account row keeps it readable
    checking_id = next(e["entry_id"] for e in report["entries"]
                       if e["content"] == population.author.profile["checking"])
    ov = write_json(tmp_path / "ov.json", {str(checking_id): True})
    out2 = tmp_path / "shared2.json"
    code = main(["share", "--script", str(script_file), "--out", str(out2),
                 "--overrides", ov,
                 "--server", url, "--storage", str(tmp_path / "cfg")])
    assert code == 0
    capsys.readouterr()
    assert population.author.profile["checking"] in out2.read_text()


def test_eval_prints_a_table_row(tmp_path, capsys):
    json_file = tmp_path / "eval.json"
    code = main(["eval", "--spec", "coffee", "--users", "5",
                 "--seed", "0", "--json", str(json_file)])
    assert code == 0
    out = capsys.readouterr().out
    assert "coffee" in out
    assert "recall" in out
    doc = json.loads(json_file.read_text())
    assert doc["recall"] == 1.0
    assert doc["app"] == "coffee"


def test_eval_accepts_a_spec_file(tmp_path, capsys):
    spec = write_json(tmp_path / "spec.json",
                      {"app": "banking", "users": 5, "seed": 3})
    assert main(["eval", "--spec", spec]) == 0
    assert "banking" in capsys.readouterr().out


def test_eval_rejects_unknown_apps(tmp_path, capsys):
    spec = write_json(tmp_path / "spec.json", {"app": "solitaire"})
    assert main(["eval", "--spec", spec]) == 1
    assert "unknown app" in capsys.readouterr().err


def test_eval_rejects_junk_spec_values(tmp_path, capsys):
    spec = write_json(tmp_path / "spec.json", ["not", "a", "spec"])
    assert main(["eval", "--spec", spec]) == 1
    capsys.readouterr()


def test_serve_rejects_a_broken_config(tmp_path, capsys):
    bad = tmp_path / "server.json"
    bad.write_text("{not json", encoding="utf-8")
    assert main(["serve", "--config", str(bad)]) == 1
    assert "not valid JSON" in capsys.readouterr().err


def test_serve_review_flow_confirms_over_http(tmp_path, capsys, live_server):
    url, _ = live_server
    population = gen_population("banking", 5, seed=23)
    upload_population(population, url)
    script = record_from_trace(banking_demo(population.author.app), "pay")
    script_file = tmp_path / "pay.json"
    script_file.write_text(script_to_json(script), encoding="utf-8")

    with socket.socket() as sock:
        sock.bind(("127.0.0.1", 0))
        review_port = sock.getsockname()[1]
    out = tmp_path / "shared.json"
    outcome = {}

    def run_cli():
        outcome["code"] = main(
            ["share", "--script", str(script_file), "--out", str(out),
             "--serve-review", "--port", str(review_port),
             "--server", url, "--storage", str(tmp_path / "cfg")])

    thread = threading.Thread(target=run_cli, daemon=True)
    thread.start()
    base = f"http://127.0.0.1:{review_port}"
    deadline = time.monotonic() + 15
    while time.monotonic() < deadline:
        try:
            if httpx.get(f"{base}/api/report", timeout=1).status_code == 200:
                break
        except httpx.HTTPError:
            time.sleep(0.05)
    else:
        pytest.fail("review endpoint never came up")
    assert httpx.post(f"{base}/api/confirm", timeout=5).status_code == 200
    thread.join(timeout=15)
    assert not thread.is_alive()
    assert outcome["code"] == 0
    assert out.exists()
    capsys.readouterr()
