import json
from pathlib import Path

from graphaudit.cli import main

from conftest import APPS, SCRIPTS


def run_cli(*argv):
    return main(list(argv))


def audit_out(tmp_path, app, *extra):
    out = tmp_path / f"out_{app}_{len(extra)}"
    code = run_cli("audit", "--config", str(APPS / app / "audit.json"),
                   "--out", str(out), *extra)
    return code, out


def test_audit_exit_codes(tmp_path):
    code, _ = audit_out(tmp_path, "perm_clean")
    assert code == 0
    code, _ = audit_out(tmp_path, "smsblocker")
    assert code == 1


def test_audit_report_content(tmp_path):
    _, out = audit_out(tmp_path, "smsblocker")
    report = json.loads((out / "report.json").read_text())
    blockers = next(a for a in report["analyzers"] if a["name"] == "broadcast-blockers")
    assert blockers["findings"] == 1 and blockers["satisfied"] is False
    assert [w["analyzer"] for w in report["workItems"]] == [
        "broadcast-blockers", "permission-usage"]
    assert report["permissions"]["declaredUnused"] == ["RECEIVE_SMS"]
    assert (out / "envelopes" / "broadcast-blockers.json").exists()
    text = (out / "report.txt").read_text()
    # severity ordering: CIA before SMELL before PROPERTY
    assert text.index("confidentiality") < text.index("reflection") < text.index("native-code")


def test_audit_is_byte_deterministic(tmp_path):
    _, first = audit_out(tmp_path, "smsblocker")
    _, second = audit_out(tmp_path, "smsblocker", "--schedule-seed", "7")
    for rel in ("report.json", "report.txt", "envelopes/broadcast-blockers.json"):
        assert (first / rel).read_bytes() == (second / rel).read_bytes(), rel


def test_priority_threshold_flag(tmp_path):
    out = tmp_path / "hi_threshold"
    code = run_cli("audit", "--config", str(APPS / "smsblocker" / "audit.json"),
                   "--out", str(out), "--priority-threshold", "1000")
    assert code == 1  # permission finding remains
    report = json.loads((out / "report.json").read_text())
    blockers = next(a for a in report["analyzers"] if a["name"] == "broadcast-blockers")
    assert blockers["findings"] == 0 and blockers["satisfied"] is True


def test_ingest_then_query(tmp_path, capsys):
    out = tmp_path / "ingested"
    assert run_cli("ingest", "--config", str(APPS / "smsblocker" / "audit.json"),
                   "--out", str(out)) == 0
    capsys.readouterr()
    code = run_cli("query", "--graph", str(out / "graph.json"),
                   "--script", f"@{SCRIPTS / 'broadcast_blockers.q'}",
                   "--format", "json")
    assert code == 1  # non-empty result
    doc = json.loads(capsys.readouterr().out)
    names = {n["attrs"]["name"] for n in doc["nodes"]}
    assert {"onReceive", "handle", "abortBroadcast"} <= names


def test_query_dot_and_text_formats(tmp_path, capsys):
    out = tmp_path / "g"
    run_cli("ingest", "--config", str(APPS / "perm_clean" / "audit.json"),
            "--out", str(out))
    capsys.readouterr()
    assert run_cli("query", "--graph", str(out / "graph.json"),
                   "--script", "universe().edgesTaggedAny(CALL).retainEdges()",
                   "--format", "dot") == 1
    assert capsys.readouterr().out.startswith("digraph")
    run_cli("query", "--graph", str(out / "graph.json"),
            "--script", "nodes(NO_SUCH_TAG)", "--format", "text")
    assert "0 node(s)" in capsys.readouterr().out


def test_config_errors(tmp_path):
    assert run_cli("audit", "--config", str(tmp_path / "missing.json")) == 2
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({
        "sources": ["app.mapp"],
        "platformProfile": "../../fixtures/platform/profile.json",
    }))
    assert run_cli("audit", "--config", str(bad)) == 2  # missing source file

    unknown = tmp_path / "unknown.json"
    app = APPS / "perm_clean"
    unknown.write_text(json.dumps({
        "sources": [str(app / "app.mapp")],
        "platformProfile": str(Path("..") / ".." / "pkg"),
        "analyzers": ["nonexistent"],
    }))
    assert run_cli("audit", "--config", str(unknown)) == 2


def test_syntax_error_propagates_as_exit_2(tmp_path):
    app_dir = tmp_path / "brokenapp"
    app_dir.mkdir()
    (app_dir / "app.mapp").write_text("class Broken {")
    (app_dir / "audit.json").write_text(json.dumps({
        "sources": ["app.mapp"],
        "platformProfile": str(APPS.parent / "platform" / "profile.json"),
    }))
    assert run_cli("audit", "--config", str(app_dir / "audit.json"),
                   "--out", str(tmp_path / "o")) == 2


def test_state_file_written(tmp_path):
    _, out = audit_out(tmp_path, "smsblocker")
    state = json.loads((out / "state.json").read_text())
    assert state["app"] == "smsblocker"
    assert len(state["workItems"]) == 2
