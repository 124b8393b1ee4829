import pytest
from fastapi.testclient import TestClient

from graphaudit.audit import AuditService
from graphaudit.server import create_app


@pytest.fixture()
def client(smsblocker):
    service = AuditService(smsblocker.graph, smsblocker.ctx, app="smsblocker",
                           sources=smsblocker.sources)
    return TestClient(create_app(service))


def test_graph_summary(client):
    doc = client.get("/api/graph/summary").json()
    assert doc["app"] == "smsblocker"
    assert doc["nodes"] > 0 and doc["edges"] > 0
    assert "METHOD" in doc["nodeTags"]
    assert any(a["name"] == "broadcast-blockers" for a in doc["analyzers"])


def test_query_endpoint(client):
    resp = client.post("/api/query", json={
        "script": "universe().edgesTaggedAny(CALL).retainEdges()"})
    assert resp.status_code == 200
    doc = resp.json()
    assert doc["empty"] is False
    assert doc["subgraph"]["nodes"]


def test_query_syntax_error_payload(client):
    resp = client.post("/api/query", json={"script": "between("})
    assert resp.status_code == 400
    doc = resp.json()
    assert doc["error"] == "query-syntax"
    assert doc["detail"]["offset"] == 8


def test_run_and_status(client):
    doc = client.post("/api/analyzers/run", json={}).json()
    names = [r["name"] for r in doc["report"]]
    assert names == sorted(names)
    assert [w["analyzer"] for w in doc["workItems"]] == [
        "broadcast-blockers", "permission-usage"]
    status = client.get("/api/analyzers/status").json()
    assert len(status["runLog"]) == len(names)


def test_workitem_filters_and_patch(client):
    client.post("/api/analyzers/run", json={})
    items = client.get("/api/workitems", params={"category": "INTEGRITY"}).json()["workItems"]
    assert [w["analyzer"] for w in items] == ["broadcast-blockers"]

    patched = client.patch("/api/workitems/w1", json={
        "reviewed": True, "notes": "checked", "color": "red"}).json()
    assert patched["reviewed"] is True and patched["notes"] == "checked"

    remaining = client.get("/api/workitems", params={"reviewed": "false"}).json()["workItems"]
    assert all(w["id"] != "w1" for w in remaining)

    assert client.patch("/api/workitems/w42", json={"notes": "x"}).status_code == 404


def test_artifact_endpoint(client):
    client.post("/api/analyzers/run", json={})
    item = client.get("/api/workitems/w1").json()
    victim = item["envelope"]["nodes"][0]
    doc = client.post("/api/workitems/w1/artifacts", json={"remove": [victim]}).json()
    assert victim not in doc["effectiveSubgraph"]["nodes"] or all(
        n["id"] != victim for n in doc["effectiveSubgraph"]["nodes"])
    bad = client.post("/api/workitems/w1/artifacts", json={"add": ["n99999"]})
    assert bad.status_code == 404


def test_smartview_endpoint(client, smsblocker):
    g = smsblocker.graph
    on_receive = next(n.id for n in g.nodes.values()
                      if n.name == "onReceive" and "PLATFORM" not in n.tags)
    doc = client.get("/api/smartview", params={
        "node": on_receive, "kind": "FORWARD_CALL"}).json()
    names = {n["attrs"]["name"] for n in doc["subgraph"]["nodes"]}
    assert "abortBroadcast" in names
    missing = client.get("/api/smartview", params={"node": "n9999", "kind": "FORWARD_CALL"})
    assert missing.status_code == 404
    bad_steps = client.get("/api/smartview", params={
        "node": on_receive, "kind": "FORWARD_CALL", "steps": "soon"})
    assert bad_steps.status_code == 400


def test_source_endpoint(client, smsblocker):
    g = smsblocker.graph
    handle = next(n.id for n in g.nodes.values()
                  if n.name == "handle" and "METHOD" in n.tags)
    doc = client.get("/api/source", params={"node": handle}).json()
    assert doc["path"] == "app.mapp"
    assert "abortBroadcast" in doc["text"]


def test_node_search(client):
    doc = client.get("/api/nodes/search", params={"name": "abortBroadcast"}).json()
    assert any("METHOD" in n["tags"] for n in doc["nodes"])
