import json
import random

import pytest

from graphaudit.analysis import (
    AnalysisContext,
    apply_continuation,
    permission_classification,
    run_analyzer,
    taint_pairs,
)
from graphaudit.errors import (
    UnknownAnalyzerError,
    UnknownContinuationError,
    UnmetDependencyError,
)
from graphaudit.graph import ProgramGraph
from graphaudit.script import eval_query

from conftest import LABEL_TO_ANALYZER, SCRIPTS, app_labels, app_names
from oracles import oracle_taint_pairs


def test_unknown_analyzer(smsblocker):
    with pytest.raises(UnknownAnalyzerError):
        run_analyzer("nope", smsblocker.ctx)


def test_unmet_indexer_dependency(platform_profile):
    g = ProgramGraph().freeze()  # built outside the pipeline: nothing indexed
    ctx = AnalysisContext(graph=g, profile=platform_profile)
    with pytest.raises(UnmetDependencyError):
        run_analyzer("broadcast-blockers", ctx)


def test_runs_are_deterministic(smsblocker):
    first = run_analyzer("broadcast-blockers", smsblocker.ctx)
    second = run_analyzer("broadcast-blockers", smsblocker.ctx)
    assert first.to_dict() == second.to_dict()


def test_envelope_emptiness_matches_labels(corpus):
    for name in app_names():
        for label_key, expected in app_labels(name).items():
            envelope = run_analyzer(LABEL_TO_ANALYZER[label_key], corpus[name].ctx)
            actual = "benign" if envelope.is_empty() else "violating"
            assert actual == expected, f"{name}:{label_key}"
            assert envelope.is_empty() == (len(envelope.findings) == 0)


def test_broadcast_blocker_envelope_content(smsblocker):
    g = smsblocker.graph
    envelope = run_analyzer("broadcast-blockers", smsblocker.ctx)
    names = {g.nodes[n].attrs.get("signature") for n in envelope.subgraph.node_ids}
    assert names == {"Blocker.onReceive", "Blocker.handle",
                     "BroadcastReceiver.abortBroadcast"}
    assert len(envelope.subgraph.edge_ids) == 2
    [finding] = envelope.findings
    assert "Blocker.onReceive" in finding.message


def test_broadcast_blocker_equals_script_transcription(corpus):
    script = (SCRIPTS / "broadcast_blockers.q").read_text()
    for name in ("smsblocker", "smsblocker_nopriority", "smsblocker_noabort",
                 "smsblocker_lowpriority"):
        result = corpus[name]
        envelope = run_analyzer("broadcast-blockers", result.ctx)
        via_script = eval_query(script, result.graph)
        assert via_script.same_ids(envelope.subgraph), name


def test_confidentiality_field_relay(corpus):
    result = corpus["c_leak_log"]
    envelope = run_analyzer("confidentiality", result.ctx)
    g = result.graph
    tags = set()
    for nid in envelope.subgraph.node_ids:
        tags |= g.nodes[nid].tags
    assert "FIELD" in tags  # the relay field is on the path
    [finding] = envelope.findings
    assert "getDeviceId" in finding.message and "Log.d" in finding.message


def test_confidentiality_pairs_match_oracle_on_fixtures(corpus):
    from graphaudit.analysis import sink_param_nodes, source_result_nodes
    for name in app_names():
        g = corpus[name].graph
        _, pairs = taint_pairs(g, source_result_nodes(g), sink_param_nodes(g))
        assert set(pairs) == set(oracle_taint_pairs(
            g, source_result_nodes(g), sink_param_nodes(g))), name


def test_taint_matches_oracle_on_random_graphs():
    rng = random.Random(99)
    for _ in range(100):
        g = ProgramGraph()
        ids = [g.add_node("VARIABLE", f"v{i}") for i in range(rng.randint(2, 20))]
        for _ in range(rng.randint(0, 40)):
            g.add_edge("DATA_FLOW", rng.choice(ids), rng.choice(ids))
        g.freeze()
        sources = {n for n in ids if rng.random() < 0.2}
        sinks = {n for n in ids if rng.random() < 0.2}
        envelope, pairs = taint_pairs(g, sources, sinks)
        assert set(pairs) == set(oracle_taint_pairs(g, sources, sinks))
        assert len(pairs) == len(set(pairs))  # no duplicate findings
        assert envelope.is_empty() == (not pairs)


def test_integrity_reverse_slice_and_cross_category(corpus):
    result = corpus["i_write_tainted"]
    envelope = run_analyzer("integrity", result.ctx)
    assert len(envelope.findings) == 2  # both putString arguments are writes
    tainted = [f for f in envelope.findings if "cross-category" in f.message]
    assert len(tainted) == 1
    g = result.graph
    slice_names = {g.nodes[n].name for n in envelope.subgraph.node_ids}
    assert "getDeviceId" in slice_names  # reverse slice reaches the origin


def test_integrity_field_write(corpus):
    envelope = run_analyzer("integrity", corpus["i_write_settings"].ctx)
    [finding] = envelope.findings
    assert "Settings.adbEnabled" in finding.message


def test_availability_loop_and_recursion(corpus):
    loop_env = run_analyzer("availability", corpus["a_loop_poll"].ctx)
    assert any("Camera.open" in f.message for f in loop_env.findings)
    rec_env = run_analyzer("availability", corpus["a_loop_recursion"].ctx)
    assert any("recursive" in f.message and "HttpClient.get" in f.message
               for f in rec_env.findings)


def test_native_and_reflection_messages(corpus):
    native = run_analyzer("native-code", corpus["native_simple"].ctx)
    assert "System.loadLibrary" in native.findings[0].message
    smell = run_analyzer("reflection", corpus["reflect_dead"].ctx)
    assert "justify" in smell.findings[0].message
    assert smell.category == "SMELL"


def test_permission_usage_findings(corpus):
    envelope = run_analyzer("permission-usage", corpus["c_leak_sms"].ctx)
    messages = " ".join(f.message for f in envelope.findings)
    assert "SEND_SMS" in messages and "ACCESS_FINE_LOCATION" in messages
    assert "never used" not in messages
    assert "not declared" not in messages


def test_permission_classification_matrix(corpus):
    expected = {
        "perm_used_declared": {
            "used": ["SEND_SMS"], "declared": ["SEND_SMS"],
            "usedUndeclared": [], "declaredUnused": []},
        "perm_declared_unused": {
            "used": [], "declared": ["SEND_SMS"],
            "usedUndeclared": [], "declaredUnused": ["SEND_SMS"]},
        "perm_used_undeclared": {
            "used": ["ACCESS_FINE_LOCATION"], "declared": [],
            "usedUndeclared": ["ACCESS_FINE_LOCATION"], "declaredUnused": []},
        "perm_clean": {
            "used": [], "declared": [],
            "usedUndeclared": [], "declaredUnused": []},
    }
    for name, want in expected.items():
        assert permission_classification(corpus[name].graph) == want, name


def test_permission_usage_severity_marker(corpus):
    envelope = run_analyzer("permission-usage", corpus["perm_used_undeclared"].ctx)
    assert any("severity=high" in f.message for f in envelope.findings)


def test_declared_unused_envelope_nonempty(corpus):
    envelope = run_analyzer("permission-usage", corpus["perm_declared_unused"].ctx)
    assert not envelope.is_empty()
    g = corpus["perm_declared_unused"].graph
    assert any("PERMISSION" in g.nodes[n].tags for n in envelope.subgraph.node_ids)


def test_continuation_entry_reachable_removes_dead_finding(corpus):
    result = corpus["reflect_dead"]
    envelope = run_analyzer("reflection", result.ctx)
    assert len(envelope.findings) == 1
    refined = apply_continuation(envelope, "entry-reachable-only", result.ctx)
    assert refined.is_empty() and refined.findings == ()


def test_continuation_keeps_live_finding(corpus):
    result = corpus["c_leak_sms"]
    envelope = run_analyzer("confidentiality", result.ctx)
    refined = apply_continuation(envelope, "entry-reachable-only", result.ctx)
    assert len(refined.findings) == len(envelope.findings)
    assert refined.subgraph.node_ids <= envelope.subgraph.node_ids


def test_continuation_broaden_is_monotone(corpus):
    result = corpus["smsblocker"]
    envelope = run_analyzer("broadcast-blockers", result.ctx)
    broad = apply_continuation(envelope, "one-step-broaden", result.ctx)
    assert envelope.subgraph.node_ids <= broad.subgraph.node_ids
    assert envelope.subgraph.edge_ids <= broad.subgraph.edge_ids
    empty = run_analyzer("confidentiality", result.ctx)
    assert apply_continuation(empty, "one-step-broaden", result.ctx).is_empty()


def test_unknown_continuation(corpus):
    result = corpus["smsblocker"]
    envelope = run_analyzer("broadcast-blockers", result.ctx)
    with pytest.raises(UnknownContinuationError):
        apply_continuation(envelope, "mystery", result.ctx)
    with pytest.raises(UnknownContinuationError):
        # broadcast-blockers declares only one-step-broaden
        apply_continuation(envelope, "entry-reachable-only", result.ctx)


def test_envelope_json_shape(smsblocker):
    doc = run_analyzer("broadcast-blockers", smsblocker.ctx).to_dict()
    assert set(doc) == {"analyzer", "category", "findings", "subgraph"}
    assert doc["analyzer"] == "broadcast-blockers"
    assert {"nodes", "edges"} <= set(doc["subgraph"])
    assert all({"message", "anchors", "spans"} == set(f) for f in doc["findings"])
    json.dumps(doc)  # serializable
