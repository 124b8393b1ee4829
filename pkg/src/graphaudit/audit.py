"""Audit back-end: dependency-scheduled analyzer runs, the work-item queue,
smart views and audit-state persistence.

Analyzers execute on a thread pool respecting their dependency DAG; any two
with no path between them may run concurrently. Outputs are canonical: one
work item per non-empty envelope, ordered by analyzer name regardless of
completion order, so every legal schedule produces identical results. All
audit-state mutation is serialized through one lock; readers see consistent
snapshots.
"""

from __future__ import annotations

import json
import random
import threading
import time
from concurrent.futures import FIRST_COMPLETED, ThreadPoolExecutor, wait
from dataclasses import dataclass, field

from .analysis import (
    AnalysisContext,
    Envelope,
    Finding,
    _REGISTRY,
    analyzer_names,
    get_descriptor,
    run_analyzer,
)
from .errors import (
    DependencyCycleError,
    GraphAuditError,
    HashMismatchError,
    StateSchemaError,
    UnknownArtifactError,
    UnknownNodeError,
    UnknownWorkItemError,
)
from .graph import ProgramGraph, TAG_RTA_FEASIBLE, id_sort_key
from .graphio import graph_hash
from .query import Subgraph

SMART_VIEW_KINDS = (
    "FORWARD_DATA", "REVERSE_DATA", "FORWARD_CALL", "REVERSE_CALL",
    "DECLARATION_STRUCTURE", "TYPE_HIERARCHY", "XML_CALLBACKS",
    "REVERSE_DATA_INTO_XML",
)


@dataclass
class WorkItem:
    id: str
    analyzer: str
    category: str
    envelope: Envelope
    name: str
    color: str = ""
    reviewed: bool = False
    notes: str = ""
    added: set[str] = field(default_factory=set)
    removed: set[str] = field(default_factory=set)

    def effective_subgraph(self, graph: ProgramGraph) -> Subgraph:
        """(envelope ∪ added) − removed, endpoint-closed after repair."""
        nodes = set(self.envelope.subgraph.node_ids)
        edges = set(self.envelope.subgraph.edge_ids)
        for artifact in self.added:
            if artifact in graph.nodes:
                nodes.add(artifact)
            elif artifact in graph.edges:
                edges.add(artifact)
                edge = graph.edges[artifact]
                nodes.update((edge.src, edge.dst))
        nodes -= self.removed
        edges -= self.removed
        return Subgraph.of(graph, nodes, edges)


@dataclass
class RunRecord:
    name: str
    category: str
    status: str            # "ok" | "error" | "skipped"
    findings: int
    started: float
    finished: float
    error: str = ""


@dataclass
class AuditState:
    app: str
    graph_hash: str
    work_items: list[WorkItem] = field(default_factory=list)
    run_log: list[RunRecord] = field(default_factory=list)
    journal: list[dict] = field(default_factory=list)


@dataclass(frozen=True)
class SmartViewRequest:
    selection: frozenset[str]
    kind: str
    steps: int | str = "fixpoint"   # positive int or "fixpoint"
    rta_only: bool = False


# -- scheduler --------------------------------------------------------------------


def _analyzer_dag(names: list[str]) -> dict[str, set[str]]:
    """Analyzer-to-analyzer dependency edges, transitively including deps."""
    dag: dict[str, set[str]] = {}
    queue = list(names)
    while queue:
        name = queue.pop()
        if name in dag:
            continue
        descriptor = get_descriptor(name)
        analyzer_deps = {d for d in descriptor.dependencies if d in _REGISTRY}
        dag[name] = analyzer_deps
        queue.extend(analyzer_deps)
    # cycle check
    state: dict[str, int] = {}

    def visit(node: str, trail: tuple[str, ...]):
        if state.get(node) == 2:
            return
        if state.get(node) == 1:
            raise DependencyCycleError(
                f"analyzer dependency cycle: {' -> '.join(trail + (node,))}")
        state[node] = 1
        for dep in dag[node]:
            visit(dep, trail + (node,))
        state[node] = 2

    for name in dag:
        visit(name, ())
    return dag


def schedule_and_run(
    names: list[str] | None,
    ctx: AnalysisContext,
    max_workers: int = 4,
    seed: int | None = None,
) -> tuple[list[RunRecord], dict[str, Envelope]]:
    """Run analyzers respecting the dependency DAG.

    Independent analyzers are permitted to run concurrently; a seed varies
    which ready analyzer is submitted first (for schedule-robustness tests).
    A failing analyzer is recorded and its dependents skipped; siblings are
    unaffected. Returns run records and envelopes keyed by analyzer.
    """
    requested = list(names) if names else analyzer_names()
    dag = _analyzer_dag(requested)
    rng = random.Random(seed)

    done: dict[str, RunRecord] = {}
    envelopes: dict[str, Envelope] = {}
    lock = threading.Lock()
    pending = set(dag)
    running: dict = {}

    def launch(pool):
        # Marking an item skipped can make its dependents ready in turn.
        progressed = True
        while progressed:
            progressed = False
            ready = sorted(
                n for n in pending
                if all(d in done for d in dag[n])
            )
            if seed is not None:
                rng.shuffle(ready)
            for name in ready:
                failed_dep = next(
                    (d for d in dag[name] if done[d].status != "ok"), None)
                pending.discard(name)
                if failed_dep is not None:
                    now = time.monotonic()
                    done[name] = RunRecord(
                        name=name, category=get_descriptor(name).category,
                        status="skipped", findings=0, started=now, finished=now,
                        error=f"dependency {failed_dep} did not complete")
                    progressed = True
                    continue
                executed = {n for n, r in done.items() if r.status == "ok"}
                running[pool.submit(_run_one, name, ctx, executed)] = name

    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        launch(pool)
        while running:
            finished, _ = wait(list(running), return_when=FIRST_COMPLETED)
            for future in finished:
                name = running.pop(future)
                record, envelope = future.result()
                with lock:
                    done[name] = record
                    if envelope is not None:
                        envelopes[name] = envelope
            launch(pool)

    records = sorted(done.values(), key=lambda r: r.name)
    return records, envelopes


def _run_one(name: str, ctx: AnalysisContext,
             executed: set[str]) -> tuple[RunRecord, Envelope | None]:
    descriptor = get_descriptor(name)
    started = time.monotonic()
    try:
        envelope = run_analyzer(name, ctx, executed=executed)
        return RunRecord(
            name=name, category=descriptor.category, status="ok",
            findings=len(envelope.findings), started=started,
            finished=time.monotonic(),
        ), envelope
    except GraphAuditError as exc:
        return RunRecord(
            name=name, category=descriptor.category, status="error",
            findings=0, started=started, finished=time.monotonic(),
            error=str(exc),
        ), None


# -- smart views ------------------------------------------------------------------


def smart_view(graph: ProgramGraph, request: SmartViewRequest) -> Subgraph:
    """Selection-driven standard slices over the frozen graph."""
    if not request.selection:
        raise UnknownNodeError("smart view requires a non-empty selection")
    for nid in request.selection:
        if nid not in graph.nodes:
            raise UnknownNodeError(f"no node with id {nid!r}")
    if request.kind not in SMART_VIEW_KINDS:
        raise GraphAuditError(f"unknown smart view kind {request.kind!r}")

    sel = Subgraph.of(graph, request.selection)
    kind = request.kind
    if kind in ("FORWARD_DATA", "REVERSE_DATA"):
        q = _edge_universe(graph, lambda e: "DATA_FLOW" in e.tags)
        return _walk(q, sel, kind.startswith("REVERSE"), request.steps)
    if kind in ("FORWARD_CALL", "REVERSE_CALL"):
        def keep(e):
            if "CALL" not in e.tags:
                return False
            return TAG_RTA_FEASIBLE in e.tags if request.rta_only else True
        q = _edge_universe(graph, keep)
        return _walk(q, sel, kind.startswith("REVERSE"), request.steps)
    if kind == "DECLARATION_STRUCTURE":
        q = _edge_universe(graph, lambda e: "DECLARES" in e.tags)
        return _walk(q, sel, True, request.steps)
    if kind == "TYPE_HIERARCHY":
        q = _edge_universe(graph, lambda e: "EXTENDS" in e.tags)
        up = _walk(q, sel, False, request.steps)
        down = _walk(q, sel, True, request.steps)
        return up.union(down)
    if kind == "XML_CALLBACKS":
        wires = _edge_universe(graph, lambda e: "XML_CALLBACK" in e.tags)
        calls = _edge_universe(graph, lambda e: "CALL" in e.tags)
        return _walk(wires, sel, True, "fixpoint").union(
            _walk(calls, sel, False, request.steps))
    # REVERSE_DATA_INTO_XML: data flow plus XML wiring and XML containment,
    # so element provenance appears in the slice.
    def keep(e):
        if "DATA_FLOW" in e.tags or "XML_CALLBACK" in e.tags:
            return True
        return "DECLARES" in e.tags and "XML_ELEMENT" in graph.nodes[e.src].tags
    q = _edge_universe(graph, keep)
    return _walk(q, sel, True, request.steps)


def _edge_universe(graph: ProgramGraph, keep) -> Subgraph:
    edges = frozenset(e.id for e in graph.edges.values() if keep(e))
    return Subgraph(graph, frozenset(graph.nodes), edges)


def _walk(q: Subgraph, origin: Subgraph, reverse: bool, steps) -> Subgraph:
    if steps == "fixpoint":
        return q.reverse(origin) if reverse else q.forward(origin)
    if not isinstance(steps, int) or steps < 1:
        raise GraphAuditError(f"steps must be a positive integer or 'fixpoint', got {steps!r}")
    current = Subgraph.of(q.graph, origin.node_ids & q.node_ids)
    for _ in range(steps):
        current = q.reverse_step(current) if reverse else q.forward_step(current)
    return current


# -- audit service ------------------------------------------------------------------


class AuditService:
    """Owns the frozen graph, the analysis context and the audit state."""

    def __init__(
        self,
        graph: ProgramGraph,
        ctx: AnalysisContext,
        app: str = "app",
        sources: dict[str, str] | None = None,
    ):
        if not graph.frozen:
            raise GraphAuditError("audit service requires a frozen graph")
        self.graph = graph
        self.ctx = ctx
        self.sources = sources or {}
        self.state = AuditState(app=app, graph_hash=graph_hash(graph))
        self._lock = threading.Lock()

    # -- analyzer runs ---------------------------------------------------

    def run(self, names: list[str] | None = None, seed: int | None = None,
            max_workers: int = 4) -> list[RunRecord]:
        records, envelopes = schedule_and_run(names, self.ctx, max_workers, seed)
        with self._lock:
            self.state.run_log.extend(records)
            kept = [w for w in self.state.work_items if w.analyzer not in envelopes
                    or not envelopes[w.analyzer].is_empty()]
            existing = {w.analyzer: w for w in kept}
            for name in sorted(envelopes):
                envelope = envelopes[name]
                if envelope.is_empty():
                    continue
                if name in existing:
                    existing[name].envelope = envelope
                else:
                    kept.append(WorkItem(
                        id="", analyzer=name, category=envelope.category,
                        envelope=envelope, name=name,
                    ))
            # Canonical queue order and ids: by analyzer name, w1..wn.
            # Re-running renumbers the queue deterministically.
            kept.sort(key=lambda w: w.analyzer)
            for index, item in enumerate(kept, start=1):
                item.id = f"w{index}"
            self.state.work_items = kept
        return records

    # -- work item management ---------------------------------------------

    def list_work_items(self, category: str | None = None,
                        reviewed: bool | None = None) -> list[WorkItem]:
        with self._lock:
            items = list(self.state.work_items)
        if category is not None:
            items = [w for w in items if w.category == category]
        if reviewed is not None:
            items = [w for w in items if w.reviewed == reviewed]
        return items

    def get_work_item(self, item_id: str) -> WorkItem:
        with self._lock:
            for item in self.state.work_items:
                if item.id == item_id:
                    return item
        raise UnknownWorkItemError(f"no work item with id {item_id!r}")

    def _mutate(self, item_id: str, op: str, **changes) -> WorkItem:
        with self._lock:
            item = next((w for w in self.state.work_items if w.id == item_id), None)
            if item is None:
                raise UnknownWorkItemError(f"no work item with id {item_id!r}")
            for key, value in changes.items():
                setattr(item, key, value)
            self.state.journal.append({"op": op, "workItem": item_id, **{
                k: sorted(v) if isinstance(v, set) else v for k, v in changes.items()
            }})
            return item

    def mark_reviewed(self, item_id: str, reviewed: bool = True) -> WorkItem:
        return self._mutate(item_id, "review", reviewed=reviewed)

    def set_notes(self, item_id: str, notes: str) -> WorkItem:
        return self._mutate(item_id, "notes", notes=notes)

    def rename(self, item_id: str, name: str) -> WorkItem:
        return self._mutate(item_id, "rename", name=name)

    def recolor(self, item_id: str, color: str) -> WorkItem:
        return self._mutate(item_id, "recolor", color=color)

    def modify_artifacts(self, item_id: str, add=(), remove=()) -> WorkItem:
        for artifact in list(add) + list(remove):
            if artifact not in self.graph.nodes and artifact not in self.graph.edges:
                raise UnknownArtifactError(f"no node or edge with id {artifact!r}")
        item = self.get_work_item(item_id)
        return self._mutate(
            item_id, "artifacts",
            added=(item.added | set(add)) - set(remove),
            removed=(item.removed | set(remove)) - set(add),
        )

    # -- smart views and source ------------------------------------------------

    def smart_view(self, request: SmartViewRequest) -> Subgraph:
        return smart_view(self.graph, request)

    def source_excerpt(self, node_id: str) -> dict:
        node = self.graph.node(node_id)
        if node.span is None:
            raise UnknownNodeError(f"node {node_id} has no source span")
        path, start, end = node.span
        text = self.sources.get(path, "")
        return {"path": path, "span": [start, end], "text": text[start:end]}

    # -- persistence ---------------------------------------------------------

    def save(self, path: str) -> None:
        with self._lock:
            doc = _state_to_dict(self.state)
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)
            fh.write("\n")

    def load(self, path: str) -> None:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
        state = load_audit_state(text, self.graph)
        with self._lock:
            self.state = state


def save_audit(state: AuditState, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_state_to_dict(state), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_audit(path: str, graph: ProgramGraph) -> AuditState:
    with open(path, encoding="utf-8") as fh:
        return load_audit_state(fh.read(), graph)


def _state_to_dict(state: AuditState) -> dict:
    return {
        "app": state.app,
        "graphHash": state.graph_hash,
        "workItems": [_work_item_to_dict(w) for w in state.work_items],
        "runLog": [
            {
                "name": r.name, "category": r.category, "status": r.status,
                "findings": r.findings, "started": r.started,
                "finished": r.finished, "error": r.error,
            }
            for r in state.run_log
        ],
        "journal": state.journal,
    }


def _work_item_to_dict(item: WorkItem) -> dict:
    sg = item.envelope.subgraph
    return {
        "id": item.id,
        "analyzer": item.analyzer,
        "category": item.category,
        "name": item.name,
        "color": item.color,
        "reviewed": item.reviewed,
        "notes": item.notes,
        "added": sorted(item.added, key=id_sort_key),
        "removed": sorted(item.removed, key=id_sort_key),
        "envelope": {
            "findings": [
                {
                    "message": f.message,
                    "anchors": list(f.anchors),
                    "spans": [list(s) for s in f.spans],
                }
                for f in item.envelope.findings
            ],
            "nodes": sorted(sg.node_ids, key=id_sort_key),
            "edges": sorted(sg.edge_ids, key=id_sort_key),
        },
    }


_STATE_KEYS = {"app", "graphHash", "workItems", "runLog", "journal"}
_ITEM_KEYS = {"id", "analyzer", "category", "name", "color", "reviewed",
              "notes", "added", "removed", "envelope"}
_ENVELOPE_KEYS = {"findings", "nodes", "edges"}
_FINDING_KEYS = {"message", "anchors", "spans"}
_RUN_KEYS = {"name", "category", "status", "findings", "started", "finished", "error"}


def _reject_unknown(doc: dict, allowed: set[str], where: str) -> None:
    unknown = set(doc) - allowed
    if unknown:
        raise StateSchemaError(
            f"unknown field {sorted(unknown)[0]!r} in {where}")


def load_audit_state(text: str, graph: ProgramGraph) -> AuditState:
    """Parse + validate persisted audit state against the loaded graph."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise StateSchemaError(f"audit state is not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise StateSchemaError("audit state root must be an object")
    _reject_unknown(doc, _STATE_KEYS, "audit state")
    expected = graph_hash(graph)
    if doc.get("graphHash") != expected:
        raise HashMismatchError(
            f"audit state was saved for graph {doc.get('graphHash')!r}, "
            f"loaded graph is {expected!r}")

    state = AuditState(app=str(doc.get("app", "")), graph_hash=expected)
    for i, raw in enumerate(doc.get("workItems", [])):
        if not isinstance(raw, dict):
            raise StateSchemaError(f"workItems[{i}] must be an object")
        _reject_unknown(raw, _ITEM_KEYS, f"workItems[{i}]")
        envelope_doc = raw.get("envelope", {})
        _reject_unknown(envelope_doc, _ENVELOPE_KEYS, f"workItems[{i}].envelope")
        findings = []
        for j, f in enumerate(envelope_doc.get("findings", [])):
            _reject_unknown(f, _FINDING_KEYS, f"workItems[{i}].envelope.findings[{j}]")
            findings.append(Finding(
                message=str(f.get("message", "")),
                anchors=tuple(f.get("anchors", [])),
                spans=tuple(tuple(s) for s in f.get("spans", [])),
            ))
        for artifact in list(envelope_doc.get("nodes", [])) + list(envelope_doc.get("edges", [])):
            if artifact not in graph.nodes and artifact not in graph.edges:
                raise StateSchemaError(
                    f"workItems[{i}].envelope references unknown id {artifact!r}")
        subgraph = Subgraph.of(
            graph, set(envelope_doc.get("nodes", [])), set(envelope_doc.get("edges", [])))
        envelope = Envelope(
            analyzer=str(raw.get("analyzer", "")),
            category=str(raw.get("category", "")),
            subgraph=subgraph,
            findings=tuple(findings),
        )
        state.work_items.append(WorkItem(
            id=str(raw.get("id", "")),
            analyzer=envelope.analyzer,
            category=envelope.category,
            envelope=envelope,
            name=str(raw.get("name", "")),
            color=str(raw.get("color", "")),
            reviewed=bool(raw.get("reviewed", False)),
            notes=str(raw.get("notes", "")),
            added=set(raw.get("added", [])),
            removed=set(raw.get("removed", [])),
        ))
    for i, raw in enumerate(doc.get("runLog", [])):
        _reject_unknown(raw, _RUN_KEYS, f"runLog[{i}]")
        state.run_log.append(RunRecord(
            name=str(raw.get("name", "")),
            category=str(raw.get("category", "")),
            status=str(raw.get("status", "")),
            findings=int(raw.get("findings", 0)),
            started=float(raw.get("started", 0.0)),
            finished=float(raw.get("finished", 0.0)),
            error=str(raw.get("error", "")),
        ))
    journal = doc.get("journal", [])
    if not isinstance(journal, list):
        raise StateSchemaError("journal must be a list")
    state.journal = journal
    return state
