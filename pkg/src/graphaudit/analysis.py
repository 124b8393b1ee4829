"""Analyzer framework and the built-in security analyzers.

Each analyzer is a named, categorized traversal of the frozen graph that
returns an envelope: a subgraph that is empty exactly when the property it
checks is satisfied, plus one finding per violation with anchors into the
graph. Analyzers are pure and deterministic; findings are sorted by anchor
so repeated runs serialize identically. Continuations refine or broaden an
existing envelope without re-running the analyzer.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Callable

from .errors import (
    UnknownAnalyzerError,
    UnknownContinuationError,
    UnmetDependencyError,
)
from .graph import (
    ProgramGraph,
    TAG_DECLARED,
    TAG_HIGH_PRIORITY,
    TAG_PERMISSION_PROTECTED,
    TAG_RTA_FEASIBLE,
    id_sort_key,
)
from .query import Subgraph, method_select, universe
from .resources import ManifestModel, PermissionMap, PlatformProfile

CATEGORIES = ("PROPERTY", "SMELL", "CONFIDENTIALITY", "INTEGRITY", "AVAILABILITY")

CONT_ENTRY_REACHABLE = "entry-reachable-only"
CONT_BROADEN = "one-step-broaden"


@dataclass(frozen=True)
class Finding:
    message: str
    anchors: tuple[str, ...]
    spans: tuple[tuple[str, int, int], ...] = ()


@dataclass(frozen=True)
class Envelope:
    analyzer: str
    category: str
    subgraph: Subgraph
    findings: tuple[Finding, ...]

    def __post_init__(self):
        if self.subgraph.is_empty() != (len(self.findings) == 0):
            raise AssertionError(
                f"{self.analyzer}: envelope emptiness must match finding count")

    def is_empty(self) -> bool:
        return self.subgraph.is_empty()

    def to_dict(self) -> dict:
        return {
            "analyzer": self.analyzer,
            "category": self.category,
            "findings": [
                {
                    "message": f.message,
                    "anchors": list(f.anchors),
                    "spans": [list(s) for s in f.spans],
                }
                for f in self.findings
            ],
            "subgraph": json.loads(_export_subgraph(self.subgraph)),
        }


def _export_subgraph(subgraph: Subgraph) -> str:
    from .graphio import export_graph_json  # local import: graphio imports query

    return export_graph_json(subgraph)


@dataclass(frozen=True)
class AnalyzerDescriptor:
    name: str
    category: str
    description: str
    assumptions: str
    dependencies: tuple[str, ...] = ()
    continuations: tuple[str, ...] = (CONT_ENTRY_REACHABLE, CONT_BROADEN)


@dataclass
class AnalysisContext:
    graph: ProgramGraph
    profile: PlatformProfile
    manifest: ManifestModel | None = None
    permission_map: PermissionMap | None = None


_REGISTRY: dict[str, tuple[AnalyzerDescriptor, Callable[[AnalysisContext], Envelope]]] = {}


def register_analyzer(descriptor: AnalyzerDescriptor):
    def wrap(fn):
        if descriptor.name in _REGISTRY:
            raise ValueError(f"analyzer {descriptor.name!r} already registered")
        _REGISTRY[descriptor.name] = (descriptor, fn)
        return fn
    return wrap


def analyzer_names() -> list[str]:
    return sorted(_REGISTRY)


def get_descriptor(name: str) -> AnalyzerDescriptor:
    if name not in _REGISTRY:
        raise UnknownAnalyzerError(f"no analyzer named {name!r}")
    return _REGISTRY[name][0]


def run_analyzer(
    name: str,
    ctx: AnalysisContext,
    executed: set[str] | None = None,
) -> Envelope:
    """Run one analyzer. ``executed`` is the set of analyzers already run
    this session; analyzer-to-analyzer dependencies are checked against it
    when provided. Indexer dependencies are checked against the graph's
    provenance when known."""
    if name not in _REGISTRY:
        raise UnknownAnalyzerError(f"no analyzer named {name!r}")
    descriptor, fn = _REGISTRY[name]
    for dep in descriptor.dependencies:
        if dep in _REGISTRY:
            if executed is not None and dep not in executed:
                raise UnmetDependencyError(f"{name} requires analyzer {dep!r} first")
        elif ctx.graph.indexes_run is not None and dep not in ctx.graph.indexes_run:
            raise UnmetDependencyError(f"{name} requires indexer {dep!r} to have run")
    return fn(ctx)


# -- shared selectors -----------------------------------------------------------


def _sorted(ids) -> list[str]:
    return sorted(ids, key=id_sort_key)


def source_result_nodes(graph: ProgramGraph) -> set[str]:
    """Call-site results of calls that can bind to a SOURCE-tagged stub."""
    out: set[str] = set()
    for e in graph.edges.values():
        if "CALL" in e.tags and "SOURCE" in graph.nodes[e.dst].tags:
            out.update(_edge_sites(e))
    return out


def sink_param_nodes(graph: ProgramGraph) -> set[str]:
    """Parameter nodes of SINK-tagged stub methods."""
    out: set[str] = set()
    for e in graph.edges.values():
        if "DECLARES" in e.tags and "SINK" in graph.nodes[e.src].tags:
            dst = graph.nodes[e.dst]
            if "VARIABLE" in dst.tags and dst.attrs.get("varKind") == "param":
                out.add(e.dst)
    return out


def _edge_sites(edge) -> list[str]:
    raw = str(edge.attrs.get("sites", ""))
    return [s for s in raw.split(",") if s]


def _site_callees(graph: ProgramGraph) -> dict[str, set[str]]:
    """call-site node -> method nodes the site can dispatch to."""
    out: dict[str, set[str]] = {}
    for e in graph.edges.values():
        if "CALL" in e.tags:
            for site in _edge_sites(e):
                out.setdefault(site, set()).add(e.dst)
    return out


def _method_of_site(graph: ProgramGraph, site_id: str) -> str | None:
    for eid in graph.in_edges(site_id):
        e = graph.edges[eid]
        if "DECLARES" in e.tags and "METHOD" in graph.nodes[e.src].tags:
            return e.src
    return None


def _node_span(graph: ProgramGraph, node_id: str):
    span = graph.nodes[node_id].span
    return (span,) if span is not None else ()


def _sig(graph: ProgramGraph, node_id: str) -> str:
    node = graph.nodes[node_id]
    return str(node.attrs.get("signature", node.name))


def taint_pairs(
    graph: ProgramGraph,
    sources: set[str],
    sinks: set[str],
) -> tuple[Subgraph, list[tuple[str, str]]]:
    """Source/sink pairs connected through DATA_FLOW, plus the connecting
    subgraph (every node and edge on some source-to-sink path)."""
    dfq = universe(graph).edges_tagged_any("DATA_FLOW")
    src_sg = Subgraph.of(graph, sources & dfq.node_ids)
    sink_sg = Subgraph.of(graph, sinks & dfq.node_ids)
    envelope = dfq.between(src_sg, sink_sg)
    pairs = []
    for s in _sorted(sources):
        reach = dfq.forward(Subgraph.of(graph, {s} & dfq.node_ids))
        for t in _sorted(sinks & reach.node_ids):
            pairs.append((s, t))
    return envelope, pairs


# -- built-in analyzers ------------------------------------------------------------


@register_analyzer(AnalyzerDescriptor(
    name="broadcast-blockers",
    category="INTEGRITY",
    description="High-priority broadcast receivers that abort broadcasts, "
                "the classic SMS-interception shape.",
    assumptions="Receiver priorities were indexed from the manifest; call "
                "edges are class-hierarchy conservative.",
    dependencies=("manifest",),
    continuations=(CONT_BROADEN,),
))
def analyze_broadcast_blockers(ctx: AnalysisContext) -> Envelope:
    g = ctx.graph
    declares = universe(g).edges_tagged_any("DECLARES").retain_edges()
    calls = universe(g).edges_tagged_any("CALL").retain_edges()
    overrides = universe(g).edges_tagged_any("OVERRIDES").retain_edges()

    abort = method_select(g, "BroadcastReceiver", "abortBroadcast").union(
        method_select(g, "PendingResult", "abortBroadcast"))
    abort = abort.union(overrides.reverse(abort))
    on_receive = method_select(g, "BroadcastReceiver", "onReceive")
    on_receive = on_receive.union(overrides.reverse(on_receive))
    high_priority = universe(g).nodes_tagged_any(TAG_HIGH_PRIORITY)
    hp_on_receive = on_receive.intersection(declares.forward(high_priority))
    envelope = calls.between(hp_on_receive, abort)

    findings = []
    for receiver in _sorted(hp_on_receive.node_ids & envelope.node_ids):
        reach = envelope.forward(Subgraph.of(g, {receiver}))
        for target in _sorted(abort.node_ids & reach.node_ids):
            findings.append(Finding(
                message=(f"high-priority receiver method {_sig(g, receiver)} "
                         f"can reach {_sig(g, target)} and block the broadcast"),
                anchors=(receiver, target),
                spans=_node_span(g, receiver),
            ))
    return Envelope("broadcast-blockers", "INTEGRITY", envelope, tuple(findings))


@register_analyzer(AnalyzerDescriptor(
    name="permission-usage",
    category="PROPERTY",
    description="Where permission-protected APIs are called, plus declared "
                "permissions that are never used and used permissions that "
                "were never declared.",
    assumptions="The permission indexer annotated protected stubs and "
                "declared permissions.",
    dependencies=("permissions",),
    continuations=(CONT_BROADEN,),
))
def analyze_permission_usage(ctx: AnalysisContext) -> Envelope:
    g = ctx.graph
    nodes: set[str] = set()
    edges: set[str] = set()
    findings: list[Finding] = []
    used: set[str] = set()

    usage_edges = [
        e for e in g.edges.values()
        if "CALL" in e.tags and TAG_PERMISSION_PROTECTED in g.nodes[e.dst].tags
    ]
    for e in sorted(usage_edges, key=lambda e: id_sort_key(e.id)):
        callee = g.nodes[e.dst]
        perms = str(callee.attrs.get("permission", "")).split(",")
        used.update(p for p in perms if p)
        level = callee.attrs.get("protectionLevel", "?")
        group = callee.attrs.get("group", "?")
        findings.append(Finding(
            message=(f"{_sig(g, e.src)} calls permission-protected "
                     f"{_sig(g, e.dst)} requiring {','.join(perms)} "
                     f"(protectionLevel={level}, group={group})"),
            anchors=(e.id,),
            spans=_node_span(g, e.dst),
        ))
        nodes.update((e.src, e.dst))
        edges.add(e.id)

    declared_nodes = {
        n.name: n.id for n in g.nodes.values()
        if "PERMISSION" in n.tags and TAG_DECLARED in n.tags
    }
    declared = set(declared_nodes)
    for permission in sorted(declared - used):
        nid = declared_nodes[permission]
        findings.append(Finding(
            message=f"permission {permission} is declared but never used",
            anchors=(nid,),
        ))
        nodes.add(nid)
    undeclared = sorted(used - declared)
    for permission in undeclared:
        holders = _sorted(
            e.dst for e in usage_edges
            if permission in str(g.nodes[e.dst].attrs.get("permission", "")).split(",")
        )
        findings.append(Finding(
            message=(f"permission {permission} is used but not declared "
                     f"(severity=high)"),
            anchors=tuple(holders),
        ))

    findings.sort(key=lambda f: tuple(id_sort_key(a) for a in f.anchors))
    return Envelope("permission-usage", "PROPERTY",
                    Subgraph.of(g, nodes, edges), tuple(findings))


def _stub_call_envelope(ctx: AnalysisContext, tag: str, name: str, category: str,
                        message: Callable[[str, str], str]) -> Envelope:
    g = ctx.graph
    nodes: set[str] = set()
    edges: set[str] = set()
    findings = []
    hits = [
        e for e in g.edges.values()
        if "CALL" in e.tags and tag in g.nodes[e.dst].tags
    ]
    for e in sorted(hits, key=lambda e: id_sort_key(e.id)):
        findings.append(Finding(
            message=message(_sig(g, e.src), _sig(g, e.dst)),
            anchors=(e.id,),
            spans=_node_span(g, e.src),
        ))
        nodes.update((e.src, e.dst))
        edges.add(e.id)
    return Envelope(name, category, Subgraph.of(g, nodes, edges), tuple(findings))


@register_analyzer(AnalyzerDescriptor(
    name="native-code",
    category="PROPERTY",
    description="Calls into native code; notable but not suspicious on its own.",
    assumptions="Native stubs are tagged NATIVE in the platform profile.",
))
def analyze_native_code(ctx: AnalysisContext) -> Envelope:
    return _stub_call_envelope(
        ctx, "NATIVE", "native-code", "PROPERTY",
        lambda caller, callee: f"{caller} calls native method {callee}")


@register_analyzer(AnalyzerDescriptor(
    name="reflection",
    category="SMELL",
    description="Reflective invocation; suspicious enough to demand a "
                "justification from the auditor.",
    assumptions="Reflection stubs are tagged REFLECTION in the platform profile.",
))
def analyze_reflection(ctx: AnalysisContext) -> Envelope:
    return _stub_call_envelope(
        ctx, "REFLECTION", "reflection", "SMELL",
        lambda caller, callee: (f"{caller} invokes {callee} reflectively; "
                                f"justify why reflection is required here"))


@register_analyzer(AnalyzerDescriptor(
    name="confidentiality",
    category="CONFIDENTIALITY",
    description="Taint flows from sensitive sources into sinks over the "
                "data-flow relation.",
    assumptions="Flow- and context-insensitive data flow; sources anchor at "
                "call-site results, sinks at stub parameters.",
))
def analyze_confidentiality(ctx: AnalysisContext) -> Envelope:
    g = ctx.graph
    envelope, pairs = taint_pairs(g, source_result_nodes(g), sink_param_nodes(g))
    findings = tuple(
        Finding(
            message=(f"value of {_sig(g, s)} (source) flows into parameter "
                     f"{g.nodes[t].name} of {g.nodes[t].attrs.get('method', '?')} (sink)"),
            anchors=(s, t),
            spans=_node_span(g, s),
        )
        for s, t in pairs
    )
    return Envelope("confidentiality", "CONFIDENTIALITY", envelope, findings)


@register_analyzer(AnalyzerDescriptor(
    name="integrity",
    category="INTEGRITY",
    description="Writes into sensitive mutable state, with the reverse slice "
                "of each written value.",
    assumptions="Sensitive mutables are profile-tagged fields or setter stubs.",
))
def analyze_integrity(ctx: AnalysisContext) -> Envelope:
    g = ctx.graph
    targets: set[str] = set()
    for n in g.nodes.values():
        if "SENSITIVE_MUTABLE" in n.tags and "FIELD" in n.tags:
            targets.add(n.id)
    for e in g.edges.values():
        if "DECLARES" in e.tags and "SENSITIVE_MUTABLE" in g.nodes[e.src].tags:
            dst = g.nodes[e.dst]
            if "VARIABLE" in dst.tags and dst.attrs.get("varKind") == "param":
                targets.add(e.dst)

    dfq = universe(g).edges_tagged_any("DATA_FLOW")
    sources = source_result_nodes(g)
    result = Subgraph.empty(g)
    findings = []
    writes = [
        e for e in g.edges.values()
        if "DATA_FLOW" in e.tags and e.dst in targets
    ]
    for e in sorted(writes, key=lambda e: id_sort_key(e.id)):
        slice_sg = dfq.reverse(Subgraph.of(g, {e.src}))
        evidence = slice_sg.union(Subgraph.of(g, {e.src, e.dst}, {e.id}))
        result = result.union(evidence)
        tainted = sorted(slice_sg.node_ids & sources)
        suffix = ""
        if tainted:
            suffix = (" ; written value originates from sensitive source "
                      f"{_sig(g, tainted[0])} (cross-category: confidentiality)")
        findings.append(Finding(
            message=(f"write into sensitive mutable {_sig(g, e.dst)} "
                     f"from {_sig(g, e.src)}{suffix}"),
            anchors=(e.id, e.dst),
            spans=_node_span(g, e.src),
        ))
    return Envelope("integrity", "INTEGRITY", result, tuple(findings))


def _strongly_connected(nodes: list[str], edges: list) -> list[list[str]]:
    """Iterative Tarjan; edges are (src, dst, edge_id) triples."""
    adj: dict[str, list[str]] = {n: [] for n in nodes}
    for src, dst, _ in edges:
        if src in adj and dst in adj:
            adj[src].append(dst)
    index: dict[str, int] = {}
    low: dict[str, int] = {}
    on_stack: set[str] = set()
    stack: list[str] = []
    sccs: list[list[str]] = []
    counter = [0]

    for root in nodes:
        if root in index:
            continue
        work = [(root, 0)]
        while work:
            node, edge_pos = work[-1]
            if edge_pos == 0:
                index[node] = low[node] = counter[0]
                counter[0] += 1
                stack.append(node)
                on_stack.add(node)
            advanced = False
            targets = adj[node]
            while edge_pos < len(targets):
                nxt = targets[edge_pos]
                edge_pos += 1
                if nxt not in index:
                    work[-1] = (node, edge_pos)
                    work.append((nxt, 0))
                    advanced = True
                    break
                if nxt in on_stack:
                    low[node] = min(low[node], index[nxt])
            if advanced:
                continue
            work.pop()
            if work:
                parent = work[-1][0]
                low[parent] = min(low[parent], low[node])
            if low[node] == index[node]:
                scc = []
                while True:
                    member = stack.pop()
                    on_stack.discard(member)
                    scc.append(member)
                    if member == node:
                        break
                sccs.append(sorted(scc, key=id_sort_key))
    return sccs


@register_analyzer(AnalyzerDescriptor(
    name="availability",
    category="AVAILABILITY",
    description="Loops (intra-method control flow and call-graph recursion) "
                "whose body calls expensive resources.",
    assumptions="Expensive stubs are profile-tagged EXPENSIVE, never inferred.",
))
def analyze_availability(ctx: AnalysisContext) -> Envelope:
    g = ctx.graph
    expensive = {n.id for n in g.nodes.values() if "EXPENSIVE" in n.tags}
    site_callees = _site_callees(g)
    result = Subgraph.empty(g)
    findings = []

    # (a) intra-method control-flow loops containing an expensive call site.
    cf_edges = [(e.src, e.dst, e.id) for e in g.edges.values() if "CONTROL_FLOW" in e.tags]
    cf_nodes = _sorted({x for s, d, _ in cf_edges for x in (s, d)})
    self_loops = {src for src, dst, _ in cf_edges if src == dst}
    for scc in _strongly_connected(cf_nodes, cf_edges):
        if len(scc) < 2 and scc[0] not in self_loops:
            continue
        members = set(scc)
        hot = [
            (site, callee)
            for site in scc
            for callee in _sorted(site_callees.get(site, set()) & expensive)
        ]
        if not hot:
            continue
        loop_edges = {eid for s, d, eid in cf_edges if s in members and d in members}
        nodes = set(members)
        edges = set(loop_edges)
        for site, callee in hot:
            method = _method_of_site(g, site)
            if method is not None:
                nodes.add(method)
                for eid in g.out_edges(method):
                    e = g.edges[eid]
                    if "CALL" in e.tags and e.dst == callee:
                        edges.add(eid)
                        nodes.add(callee)
        site, callee = hot[0]
        method = _method_of_site(g, site)
        owner = _sig(g, method) if method else "?"
        findings.append(Finding(
            message=(f"control-flow loop in {owner} repeatedly calls "
                     f"expensive {_sig(g, callee)}"),
            anchors=(scc[0], callee),
            spans=_node_span(g, site),
        ))
        result = result.union(Subgraph.of(g, nodes, edges))

    # (b) call-graph recursion (SCC size >= 2 or self-call) reaching an
    # expensive stub from inside the cycle.
    call_edges = [(e.src, e.dst, e.id) for e in g.edges.values() if "CALL" in e.tags]
    call_nodes = _sorted({x for s, d, _ in call_edges for x in (s, d)})
    call_self = {src for src, dst, _ in call_edges if src == dst}
    for scc in _strongly_connected(call_nodes, call_edges):
        if len(scc) < 2 and scc[0] not in call_self:
            continue
        members = set(scc)
        hot_edges = [
            (s, d, eid) for s, d, eid in call_edges
            if s in members and d in expensive
        ]
        if not hot_edges:
            continue
        nodes = set(members) | {d for _, d, _ in hot_edges}
        edges = {eid for s, d, eid in call_edges if s in members and d in members}
        edges.update(eid for _, _, eid in hot_edges)
        caller, callee, _ = hot_edges[0]
        findings.append(Finding(
            message=(f"recursive cycle through {_sig(g, scc[0])} calls "
                     f"expensive {_sig(g, callee)}"),
            anchors=(scc[0], callee),
            spans=_node_span(g, caller),
        ))
        result = result.union(Subgraph.of(g, nodes, edges))

    findings.sort(key=lambda f: tuple(id_sort_key(a) for a in f.anchors))
    return Envelope("availability", "AVAILABILITY", result, tuple(findings))


# -- continuations ------------------------------------------------------------------


def entry_point_methods(graph: ProgramGraph, profile: PlatformProfile) -> set[str]:
    names = set(profile.entry_points)
    out = {
        n.id for n in graph.nodes.values()
        if "METHOD" in n.tags and n.name in names
    }
    for e in graph.edges.values():
        if "XML_CALLBACK" in e.tags:
            out.add(e.dst)
    return out


def apply_continuation(envelope: Envelope, name: str, ctx: AnalysisContext) -> Envelope:
    descriptor = get_descriptor(envelope.analyzer)
    if name not in descriptor.continuations:
        raise UnknownContinuationError(
            f"analyzer {envelope.analyzer!r} does not declare continuation {name!r}")
    g = ctx.graph
    if name == CONT_BROADEN:
        u = universe(g)
        grown = envelope.subgraph.union(
            u.forward_step(envelope.subgraph)).union(
            u.reverse_step(envelope.subgraph))
        return Envelope(envelope.analyzer, envelope.category, grown, envelope.findings)

    # entry-reachable-only: keep only what the entry points can reach over
    # runtime-feasible calls, control flow and data flow.
    edge_ids = {
        e.id for e in g.edges.values()
        if ("CALL" in e.tags and TAG_RTA_FEASIBLE in e.tags)
        or "CONTROL_FLOW" in e.tags
        or "DATA_FLOW" in e.tags
    }
    q = Subgraph(g, frozenset(g.nodes), frozenset(edge_ids))
    closure = q.forward(Subgraph.of(g, entry_point_methods(g, ctx.profile)))
    refined = envelope.subgraph.intersection(closure)
    kept_ids = refined.node_ids | refined.edge_ids
    findings = tuple(
        f for f in envelope.findings if all(a in kept_ids for a in f.anchors)
    )
    if not findings:
        refined = Subgraph.empty(g)
    return Envelope(envelope.analyzer, envelope.category, refined, findings)


# -- permission classification helper (used by tests and reports) -------------------


def permission_classification(graph: ProgramGraph) -> dict[str, list[str]]:
    """used / declared / used-but-undeclared / declared-but-unused sets."""
    used: set[str] = set()
    for e in graph.edges.values():
        if "CALL" in e.tags and TAG_PERMISSION_PROTECTED in graph.nodes[e.dst].tags:
            perms = str(graph.nodes[e.dst].attrs.get("permission", "")).split(",")
            used.update(p for p in perms if p)
    declared = {
        n.name for n in graph.nodes.values()
        if "PERMISSION" in n.tags and TAG_DECLARED in n.tags
    }
    return {
        "used": sorted(used),
        "declared": sorted(declared),
        "usedUndeclared": sorted(used - declared),
        "declaredUnused": sorted(declared - used),
    }
