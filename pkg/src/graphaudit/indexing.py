"""Post-parse annotation passes that enrich the graph before freeze.

Indexers run in dependency order inside the single-writer build phase and
only ever add tags, attributes, nodes or edges (monotone enrichment). The
pipeline freezes the graph when the last indexer finishes; the result is
independent of which legal execution order was chosen.
"""

from __future__ import annotations

import logging
import random
from dataclasses import dataclass, field
from typing import Callable

from .errors import DependencyCycleError, MissingEntryPointError
from .graph import (
    ProgramGraph,
    TAG_DECLARED,
    TAG_HIGH_PRIORITY,
    TAG_PERMISSION_PROTECTED,
    TAG_RTA_FEASIBLE,
)
from .resources import ManifestModel, PermissionMap, PlatformProfile

log = logging.getLogger(__name__)

DEFAULT_PRIORITY_THRESHOLD = 100


@dataclass
class IndexContext:
    graph: ProgramGraph
    profile: PlatformProfile
    manifest: ManifestModel | None = None
    permission_map: PermissionMap | None = None
    pending_callbacks: list[tuple[str, str]] = field(default_factory=list)
    priority_threshold: int = DEFAULT_PRIORITY_THRESHOLD


@dataclass(frozen=True)
class IndexerDescriptor:
    name: str
    dependencies: frozenset[str]
    tag_namespace: frozenset[str]   # tags this indexer may write
    run: Callable[[IndexContext], None]


# -- class hierarchy helpers (shared by RTA) -----------------------------------


class _Hierarchy:
    """Dispatch tables recovered from the graph's structural edges."""

    def __init__(self, graph: ProgramGraph):
        self.graph = graph
        self.super_of: dict[str, str] = {}
        self.children: dict[str, list[str]] = {}
        self.declares: dict[str, dict[tuple[str, int], str]] = {}
        self.owner_of: dict[str, str] = {}
        for e in graph.edges.values():
            if "EXTENDS" in e.tags:
                self.super_of[e.src] = e.dst
                self.children.setdefault(e.dst, []).append(e.src)
            elif "DECLARES" in e.tags:
                src, dst = graph.nodes[e.src], graph.nodes[e.dst]
                if "TYPE" in src.tags and "METHOD" in dst.tags:
                    key = (dst.name, int(dst.attrs.get("arity", 0)))
                    self.declares.setdefault(e.src, {})[key] = e.dst
                    self.owner_of[e.dst] = e.src
        self.type_by_name = {
            n.name: n.id for n in graph.nodes.values() if "TYPE" in n.tags
        }

    def subtypes_incl(self, type_id: str) -> list[str]:
        out, stack = [], [type_id]
        while stack:
            cursor = stack.pop()
            out.append(cursor)
            stack.extend(self.children.get(cursor, ()))
        return out

    def resolve(self, type_id: str, name: str, arity: int) -> str | None:
        cursor: str | None = type_id
        while cursor is not None:
            hit = self.declares.get(cursor, {}).get((name, arity))
            if hit is not None:
                return hit
            cursor = self.super_of.get(cursor)
        return None


# -- RTA -------------------------------------------------------------------------


def run_rta(
    graph: ProgramGraph,
    entry_points: list[str],
    worklist_seed: int | None = None,
) -> set[str]:
    """Rapid type analysis: tag CALL edges feasible at runtime.

    Reachability starts at the named entry-point methods plus every method
    wired from an XML callback. Types instantiated in reachable code form
    the instantiated set; a CALL edge is feasible when one of its call
    sites could dispatch to the callee from an instantiated subtype of the
    site's static receiver type. Newly feasible callees join the reachable
    set; iterates to a fixpoint. Returns the feasible edge ids.
    """
    hierarchy = _Hierarchy(graph)
    methods_by_name: dict[str, list[str]] = {}
    for n in graph.nodes.values():
        if "METHOD" in n.tags:
            methods_by_name.setdefault(n.name, []).append(n.id)

    entries: list[str] = []
    for name in entry_points:
        hits = methods_by_name.get(name)
        if not hits:
            raise MissingEntryPointError(f"entry point {name!r} matches no method")
        entries.extend(hits)
    for e in graph.edges.values():
        if "XML_CALLBACK" in e.tags:
            entries.append(e.dst)

    call_edges = [e for e in graph.edges.values() if "CALL" in e.tags]
    inst_edges = [e for e in graph.edges.values() if "INSTANTIATES" in e.tags]
    site_info: dict[str, tuple[str, str, int]] = {}  # site -> (recv type id, name, arity)
    for n in graph.nodes.values():
        if "CALLSITE_RESULT" in n.tags and n.attrs.get("callKind") == "call":
            recv = hierarchy.type_by_name.get(str(n.attrs.get("receiverType", "")))
            if recv is not None:
                site_info[n.id] = (recv, str(n.attrs["callee"]), int(n.attrs.get("arity", 0)))

    rng = random.Random(worklist_seed)
    if worklist_seed is not None:
        rng.shuffle(call_edges)
        rng.shuffle(inst_edges)
        rng.shuffle(entries)

    reachable = set(entries)
    instantiated: set[str] = set()
    feasible: set[str] = set()

    changed = True
    while changed:
        changed = False
        for e in inst_edges:
            if e.src in reachable and e.dst not in instantiated:
                instantiated.add(e.dst)
                changed = True
        for e in call_edges:
            if e.id in feasible or e.src not in reachable:
                continue
            if _edge_feasible(e, graph, hierarchy, instantiated, site_info):
                feasible.add(e.id)
                changed = True
                if e.dst not in reachable:
                    reachable.add(e.dst)

    graph.apply_tag(sorted(feasible), TAG_RTA_FEASIBLE)
    return feasible


def _edge_feasible(edge, graph, hierarchy, instantiated, site_info) -> bool:
    sites = str(edge.attrs.get("sites", "")).split(",") if edge.attrs.get("sites") else []
    if not sites:
        # No recorded call sites (hand-built graph): treat the callee's own
        # declaring type as the receiver bound.
        owner = hierarchy.owner_of.get(edge.dst)
        if owner is None:
            return False
        callee = graph.nodes[edge.dst]
        sites_meta = [(owner, callee.name, int(callee.attrs.get("arity", 0)))]
    else:
        sites_meta = [site_info[s] for s in sites if s in site_info]
    for recv_type, name, arity in sites_meta:
        allowed = set(hierarchy.subtypes_incl(recv_type))
        for inst in instantiated & allowed:
            if hierarchy.resolve(inst, name, arity) == edge.dst:
                return True
    return False


# -- permission annotation --------------------------------------------------------


def annotate_permissions(
    graph: ProgramGraph,
    permission_map: PermissionMap,
    manifest: ManifestModel | None,
) -> None:
    """Tag permission-protected methods and materialize declared permissions."""
    method_index: dict[str, str] = {}
    for e in graph.edges.values():
        if "DECLARES" not in e.tags:
            continue
        src, dst = graph.nodes[e.src], graph.nodes[e.dst]
        if "TYPE" in src.tags and "METHOD" in dst.tags:
            method_index[f"{src.name}.{dst.name}"] = dst.id

    by_method: dict[str, list[str]] = {}
    for permission, signatures in sorted(permission_map.methods.items()):
        for signature in sorted(signatures):
            node_id = method_index.get(signature)
            if node_id is None:
                log.warning("permission map: signature %s has no stub in graph", signature)
                continue
            by_method.setdefault(node_id, []).append(permission)

    for node_id, permissions in sorted(by_method.items()):
        graph.apply_tag([node_id], TAG_PERMISSION_PROTECTED)
        joined = ",".join(sorted(permissions))
        graph.set_attr(node_id, "permission", joined)
        first = sorted(permissions)[0]
        level = permission_map.protection.get(first)
        if level:
            graph.set_attr(node_id, "protectionLevel", level)
        group = permission_map.groups.get(first)
        if group:
            graph.set_attr(node_id, "group", group)

    if manifest is not None:
        for permission in manifest.permissions:
            attrs = {}
            if permission in permission_map.protection:
                attrs["protectionLevel"] = permission_map.protection[permission]
            if permission in permission_map.groups:
                attrs["group"] = permission_map.groups[permission]
            nid = graph.add_node("PERMISSION", permission, attrs)
            graph.apply_tag([nid], TAG_DECLARED)


# -- manifest priorities --------------------------------------------------------------


def tag_manifest_priorities(
    graph: ProgramGraph,
    manifest: ManifestModel,
    threshold: int = DEFAULT_PRIORITY_THRESHOLD,
) -> None:
    """Tag receiver types registered at or above the priority threshold."""
    types = {n.name: n.id for n in graph.nodes.values() if "TYPE" in n.tags}
    if manifest.package:
        graph.add_node("PACKAGE", manifest.package)
    for type_name, priority in manifest.receivers:
        node_id = types.get(type_name)
        if node_id is None:
            log.warning("manifest: receiver %s does not resolve to a parsed type", type_name)
            continue
        graph.set_attr(node_id, "priority", priority)
        if priority >= threshold:
            graph.apply_tag([node_id], TAG_HIGH_PRIORITY)


# -- XML callbacks -------------------------------------------------------------------


def link_xml_callbacks(graph: ProgramGraph, pending: list[tuple[str, str]]) -> int:
    """Wire layout elements to handler methods by name.

    Adds an XML_CALLBACK edge per matching method (ambiguity preserved) and
    a DATA_FLOW edge from the element into the handler's first parameter:
    the clicked view is the handler's argument. Returns edges added.
    """
    methods_by_name: dict[str, list] = {}
    params_of: dict[str, list[str]] = {}
    for n in graph.nodes.values():
        if "METHOD" in n.tags:
            methods_by_name.setdefault(n.name, []).append(n.id)
    for e in graph.edges.values():
        if "DECLARES" in e.tags:
            dst = graph.nodes[e.dst]
            if "VARIABLE" in dst.tags and dst.attrs.get("varKind") == "param":
                params_of.setdefault(e.src, []).append(e.dst)

    added = 0
    for element_id, handler in pending:
        targets = methods_by_name.get(handler, [])
        if not targets:
            log.warning("layout: onClick handler %r matches no method", handler)
            continue
        for method_id in targets:
            graph.add_edge("XML_CALLBACK", element_id, method_id)
            params = sorted(params_of.get(method_id, []),
                            key=lambda pid: int(graph.nodes[pid].attrs.get("index", 0)))
            if params:
                graph.add_edge("DATA_FLOW", element_id, params[0], {"role": "xml-view"})
            added += 1
    return added


# -- pipeline ------------------------------------------------------------------------


def default_indexers() -> list[IndexerDescriptor]:
    return [
        IndexerDescriptor(
            name="manifest",
            dependencies=frozenset(),
            tag_namespace=frozenset({TAG_HIGH_PRIORITY}),
            run=lambda ctx: (
                tag_manifest_priorities(ctx.graph, ctx.manifest, ctx.priority_threshold)
                if ctx.manifest is not None else None
            ),
        ),
        IndexerDescriptor(
            name="permissions",
            dependencies=frozenset(),
            tag_namespace=frozenset({TAG_PERMISSION_PROTECTED, TAG_DECLARED}),
            run=lambda ctx: (
                annotate_permissions(ctx.graph, ctx.permission_map, ctx.manifest)
                if ctx.permission_map is not None else None
            ),
        ),
        IndexerDescriptor(
            name="xml-callbacks",
            dependencies=frozenset(),
            tag_namespace=frozenset(),
            run=lambda ctx: link_xml_callbacks(ctx.graph, ctx.pending_callbacks) and None,
        ),
        IndexerDescriptor(
            name="rta",
            dependencies=frozenset({"xml-callbacks"}),
            tag_namespace=frozenset({TAG_RTA_FEASIBLE}),
            run=lambda ctx: run_rta(ctx.graph, ctx.profile.entry_points) and None,
        ),
    ]


def topological_order(
    descriptors: list[IndexerDescriptor],
    seed: int | None = None,
) -> list[IndexerDescriptor]:
    """A legal execution order; seeded variants shuffle among ready sets."""
    by_name = {d.name: d for d in descriptors}
    for d in descriptors:
        missing = d.dependencies - set(by_name)
        if missing:
            raise DependencyCycleError(
                f"indexer {d.name!r} depends on unknown {sorted(missing)}")
    remaining = dict(by_name)
    done: set[str] = set()
    order: list[IndexerDescriptor] = []
    rng = random.Random(seed)
    while remaining:
        ready = sorted(
            name for name, d in remaining.items() if d.dependencies <= done
        )
        if not ready:
            raise DependencyCycleError(
                f"dependency cycle among indexers {sorted(remaining)}")
        if seed is not None:
            rng.shuffle(ready)
        name = ready[0]
        order.append(remaining.pop(name))
        done.add(name)
    return order


def run_index_pipeline(
    graph: ProgramGraph,
    descriptors: list[IndexerDescriptor],
    ctx: IndexContext,
    order_seed: int | None = None,
) -> ProgramGraph:
    """Run indexers in dependency order, then freeze the graph."""
    for descriptor in topological_order(descriptors, order_seed):
        descriptor.run(ctx)
        if graph.indexes_run is not None:
            graph.indexes_run.add(descriptor.name)
    return graph.freeze()
