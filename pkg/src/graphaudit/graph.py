"""Attributed, tagged, directed multigraph of program artifacts.

The graph follows a build -> index -> freeze lifecycle: producers add nodes
and edges, indexing passes enrich them with derived tags and attributes, and
freeze() turns the graph into an immutable snapshot that queries may share
across threads. Parallel edges between the same endpoints are allowed;
deduplication is the responsibility of whoever builds the graph.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import FrozenGraphError, GraphAuditError, UnknownIdError

# Node kind vocabulary. Every node carries at least one of these tags.
NODE_KINDS = frozenset({
    "TYPE", "METHOD", "FIELD", "VARIABLE", "CALLSITE_RESULT",
    "LITERAL", "XML_ELEMENT", "PERMISSION", "PACKAGE",
})

# Primary edge kinds. Every edge carries exactly one; derived tags
# (RTA_FEASIBLE and friends) are additive.
EDGE_KINDS = frozenset({
    "DECLARES", "CALL", "OVERRIDES", "EXTENDS", "DATA_FLOW",
    "CONTROL_FLOW", "INSTANTIATES", "TYPE_OF", "XML_CALLBACK",
})

# Derived tags produced by indexers / source metadata.
TAG_RTA_FEASIBLE = "RTA_FEASIBLE"
TAG_HIGH_PRIORITY = "MANIFEST_HIGH_PRIORITY"
TAG_PERMISSION_PROTECTED = "PERMISSION_PROTECTED"
TAG_DECLARED = "DECLARED"
TAG_PLATFORM = "PLATFORM"

Scalar = str | int | bool
SourceSpan = tuple[str, int, int]  # (file path, start offset, end offset)


def _check_attrs(attrs: dict[str, Scalar]) -> None:
    for key, value in attrs.items():
        # bool is checked first: it is an int subclass.
        if not isinstance(value, (bool, int, str)):
            raise GraphAuditError(
                f"attribute {key!r} must be a string, integer or boolean, "
                f"got {type(value).__name__}"
            )


@dataclass
class NodeRecord:
    id: str
    tags: set[str]
    attrs: dict[str, Scalar]
    span: SourceSpan | None = None

    @property
    def name(self) -> str:
        return str(self.attrs.get("name", ""))


@dataclass
class EdgeRecord:
    id: str
    src: str
    dst: str
    tags: set[str]
    attrs: dict[str, Scalar]

    def kind(self) -> str:
        for tag in self.tags:
            if tag in EDGE_KINDS:
                return tag
        return ""


@dataclass
class ProgramGraph:
    """Mutable while building; immutable snapshot after freeze()."""

    nodes: dict[str, NodeRecord] = field(default_factory=dict)
    edges: dict[str, EdgeRecord] = field(default_factory=dict)
    frozen: bool = False
    # Names of indexers that ran before freeze; None means provenance is
    # unknown (e.g. an imported graph) and dependency checks are skipped.
    indexes_run: set[str] | None = field(default_factory=set)

    _out: dict[str, list[str]] = field(default_factory=dict, repr=False)
    _in: dict[str, list[str]] = field(default_factory=dict, repr=False)
    _next_node: int = 1
    _next_edge: int = 1

    # -- build phase ------------------------------------------------------

    def add_node(
        self,
        kind: str,
        name: str,
        attrs: dict[str, Scalar] | None = None,
        span: SourceSpan | None = None,
        node_id: str | None = None,
    ) -> str:
        self._require_unfrozen()
        if kind not in NODE_KINDS:
            raise GraphAuditError(f"unknown node kind tag {kind!r}")
        merged: dict[str, Scalar] = {"name": name}
        if attrs:
            _check_attrs(attrs)
            merged.update(attrs)
            merged["name"] = name
        nid = self._claim_node_id(node_id)
        self.nodes[nid] = NodeRecord(id=nid, tags={kind}, attrs=merged, span=span)
        self._out[nid] = []
        self._in[nid] = []
        return nid

    def add_edge(
        self,
        kind: str,
        src: str,
        dst: str,
        attrs: dict[str, Scalar] | None = None,
        edge_id: str | None = None,
    ) -> str:
        self._require_unfrozen()
        if kind not in EDGE_KINDS:
            raise GraphAuditError(f"unknown edge kind tag {kind!r}")
        for endpoint in (src, dst):
            if endpoint not in self.nodes:
                raise UnknownIdError(f"edge endpoint {endpoint!r} does not exist")
        if attrs:
            _check_attrs(attrs)
        eid = self._claim_edge_id(edge_id)
        self.edges[eid] = EdgeRecord(id=eid, src=src, dst=dst, tags={kind}, attrs=dict(attrs or {}))
        self._out[src].append(eid)
        self._in[dst].append(eid)
        return eid

    def apply_tag(self, targets, tag: str) -> int:
        """Add ``tag`` to each target node/edge; idempotent. Returns count."""
        self._require_unfrozen()
        count = 0
        for target in targets:
            record = self.nodes.get(target) or self.edges.get(target)
            if record is None:
                raise UnknownIdError(f"no node or edge with id {target!r}")
            record.tags.add(tag)
            count += 1
        return count

    def set_attr(self, target: str, key: str, value: Scalar) -> None:
        self._require_unfrozen()
        record = self.nodes.get(target) or self.edges.get(target)
        if record is None:
            raise UnknownIdError(f"no node or edge with id {target!r}")
        _check_attrs({key: value})
        record.attrs[key] = value

    def freeze(self) -> "ProgramGraph":
        """Make the graph immutable. Idempotent; returns self."""
        self.frozen = True
        return self

    # -- accessors ---------------------------------------------------------

    def node(self, node_id: str) -> NodeRecord:
        try:
            return self.nodes[node_id]
        except KeyError:
            raise UnknownIdError(f"no node with id {node_id!r}") from None

    def edge(self, edge_id: str) -> EdgeRecord:
        try:
            return self.edges[edge_id]
        except KeyError:
            raise UnknownIdError(f"no edge with id {edge_id!r}") from None

    def out_edges(self, node_id: str) -> list[str]:
        return self._out.get(node_id, [])

    def in_edges(self, node_id: str) -> list[str]:
        return self._in.get(node_id, [])

    def nodes_tagged(self, tag: str):
        return (n for n in self.nodes.values() if tag in n.tags)

    def edges_tagged(self, tag: str):
        return (e for e in self.edges.values() if tag in e.tags)

    def check_closure(self) -> None:
        """Full-scan check of the edge-endpoint closure invariant."""
        for e in self.edges.values():
            if e.src not in self.nodes or e.dst not in self.nodes:
                raise GraphAuditError(f"edge {e.id} has dangling endpoint")

    # -- internal ----------------------------------------------------------

    def _require_unfrozen(self) -> None:
        if self.frozen:
            raise FrozenGraphError("graph is frozen; structural mutation is not permitted")

    def _claim_node_id(self, explicit: str | None) -> str:
        if explicit is None:
            nid = f"n{self._next_node}"
            self._next_node += 1
            return nid
        if explicit in self.nodes:
            raise GraphAuditError(f"duplicate node id {explicit!r}")
        self._bump_counter(explicit, "n")
        return explicit

    def _claim_edge_id(self, explicit: str | None) -> str:
        if explicit is None:
            eid = f"e{self._next_edge}"
            self._next_edge += 1
            return eid
        if explicit in self.edges:
            raise GraphAuditError(f"duplicate edge id {explicit!r}")
        self._bump_counter(explicit, "e")
        return explicit

    def _bump_counter(self, explicit: str, prefix: str) -> None:
        # Keep generated ids from colliding with imported ones.
        if explicit.startswith(prefix) and explicit[len(prefix):].isdigit():
            seq = int(explicit[len(prefix):]) + 1
            if prefix == "n":
                self._next_node = max(self._next_node, seq)
            else:
                self._next_edge = max(self._next_edge, seq)


def id_sort_key(identifier: str) -> tuple:
    """Canonical ascending-id order: numeric suffixes sort numerically."""
    for i, ch in enumerate(identifier):
        if ch.isdigit():
            prefix, suffix = identifier[:i], identifier[i:]
            if suffix.isdigit():
                return (prefix, int(suffix), identifier)
            break
    return (identifier, -1, identifier)
