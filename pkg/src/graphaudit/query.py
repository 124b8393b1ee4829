"""Composable query algebra over frozen program graphs.

Every operation consumes and produces a Subgraph: an endpoint-closed pair of
node-id and edge-id sets over one graph snapshot. Operations are pure; the
graph is never mutated. Traversals (forward/reverse/between) seed from the
origin nodes that are present in the queried subgraph and walk only its
edges, so results always stay inside the receiver.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

from .errors import MixedGraphError
from .graph import ProgramGraph


@dataclass(frozen=True)
class Subgraph:
    graph: ProgramGraph
    node_ids: frozenset[str]
    edge_ids: frozenset[str]

    def __post_init__(self):
        # Endpoint closure is an invariant of every algebra result.
        for eid in self.edge_ids:
            e = self.graph.edges[eid]
            if e.src not in self.node_ids or e.dst not in self.node_ids:
                raise AssertionError(f"subgraph not endpoint-closed at edge {eid}")

    # -- construction ------------------------------------------------------

    @staticmethod
    def empty(graph: ProgramGraph) -> "Subgraph":
        return Subgraph(graph, frozenset(), frozenset())

    @staticmethod
    def of(graph: ProgramGraph, node_ids, edge_ids=()) -> "Subgraph":
        """Build a subgraph from explicit id sets, repairing closure."""
        nodes = frozenset(node_ids)
        edges = frozenset(
            eid for eid in edge_ids
            if graph.edges[eid].src in nodes and graph.edges[eid].dst in nodes
        )
        return Subgraph(graph, nodes, edges)

    # -- basic properties ----------------------------------------------------

    def is_empty(self) -> bool:
        return not self.node_ids and not self.edge_ids

    def __len__(self) -> int:
        return len(self.node_ids)

    def same_ids(self, other: "Subgraph") -> bool:
        return self.node_ids == other.node_ids and self.edge_ids == other.edge_ids

    # -- filters -------------------------------------------------------------

    def nodes_tagged_any(self, *tags: str) -> "Subgraph":
        """Keep nodes having at least one of ``tags`` and edges between them."""
        wanted = set(tags)
        nodes = frozenset(
            nid for nid in self.node_ids
            if wanted & self.graph.nodes[nid].tags
        )
        edges = frozenset(
            eid for eid in self.edge_ids
            if self.graph.edges[eid].src in nodes and self.graph.edges[eid].dst in nodes
        )
        return Subgraph(self.graph, nodes, edges)

    def edges_tagged_any(self, *tags: str) -> "Subgraph":
        """Keep all nodes, but only edges having at least one of ``tags``."""
        wanted = set(tags)
        edges = frozenset(
            eid for eid in self.edge_ids
            if wanted & self.graph.edges[eid].tags
        )
        return Subgraph(self.graph, self.node_ids, edges)

    def retain_edges(self) -> "Subgraph":
        """Drop nodes not incident to any edge of the subgraph."""
        nodes = set()
        for eid in self.edge_ids:
            e = self.graph.edges[eid]
            nodes.add(e.src)
            nodes.add(e.dst)
        return Subgraph(self.graph, frozenset(nodes), self.edge_ids)

    # -- set operations --------------------------------------------------------

    def union(self, other: "Subgraph") -> "Subgraph":
        self._require_same_graph(other)
        return Subgraph(self.graph, self.node_ids | other.node_ids,
                        self.edge_ids | other.edge_ids)

    def intersection(self, other: "Subgraph") -> "Subgraph":
        self._require_same_graph(other)
        return Subgraph.of(self.graph, self.node_ids & other.node_ids,
                           self.edge_ids & other.edge_ids)

    def difference(self, other: "Subgraph") -> "Subgraph":
        self._require_same_graph(other)
        return Subgraph.of(self.graph, self.node_ids - other.node_ids,
                           self.edge_ids - other.edge_ids)

    # -- traversals ---------------------------------------------------------

    def forward(self, origin: "Subgraph") -> "Subgraph":
        """Everything reachable from origin nodes along directed edges.

        Seeds are the origin nodes present in this subgraph; they stay in
        the result even when isolated. The result contains every edge of
        this subgraph traversed on some path from a seed.
        """
        self._require_same_graph(origin)
        return self._reach(origin.node_ids, transposed=False)

    def reverse(self, origin: "Subgraph") -> "Subgraph":
        """forward() on the transposed edge set."""
        self._require_same_graph(origin)
        return self._reach(origin.node_ids, transposed=True)

    def between(self, sources: "Subgraph", targets: "Subgraph") -> "Subgraph":
        """Nodes and edges on some directed path from sources to targets."""
        return self.forward(sources).intersection(self.reverse(targets))

    def forward_step(self, origin: "Subgraph") -> "Subgraph":
        self._require_same_graph(origin)
        return self._step(origin.node_ids, transposed=False)

    def reverse_step(self, origin: "Subgraph") -> "Subgraph":
        self._require_same_graph(origin)
        return self._step(origin.node_ids, transposed=True)

    # -- internals ---------------------------------------------------------

    def _adjacency(self, transposed: bool) -> dict[str, list]:
        adj: dict[str, list] = {}
        for eid in self.edge_ids:
            e = self.graph.edges[eid]
            tail = e.dst if transposed else e.src
            adj.setdefault(tail, []).append(e)
        return adj

    def _reach(self, origin_ids: frozenset[str], transposed: bool) -> "Subgraph":
        seeds = origin_ids & self.node_ids
        adj = self._adjacency(transposed)
        seen = set(seeds)
        edges = set()
        queue = deque(seeds)
        while queue:
            nid = queue.popleft()
            for e in adj.get(nid, ()):  # every out-edge of a reached node is traversed
                edges.add(e.id)
                head = e.src if transposed else e.dst
                if head not in seen:
                    seen.add(head)
                    queue.append(head)
        return Subgraph(self.graph, frozenset(seen), frozenset(edges))

    def _step(self, origin_ids: frozenset[str], transposed: bool) -> "Subgraph":
        seeds = origin_ids & self.node_ids
        adj = self._adjacency(transposed)
        nodes = set(seeds)
        edges = set()
        for nid in seeds:
            for e in adj.get(nid, ()):
                edges.add(e.id)
                nodes.add(e.src if transposed else e.dst)
        return Subgraph(self.graph, frozenset(nodes), frozenset(edges))

    def _require_same_graph(self, other: "Subgraph") -> None:
        if other.graph is not self.graph:
            raise MixedGraphError("subgraphs reference different graph snapshots")


def universe(graph: ProgramGraph) -> Subgraph:
    """The whole frozen graph; root of every query."""
    return Subgraph(graph, frozenset(graph.nodes), frozenset(graph.edges))


def method_select(graph: ProgramGraph, type_name: str, method_name: str) -> Subgraph:
    """METHOD nodes named ``method_name`` declared by a TYPE named ``type_name``.

    Simple-name matching; every ambiguous match is returned. The result
    carries no edges.
    """
    hits = set()
    for e in graph.edges.values():
        if "DECLARES" not in e.tags:
            continue
        src, dst = graph.nodes[e.src], graph.nodes[e.dst]
        if ("TYPE" in src.tags and src.name == type_name
                and "METHOD" in dst.tags and dst.name == method_name):
            hits.add(dst.id)
    return Subgraph(graph, frozenset(hits), frozenset())


def nodes_tagged(graph: ProgramGraph, tag: str) -> Subgraph:
    """Universe filtered to nodes carrying ``tag`` (plus edges between them)."""
    return universe(graph).nodes_tagged_any(tag)
