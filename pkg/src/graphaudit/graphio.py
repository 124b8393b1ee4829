"""Portable graph exchange: canonical JSON, DOT rendering, content hashing.

Exports are canonically ordered (nodes then edges, ascending id; sorted tag
lists and attribute keys) so identical graphs serialize to identical bytes.
import_graph_json() validates the exchange schema and reports the JSON path
of the first violation; the round trip import(export(g)) preserves ids,
tags, attributes and spans exactly.
"""

from __future__ import annotations

import hashlib
import json

from .errors import GraphSchemaError
from .graph import EDGE_KINDS, NODE_KINDS, ProgramGraph, id_sort_key
from .query import Subgraph


def _node_dict(record) -> dict:
    out = {
        "id": record.id,
        "tags": sorted(record.tags),
        "attrs": {k: record.attrs[k] for k in sorted(record.attrs)},
    }
    if record.span is not None:
        out["span"] = list(record.span)
    return out


def _edge_dict(record) -> dict:
    return {
        "id": record.id,
        "from": record.src,
        "to": record.dst,
        "tags": sorted(record.tags),
        "attrs": {k: record.attrs[k] for k in sorted(record.attrs)},
    }


def export_graph_json(graph_or_subgraph: ProgramGraph | Subgraph) -> str:
    if isinstance(graph_or_subgraph, Subgraph):
        graph = graph_or_subgraph.graph
        node_ids = sorted(graph_or_subgraph.node_ids, key=id_sort_key)
        edge_ids = sorted(graph_or_subgraph.edge_ids, key=id_sort_key)
    else:
        graph = graph_or_subgraph
        node_ids = sorted(graph.nodes, key=id_sort_key)
        edge_ids = sorted(graph.edges, key=id_sort_key)
    doc = {
        "nodes": [_node_dict(graph.nodes[nid]) for nid in node_ids],
        "edges": [_edge_dict(graph.edges[eid]) for eid in edge_ids],
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def _expect(cond: bool, message: str, path: str) -> None:
    if not cond:
        raise GraphSchemaError(message, path)


_SCALARS = (str, int, bool)


def import_graph_json(text: str) -> ProgramGraph:
    """Parse exchange JSON into a frozen graph ready for querying."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise GraphSchemaError(f"not valid JSON: {exc}", "$") from None
    _expect(isinstance(doc, dict), "root must be an object", "$")
    _expect(isinstance(doc.get("nodes"), list), "'nodes' must be a list", "$.nodes")
    _expect(isinstance(doc.get("edges"), list), "'edges' must be a list", "$.edges")
    unknown = set(doc) - {"nodes", "edges"}
    _expect(not unknown, f"unknown keys {sorted(unknown)}", "$")

    graph = ProgramGraph()
    graph.indexes_run = None  # provenance of imported graphs is unknown
    for i, node in enumerate(doc["nodes"]):
        path = f"$.nodes[{i}]"
        _expect(isinstance(node, dict), "node must be an object", path)
        unknown = set(node) - {"id", "tags", "attrs", "span"}
        _expect(not unknown, f"unknown keys {sorted(unknown)}", path)
        _expect(isinstance(node.get("id"), str) and node["id"], "node id must be a string", f"{path}.id")
        _expect(node["id"] not in graph.nodes, f"duplicate node id {node['id']!r}", f"{path}.id")
        tags = node.get("tags", [])
        _expect(isinstance(tags, list) and all(isinstance(t, str) for t in tags),
                "tags must be a list of strings", f"{path}.tags")
        kinds = [t for t in tags if t in NODE_KINDS]
        _expect(len(kinds) >= 1, "node must carry a kind tag", f"{path}.tags")
        attrs = node.get("attrs", {})
        _expect(isinstance(attrs, dict), "attrs must be an object", f"{path}.attrs")
        for key, value in attrs.items():
            _expect(isinstance(value, _SCALARS),
                    f"attribute {key!r} must be a scalar", f"{path}.attrs.{key}")
        span = node.get("span")
        if span is not None:
            _expect(isinstance(span, list) and len(span) == 3
                    and isinstance(span[0], str)
                    and isinstance(span[1], int) and isinstance(span[2], int),
                    "span must be [path, start, end]", f"{path}.span")
            span = (span[0], span[1], span[2])
        name = str(attrs.get("name", ""))
        graph.add_node(kinds[0], name, dict(attrs), span=span, node_id=node["id"])
        record = graph.nodes[node["id"]]
        record.tags.update(tags)
        record.attrs = dict(attrs)  # preserve exact attrs (name may be absent)

    for i, edge in enumerate(doc["edges"]):
        path = f"$.edges[{i}]"
        _expect(isinstance(edge, dict), "edge must be an object", path)
        unknown = set(edge) - {"id", "from", "to", "tags", "attrs"}
        _expect(not unknown, f"unknown keys {sorted(unknown)}", path)
        _expect(isinstance(edge.get("id"), str) and edge["id"], "edge id must be a string", f"{path}.id")
        _expect(edge["id"] not in graph.edges, f"duplicate edge id {edge['id']!r}", f"{path}.id")
        for end in ("from", "to"):
            _expect(isinstance(edge.get(end), str), f"'{end}' must be a node id", f"{path}.{end}")
            _expect(edge[end] in graph.nodes,
                    f"edge references absent node id {edge[end]!r}", f"{path}.{end}")
        tags = edge.get("tags", [])
        _expect(isinstance(tags, list) and all(isinstance(t, str) for t in tags),
                "tags must be a list of strings", f"{path}.tags")
        kinds = [t for t in tags if t in EDGE_KINDS]
        _expect(len(kinds) == 1, "edge must carry exactly one primary kind tag", f"{path}.tags")
        attrs = edge.get("attrs", {})
        _expect(isinstance(attrs, dict), "attrs must be an object", f"{path}.attrs")
        for key, value in attrs.items():
            _expect(isinstance(value, _SCALARS),
                    f"attribute {key!r} must be a scalar", f"{path}.attrs.{key}")
        graph.add_edge(kinds[0], edge["from"], edge["to"], dict(attrs), edge_id=edge["id"])
        graph.edges[edge["id"]].tags.update(tags)

    return graph.freeze()


def _dot_escape(text: str) -> str:
    return text.replace("\\", "\\\\").replace('"', '\\"')


def export_dot(graph_or_subgraph: ProgramGraph | Subgraph, title: str = "graphaudit") -> str:
    """Render as a GraphViz digraph, tags as labels, canonical order."""
    if isinstance(graph_or_subgraph, Subgraph):
        graph = graph_or_subgraph.graph
        node_ids = sorted(graph_or_subgraph.node_ids, key=id_sort_key)
        edge_ids = sorted(graph_or_subgraph.edge_ids, key=id_sort_key)
    else:
        graph = graph_or_subgraph
        node_ids = sorted(graph.nodes, key=id_sort_key)
        edge_ids = sorted(graph.edges, key=id_sort_key)
    lines = [f'digraph "{_dot_escape(title)}" {{', "  rankdir=LR;"]
    for nid in node_ids:
        n = graph.nodes[nid]
        label = f'{_dot_escape(n.name)}\\n{_dot_escape(" ".join(sorted(n.tags)))}'
        lines.append(f'  "{nid}" [label="{label}"];')
    for eid in edge_ids:
        e = graph.edges[eid]
        lines.append(f'  "{e.src}" -> "{e.dst}" [label="{_dot_escape(" ".join(sorted(e.tags)))}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"


def graph_hash(graph: ProgramGraph) -> str:
    """Content hash of the canonical export; identifies the snapshot."""
    return hashlib.sha256(export_graph_json(graph).encode("utf-8")).hexdigest()
