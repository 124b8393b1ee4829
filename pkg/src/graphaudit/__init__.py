"""graphaudit: a human-in-the-loop program-graph audit platform.

Programs are represented as one attributed, tagged, directed multigraph;
a composable query algebra runs over frozen snapshots; indexers enrich the
graph with runtime-feasibility and platform annotations; analyzers extract
envelopes (empty exactly when a security property holds); and an audit
service schedules the analyzers and manages the reviewable work-item queue.
"""

from .analysis import (
    AnalysisContext,
    AnalyzerDescriptor,
    Envelope,
    Finding,
    analyzer_names,
    apply_continuation,
    run_analyzer,
)
from .audit import AuditService, SmartViewRequest, WorkItem, smart_view
from .build import build_graph
from .errors import GraphAuditError
from .graph import EDGE_KINDS, NODE_KINDS, ProgramGraph
from .graphio import export_dot, export_graph_json, graph_hash, import_graph_json
from .indexing import run_index_pipeline, run_rta
from .miniapp import parse_unit
from .query import Subgraph, method_select, universe
from .resources import (
    parse_layout,
    parse_manifest,
    parse_permission_map,
    load_profile,
)
from .script import eval_query, parse_query

__version__ = "0.1.0"

__all__ = [
    "AnalysisContext", "AnalyzerDescriptor", "AuditService", "Envelope",
    "Finding", "GraphAuditError", "ProgramGraph", "SmartViewRequest",
    "Subgraph", "WorkItem", "NODE_KINDS", "EDGE_KINDS",
    "analyzer_names", "apply_continuation", "build_graph", "eval_query",
    "export_dot", "export_graph_json", "graph_hash", "import_graph_json",
    "method_select", "parse_layout", "parse_manifest", "parse_permission_map",
    "parse_query", "parse_unit", "load_profile", "run_analyzer",
    "run_index_pipeline", "run_rta", "smart_view", "universe",
]
