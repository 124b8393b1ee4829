"""HTTP API over the audit service, consumed by the CLI and the web UI.

JSON in and out; errors map to {error, message, detail} with 400 for bad
requests, 404 for unknown ids and 409 for state conflicts. When a built
web-ui bundle is available its static assets are served at /.
"""

from __future__ import annotations

import json
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.responses import FileResponse, JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from .analysis import analyzer_names, get_descriptor
from .audit import AuditService, SmartViewRequest, _work_item_to_dict
from .errors import (
    GraphAuditError,
    HashMismatchError,
    QuerySyntaxError,
    UnknownArtifactError,
    UnknownNodeError,
    UnknownWorkItemError,
)
from .graph import id_sort_key
from .graphio import export_graph_json
from .query import Subgraph
from .script import eval_query

_NOT_FOUND = (UnknownWorkItemError, UnknownNodeError, UnknownArtifactError)


class QueryBody(BaseModel):
    script: str


class RunBody(BaseModel):
    names: list[str] | None = None
    seed: int | None = None


class WorkItemPatch(BaseModel):
    reviewed: bool | None = None
    notes: str | None = None
    name: str | None = None
    color: str | None = None


class ArtifactsBody(BaseModel):
    add: list[str] = []
    remove: list[str] = []


def _subgraph_payload(subgraph: Subgraph) -> dict:
    return json.loads(export_graph_json(subgraph))


def create_app(service: AuditService, static_dir: str | None = None) -> FastAPI:
    app = FastAPI(title="graphaudit", docs_url=None, redoc_url=None)

    @app.exception_handler(GraphAuditError)
    async def on_error(_request: Request, exc: GraphAuditError):
        status = 400
        if isinstance(exc, _NOT_FOUND):
            status = 404
        elif isinstance(exc, HashMismatchError):
            status = 409
        detail = {}
        if isinstance(exc, QuerySyntaxError):
            detail = {"offset": exc.offset, "line": exc.line, "column": exc.column}
        return JSONResponse(
            status_code=status,
            content={"error": exc.code, "message": str(exc), "detail": detail},
        )

    @app.get("/api/graph/summary")
    def graph_summary():
        graph = service.graph
        kinds: dict[str, int] = {}
        for node in graph.nodes.values():
            for tag in node.tags:
                kinds[tag] = kinds.get(tag, 0) + 1
        edge_kinds: dict[str, int] = {}
        for edge in graph.edges.values():
            for tag in edge.tags:
                edge_kinds[tag] = edge_kinds.get(tag, 0) + 1
        return {
            "app": service.state.app,
            "graphHash": service.state.graph_hash,
            "nodes": len(graph.nodes),
            "edges": len(graph.edges),
            "nodeTags": dict(sorted(kinds.items())),
            "edgeTags": dict(sorted(edge_kinds.items())),
            "analyzers": [
                {
                    "name": name,
                    "category": get_descriptor(name).category,
                    "description": get_descriptor(name).description,
                }
                for name in analyzer_names()
            ],
        }

    @app.post("/api/query")
    def run_query(body: QueryBody):
        result = eval_query(body.script, service.graph)
        return {
            "empty": result.is_empty(),
            "subgraph": _subgraph_payload(result),
        }

    @app.post("/api/analyzers/run")
    def run_analyzers(body: RunBody):
        records = service.run(body.names, seed=body.seed)
        return {
            "report": [
                {
                    "name": r.name, "category": r.category, "status": r.status,
                    "findings": r.findings, "satisfied": r.status == "ok" and r.findings == 0,
                }
                for r in records
            ],
            "workItems": [_work_item_to_dict(w) for w in service.list_work_items()],
        }

    @app.get("/api/analyzers/status")
    def analyzers_status():
        return {
            "runLog": [
                {
                    "name": r.name, "category": r.category, "status": r.status,
                    "findings": r.findings, "started": r.started,
                    "finished": r.finished, "error": r.error,
                }
                for r in service.state.run_log
            ],
        }

    @app.get("/api/workitems")
    def list_work_items(category: str | None = None, reviewed: str | None = None):
        reviewed_flag = None
        if reviewed is not None and reviewed != "":
            reviewed_flag = reviewed.lower() in ("1", "true", "yes")
        items = service.list_work_items(category or None, reviewed_flag)
        return {"workItems": [_work_item_to_dict(w) for w in items]}

    @app.get("/api/workitems/{item_id}")
    def get_work_item(item_id: str):
        item = service.get_work_item(item_id)
        doc = _work_item_to_dict(item)
        doc["effectiveSubgraph"] = _subgraph_payload(item.effective_subgraph(service.graph))
        return doc

    @app.patch("/api/workitems/{item_id}")
    def patch_work_item(item_id: str, patch: WorkItemPatch):
        if patch.reviewed is not None:
            service.mark_reviewed(item_id, patch.reviewed)
        if patch.notes is not None:
            service.set_notes(item_id, patch.notes)
        if patch.name is not None:
            service.rename(item_id, patch.name)
        if patch.color is not None:
            service.recolor(item_id, patch.color)
        return _work_item_to_dict(service.get_work_item(item_id))

    @app.post("/api/workitems/{item_id}/artifacts")
    def modify_artifacts(item_id: str, body: ArtifactsBody):
        item = service.modify_artifacts(item_id, body.add, body.remove)
        doc = _work_item_to_dict(item)
        doc["effectiveSubgraph"] = _subgraph_payload(item.effective_subgraph(service.graph))
        return doc

    @app.get("/api/smartview")
    def smart_view(node: str, kind: str, steps: str = "fixpoint", rta_only: bool = False):
        selection = frozenset(n for n in node.split(",") if n)
        parsed_steps: int | str = steps
        if steps != "fixpoint":
            try:
                parsed_steps = int(steps)
            except ValueError:
                raise GraphAuditError(f"steps must be an integer or 'fixpoint', got {steps!r}")
        result = service.smart_view(SmartViewRequest(
            selection=selection, kind=kind, steps=parsed_steps, rta_only=rta_only))
        return {
            "empty": result.is_empty(),
            "subgraph": _subgraph_payload(result),
        }

    @app.get("/api/source")
    def source(node: str):
        return service.source_excerpt(node)

    @app.get("/api/nodes/search")
    def search_nodes(name: str = "", tag: str = "", limit: int = 50):
        hits = []
        for nid in sorted(service.graph.nodes, key=id_sort_key):
            record = service.graph.nodes[nid]
            if name and name not in record.name:
                continue
            if tag and tag not in record.tags:
                continue
            hits.append({
                "id": nid,
                "name": record.name,
                "tags": sorted(record.tags),
            })
            if len(hits) >= limit:
                break
        return {"nodes": hits}

    if static_dir and Path(static_dir).is_dir():
        index = Path(static_dir) / "index.html"

        @app.get("/")
        def root():
            return FileResponse(index)

        app.mount("/", StaticFiles(directory=static_dir), name="static")

    return app
