"""Command-line driver: ingest -> index -> analyze -> report or serve.

Commands:
    graphaudit ingest --config audit.json --out outdir
    graphaudit audit  --config audit.json --out outdir
    graphaudit query  --graph graph.json --script 'universe()...' [--format json|dot|text]
    graphaudit serve  --config audit.json --port 8321

Exit codes for `audit`: 0 when every envelope is empty, 1 when any analyzer
produced findings, 2 on configuration or analysis errors. Report files are
deterministic: the same config and inputs produce identical bytes.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

from .analysis import AnalysisContext, analyzer_names, permission_classification
from .audit import AuditService
from .build import build_graph
from .errors import ConfigError, GraphAuditError
from .graphio import export_dot, export_graph_json, graph_hash, import_graph_json
from .indexing import (
    DEFAULT_PRIORITY_THRESHOLD,
    IndexContext,
    default_indexers,
    run_index_pipeline,
)
from .miniapp import parse_unit
from .resources import (
    ManifestModel,
    PermissionMap,
    parse_layout,
    parse_manifest,
    parse_permission_map,
    load_profile,
)
from .script import eval_query

SEVERITY_ORDER = {
    "CONFIDENTIALITY": 0, "INTEGRITY": 1, "AVAILABILITY": 2,
    "SMELL": 3, "PROPERTY": 4,
}


@dataclass
class AuditConfig:
    base_dir: Path
    app: str
    sources: list[Path]
    manifest: Path | None
    layouts: list[Path]
    permission_map: Path | None
    profile: Path
    indexers: list[str] = field(default_factory=lambda: ["manifest", "permissions", "xml-callbacks", "rta"])
    analyzers: list[str] = field(default_factory=list)
    priority_threshold: int = DEFAULT_PRIORITY_THRESHOLD
    schedule_seed: int | None = None


def load_config(path: str) -> AuditConfig:
    config_path = Path(path)
    if not config_path.is_file():
        raise ConfigError(f"config file {path!r} does not exist")
    try:
        doc = json.loads(config_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON: {exc}") from None
    base = config_path.parent

    def resolve(rel: str) -> Path:
        p = (base / rel).resolve()
        if not p.is_file():
            raise ConfigError(f"{path}: referenced file {rel!r} does not exist")
        return p

    sources = [resolve(s) for s in doc.get("sources", [])]
    if not sources:
        raise ConfigError(f"{path}: config lists no sources")
    profile_rel = doc.get("platformProfile")
    if not profile_rel:
        raise ConfigError(f"{path}: config must name a platformProfile")
    known = set(analyzer_names())
    requested = doc.get("analyzers") or sorted(known)
    unknown = set(requested) - known
    if unknown:
        raise ConfigError(f"{path}: unknown analyzers {sorted(unknown)}")
    known_indexers = {d.name for d in default_indexers()}
    indexers = doc.get("indexers") or sorted(known_indexers)
    unknown = set(indexers) - known_indexers
    if unknown:
        raise ConfigError(f"{path}: unknown indexers {sorted(unknown)}")
    return AuditConfig(
        base_dir=base,
        app=doc.get("app", config_path.parent.name),
        sources=sources,
        manifest=resolve(doc["manifest"]) if doc.get("manifest") else None,
        layouts=[resolve(p) for p in doc.get("layouts", [])],
        permission_map=resolve(doc["permissionMap"]) if doc.get("permissionMap") else None,
        profile=resolve(profile_rel),
        indexers=indexers,
        analyzers=requested,
        priority_threshold=int(doc.get("priorityThreshold", DEFAULT_PRIORITY_THRESHOLD)),
        schedule_seed=doc.get("scheduleSeed"),
    )


@dataclass
class IngestResult:
    graph: object
    ctx: AnalysisContext
    sources: dict[str, str]


def ingest(config: AuditConfig, priority_threshold: int | None = None) -> IngestResult:
    """Parse all inputs, run the index pipeline, freeze the graph."""
    profile = load_profile(config.profile.read_text(encoding="utf-8"))
    units = []
    source_texts: dict[str, str] = {}
    for source in config.sources:
        text = source.read_text(encoding="utf-8")
        try:
            rel = str(source.relative_to(config.base_dir))
        except ValueError:
            rel = source.name
        source_texts[rel] = text
        units.append(parse_unit(text, rel))
    graph = build_graph(units, profile)

    manifest: ManifestModel | None = None
    if config.manifest is not None:
        manifest = parse_manifest(config.manifest.read_text(encoding="utf-8"))
    permission_map: PermissionMap | None = None
    if config.permission_map is not None:
        permission_map = parse_permission_map(
            config.permission_map.read_text(encoding="utf-8"))
    pending = []
    for layout in config.layouts:
        pending.extend(parse_layout(
            graph, layout.read_text(encoding="utf-8"), layout.name))

    threshold = priority_threshold if priority_threshold is not None else config.priority_threshold
    index_ctx = IndexContext(
        graph=graph, profile=profile, manifest=manifest,
        permission_map=permission_map, pending_callbacks=pending,
        priority_threshold=threshold,
    )
    descriptors = [d for d in default_indexers() if d.name in set(config.indexers)]
    run_index_pipeline(graph, descriptors, index_ctx)
    ctx = AnalysisContext(
        graph=graph, profile=profile, manifest=manifest,
        permission_map=permission_map)
    return IngestResult(graph=graph, ctx=ctx, sources=source_texts)


def _write_report(service: AuditService, out_dir: Path, records) -> dict:
    out_dir.mkdir(parents=True, exist_ok=True)
    envelope_dir = out_dir / "envelopes"
    envelope_dir.mkdir(exist_ok=True)
    report = {
        "app": service.state.app,
        "graphHash": service.state.graph_hash,
        "analyzers": [
            {
                "name": r.name, "category": r.category, "status": r.status,
                "findings": r.findings,
                "satisfied": r.status == "ok" and r.findings == 0,
            }
            for r in sorted(records, key=lambda r: r.name)
        ],
        "workItems": [
            {
                "id": w.id, "analyzer": w.analyzer, "category": w.category,
                "name": w.name, "findings": len(w.envelope.findings),
            }
            for w in service.list_work_items()
        ],
        "permissions": permission_classification(service.graph),
    }
    (out_dir / "report.json").write_text(
        json.dumps(report, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    for item in service.list_work_items():
        doc = item.envelope.to_dict()
        (envelope_dir / f"{item.analyzer}.json").write_text(
            json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    (out_dir / "report.txt").write_text(_text_report(service, records), encoding="utf-8")
    return report


def _text_report(service: AuditService, records) -> str:
    lines = [f"audit of {service.state.app}", ""]
    ordered = sorted(records, key=lambda r: (SEVERITY_ORDER.get(r.category, 9), r.name))
    for r in ordered:
        if r.status != "ok":
            lines.append(f"[{r.category:>15}] {r.name}: {r.status.upper()} {r.error}")
        elif r.findings == 0:
            lines.append(f"[{r.category:>15}] {r.name}: satisfied (empty envelope)")
        else:
            lines.append(f"[{r.category:>15}] {r.name}: {r.findings} finding(s)")
    items = service.list_work_items()
    if items:
        lines.append("")
        lines.append("work items:")
        for w in items:
            lines.append(f"  {w.id} {w.analyzer} [{w.category}]")
            for f in w.envelope.findings:
                lines.append(f"      - {f.message}")
    lines.append("")
    return "\n".join(lines)


def cmd_ingest(args) -> int:
    config = load_config(args.config)
    result = ingest(config, args.priority_threshold)
    out_dir = Path(args.out or config.base_dir / "out")
    out_dir.mkdir(parents=True, exist_ok=True)
    graph_file = out_dir / "graph.json"
    graph_file.write_text(export_graph_json(result.graph), encoding="utf-8")
    print(f"wrote {graph_file} ({len(result.graph.nodes)} nodes, "
          f"{len(result.graph.edges)} edges, hash {graph_hash(result.graph)[:12]})")
    return 0


def cmd_audit(args) -> int:
    config = load_config(args.config)
    result = ingest(config, args.priority_threshold)
    service = AuditService(result.graph, result.ctx, app=config.app,
                           sources=result.sources)
    records = service.run(config.analyzers, seed=args.schedule_seed
                          if args.schedule_seed is not None else config.schedule_seed)
    out_dir = Path(args.out or config.base_dir / "out")
    _write_report(service, out_dir, records)
    service.save(str(out_dir / "state.json"))
    errors = [r for r in records if r.status != "ok"]
    findings = sum(r.findings for r in records)
    print((out_dir / "report.txt").read_text(encoding="utf-8"), end="")
    if errors:
        return 2
    return 1 if findings else 0


def cmd_query(args) -> int:
    graph_text = Path(args.graph).read_text(encoding="utf-8")
    graph = import_graph_json(graph_text)
    script = args.script
    if script.startswith("@"):
        script = Path(script[1:]).read_text(encoding="utf-8")
    result = eval_query(script, graph)
    if args.format == "dot":
        print(export_dot(result), end="")
    elif args.format == "text":
        print(f"{len(result.node_ids)} node(s), {len(result.edge_ids)} edge(s)")
        for nid in sorted(result.node_ids):
            n = graph.nodes[nid]
            print(f"  {nid} {n.name} [{' '.join(sorted(n.tags))}]")
    else:
        print(export_graph_json(result), end="")
    return 0 if result.is_empty() else 1


def cmd_serve(args) -> int:
    import uvicorn

    from .server import create_app

    config = load_config(args.config)
    result = ingest(config, args.priority_threshold)
    service = AuditService(result.graph, result.ctx, app=config.app,
                           sources=result.sources)
    if args.state:
        service.load(args.state)
    static_dir = args.static or _default_static_dir()
    app = create_app(service, static_dir=static_dir)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def _default_static_dir() -> str | None:
    candidate = Path(__file__).resolve().parents[2] / "frontend" / "dist"
    return str(candidate) if candidate.is_dir() else None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="graphaudit")
    sub = parser.add_subparsers(dest="command", required=True)

    ingest_p = sub.add_parser("ingest", help="parse inputs and write the graph JSON")
    ingest_p.add_argument("--config", required=True)
    ingest_p.add_argument("--out")
    ingest_p.add_argument("--priority-threshold", type=int, default=None)
    ingest_p.set_defaults(fn=cmd_ingest)

    audit_p = sub.add_parser("audit", help="run the full analyzer suite and write reports")
    audit_p.add_argument("--config", required=True)
    audit_p.add_argument("--out")
    audit_p.add_argument("--priority-threshold", type=int, default=None)
    audit_p.add_argument("--schedule-seed", type=int, default=None)
    audit_p.set_defaults(fn=cmd_audit)

    query_p = sub.add_parser("query", help="evaluate a query script against a graph JSON")
    query_p.add_argument("--graph", required=True)
    query_p.add_argument("--script", required=True, help="script text or @file")
    query_p.add_argument("--format", choices=("json", "dot", "text"), default="json")
    query_p.set_defaults(fn=cmd_query)

    serve_p = sub.add_parser("serve", help="host the audit API and web UI")
    serve_p.add_argument("--config", required=True)
    serve_p.add_argument("--state", help="previously saved audit state to load")
    serve_p.add_argument("--port", type=int, default=8321)
    serve_p.add_argument("--host", default="127.0.0.1")
    serve_p.add_argument("--static", help="directory of built web-ui assets")
    serve_p.add_argument("--priority-threshold", type=int, default=None)
    serve_p.set_defaults(fn=cmd_serve)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except GraphAuditError as exc:
        print(f"error [{exc.code}]: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
