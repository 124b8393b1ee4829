// Typed client for the audit-service HTTP API. The server is the source of
// truth: every call returns the server's payload and callers re-render from
// it, never from locally mutated state.

export type Scalar = string | number | boolean;

export interface GraphNode {
  id: string;
  tags: string[];
  attrs: Record<string, Scalar>;
  span?: [string, number, number];
}

export interface GraphEdge {
  id: string;
  from: string;
  to: string;
  tags: string[];
  attrs: Record<string, Scalar>;
}

export interface SubgraphPayload {
  nodes: GraphNode[];
  edges: GraphEdge[];
}

export interface FindingPayload {
  message: string;
  anchors: string[];
  spans: [string, number, number][];
}

export interface EnvelopePayload {
  findings: FindingPayload[];
  nodes: string[];
  edges: string[];
}

export interface WorkItemPayload {
  id: string;
  analyzer: string;
  category: string;
  name: string;
  color: string;
  reviewed: boolean;
  notes: string;
  added: string[];
  removed: string[];
  envelope: EnvelopePayload;
  effectiveSubgraph?: SubgraphPayload;
}

export interface RunReportRow {
  name: string;
  category: string;
  status: string;
  findings: number;
  satisfied: boolean;
}

export interface GraphSummary {
  app: string;
  graphHash: string;
  nodes: number;
  edges: number;
  nodeTags: Record<string, number>;
  edgeTags: Record<string, number>;
  analyzers: { name: string; category: string; description: string }[];
}

export interface QueryResult {
  empty: boolean;
  subgraph: SubgraphPayload;
}

export interface NodeSearchHit {
  id: string;
  name: string;
  tags: string[];
}

export interface WorkItemPatch {
  reviewed?: boolean;
  notes?: string;
  name?: string;
  color?: string;
}

export class ApiRequestError extends Error {
  constructor(
    public status: number,
    public code: string,
    message: string,
    public detail: Record<string, unknown>,
  ) {
    super(message);
    this.name = "ApiRequestError";
  }
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class AuditApi {
  constructor(
    private baseUrl: string = "",
    private fetchFn: FetchLike = (url, init) => fetch(url, init),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchFn(this.baseUrl + path, init);
    const text = await response.text();
    let body: unknown = null;
    try {
      body = text ? JSON.parse(text) : null;
    } catch {
      body = null;
    }
    if (!response.ok) {
      const err = (body ?? {}) as { error?: string; message?: string; detail?: Record<string, unknown> };
      throw new ApiRequestError(
        response.status,
        err.error ?? "http-error",
        err.message ?? `request failed with status ${response.status}`,
        err.detail ?? {},
      );
    }
    return body as T;
  }

  private post<T>(path: string, body: unknown, method = "POST"): Promise<T> {
    return this.request<T>(path, {
      method,
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
  }

  graphSummary(): Promise<GraphSummary> {
    return this.request("/api/graph/summary");
  }

  runAnalyzers(names?: string[]): Promise<{ report: RunReportRow[]; workItems: WorkItemPayload[] }> {
    return this.post("/api/analyzers/run", names ? { names } : {});
  }

  listWorkItems(category?: string, reviewed?: boolean): Promise<WorkItemPayload[]> {
    const params = new URLSearchParams();
    if (category) params.set("category", category);
    if (reviewed !== undefined) params.set("reviewed", String(reviewed));
    const qs = params.toString();
    return this.request<{ workItems: WorkItemPayload[] }>(
      `/api/workitems${qs ? "?" + qs : ""}`,
    ).then((doc) => doc.workItems);
  }

  getWorkItem(id: string): Promise<WorkItemPayload> {
    return this.request(`/api/workitems/${id}`);
  }

  patchWorkItem(id: string, patch: WorkItemPatch): Promise<WorkItemPayload> {
    return this.post(`/api/workitems/${id}`, patch, "PATCH");
  }

  modifyArtifacts(id: string, add: string[], remove: string[]): Promise<WorkItemPayload> {
    return this.post(`/api/workitems/${id}/artifacts`, { add, remove });
  }

  smartView(
    nodes: string[],
    kind: string,
    steps: number | "fixpoint" = "fixpoint",
    rtaOnly = false,
  ): Promise<QueryResult> {
    const params = new URLSearchParams({
      node: nodes.join(","),
      kind,
      steps: String(steps),
    });
    if (rtaOnly) params.set("rta_only", "true");
    return this.request(`/api/smartview?${params}`);
  }

  query(script: string): Promise<QueryResult> {
    return this.post("/api/query", { script });
  }

  source(node: string): Promise<{ path: string; span: [number, number]; text: string }> {
    return this.request(`/api/source?node=${encodeURIComponent(node)}`);
  }

  searchNodes(name: string, tag = "", limit = 25): Promise<NodeSearchHit[]> {
    const params = new URLSearchParams({ name, tag, limit: String(limit) });
    return this.request<{ nodes: NodeSearchHit[] }>(
      `/api/nodes/search?${params}`,
    ).then((doc) => doc.nodes);
  }
}
