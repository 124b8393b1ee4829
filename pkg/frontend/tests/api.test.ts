import { describe, expect, it } from "vitest";

import { ApiRequestError, AuditApi } from "../src/api.js";

interface Recorded {
  url: string;
  method: string;
  body: unknown;
}

function fakeServer(
  responder: (url: string, init?: RequestInit) => { status?: number; body: unknown },
) {
  const calls: Recorded[] = [];
  const fetchFn = async (url: string, init?: RequestInit) => {
    calls.push({
      url,
      method: init?.method ?? "GET",
      body: init?.body ? JSON.parse(init.body as string) : null,
    });
    const { status = 200, body } = responder(url, init);
    return new Response(JSON.stringify(body), {
      status,
      headers: { "Content-Type": "application/json" },
    });
  };
  return { calls, fetchFn };
}

describe("AuditApi", () => {
  it("builds work-item list urls with filters", async () => {
    const { calls, fetchFn } = fakeServer(() => ({ body: { workItems: [] } }));
    const api = new AuditApi("http://x", fetchFn);
    await api.listWorkItems();
    await api.listWorkItems("SMELL");
    await api.listWorkItems(undefined, false);
    expect(calls.map((c) => c.url)).toEqual([
      "http://x/api/workitems",
      "http://x/api/workitems?category=SMELL",
      "http://x/api/workitems?reviewed=false",
    ]);
  });

  it("PATCHes work-item mutations with a JSON body", async () => {
    const { calls, fetchFn } = fakeServer(() => ({ body: { id: "w1" } }));
    const api = new AuditApi("", fetchFn);
    await api.patchWorkItem("w1", { reviewed: true, notes: "n" });
    expect(calls[0]).toMatchObject({
      url: "/api/workitems/w1",
      method: "PATCH",
      body: { reviewed: true, notes: "n" },
    });
  });

  it("encodes smart view parameters", async () => {
    const { calls, fetchFn } = fakeServer(() => ({
      body: { empty: true, subgraph: { nodes: [], edges: [] } },
    }));
    const api = new AuditApi("", fetchFn);
    await api.smartView(["n1", "n2"], "REVERSE_DATA_INTO_XML", 2, true);
    expect(calls[0]!.url).toBe(
      "/api/smartview?node=n1%2Cn2&kind=REVERSE_DATA_INTO_XML&steps=2&rta_only=true",
    );
  });

  it("posts query scripts", async () => {
    const { calls, fetchFn } = fakeServer(() => ({
      body: { empty: false, subgraph: { nodes: [], edges: [] } },
    }));
    await new AuditApi("", fetchFn).query("universe()");
    expect(calls[0]).toMatchObject({
      url: "/api/query",
      method: "POST",
      body: { script: "universe()" },
    });
  });

  it("throws ApiRequestError with the server's error payload", async () => {
    const { fetchFn } = fakeServer(() => ({
      status: 400,
      body: {
        error: "query-syntax",
        message: "no good",
        detail: { offset: 8, line: 1, column: 9 },
      },
    }));
    const api = new AuditApi("", fetchFn);
    const err = await api.query("between(").catch((e) => e);
    expect(err).toBeInstanceOf(ApiRequestError);
    expect(err.status).toBe(400);
    expect(err.code).toBe("query-syntax");
    expect(err.detail.offset).toBe(8);
  });

  it("survives non-JSON error bodies", async () => {
    const fetchFn = async () => new Response("boom", { status: 502 });
    const err = await new AuditApi("", fetchFn).graphSummary().catch((e) => e);
    expect(err).toBeInstanceOf(ApiRequestError);
    expect(err.status).toBe(502);
    expect(err.code).toBe("http-error");
  });
});
