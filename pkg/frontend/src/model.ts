// Pure view-model construction. Rendered elements correspond one-to-one to
// ids from the last API payload; nothing is synthesized client-side.

import type { SubgraphPayload, WorkItemPayload } from "./api.js";

const KIND_TAGS = new Set([
  "TYPE", "METHOD", "FIELD", "VARIABLE", "CALLSITE_RESULT",
  "LITERAL", "XML_ELEMENT", "PERMISSION", "PACKAGE",
]);

const EDGE_KIND_TAGS = new Set([
  "DECLARES", "CALL", "OVERRIDES", "EXTENDS", "DATA_FLOW",
  "CONTROL_FLOW", "INSTANTIATES", "TYPE_OF", "XML_CALLBACK",
]);

export interface NodeView {
  id: string;
  label: string;
  kinds: string[];
  extraTags: string[];
}

export interface EdgeView {
  id: string;
  from: string;
  to: string;
  label: string;
}

export interface GraphView {
  nodes: NodeView[];
  edges: EdgeView[];
}

export function graphView(payload: SubgraphPayload): GraphView {
  const nodes = payload.nodes.map((n) => {
    const kinds = n.tags.filter((t) => KIND_TAGS.has(t)).sort();
    const extraTags = n.tags.filter((t) => !KIND_TAGS.has(t)).sort();
    const name = String(n.attrs["name"] ?? n.id);
    return { id: n.id, label: name, kinds, extraTags };
  });
  nodes.sort((a, b) => (a.id < b.id ? -1 : a.id > b.id ? 1 : 0));
  const edges = payload.edges.map((e) => ({
    id: e.id,
    from: e.from,
    to: e.to,
    label: e.tags.filter((t) => EDGE_KIND_TAGS.has(t)).sort().join(" "),
  }));
  edges.sort((a, b) => (a.id < b.id ? -1 : a.id > b.id ? 1 : 0));
  return { nodes, edges };
}

export interface QueueRow {
  id: string;
  analyzer: string;
  category: string;
  name: string;
  color: string;
  reviewed: boolean;
  notes: string;
  findingCount: number;
  messages: string[];
}

export function queueRow(item: WorkItemPayload): QueueRow {
  return {
    id: item.id,
    analyzer: item.analyzer,
    category: item.category,
    name: item.name,
    color: item.color,
    reviewed: item.reviewed,
    notes: item.notes,
    findingCount: item.envelope.findings.length,
    messages: item.envelope.findings.map((f) => f.message),
  };
}

export function queueRows(items: WorkItemPayload[]): QueueRow[] {
  return items.map(queueRow);
}

export const CATEGORIES = [
  "CONFIDENTIALITY", "INTEGRITY", "AVAILABILITY", "SMELL", "PROPERTY",
] as const;

export const SMART_VIEW_KINDS = [
  "FORWARD_DATA", "REVERSE_DATA", "FORWARD_CALL", "REVERSE_CALL",
  "DECLARATION_STRUCTURE", "TYPE_HIERARCHY", "XML_CALLBACKS",
  "REVERSE_DATA_INTO_XML",
] as const;

// Marks the offending position of a rejected query script so the console
// can show the error inline at the reported offset.
export function markErrorOffset(script: string, offset: number): string {
  const clamped = Math.max(0, Math.min(offset, script.length));
  const before = script.slice(0, clamped);
  const line = before.split("\n").length;
  const column = clamped - before.lastIndexOf("\n");
  const lineText = script.split("\n")[line - 1] ?? "";
  return `${lineText}\n${" ".repeat(Math.max(0, column - 1))}^ offset ${offset}`;
}
