// Deterministic layered layout for directed graphs. Correctness of the UI
// is id-fidelity, not geometry: this just spreads nodes left-to-right by
// longest path from the roots so arrows mostly point rightwards.

import type { GraphView } from "./model.js";

export interface PlacedNode {
  id: string;
  x: number;
  y: number;
}

export interface Layout {
  positions: Map<string, PlacedNode>;
  width: number;
  height: number;
}

const X_GAP = 200;
const Y_GAP = 78;
const MARGIN = 60;

export function layerGraph(view: GraphView): Map<string, number> {
  const incoming = new Map<string, number>();
  const out = new Map<string, string[]>();
  for (const n of view.nodes) {
    incoming.set(n.id, 0);
    out.set(n.id, []);
  }
  for (const e of view.edges) {
    if (e.from === e.to) continue;
    incoming.set(e.to, (incoming.get(e.to) ?? 0) + 1);
    out.get(e.from)?.push(e.to);
  }
  const layer = new Map<string, number>();
  const queue = view.nodes
    .filter((n) => (incoming.get(n.id) ?? 0) === 0)
    .map((n) => n.id);
  for (const id of queue) layer.set(id, 0);
  let cursor = 0;
  while (cursor < queue.length) {
    const id = queue[cursor++];
    for (const next of out.get(id) ?? []) {
      const proposed = (layer.get(id) ?? 0) + 1;
      if ((layer.get(next) ?? -1) < proposed) layer.set(next, proposed);
      const left = (incoming.get(next) ?? 0) - 1;
      incoming.set(next, left);
      if (left === 0) queue.push(next);
    }
  }
  // Nodes on cycles never reach zero incoming; place them after their
  // already-layered predecessors, in id order for determinism.
  for (const n of view.nodes) {
    if (!layer.has(n.id)) layer.set(n.id, 0);
  }
  return layer;
}

export function layoutGraph(view: GraphView): Layout {
  const layers = layerGraph(view);
  const byLayer = new Map<number, string[]>();
  for (const n of view.nodes) {
    const l = layers.get(n.id) ?? 0;
    const bucket = byLayer.get(l) ?? [];
    bucket.push(n.id);
    byLayer.set(l, bucket);
  }
  const positions = new Map<string, PlacedNode>();
  let maxRows = 1;
  for (const [l, ids] of byLayer) {
    ids.sort();
    maxRows = Math.max(maxRows, ids.length);
    ids.forEach((id, row) => {
      positions.set(id, {
        id,
        x: MARGIN + l * X_GAP,
        y: MARGIN + row * Y_GAP,
      });
    });
  }
  const maxLayer = Math.max(0, ...byLayer.keys());
  return {
    positions,
    width: MARGIN * 2 + (maxLayer + 1) * X_GAP,
    height: MARGIN * 2 + maxRows * Y_GAP,
  };
}
