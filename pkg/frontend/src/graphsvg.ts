// SVG rendering of a graph view. Every rendered element carries the graph
// id it came from in data-node-id / data-edge-id, so tests (and the click
// handler) can map DOM back to API payload ids.

import { layoutGraph } from "./layout.js";
import type { GraphView, NodeView } from "./model.js";

const SVG_NS = "http://www.w3.org/2000/svg";

const KIND_CLASS: Record<string, string> = {
  TYPE: "node-type",
  METHOD: "node-method",
  FIELD: "node-field",
  VARIABLE: "node-variable",
  CALLSITE_RESULT: "node-callsite",
  LITERAL: "node-literal",
  XML_ELEMENT: "node-xml",
  PERMISSION: "node-permission",
  PACKAGE: "node-package",
};

export function renderGraphSvg(
  view: GraphView,
  onNodeClick?: (node: NodeView) => void,
): SVGSVGElement {
  const { positions, width, height } = layoutGraph(view);
  const svg = document.createElementNS(SVG_NS, "svg");
  svg.setAttribute("viewBox", `0 0 ${width} ${height}`);
  svg.setAttribute("width", String(width));
  svg.setAttribute("height", String(height));
  svg.classList.add("graph-canvas");

  const defs = document.createElementNS(SVG_NS, "defs");
  defs.innerHTML =
    '<marker id="arrow" viewBox="0 0 10 10" refX="9" refY="5" ' +
    'markerWidth="7" markerHeight="7" orient="auto-start-reverse">' +
    '<path d="M 0 0 L 10 5 L 0 10 z" fill="#8b949e"/></marker>';
  svg.appendChild(defs);

  for (const e of view.edges) {
    const from = positions.get(e.from);
    const to = positions.get(e.to);
    if (!from || !to) continue;
    const group = document.createElementNS(SVG_NS, "g");
    group.setAttribute("data-edge-id", e.id);
    const path = document.createElementNS(SVG_NS, "path");
    let d: string;
    if (e.from === e.to) {
      d = `M ${from.x + 20} ${from.y - 10} C ${from.x + 70} ${from.y - 50}, ` +
        `${from.x - 30} ${from.y - 50}, ${from.x + 6} ${from.y - 14}`;
    } else {
      const mx = (from.x + to.x) / 2;
      d = `M ${from.x} ${from.y} C ${mx} ${from.y}, ${mx} ${to.y}, ${to.x - 26} ${to.y}`;
    }
    path.setAttribute("d", d);
    path.setAttribute("class", "edge-path");
    path.setAttribute("marker-end", "url(#arrow)");
    group.appendChild(path);
    const label = document.createElementNS(SVG_NS, "text");
    label.setAttribute("x", String((from.x + to.x) / 2));
    label.setAttribute("y", String((from.y + to.y) / 2 - 6));
    label.setAttribute("class", "edge-label");
    label.textContent = e.label;
    group.appendChild(label);
    svg.appendChild(group);
  }

  for (const n of view.nodes) {
    const pos = positions.get(n.id);
    if (!pos) continue;
    const group = document.createElementNS(SVG_NS, "g");
    group.setAttribute("data-node-id", n.id);
    group.setAttribute("class", `graph-node ${KIND_CLASS[n.kinds[0]] ?? "node-other"}`);
    const circle = document.createElementNS(SVG_NS, "circle");
    circle.setAttribute("cx", String(pos.x));
    circle.setAttribute("cy", String(pos.y));
    circle.setAttribute("r", "14");
    group.appendChild(circle);
    const label = document.createElementNS(SVG_NS, "text");
    label.setAttribute("x", String(pos.x));
    label.setAttribute("y", String(pos.y + 30));
    label.setAttribute("class", "node-label");
    label.textContent = n.label;
    group.appendChild(label);
    const kinds = document.createElementNS(SVG_NS, "text");
    kinds.setAttribute("x", String(pos.x));
    kinds.setAttribute("y", String(pos.y + 44));
    kinds.setAttribute("class", "node-kinds");
    kinds.textContent = n.kinds.join(" ");
    group.appendChild(kinds);
    if (onNodeClick) {
      group.addEventListener("click", () => onNodeClick(n));
    }
    svg.appendChild(group);
  }
  return svg;
}
