import type { GraphEdge, GraphNode, MovieGraph, SessionView } from "../types.js";

const SVG_NS = "http://www.w3.org/2000/svg";
const WIDTH = 640;
const HEIGHT = 200;
const PAD = 16;

export interface Subgraph {
  nodes: GraphNode[];
  edges: GraphEdge[];
}

/**
 * Nodes within `radius` undirected hops of `center`, plus the edges among
 * them. Full movie graphs are unreadable; the editor adjusts the radius.
 */
export function prunedSubgraph(graph: MovieGraph, center: number, radius: number): Subgraph {
  const adjacency = new Map<number, number[]>();
  const link = (a: number, b: number) => {
    let out = adjacency.get(a);
    if (out === undefined) {
      out = [];
      adjacency.set(a, out);
    }
    out.push(b);
  };
  for (const edge of graph.edges) {
    link(edge.src, edge.dst);
    link(edge.dst, edge.src);
  }
  const depth = new Map<number, number>([[center, 0]]);
  const queue = [center];
  while (queue.length > 0) {
    const node = queue.shift()!;
    const d = depth.get(node)!;
    if (d === radius) continue;
    for (const next of adjacency.get(node) ?? []) {
      if (!depth.has(next)) {
        depth.set(next, d + 1);
        queue.push(next);
      }
    }
  }
  return {
    nodes: graph.nodes.filter((n) => depth.has(n.shot)),
    edges: graph.edges.filter((e) => depth.has(e.src) && depth.has(e.dst)),
  };
}

function x(shot: number, nShots: number): number {
  const span = Math.max(nShots - 1, 1);
  return PAD + (shot / span) * (WIDTH - 2 * PAD);
}

function y(intensity: number): number {
  return HEIGHT - PAD - intensity * (HEIGHT - 2 * PAD);
}

/**
 * Timeline layout: x is temporal position, y is sentiment intensity. The
 * current path is highlighted and the walk head gets a ring. With no path
 * yet the whole graph is shown; otherwise it is pruned around the head.
 */
export function renderGraph(
  svg: SVGElement,
  graph: MovieGraph,
  view: SessionView,
  radius: number,
): void {
  svg.textContent = "";
  svg.setAttribute("viewBox", `0 0 ${WIDTH} ${HEIGHT}`);
  const doc = svg.ownerDocument;
  const shots = view.path.shots;
  const head = shots.length > 0 ? shots[shots.length - 1] : null;
  const sub = head === null ? { nodes: graph.nodes, edges: graph.edges } : prunedSubgraph(graph, head, radius);
  const onPath = new Set(shots);
  const intensityOf = new Map(graph.nodes.map((n) => [n.shot, n.intensity]));

  for (const edge of sub.edges) {
    const line = doc.createElementNS(SVG_NS, "line");
    line.setAttribute("x1", String(x(edge.src, graph.n_shots)));
    line.setAttribute("y1", String(y(intensityOf.get(edge.src) ?? 0)));
    line.setAttribute("x2", String(x(edge.dst, graph.n_shots)));
    line.setAttribute("y2", String(y(intensityOf.get(edge.dst) ?? 0)));
    line.setAttribute("class", "edge");
    line.setAttribute("stroke-width", String(0.5 + 3 * edge.weight));
    svg.appendChild(line);
  }
  for (const node of sub.nodes) {
    const circle = doc.createElementNS(SVG_NS, "circle");
    circle.setAttribute("cx", String(x(node.shot, graph.n_shots)));
    circle.setAttribute("cy", String(y(node.intensity)));
    circle.setAttribute("r", node.shot === head ? "7" : "4");
    const classes = ["node"];
    if (onPath.has(node.shot)) classes.push("on-path");
    if (node.shot === head) classes.push("head");
    if (node.tps.length > 0) classes.push("tp");
    circle.setAttribute("class", classes.join(" "));
    circle.setAttribute("data-shot", String(node.shot));
    if (node.tps.length > 0) circle.setAttribute("data-tps", node.tps.join(","));
    svg.appendChild(circle);
  }
}
