import type { SessionView } from "../types.js";

const SVG_NS = "http://www.w3.org/2000/svg";
const WIDTH = 320;
const HEIGHT = 120;
const PAD = 12;

function polylinePoints(series: number[], budget: number): string {
  const span = Math.max(budget - 1, 1);
  return series
    .map((v, i) => {
      const x = PAD + (i / span) * (WIDTH - 2 * PAD);
      const y = HEIGHT - PAD - v * (HEIGHT - 2 * PAD);
      return `${x.toFixed(2)},${y.toFixed(2)}`;
    })
    .join(" ");
}

/**
 * Target-vs-realized sentiment intensity chart. The dashed target line spans
 * the full budget; the realized line covers only the shots picked so far, so
 * an empty path draws the target alone.
 */
export function renderFlowChart(svg: SVGElement, view: SessionView): void {
  svg.textContent = "";
  svg.setAttribute("viewBox", `0 0 ${WIDTH} ${HEIGHT}`);
  const doc = svg.ownerDocument;
  const { target, realized } = view.path.flow;
  const budget = view.path.budget;

  const axis = doc.createElementNS(SVG_NS, "line");
  axis.setAttribute("x1", String(PAD));
  axis.setAttribute("y1", String(HEIGHT - PAD));
  axis.setAttribute("x2", String(WIDTH - PAD));
  axis.setAttribute("y2", String(HEIGHT - PAD));
  axis.setAttribute("class", "axis");
  svg.appendChild(axis);

  const targetLine = doc.createElementNS(SVG_NS, "polyline");
  targetLine.setAttribute("class", "flow-target");
  targetLine.setAttribute("points", polylinePoints(target, budget));
  targetLine.setAttribute("data-series", target.join(","));
  targetLine.setAttribute("fill", "none");
  targetLine.setAttribute("stroke-dasharray", "4 3");
  svg.appendChild(targetLine);

  if (realized.length > 0) {
    const realizedLine = doc.createElementNS(SVG_NS, "polyline");
    realizedLine.setAttribute("class", "flow-realized");
    realizedLine.setAttribute("points", polylinePoints(realized, budget));
    realizedLine.setAttribute("data-series", realized.join(","));
    realizedLine.setAttribute("fill", "none");
    svg.appendChild(realizedLine);
  }
}
