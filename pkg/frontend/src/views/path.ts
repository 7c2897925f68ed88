import type { SessionView } from "../types.js";

const N_TPS = 5;

function el(parent: Element, tag: string, className?: string): HTMLElement {
  const node = parent.ownerDocument.createElement(tag);
  if (className) node.className = className;
  parent.appendChild(node);
  return node;
}

/** Shot list as plain text, one shot id per line, for handoff to an editor. */
export function exportShotList(view: SessionView): string {
  const lines = [`# ${view.path.movie_id}`];
  view.path.shots.forEach((shot, i) => {
    const realized = view.path.flow.realized[i];
    const target = view.path.flow.target[i];
    lines.push(`${shot}\tintensity ${realized.toFixed(3)} (target ${target.toFixed(3)})`);
  });
  return lines.join("\n") + "\n";
}

/** Current walk: shot chips in order, coverage badges, termination banner. */
export function renderPath(container: HTMLElement, view: SessionView): void {
  container.textContent = "";
  const heading = el(container, "h3");
  heading.textContent = `Path (${view.path.shots.length}/${view.path.budget})`;

  const strip = el(container, "div", "path-strip");
  for (const shot of view.path.shots) {
    const chip = el(strip, "span", "shot-chip");
    chip.setAttribute("data-shot", String(shot));
    chip.textContent = String(shot);
  }

  const covered = new Set(view.path.tps_covered);
  const badges = el(container, "div", "tp-badges");
  for (let tp = 1; tp <= N_TPS; tp++) {
    const badge = el(badges, "span", covered.has(tp) ? "tp-badge covered" : "tp-badge");
    badge.textContent = `TP${tp}`;
  }

  if (view.path.terminated !== null) {
    const banner = el(container, "div", "terminated");
    banner.textContent = `walk finished: ${view.path.terminated}`;
  }
}
