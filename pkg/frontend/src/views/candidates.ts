import type { SessionView, StepCandidate } from "../types.js";

export type ChooseHandler = (choice: number) => void;

const TP_NAMES = ["TP1", "TP2", "TP3", "TP4", "TP5"];

function el(parent: Element, tag: string, className?: string): HTMLElement {
  const node = parent.ownerDocument.createElement(tag);
  if (className) node.className = className;
  parent.appendChild(node);
  return node;
}

function renderBars(row: HTMLElement, candidate: StepCandidate): void {
  const bars = el(row, "div", "bars");
  const entries = Object.entries(candidate.contributions);
  const maxAbs = Math.max(...entries.map(([, v]) => Math.abs(v)), 1e-12);
  for (const [name, value] of entries) {
    const wrap = el(bars, "div", "bar-row");
    el(wrap, "span", "bar-label").textContent = name;
    const bar = el(wrap, "div", value >= 0 ? "bar positive" : "bar negative");
    bar.style.width = `${(Math.abs(value) / maxAbs) * 100}%`;
    bar.setAttribute("data-contribution", String(value));
    el(wrap, "span", "bar-value").textContent = value.toFixed(3);
  }
}

/**
 * Render the current choice list: start shots with their turning-point
 * scores, or scored continuations with per-criterion contribution bars.
 * One candidate, one row; clicking a row's button issues that step.
 */
export function renderCandidates(
  container: HTMLElement,
  view: SessionView,
  onChoose: ChooseHandler,
): void {
  container.textContent = "";
  if (view.blocked !== null) {
    const note = el(container, "div", `blocked blocked-${view.blocked.code}`);
    note.textContent = `${view.blocked.code}: ${view.blocked.message}`;
    return;
  }
  const set = view.candidates;
  if (set === null) return;
  const heading = el(container, "h3");
  heading.textContent = set.kind === "start" ? "Pick an opening shot" : "Pick the next shot";
  if (set.kind === "backtrack") {
    const note = el(container, "div", "backtrack-note");
    note.textContent =
      `shot ${set.dropping} has no continuation; ` +
      `picking below resumes from shot ${set.resume_at} and drops it`;
  }
  const list = el(container, "div", "candidate-list");
  if (set.kind === "start") {
    for (const candidate of set.candidates) {
      const row = el(list, "div", "candidate start-candidate");
      row.setAttribute("data-shot", String(candidate.shot));
      const button = el(row, "button", "choose") as HTMLButtonElement;
      button.textContent = `shot ${candidate.shot}`;
      button.addEventListener("click", () => onChoose(candidate.shot));
      const chips = el(row, "div", "tp-chips");
      candidate.tp_scores.forEach((score, i) => {
        const chip = el(chips, "span", "tp-chip");
        chip.textContent = `${TP_NAMES[i]} ${score.toFixed(2)}`;
      });
    }
  } else {
    for (const candidate of set.candidates) {
      const row = el(list, "div", "candidate step-candidate");
      row.setAttribute("data-shot", String(candidate.shot));
      row.setAttribute("data-total", String(candidate.total));
      const button = el(row, "button", "choose") as HTMLButtonElement;
      button.textContent = `shot ${candidate.shot}`;
      button.addEventListener("click", () => onChoose(candidate.shot));
      const total = el(row, "span", "total");
      total.textContent = candidate.total.toFixed(3);
      renderBars(row, candidate);
    }
  }
}
