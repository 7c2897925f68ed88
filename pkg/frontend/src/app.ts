import { Api, ApiError } from "./api.js";
import { SessionStore } from "./store.js";
import { renderCandidates } from "./views/candidates.js";
import { renderFlowChart } from "./views/flow.js";
import { renderGraph } from "./views/graph.js";
import { exportShotList, renderPath } from "./views/path.js";
import type { MovieGraph, SessionView } from "./types.js";

const SVG_NS = "http://www.w3.org/2000/svg";

function readHash(): Record<string, string> {
  const out: Record<string, string> = {};
  for (const part of window.location.hash.replace(/^#/, "").split("&")) {
    const eq = part.indexOf("=");
    if (eq > 0) out[part.slice(0, eq)] = decodeURIComponent(part.slice(eq + 1));
  }
  return out;
}

function writeHash(params: Record<string, string>): void {
  const text = Object.entries(params)
    .map(([k, v]) => `${k}=${encodeURIComponent(v)}`)
    .join("&");
  window.history.replaceState(null, "", `#${text}`);
}

function toast(message: string): void {
  const box = document.getElementById("toast")!;
  box.textContent = message;
  box.classList.add("visible");
  window.setTimeout(() => box.classList.remove("visible"), 4000);
}

async function guard<T>(work: () => Promise<T>): Promise<T | undefined> {
  try {
    return await work();
  } catch (err) {
    if (err instanceof ApiError) {
      toast(`${err.code}: ${err.message}`);
      return undefined;
    }
    toast(String(err));
    throw err;
  }
}

export async function boot(): Promise<void> {
  const hash = readHash();
  const base =
    hash.base ?? `${window.location.protocol}//${window.location.hostname}:8765`;
  const api = new Api(base);
  const store = new SessionStore(api);

  const movieSelect = document.getElementById("movie") as HTMLSelectElement;
  const newButton = document.getElementById("new-session") as HTMLButtonElement;
  const stepButton = document.getElementById("auto-step") as HTMLButtonElement;
  const runButton = document.getElementById("auto-run") as HTMLButtonElement;
  const undoButton = document.getElementById("undo") as HTMLButtonElement;
  const exportButton = document.getElementById("export") as HTMLButtonElement;
  const radiusInput = document.getElementById("radius") as HTMLInputElement;
  const candidatesBox = document.getElementById("candidates") as HTMLElement;
  const pathBox = document.getElementById("path") as HTMLElement;
  const exportBox = document.getElementById("export-out") as HTMLElement;
  const flowSvg = document.getElementById("flow") as unknown as SVGElement;
  const graphSvg = document.getElementById("graph") as unknown as SVGElement;

  let graph: MovieGraph | null = null;

  const render = (view: SessionView): void => {
    renderCandidates(candidatesBox, view, (choice) => {
      void guard(() => store.step(choice));
    });
    renderPath(pathBox, view);
    renderFlowChart(flowSvg, view);
    if (graph !== null) {
      renderGraph(graphSvg, graph, view, Number(radiusInput.value) || 2);
    }
  };
  store.onChange(render);

  const loadGraph = async (movieId: string): Promise<void> => {
    graph = await api.graph(movieId);
  };

  const movies = await guard(() => api.movies());
  if (movies === undefined) return;
  for (const movie of movies) {
    const option = document.createElement("option");
    option.value = movie.movie_id;
    option.textContent = `${movie.movie_id} (${movie.n_shots} shots)`;
    movieSelect.appendChild(option);
  }

  newButton.addEventListener("click", () => {
    void guard(async () => {
      const movieId = movieSelect.value;
      await loadGraph(movieId);
      const view = await store.create(movieId);
      writeHash({ session: store.sessionId!, base });
      return view;
    });
  });
  stepButton.addEventListener("click", () => void guard(() => store.step("auto")));
  runButton.addEventListener("click", () => void guard(() => store.autoRun()));
  undoButton.addEventListener("click", () => void guard(() => store.undo()));
  exportButton.addEventListener("click", () => {
    if (store.view !== null) {
      exportBox.textContent = exportShotList(store.view);
    }
  });
  radiusInput.addEventListener("change", () => {
    if (store.view !== null) render(store.view);
  });

  // a session id in the hash means a reload: rebuild the view from GETs only
  if (hash.session) {
    await guard(async () => {
      const view = await store.attach(hash.session);
      await loadGraph(view.path.movie_id);
      render(view);
      return view;
    });
  }
}

declare global {
  interface Window {
    walkStudioBoot?: () => Promise<void>;
  }
}

if (typeof document !== "undefined" && document.getElementById("candidates") !== null) {
  window.walkStudioBoot = boot;
  void boot();
}

export { SVG_NS };
