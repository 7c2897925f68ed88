import type {
  ApiErrorBody,
  CandidateSet,
  MovieGraph,
  MovieSummary,
  PathView,
  SessionConfig,
  SessionCreated,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string,
    readonly field?: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class Api {
  private readonly base: string;
  private readonly fetchFn: FetchLike;

  constructor(base: string, fetchFn?: FetchLike) {
    this.base = base.replace(/\/+$/, "");
    this.fetchFn = fetchFn ?? ((input, init) => fetch(input, init));
  }

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchFn(this.base + path, init);
    const body = await response.json().catch(() => null);
    if (!response.ok) {
      const err = (body ?? {}) as Partial<ApiErrorBody>;
      throw new ApiError(
        response.status,
        err.code ?? "unknown",
        err.message ?? `request failed with status ${response.status}`,
        err.field,
      );
    }
    return body as T;
  }

  private post<T>(path: string, payload: unknown): Promise<T> {
    return this.request<T>(path, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(payload),
    });
  }

  movies(): Promise<MovieSummary[]> {
    return this.request("/movies");
  }

  graph(movieId: string): Promise<MovieGraph> {
    return this.request(`/movies/${encodeURIComponent(movieId)}/graph`);
  }

  createSession(movieId: string, config?: SessionConfig): Promise<SessionCreated> {
    const payload: Record<string, unknown> = { movie_id: movieId };
    if (config !== undefined) payload.config = config;
    return this.post("/sessions", payload);
  }

  candidates(sessionId: string): Promise<CandidateSet> {
    return this.request(`/sessions/${encodeURIComponent(sessionId)}/candidates`);
  }

  step(sessionId: string, choice: number | "auto"): Promise<PathView> {
    return this.post(`/sessions/${encodeURIComponent(sessionId)}/step`, { choice });
  }

  undo(sessionId: string): Promise<PathView> {
    return this.post(`/sessions/${encodeURIComponent(sessionId)}/undo`, {});
  }

  path(sessionId: string): Promise<PathView> {
    return this.request(`/sessions/${encodeURIComponent(sessionId)}/path`);
  }
}
