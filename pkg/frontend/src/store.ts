import { Api, ApiError } from "./api.js";
import type { SessionConfig, SessionView } from "./types.js";

export type Listener = (view: SessionView) => void;

// Codes the candidates endpoint uses to say "no further choices", which the
// UI shows as a terminal banner rather than an error.
const BLOCKED_CODES = new Set(["dead-end", "session-complete"]);

/**
 * Holds exactly one session and no state the service does not. Every
 * mutation round-trips; the view is always rebuilt from GET endpoints, so
 * attaching by session id after a reload reconstructs the identical view.
 */
export class SessionStore {
  private id: string | null = null;
  view: SessionView | null = null;
  private listeners: Listener[] = [];

  constructor(private readonly api: Api) {}

  get sessionId(): string | null {
    return this.id;
  }

  onChange(listener: Listener): void {
    this.listeners.push(listener);
  }

  private emit(): void {
    if (this.view === null) return;
    for (const listener of this.listeners) listener(this.view);
  }

  async create(movieId: string, config?: SessionConfig): Promise<SessionView> {
    const created = await this.api.createSession(movieId, config);
    this.id = created.session_id;
    return this.refresh();
  }

  async attach(sessionId: string): Promise<SessionView> {
    this.id = sessionId;
    return this.refresh();
  }

  private requireId(): string {
    if (this.id === null) throw new Error("no active session");
    return this.id;
  }

  async refresh(): Promise<SessionView> {
    const id = this.requireId();
    const path = await this.api.path(id);
    let view: SessionView;
    try {
      const candidates = await this.api.candidates(id);
      view = { path, candidates, blocked: null };
    } catch (err) {
      if (err instanceof ApiError && BLOCKED_CODES.has(err.code)) {
        view = {
          path,
          candidates: null,
          blocked: { code: err.code, message: err.message, field: err.field },
        };
      } else {
        throw err;
      }
    }
    this.view = view;
    this.emit();
    return view;
  }

  async step(choice: number | "auto"): Promise<SessionView> {
    await this.api.step(this.requireId(), choice);
    return this.refresh();
  }

  async undo(): Promise<SessionView> {
    await this.api.undo(this.requireId());
    return this.refresh();
  }

  /** Drive "auto" steps until the walk terminates or the budget is filled. */
  async autoRun(onStep?: (view: SessionView) => void): Promise<SessionView> {
    let view = this.view ?? (await this.refresh());
    while (!view.path.done && view.blocked === null) {
      view = await this.step("auto");
      if (onStep) onStep(view);
    }
    return view;
  }
}
