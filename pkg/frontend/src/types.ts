// Mirrors of the session service's JSON payloads. Field names match the wire
// format exactly so responses can be used without translation.

export interface MovieSummary {
  movie_id: string;
  n_shots: number;
  n_scenes: number;
  has_tp_labels: boolean;
  has_sentiment: boolean;
}

export interface GraphNode {
  shot: number;
  start_s: number;
  end_s: number;
  intensity: number;
  tps: number[];
  thumbnail_ref?: string;
}

export interface GraphEdge {
  src: number;
  dst: number;
  weight: number;
}

export interface MovieGraph {
  movie_id: string;
  n_shots: number;
  nodes: GraphNode[];
  edges: GraphEdge[];
}

export interface StartCandidate {
  shot: number;
  tp_scores: number[];
  thumbnail_ref?: string;
}

export interface StepCriteria {
  similarity: number;
  proximity: number;
  structure: number;
  sentiment_gap: number;
  spoiler: number;
}

// signed weighted terms; keys present only for active criteria
export type StepContributions = Record<string, number>;

export interface StepCandidate {
  shot: number;
  criteria: StepCriteria;
  contributions: StepContributions;
  total: number;
}

export type CandidateSet =
  | { kind: "start"; candidates: StartCandidate[] }
  | { kind: "step"; candidates: StepCandidate[] }
  // head shot has no continuation; choices are scored from resume_at and
  // stepping to one drops the head first
  | { kind: "backtrack"; candidates: StepCandidate[]; resume_at: number; dropping: number };

export interface PathStep {
  shot: number;
  criteria?: StepCriteria;
  contributions?: StepContributions;
  total?: number;
}

export interface FlowSeries {
  target: number[];
  realized: number[];
}

export interface PathView {
  session_id: string;
  movie_id: string;
  budget: number;
  shots: number[];
  steps: PathStep[];
  flow: FlowSeries;
  tps_covered: number[];
  steps_taken: number;
  done: boolean;
  terminated: string | null;
}

export interface SessionCreated {
  kind: "start";
  candidates: StartCandidate[];
  session_id: string;
  movie_id: string;
  budget: number;
  flow_target: number[];
}

export interface ApiErrorBody {
  code: string;
  message: string;
  field?: string;
}

// Engine overrides accepted by POST /sessions
export interface SessionConfig {
  budget?: number;
  proposals?: number;
  fill_to_budget?: boolean;
  sentiment_mode?: "absolute" | "delta";
  rng_seed?: number;
  weights?: {
    similarity?: number;
    proximity?: number;
    structure?: number;
    sentiment?: number;
  };
  spoiler?: { weight: number; horizon: number } | null;
}

// Everything a render pass needs. `candidates` is null when the walk cannot
// continue; `blocked` then carries the service's explanation (dead-end or
// session-complete).
export interface SessionView {
  path: PathView;
  candidates: CandidateSet | null;
  blocked: ApiErrorBody | null;
}
