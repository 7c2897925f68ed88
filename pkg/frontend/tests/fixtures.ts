import type {
  CandidateSet,
  MovieGraph,
  PathView,
  SessionView,
  StepCandidate,
} from "../src/types.js";

export function pathView(overrides: Partial<PathView> = {}): PathView {
  return {
    session_id: "abc123",
    movie_id: "demo",
    budget: 9,
    shots: [],
    steps: [],
    flow: {
      target: [0.7, 0.7, 0.7, 0.0, 0.0, 0.0, 0.7, 0.8, 0.9],
      realized: [],
    },
    tps_covered: [],
    steps_taken: 0,
    done: false,
    terminated: null,
    ...overrides,
  };
}

export function stepCandidate(shot: number, contributions: Record<string, number>): StepCandidate {
  const total = Object.values(contributions).reduce((a, v) => a + v, 0);
  return {
    shot,
    criteria: {
      similarity: Math.abs(contributions.similarity ?? 0),
      proximity: Math.abs(contributions.proximity ?? 0) / 5,
      structure: Math.abs(contributions.structure ?? 0) / 10,
      sentiment_gap: Math.abs(contributions.sentiment ?? 0) / 10,
      spoiler: 0.0,
    },
    contributions,
    total,
  };
}

export function sessionView(overrides: Partial<SessionView> = {}): SessionView {
  return {
    path: pathView(),
    candidates: null,
    blocked: null,
    ...overrides,
  };
}

export function startSet(shots: number[]): CandidateSet {
  return {
    kind: "start",
    candidates: shots.map((shot, i) => ({
      shot,
      tp_scores: [0.9 - 0.1 * i, 0.2, 0.3, 0.4, 0.5],
    })),
  };
}

export const TINY_GRAPH: MovieGraph = {
  movie_id: "demo",
  n_shots: 10,
  nodes: Array.from({ length: 10 }, (_, shot) => ({
    shot,
    start_s: shot * 2,
    end_s: shot * 2 + 2,
    intensity: 0.1 * shot,
    tps: shot === 1 ? [1] : [],
  })),
  edges: [
    { src: 0, dst: 1, weight: 0.5 },
    { src: 1, dst: 2, weight: 0.4 },
    { src: 2, dst: 3, weight: 0.3 },
    { src: 0, dst: 9, weight: 0.2 },
  ],
};
