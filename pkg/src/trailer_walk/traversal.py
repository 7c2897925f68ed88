"""Greedy multi-criteria walks over the shot graph.

Each step moves from the current shot to the neighbor maximizing a weighted
combination of four criteria: semantic similarity (the renormalized edge
weight), temporal proximity (penalizing long jumps), narrative structure
(penalizing distance from the next uncovered turning point), and sentiment
(penalizing deviation from the target intensity schedule). An optional fifth
criterion penalizes shots close to the last two turning points, which tend
to spoil the ending.

A walk starts at a first-turning-point shot, selects shots until the budget
is exhausted (or, optionally, until all turning points are covered), and
records a per-step score breakdown so selections stay explainable.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .model_core import FlowSchedule, MovieGraph, flow_target, hops_to, shortest_hops

__all__ = [
    "CriterionWeights",
    "SpoilerPenalty",
    "TraversalConfig",
    "TPSets",
    "StepScore",
    "PathStep",
    "TrailerPath",
    "covered_tps",
    "step_score",
    "traverse",
    "enumerate_proposals",
    "enumerate_degenerate",
    "rank_proposals",
]

N_TPS = 5


@dataclass(frozen=True)
class CriterionWeights:
    """Non-negative weights combining the four step criteria."""

    similarity: float = 1.0
    proximity: float = 5.0
    structure: float = 10.0
    sentiment: float = 10.0

    def __post_init__(self):
        for name in ("similarity", "proximity", "structure", "sentiment"):
            v = float(getattr(self, name))
            if not np.isfinite(v) or v < 0:
                raise ValueError(f"criterion weight {name} must be finite and >= 0, got {v}")

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.similarity, self.proximity, self.structure, self.sentiment)


@dataclass(frozen=True)
class SpoilerPenalty:
    """Penalty for candidates within ``horizon`` hops of the last two TPs."""

    weight: float
    horizon: int

    def __post_init__(self):
        if self.weight < 0 or not np.isfinite(self.weight):
            raise ValueError("spoiler weight must be finite and >= 0")
        if self.horizon < 1:
            raise ValueError("spoiler horizon must be >= 1 hop")


@dataclass(frozen=True)
class TraversalConfig:
    """Everything a walk needs besides the graph and the labels."""

    weights: CriterionWeights = CriterionWeights()
    budget: int = 10
    proposals: int = 5
    schedule: FlowSchedule | None = None
    fill_to_budget: bool = True
    spoiler: SpoilerPenalty | None = None
    sentiment_mode: str = "absolute"  # "absolute": match |sentiment(j)| to the
    # target; "delta": match the intensity change from i to j instead.
    rng_seed: int = 0

    def __post_init__(self):
        if self.budget < 1:
            raise ValueError("budget must be >= 1")
        if self.proposals < 1:
            raise ValueError("proposals must be >= 1")
        if self.sentiment_mode not in ("absolute", "delta"):
            raise ValueError(f"unknown sentiment_mode: {self.sentiment_mode!r}")
        if self.schedule is None:
            object.__setattr__(self, "schedule", FlowSchedule(budget=max(self.budget, 3)))
        if self.schedule.budget < self.budget:
            raise ValueError(
                f"flow schedule covers {self.schedule.budget} shots but budget is {self.budget}"
            )


@dataclass(frozen=True)
class TPSets:
    """Shot-id sets for the five turning points, in story order.

    Sets may overlap and may be empty (a TP nobody labeled). ``scores``,
    when present, holds the per-shot TP probabilities the sets were derived
    from and drives the ordering of proposal start shots.
    """

    sets: tuple[frozenset[int], ...]
    scores: np.ndarray | None = None

    def __post_init__(self):
        if len(self.sets) != N_TPS:
            raise ValueError(f"expected {N_TPS} turning-point sets, got {len(self.sets)}")
        sets = tuple(frozenset(int(i) for i in s) for s in self.sets)
        for s in sets:
            if any(i < 0 for i in s):
                raise ValueError("turning-point sets must contain valid shot ids")
        object.__setattr__(self, "sets", sets)
        if self.scores is not None:
            sc = np.asarray(self.scores, dtype=float)
            if sc.ndim != 2 or sc.shape[1] != N_TPS:
                raise ValueError("scores must be an (n_shots, 5) matrix")
            sc = sc.copy()
            sc.setflags(write=False)
            object.__setattr__(self, "scores", sc)

    @classmethod
    def empty(cls) -> "TPSets":
        return cls(sets=tuple(frozenset() for _ in range(N_TPS)))

    @classmethod
    def from_scores(cls, scores, top_c: int) -> "TPSets":
        """Top ``top_c`` shots per TP by score; ties go to the earlier shot."""
        sc = np.asarray(scores, dtype=float)
        if sc.ndim != 2 or sc.shape[1] != N_TPS:
            raise ValueError("scores must be an (n_shots, 5) matrix")
        if top_c < 1:
            raise ValueError("top_c must be >= 1")
        sets = []
        for t in range(N_TPS):
            order = np.argsort(-sc[:, t], kind="stable")
            sets.append(frozenset(int(i) for i in order[:top_c]))
        return cls(sets=tuple(sets), scores=sc)

    @classmethod
    def from_flags(cls, flags) -> "TPSets":
        """Explicit labels: ``flags`` is an (n_shots, 5) boolean matrix."""
        f = np.asarray(flags, dtype=bool)
        if f.ndim != 2 or f.shape[1] != N_TPS:
            raise ValueError("flags must be an (n_shots, 5) matrix")
        return cls(sets=tuple(frozenset(np.flatnonzero(f[:, t]).tolist()) for t in range(N_TPS)))

    @property
    def is_empty(self) -> bool:
        return all(not s for s in self.sets)

    def defined(self) -> tuple[int, ...]:
        """1-based TP numbers that have at least one labeled shot."""
        return tuple(t + 1 for t in range(N_TPS) if self.sets[t])

    def shots_for(self, tp: int) -> frozenset[int]:
        """Shot set for a 1-based TP number."""
        if not (1 <= tp <= N_TPS):
            raise ValueError(f"turning point number must be 1..{N_TPS}, got {tp}")
        return self.sets[tp - 1]


@dataclass(frozen=True)
class StepScore:
    """Raw criterion values for one candidate, plus the combined total."""

    shot: int
    similarity: float
    proximity: float
    structure: float
    sentiment_gap: float
    spoiler: float
    total: float

    def contributions(self, config: TraversalConfig) -> dict[str, float]:
        """Weighted signed contributions; they sum to ``total``."""
        w = config.weights
        out = {
            "similarity": w.similarity * self.similarity,
            "proximity": -w.proximity * self.proximity,
            "structure": -w.structure * self.structure,
            "sentiment": -w.sentiment * self.sentiment_gap,
        }
        if config.spoiler is not None:
            out["spoiler"] = -config.spoiler.weight * self.spoiler
        return out


@dataclass(frozen=True)
class PathStep:
    """A shot in the path; the start shot carries no selection score."""

    shot: int
    score: StepScore | None = None


@dataclass(frozen=True)
class TrailerPath:
    """Ordered shot selection with bookkeeping derived from the path itself."""

    start: int
    steps: tuple[PathStep, ...]
    flow_trace: tuple[float, ...]
    tps_covered: frozenset[int]
    terminated_reason: str
    duplicate_of: int | None = None

    def __post_init__(self):
        ids = [s.shot for s in self.steps]
        if len(set(ids)) != len(ids):
            raise ValueError("trailer path repeats a shot")
        if self.terminated_reason not in ("budget", "all-TPs", "dead-end"):
            raise ValueError(f"unknown termination reason: {self.terminated_reason!r}")

    @property
    def shot_ids(self) -> tuple[int, ...]:
        return tuple(s.shot for s in self.steps)

    @property
    def mean_score(self) -> float:
        """Mean total over scored steps; -inf for a start-only path."""
        totals = [s.score.total for s in self.steps if s.score is not None]
        if not totals:
            return float("-inf")
        return float(np.mean(totals))


def covered_tps(path_shots, tp_sets: TPSets, graph: MovieGraph) -> frozenset[int]:
    """TPs (1-based) covered by a path: a TP counts as presented when a path
    shot or one of its immediate graph neighbors belongs to the TP's set."""
    out = set()
    for s in path_shots:
        reach = {int(s)} | set(graph.neighbor_ids(int(s)))
        for t in range(N_TPS):
            if tp_sets.sets[t] and reach & tp_sets.sets[t]:
                out.add(t + 1)
    return frozenset(out)


def _next_uncovered(tp_sets: TPSets, covered) -> frozenset[int]:
    """Shot set of the lowest-numbered labeled TP not yet covered."""
    for t in range(N_TPS):
        if tp_sets.sets[t] and (t + 1) not in covered:
            return tp_sets.sets[t]
    return frozenset()


def step_score(
    graph: MovieGraph,
    current: int,
    candidate: int,
    step_k: int,
    intensities,
    tp_sets: TPSets,
    config: TraversalConfig,
    covered=frozenset(),
) -> StepScore:
    """Score moving from ``current`` to ``candidate`` as the path's k-th shot.

    ``intensities`` is the per-shot absolute sentiment intensity array;
    ``covered`` is the set of TP numbers already presented, which determines
    the structure criterion's target set.
    """
    nbrs = dict(graph.neighbors(current))
    if candidate not in nbrs:
        raise ValueError(f"shot {candidate} is not a neighbor of shot {current}")
    if not (1 <= step_k <= config.budget):
        raise ValueError(f"step {step_k} outside 1..{config.budget}")
    intensities = np.asarray(intensities, dtype=float)
    w = config.weights

    similarity = nbrs[candidate]
    proximity = (candidate - current) / graph.n_shots
    structure = shortest_hops(graph, candidate, _next_uncovered(tp_sets, covered))
    target = flow_target(step_k, config.schedule)
    if config.sentiment_mode == "absolute":
        realized = intensities[candidate]
    else:
        realized = abs(intensities[candidate] - intensities[current])
    sentiment_gap = abs(realized - target)

    total = (
        w.similarity * similarity
        - w.proximity * proximity
        - w.structure * structure
        - w.sentiment * sentiment_gap
    )
    spoiler = 0.0
    if config.spoiler is not None:
        danger = tp_sets.sets[3] | tp_sets.sets[4]
        h = hops_to(graph, candidate, danger)
        if h is not None:
            spoiler = max(0.0, 1.0 - h / config.spoiler.horizon)
        total -= config.spoiler.weight * spoiler
    return StepScore(
        shot=candidate,
        similarity=float(similarity),
        proximity=float(proximity),
        structure=float(structure),
        sentiment_gap=float(sentiment_gap),
        spoiler=float(spoiler),
        total=float(total),
    )


def _legal_candidates(graph: MovieGraph, current: int, visited) -> list[int]:
    return [j for j, _ in graph.neighbors(current) if j not in visited]


def traverse(
    graph: MovieGraph,
    tp_sets: TPSets,
    intensities,
    config: TraversalConfig,
    start: int,
) -> TrailerPath:
    """Run one greedy walk from ``start`` and return the selected path.

    The walk repeatedly picks the unvisited neighbor with the highest step
    score (ties to the smaller shot id). On a dead end it backtracks a single
    step and tries the previous shot's remaining candidates; if that also
    fails the walk ends. Already-selected shots are never revisited, even
    after backtracking.
    """
    graph._check_node(start)
    tp1 = tp_sets.sets[0]
    if tp1 and start not in tp1:
        raise ValueError(
            f"start shot {start} is not a first-turning-point candidate"
        )
    intensities = np.asarray(intensities, dtype=float)
    if intensities.shape != (graph.n_shots,):
        raise ValueError("intensities must have one entry per shot")

    path: list[PathStep] = [PathStep(shot=start)]
    visited = {start}
    reason = "budget"
    while True:
        shots_so_far = [p.shot for p in path]
        covered = covered_tps(shots_so_far, tp_sets, graph)
        defined = set(tp_sets.defined())
        if not config.fill_to_budget and defined and defined <= covered:
            reason = "all-TPs"
            break
        if len(path) >= config.budget:
            reason = "budget"
            break
        current = path[-1].shot
        candidates = _legal_candidates(graph, current, visited)
        if not candidates:
            # Single-step backtrack: drop the dead-end shot and resume from
            # the previous one, but only when that actually opens candidates;
            # otherwise keep the shot and end the walk.
            alt = _legal_candidates(graph, path[-2].shot, visited) if len(path) >= 2 else []
            if not alt:
                reason = "dead-end"
                break
            path.pop()
            current = path[-1].shot
            candidates = alt
            covered = covered_tps([p.shot for p in path], tp_sets, graph)
        k = len(path) + 1
        best = None
        for j in candidates:
            s = step_score(graph, current, j, k, intensities, tp_sets, config, covered)
            if best is None or s.total > best.total or (s.total == best.total and j < best.shot):
                best = s
        path.append(PathStep(shot=best.shot, score=best))
        visited.add(best.shot)

    shots = [p.shot for p in path]
    return TrailerPath(
        start=start,
        steps=tuple(path),
        flow_trace=tuple(float(intensities[s]) for s in shots),
        tps_covered=covered_tps(shots, tp_sets, graph),
        terminated_reason=reason,
    )


def _start_order(tp_sets: TPSets) -> list[int]:
    tp1 = tp_sets.sets[0]
    if tp_sets.scores is not None:
        order = np.argsort(-tp_sets.scores[:, 0], kind="stable")
        return [int(i) for i in order if int(i) in tp1]
    return sorted(tp1)


def enumerate_proposals(
    graph: MovieGraph,
    tp_sets: TPSets,
    intensities,
    config: TraversalConfig,
) -> list[TrailerPath]:
    """One walk per start shot, starts being the best first-TP candidates.

    At most ``config.proposals`` starts are used, ordered by first-TP score
    when scores exist (shot id otherwise). Identical resulting paths are kept
    but flagged with the start they duplicate.
    """
    if not tp_sets.sets[0]:
        raise ValueError(
            "no first-turning-point shots are labeled; use enumerate_degenerate "
            "for movies without turning-point data"
        )
    starts = _start_order(tp_sets)[: config.proposals]
    return _walk_all(graph, tp_sets, intensities, config, starts)


def enumerate_degenerate(
    graph: MovieGraph,
    intensities,
    config: TraversalConfig,
) -> list[TrailerPath]:
    """Proposal walks for movies without TP labels: seeded random starts."""
    rng = np.random.default_rng(config.rng_seed)
    n = min(config.proposals, graph.n_shots)
    starts = [int(i) for i in rng.choice(graph.n_shots, size=n, replace=False)]
    return _walk_all(graph, TPSets.empty(), intensities, config, starts)


def _walk_all(graph, tp_sets, intensities, config, starts) -> list[TrailerPath]:
    # Walks from different starts can converge onto the same selected
    # sequence; later arrivals are kept but flagged with the first start.
    proposals = []
    seen: dict[tuple[int, ...], int] = {}
    for start in starts:
        p = traverse(graph, tp_sets, intensities, config, start)
        key = p.shot_ids[1:]
        if key and key in seen:
            p = replace(p, duplicate_of=seen[key])
        elif key:
            seen[key] = start
        proposals.append(p)
    return proposals


def rank_proposals(proposals) -> list[TrailerPath]:
    """Best proposal first: mean step score, then TP coverage, then start id."""
    proposals = list(proposals)
    if not proposals:
        raise ValueError("cannot rank an empty proposal list")
    return sorted(
        proposals,
        key=lambda p: (-p.mean_score, -len(p.tps_covered), p.start),
    )
