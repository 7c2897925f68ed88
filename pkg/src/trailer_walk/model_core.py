"""Core domain types and graph machinery for trailer walks.

A movie is modeled as a directed acyclic shot graph: nodes are shots in
temporal order, edges only point forward in time, and edge weights form a
row-stochastic transition matrix. This module owns the types, the graph
construction pipeline (similarity -> normalization -> sparsification),
shortest-hop distances used by the structure criterion, and the target
sentiment-intensity schedule that shapes a trailer's emotional arc.

All types are immutable after construction and every operation is a pure
function, so everything here is safe to share across workers.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "ShotRecord",
    "SignedSentiment",
    "MovieGraph",
    "SimilarityParams",
    "FlowSchedule",
    "build_similarity",
    "normalize_transition",
    "sparsify",
    "build_movie_graph",
    "shortest_hops",
    "hops_to",
    "flow_target",
    "flow_targets",
    "sentiment_intensities",
]

SENTIMENT_SUM_TOL = 1e-6
DEFAULT_K_OPTIONS = tuple(range(6, 13))


def _readonly(a: np.ndarray) -> np.ndarray:
    out = np.asarray(a, dtype=float).copy()
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class ShotRecord:
    """One movie shot: time span, embedding, sentiment, optional labels.

    ``sentiment`` is a distribution over (negative, neutral, positive).
    ``tp_scores`` holds, when available, five probabilities that this shot
    realizes each of the five narrative turning points. ``is_trailer`` is an
    optional silver label saying whether the shot appears in a real trailer.
    """

    id: int
    start_s: float
    end_s: float
    embedding: np.ndarray
    sentiment: np.ndarray | None = None
    tp_scores: np.ndarray | None = None
    is_trailer: bool | None = None
    thumbnail_ref: str | None = None

    def __post_init__(self):
        if self.id < 0:
            raise ValueError(f"shot id must be >= 0, got {self.id}")
        if not self.end_s > self.start_s:
            raise ValueError(
                f"shot {self.id}: end_s ({self.end_s}) must exceed start_s ({self.start_s})"
            )
        emb = _readonly(self.embedding)
        if emb.ndim != 1:
            raise ValueError(f"shot {self.id}: embedding must be a vector")
        if not np.all(np.isfinite(emb)):
            raise ValueError(f"shot {self.id}: embedding has non-finite entries")
        object.__setattr__(self, "embedding", emb)
        if self.sentiment is not None:
            s = _readonly(self.sentiment)
            if s.shape != (3,):
                raise ValueError(f"shot {self.id}: sentiment must have 3 components")
            if np.any(s < 0) or abs(float(s.sum()) - 1.0) > SENTIMENT_SUM_TOL:
                raise ValueError(f"shot {self.id}: sentiment must be a distribution")
            object.__setattr__(self, "sentiment", s)
        if self.tp_scores is not None:
            t = _readonly(self.tp_scores)
            if t.shape != (5,):
                raise ValueError(f"shot {self.id}: tp_scores must have 5 entries")
            if np.any(t < 0) or np.any(t > 1):
                raise ValueError(f"shot {self.id}: tp_scores must lie in [0, 1]")
            object.__setattr__(self, "tp_scores", t)

    @property
    def duration_s(self) -> float:
        return self.end_s - self.start_s


@dataclass(frozen=True)
class SignedSentiment:
    """Scalar sentiment: P(positive) - P(negative), in [-1, 1]."""

    value: float

    def __post_init__(self):
        if abs(self.value) > 1.0:
            raise ValueError(f"signed sentiment out of range: {self.value}")

    @property
    def intensity(self) -> float:
        return abs(self.value)

    @classmethod
    def from_distribution(cls, dist) -> "SignedSentiment":
        d = np.asarray(dist, dtype=float)
        return cls(float(d[2] - d[0]))


@dataclass(frozen=True)
class SimilarityParams:
    """Controls pairwise shot similarity and neighborhood selection.

    ``mode`` is either ``"cosine"`` (inference on precomputed embeddings) or
    ``"bilinear-tanh"`` (tanh feature maps on both endpoints plus a bias).
    Neighborhood size is picked per node from ``k_options``: ``fixed`` always
    uses ``fixed_k``; ``mass-coverage`` uses the smallest option whose top-k
    outgoing weights reach ``coverage``, falling back to the largest option.
    """

    mode: str = "cosine"
    weight_src: np.ndarray | None = None
    weight_dst: np.ndarray | None = None
    bias_src: np.ndarray | None = None
    bias_dst: np.ndarray | None = None
    bias_pair: float = 0.0
    k_mode: str = "mass-coverage"
    fixed_k: int | None = None
    coverage: float = 0.8
    k_options: tuple[int, ...] = DEFAULT_K_OPTIONS

    def __post_init__(self):
        if self.mode not in ("cosine", "bilinear-tanh"):
            raise ValueError(f"unknown similarity mode: {self.mode!r}")
        if self.k_mode not in ("fixed", "mass-coverage"):
            raise ValueError(f"unknown k selection mode: {self.k_mode!r}")
        opts = tuple(sorted(set(int(k) for k in self.k_options)))
        if not opts or opts[0] < 1:
            raise ValueError("k_options must be a non-empty set of integers >= 1")
        if self.k_mode == "fixed":
            if self.fixed_k is None:
                raise ValueError("fixed k selection requires fixed_k")
            if self.fixed_k not in opts:
                # A bare fixed(k) is shorthand for options {k}.
                if self.k_options == DEFAULT_K_OPTIONS:
                    opts = (int(self.fixed_k),)
                else:
                    raise ValueError(
                        f"fixed_k={self.fixed_k} not in k_options {opts}"
                    )
        else:
            if not (0.0 < self.coverage <= 1.0):
                raise ValueError("coverage must lie in (0, 1]")
        object.__setattr__(self, "k_options", opts)
        for name in ("weight_src", "weight_dst", "bias_src", "bias_dst"):
            v = getattr(self, name)
            if v is not None:
                object.__setattr__(self, name, _readonly(v))

    def materialized(self, dim: int) -> "SimilarityParams":
        """Fill in zero weight matrices/biases for bilinear-tanh at ``dim``."""
        if self.mode != "bilinear-tanh":
            return self
        kw = {}
        if self.weight_src is None:
            kw["weight_src"] = np.zeros((dim, dim))
        if self.weight_dst is None:
            kw["weight_dst"] = np.zeros((dim, dim))
        if self.bias_src is None:
            kw["bias_src"] = np.zeros(dim)
        if self.bias_dst is None:
            kw["bias_dst"] = np.zeros(dim)
        if not kw:
            return self
        from dataclasses import replace

        return replace(self, **kw)


@dataclass(frozen=True)
class MovieGraph:
    """Sparse forward-directed shot graph.

    ``transition`` is the dense strictly-upper-triangular row-stochastic
    matrix; ``neighborhoods[i]`` lists ``(target, weight)`` pairs with
    ``target > i`` and weights renormalized to sum to one; ``k_per_node[i]``
    records the neighborhood size option chosen for node ``i``.
    """

    n_shots: int
    transition: np.ndarray
    neighborhoods: tuple[tuple[tuple[int, float], ...], ...]
    k_per_node: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "transition", _readonly(self.transition))
        if self.transition.shape != (self.n_shots, self.n_shots):
            raise ValueError("transition matrix shape does not match n_shots")
        if len(self.neighborhoods) != self.n_shots or len(self.k_per_node) != self.n_shots:
            raise ValueError("per-node data does not match n_shots")
        for i, nbrs in enumerate(self.neighborhoods):
            for j, _ in nbrs:
                if j <= i or j >= self.n_shots:
                    raise ValueError(f"node {i}: neighbor {j} is not a future shot")

    def neighbors(self, node: int) -> tuple[tuple[int, float], ...]:
        self._check_node(node)
        return self.neighborhoods[node]

    def neighbor_ids(self, node: int) -> tuple[int, ...]:
        return tuple(j for j, _ in self.neighbors(node))

    def _check_node(self, node: int) -> None:
        if not (0 <= node < self.n_shots):
            raise ValueError(f"invalid node id {node} for graph of {self.n_shots} shots")

    def edges(self):
        """Yield (source, target, weight) over the sparse neighborhoods."""
        for i, nbrs in enumerate(self.neighborhoods):
            for j, w in nbrs:
                yield i, j, w


@dataclass(frozen=True)
class FlowSchedule:
    """Piecewise target for absolute sentiment intensity along a trailer.

    A trailer of ``budget`` shots splits into three sections: medium
    intensity (``base``) to hook the viewer, near-zero intensity to deliver
    story information, then a ramp from ``base`` upward by ``ramp`` per shot,
    clipped at ``cap``, peaking at the final shot.
    """

    budget: int = 10
    base: float = 0.7
    ramp: float = 0.1
    cap: float = 1.0

    def __post_init__(self):
        if self.budget < 3:
            raise ValueError("flow schedule needs a budget of at least 3 shots")
        if not (0.0 <= self.base <= self.cap <= 1.0):
            raise ValueError("flow schedule requires 0 <= base <= cap <= 1")
        if self.ramp < 0:
            raise ValueError("flow schedule ramp must be >= 0")


def _embedding_matrix(shots) -> np.ndarray:
    if len(shots) < 2:
        raise ValueError("graph needs >=2 shots")
    dims = {s.embedding.shape[0] for s in shots}
    if len(dims) != 1:
        raise ValueError(f"inconsistent embedding dimensions: {sorted(dims)}")
    for s in shots:
        if not np.all(np.isfinite(s.embedding)):
            raise ValueError(f"shot {s.id}: embedding has non-finite entries")
    return np.stack([s.embedding for s in shots])


def build_similarity(shots, params: SimilarityParams) -> np.ndarray:
    """Raw pairwise similarity matrix between all shots (not yet masked).

    In cosine mode entries are cosine similarities between embeddings; in
    bilinear-tanh mode each entry is the dot product of tanh feature maps of
    the two endpoints plus a pairwise bias.
    """
    H = _embedding_matrix(shots)
    m, dim = H.shape
    if params.mode == "cosine":
        norms = np.linalg.norm(H, axis=1)
        safe = np.where(norms > 0, norms, 1.0)
        U = H / safe[:, None]
        sim = U @ U.T
        # Zero embeddings have no direction; pin their similarities to 0.
        zero = norms == 0
        sim[zero, :] = 0.0
        sim[:, zero] = 0.0
        return sim
    p = params.materialized(dim)
    for name in ("weight_src", "weight_dst"):
        w = getattr(p, name)
        if w.shape != (dim, dim):
            raise ValueError(f"{name} must be {dim}x{dim}, got {w.shape}")
    for name in ("bias_src", "bias_dst"):
        b = getattr(p, name)
        if b.shape != (dim,):
            raise ValueError(f"{name} must have dimension {dim}, got {b.shape}")
    src = np.tanh(H @ p.weight_src.T + p.bias_src)
    dst = np.tanh(H @ p.weight_dst.T + p.bias_dst)
    return src @ dst.T + p.bias_pair


def normalize_transition(raw: np.ndarray) -> np.ndarray:
    """Turn a raw similarity matrix into the forward transition matrix.

    Entries at or below the diagonal are zeroed and each remaining row is
    softmax-normalized over its future entries, so every non-terminal row
    sums to one and the last row (no future shots) is all zeros.
    """
    E = np.asarray(raw, dtype=float)
    if E.ndim != 2 or E.shape[0] != E.shape[1]:
        raise ValueError("similarity matrix must be square")
    m = E.shape[0]
    if m < 2:
        raise ValueError("graph needs >=2 shots")
    if not np.all(np.isfinite(E)):
        raise ValueError("similarity matrix has non-finite entries")
    out = np.zeros((m, m))
    for i in range(m - 1):
        row = E[i, i + 1 :]
        z = np.exp(row - row.max())
        out[i, i + 1 :] = z / z.sum()
    return out


def _choose_k(future_weights: np.ndarray, params: SimilarityParams) -> int:
    if params.k_mode == "fixed":
        return int(params.fixed_k)
    if future_weights.size:
        desc = np.sort(future_weights)[::-1]
        mass = np.cumsum(desc)
        for k in params.k_options:
            got = mass[min(k, desc.size) - 1]
            if got >= params.coverage - 1e-12:
                return k
    return params.k_options[-1]


def sparsify(transition: np.ndarray, params: SimilarityParams) -> MovieGraph:
    """Keep each node's top-k outgoing edges and renormalize their weights.

    k is chosen per node from ``params.k_options``; ties between equal
    weights break toward the smaller shot index so the result is
    deterministic. Terminal nodes get empty neighborhoods.
    """
    T = np.asarray(transition, dtype=float)
    m = T.shape[0]
    neighborhoods = []
    ks = []
    for i in range(m):
        future = T[i, i + 1 :]
        k = _choose_k(future, params)
        ks.append(k)
        take = min(k, future.size)
        if take == 0:
            neighborhoods.append(())
            continue
        # Stable sort on -weight keeps smaller indices first among ties.
        idx = np.sort(np.argsort(-future, kind="stable")[:take])
        weights = future[idx]
        total = weights.sum()
        if total <= 0:
            weights = np.full(idx.size, 1.0 / idx.size)
        else:
            weights = weights / total
        neighborhoods.append(tuple((int(i + 1 + j), float(w)) for j, w in zip(idx, weights)))
    return MovieGraph(
        n_shots=m,
        transition=T,
        neighborhoods=tuple(neighborhoods),
        k_per_node=tuple(ks),
    )


def build_movie_graph(shots, params: SimilarityParams | None = None) -> MovieGraph:
    """Similarity -> forward normalization -> top-k sparsification."""
    params = params or SimilarityParams()
    return sparsify(normalize_transition(build_similarity(shots, params)), params)


def hops_to(graph: MovieGraph, start: int, targets) -> int | None:
    """Fewest directed hops from ``start`` to any target, or None if unreachable."""
    graph._check_node(start)
    target_set = set(targets)
    for t in target_set:
        graph._check_node(t)
    if start in target_set:
        return 0
    if not target_set:
        return None
    seen = {start}
    frontier = deque([(start, 0)])
    while frontier:
        node, d = frontier.popleft()
        for j, _ in graph.neighborhoods[node]:
            if j in target_set:
                return d + 1
            if j not in seen:
                seen.add(j)
                frontier.append((j, d + 1))
    return None


def shortest_hops(graph: MovieGraph, start: int, targets) -> float:
    """BFS hop distance from ``start`` to the nearest target, divided by the
    graph size. Returns 0.0 when already at a target and 1.0 when the target
    set is empty or unreachable, so values are comparable across movies."""
    h = hops_to(graph, start, targets)
    if h is None:
        return 1.0
    return h / graph.n_shots


def flow_target(k: int, schedule: FlowSchedule) -> float:
    """Target intensity for the k-th shot (1-based) of an L-shot trailer."""
    L = schedule.budget
    if not (1 <= k <= L):
        raise ValueError(f"step {k} outside schedule of {L} shots")
    third = L // 3
    if k <= third:
        return schedule.base
    if k <= 2 * third:
        return 0.0
    offset = k - 2 * third - 1  # leftover shots all land in the final ramp
    # Schedule values are human-scale decimals; round away float drift so the
    # ramp hits 0.8/0.9/... exactly.
    return min(round(schedule.base + schedule.ramp * offset, 12), schedule.cap)


def flow_targets(schedule: FlowSchedule) -> tuple[float, ...]:
    return tuple(flow_target(k, schedule) for k in range(1, schedule.budget + 1))


def sentiment_intensities(shots) -> np.ndarray:
    """Absolute signed sentiment per shot; 0.0 where sentiment is missing."""
    out = np.zeros(len(shots))
    for n, s in enumerate(shots):
        if s.sentiment is not None:
            out[n] = SignedSentiment.from_distribution(s.sentiment).intensity
    return out
