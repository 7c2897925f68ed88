"""Shared synthetic-data factories and numeric oracles for the test suite."""

import numpy as np
import pytest

from trailer_walk.model_core import MovieGraph, ShotRecord, SimilarityParams, build_movie_graph


def graph_from_edges(m, edges):
    """Hand-built graph; edges maps src -> [(dst, weight), ...] summing to 1."""
    t = np.zeros((m, m))
    nbhd = []
    for i in range(m):
        pairs = tuple(sorted(edges.get(i, ())))
        for j, w in pairs:
            t[i, j] = w
        nbhd.append(tuple((int(j), float(w)) for j, w in pairs))
    return MovieGraph(
        n_shots=m,
        transition=t,
        neighborhoods=tuple(nbhd),
        k_per_node=tuple(len(n) for n in nbhd),
    )


def chain_graph(m):
    return graph_from_edges(m, {i: [(i + 1, 1.0)] for i in range(m - 1)})


def central_difference(f, x, h=1e-5):
    """Gradient of scalar ``f`` at ``x`` by central differences, elementwise."""
    x = np.asarray(x, dtype=float)
    g = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        hi = x.copy()
        hi[idx] += h
        lo = x.copy()
        lo[idx] -= h
        g[idx] = (f(hi) - f(lo)) / (2 * h)
    return g


def gradient_gap(analytic, numeric):
    """Max elementwise difference scaled by the gradient magnitude."""
    analytic = np.asarray(analytic, dtype=float)
    numeric = np.asarray(numeric, dtype=float)
    scale = max(float(np.abs(numeric).max()), 1e-8)
    return float(np.abs(analytic - numeric).max() / scale)


def random_shots(m, dim=6, seed=0, with_sentiment=True, with_tp=True):
    rng = np.random.default_rng(seed)
    shots = []
    t = 0.0
    for i in range(m):
        dur = float(rng.uniform(0.5, 8.0))
        sentiment = None
        if with_sentiment:
            raw = rng.uniform(0.05, 1.0, size=3)
            sentiment = raw / raw.sum()
        tp = rng.uniform(0, 1, size=5) if with_tp else None
        shots.append(
            ShotRecord(
                id=i,
                start_s=t,
                end_s=t + dur,
                embedding=rng.normal(size=dim),
                sentiment=sentiment,
                tp_scores=tp,
            )
        )
        t += dur
    return shots


def random_graph(m, seed=0, dim=6, params=None):
    shots = random_shots(m, dim=dim, seed=seed)
    graph = build_movie_graph(shots, params or SimilarityParams())
    return graph, shots


def full_bundle(m=24, dim=6, seed=0, movie_id="demo", n_scenes=5, n_trailer=4, with_silver=True):
    """Bundle with every optional section: scenes, mapping, trailer, labels."""
    from dataclasses import replace

    from trailer_walk.ingest import MovieBundle, SceneRecord, TrailerShot

    rng = np.random.default_rng(seed + 1000)
    n_scenes = min(n_scenes, m)
    n_trailer = min(n_trailer, m)
    shots = random_shots(m, dim=dim, seed=seed)
    if with_silver:
        silver = rng.random(m) < 0.25
        silver[int(rng.integers(0, m))] = True
        shots = [replace(s, is_trailer=bool(silver[s.id])) for s in shots]
    scenes = []
    for sid in range(n_scenes):
        labels = [False] * 5
        if sid < 5:
            labels[sid] = True
        scenes.append(
            SceneRecord(
                scene_id=sid,
                sentence_embeddings=rng.normal(size=(int(rng.integers(1, 4)), dim)),
                tp_labels=tuple(labels),
                sentiment=np.full(3, 1 / 3),
            )
        )
    # contiguous scene spans: every scene gets at least one shot
    cuts = np.sort(rng.choice(np.arange(1, m), size=n_scenes - 1, replace=False))
    mapping = np.zeros(m, dtype=int)
    for c in cuts:
        mapping[c:] += 1
    trailer = tuple(
        TrailerShot(
            embedding=shots[int(i)].embedding + rng.normal(scale=0.05, size=dim),
            duration_s=float(rng.uniform(0.5, 3.0)),
        )
        for i in rng.choice(m, size=n_trailer, replace=False)
    )
    return MovieBundle(
        movie_id=movie_id,
        dim=dim,
        shots=tuple(shots),
        scenes=tuple(scenes),
        shot_to_scene=tuple(int(x) for x in mapping),
        trailer_shots=trailer,
        provenance=("synthetic",),
    )


@pytest.fixture
def small_shots():
    return random_shots(8, seed=42)
