"""Glue from a validated bundle to runnable traversal inputs.

One place turns a MovieBundle into the graph, turning-point sets, and
sentiment intensities the walker needs, so the CLI and the HTTP service
cannot drift apart on how they prepare a movie.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .config import EngineConfig
from .ingest import MovieBundle, project_scene_labels
from .model_core import MovieGraph, build_movie_graph, sentiment_intensities
from .traversal import (
    TPSets,
    TrailerPath,
    enumerate_degenerate,
    enumerate_proposals,
    rank_proposals,
)

__all__ = ["EngineInputs", "tp_sets_for_bundle", "prepare", "generate_proposals"]

N_TPS = 5


@dataclass(frozen=True)
class EngineInputs:
    """Everything the traversal needs, derived once per movie."""

    graph: MovieGraph
    tp_sets: TPSets
    intensities: np.ndarray


def tp_sets_for_bundle(bundle: MovieBundle, top_c: int) -> TPSets:
    """Turning-point sets from the richest labels the bundle carries.

    Scene labels projected through shot_to_scene win over per-shot scores;
    per-shot scores keep the top ``top_c`` shots per TP. Shot scores, when
    present, are attached either way so proposal starts rank by score. With
    no TP information at all the sets are empty (degenerate mode).
    """
    scores = None
    if all(s.tp_scores is not None for s in bundle.shots):
        scores = np.array([s.tp_scores for s in bundle.shots])
    if (
        bundle.scenes is not None
        and bundle.shot_to_scene is not None
        and any(s.tp_labels is not None for s in bundle.scenes)
    ):
        flags = np.array(
            [s.tp_labels if s.tp_labels is not None else (False,) * N_TPS for s in bundle.scenes]
        )
        sets = TPSets.from_flags(project_scene_labels(flags, bundle.shot_to_scene))
        return replace(sets, scores=scores) if scores is not None else sets
    if scores is not None:
        return TPSets.from_scores(scores, top_c)
    return TPSets.empty()


def prepare(bundle: MovieBundle, config: EngineConfig) -> EngineInputs:
    graph = build_movie_graph(bundle.shots, config.similarity_params())
    return EngineInputs(
        graph=graph,
        tp_sets=tp_sets_for_bundle(bundle, config.proposals),
        intensities=sentiment_intensities(bundle.shots),
    )


def generate_proposals(bundle: MovieBundle, config: EngineConfig) -> list[TrailerPath]:
    """Ranked proposal walks; falls back to seeded starts without TP data."""
    inputs = prepare(bundle, config)
    traversal = config.traversal()
    if inputs.tp_sets.sets[0]:
        proposals = enumerate_proposals(inputs.graph, inputs.tp_sets, inputs.intensities, traversal)
    else:
        proposals = enumerate_degenerate(inputs.graph, inputs.intensities, traversal)
    return rank_proposals(proposals)
