"""Evaluation metrics and corpus analyses.

Metrics compare shot selections against gold or silver labels; the analysis
functions reproduce the descriptive statistics used to study how real
trailers distribute over a movie's narrative structure and sentiment arc.
Everything works on one movie; corpus aggregation lives in the CLI.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ingest import MovieBundle, project_scene_labels
from .model_core import SignedSentiment

__all__ = [
    "UNIT_NAMES",
    "partial_agreement",
    "trailer_accuracy",
    "overlap_upper_bound",
    "AnalysisReport",
    "tp_shot_sets",
    "tp_positions",
    "analysis_stats",
]

N_TPS = 5
UNIT_NAMES = (
    "Setup",
    "New situation",
    "Progress",
    "Complications",
    "Final push",
    "Aftermath",
)


def partial_agreement(predicted, gold) -> float:
    """Percentage of gold-labeled TPs hit by at least one predicted shot.

    ``predicted`` and ``gold`` each hold five shot collections, one per
    turning point. TPs with no gold labels are excluded from the
    denominator.
    """
    if len(predicted) != N_TPS or len(gold) != N_TPS:
        raise ValueError(f"need {N_TPS} predicted and {N_TPS} gold shot sets")
    defined = [t for t in range(N_TPS) if len(gold[t])]
    if not defined:
        raise ValueError("no turning point has gold shots")
    hits = sum(1 for t in defined if set(predicted[t]) & set(gold[t]))
    return 100.0 * hits / len(defined)


def trailer_accuracy(selected, silver_labels) -> float:
    """Percentage of selected shots that carry a positive silver label."""
    chosen = set(int(s) for s in selected)
    if not chosen:
        raise ValueError("no shots selected")
    labels = np.asarray(silver_labels, dtype=bool)
    if labels.ndim != 1:
        raise ValueError("silver labels must be one flag per shot")
    if min(chosen) < 0 or max(chosen) >= labels.shape[0]:
        raise ValueError("selected shot id outside the labeled range")
    positive = sum(1 for s in chosen if labels[s])
    return 100.0 * positive / len(chosen)


def overlap_upper_bound(shot_sets) -> float:
    """Mean pairwise overlap between a movie's trailers.

    Overlap of two trailers is the intersection size over the smaller set
    size, as a percentage; the mean runs over unordered pairs. This formula
    is this project's choice of overlap definition and reports flag it as
    such.
    """
    sets = [set(s) for s in shot_sets]
    if len(sets) < 2:
        raise ValueError("overlap needs at least 2 trailers")
    if any(not s for s in sets):
        raise ValueError("overlap is undefined for an empty trailer shot set")
    scores = []
    for i in range(len(sets)):
        for j in range(i + 1, len(sets)):
            a, b = sets[i], sets[j]
            scores.append(100.0 * len(a & b) / min(len(a), len(b)))
    return float(np.mean(scores))


@dataclass(frozen=True)
class AnalysisReport:
    """Descriptive stats for one movie; None marks an omitted section."""

    movie_id: str
    n_trailer_shots: int
    tp_positions: tuple | None
    unit_percentages: tuple | None
    tp_in_trailer: tuple | None
    third_intensities: tuple | None
    v_shape: bool | None
    omitted: tuple[str, ...]


def tp_shot_sets(bundle: MovieBundle):
    """Per-TP shot sets from scene labels when present, else score argmax.

    Scene labels project through shot_to_scene; without them, each TP's set
    is the single highest-scoring shot. Returns five (possibly empty)
    frozensets, or None when the bundle has no TP information at all.
    """
    if (
        bundle.scenes is not None
        and bundle.shot_to_scene is not None
        and any(s.tp_labels is not None for s in bundle.scenes)
    ):
        flags = np.array(
            [s.tp_labels if s.tp_labels is not None else (False,) * N_TPS for s in bundle.scenes]
        )
        shot_flags = project_scene_labels(flags, bundle.shot_to_scene)
        return tuple(frozenset(np.flatnonzero(shot_flags[:, t]).tolist()) for t in range(N_TPS))
    if all(s.tp_scores is not None for s in bundle.shots):
        scores = np.array([s.tp_scores for s in bundle.shots])
        return tuple(frozenset({int(np.argmax(scores[:, t]))}) for t in range(N_TPS))
    return None


def tp_positions(sets):
    """Representative shot per TP: the lower median of its label set."""
    out = []
    for s in sets:
        if not s:
            out.append(None)
        else:
            members = sorted(s)
            out.append(members[(len(members) - 1) // 2])
    return tuple(out)


def _thematic_unit(shot_id, positions) -> int:
    """1-based unit index; a TP's own shot opens the unit that follows it."""
    return 1 + sum(1 for p in positions if p <= shot_id)


def analysis_stats(bundle: MovieBundle) -> AnalysisReport:
    """How this movie's trailer shots spread over structure and sentiment.

    Sections that need missing labels are omitted rather than failing, with
    the omission and its reason listed in the report.
    """
    omitted = []
    trailer = [s.id for s in bundle.shots if s.is_trailer]

    sets = tp_shot_sets(bundle)
    positions = tp_positions(sets) if sets is not None else None

    unit_percentages = None
    tp_in_trailer = None
    if not trailer:
        omitted.append("thematic-units (no trailer-labeled shots)")
        omitted.append("tp-coverage (no trailer-labeled shots)")
    elif sets is None:
        omitted.append("thematic-units (no turning-point labels)")
        omitted.append("tp-coverage (no turning-point labels)")
    else:
        missing = [t + 1 for t in range(N_TPS) if positions[t] is None]
        if missing:
            omitted.append(
                "thematic-units (no shots labeled for TP "
                + ", ".join(str(t) for t in missing)
                + ")"
            )
        else:
            counts = [0] * 6
            for s in trailer:
                counts[_thematic_unit(s, positions) - 1] += 1
            unit_percentages = tuple(100.0 * c / len(trailer) for c in counts)
        trailer_set = set(trailer)
        tp_in_trailer = tuple(
            (100.0 if sets[t] & trailer_set else 0.0) if sets[t] else None for t in range(N_TPS)
        )
        empty = [t + 1 for t in range(N_TPS) if not sets[t]]
        if empty:
            omitted.append(
                "tp-coverage for TP " + ", ".join(str(t) for t in empty) + " (no labeled shots)"
            )

    third_intensities = None
    v_shape = None
    if not trailer:
        omitted.append("sentiment-thirds (no trailer-labeled shots)")
    elif any(bundle.shots[s].sentiment is None for s in trailer):
        omitted.append("sentiment-thirds (trailer shots without sentiment)")
    else:
        intensities = np.array(
            [SignedSentiment.from_distribution(bundle.shots[s].sentiment).intensity for s in trailer]
        )
        thirds = np.array_split(intensities, 3)
        if any(len(t) == 0 for t in thirds):
            omitted.append("sentiment-thirds (fewer than 3 trailer shots)")
        else:
            third_intensities = tuple(float(t.mean()) for t in thirds)
            m1, m2, m3 = third_intensities
            v_shape = bool(m2 < m1 and m2 < m3)

    return AnalysisReport(
        movie_id=bundle.movie_id,
        n_trailer_shots=len(trailer),
        tp_positions=positions,
        unit_percentages=unit_percentages,
        tp_in_trailer=tp_in_trailer,
        third_intensities=third_intensities,
        v_shape=v_shape,
        omitted=tuple(omitted),
    )
