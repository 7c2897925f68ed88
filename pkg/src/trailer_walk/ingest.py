"""Bundle serialization, DTW alignment, and silver-label derivation.

A movie arrives as a single JSON "bundle": shot records with embeddings,
optional screenplay scenes, an optional shot-to-scene mapping, and optional
real-trailer shots. Loading validates every invariant up front; saving
writes a canonical form (sorted keys, 17-significant-digit floats) so that
identical data always produces identical bytes.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass, replace

import numpy as np

from .model_core import ShotRecord, _readonly

__all__ = [
    "SceneRecord",
    "TrailerShot",
    "MovieBundle",
    "AlignmentResult",
    "bundle_from_json",
    "bundle_to_json",
    "canonical_json",
    "load_bundle",
    "save_bundle",
    "dtw_align",
    "silver_trailer_labels",
    "project_scene_labels",
    "derive_shot_to_scene",
]

N_TPS = 5


@dataclass(frozen=True)
class SceneRecord:
    """A screenplay scene: sentence embeddings plus optional labels."""

    scene_id: int
    sentence_embeddings: np.ndarray
    tp_labels: tuple[bool, ...] | None = None
    sentiment: np.ndarray | None = None

    def __post_init__(self):
        if self.scene_id < 0:
            raise ValueError(f"scene id must be >= 0, got {self.scene_id}")
        emb = _readonly(self.sentence_embeddings)
        if emb.ndim != 2 or emb.shape[0] < 1:
            raise ValueError(f"scene {self.scene_id}: sentence_embeddings must be a non-empty matrix")
        if not np.all(np.isfinite(emb)):
            raise ValueError(f"scene {self.scene_id}: non-finite sentence embedding")
        object.__setattr__(self, "sentence_embeddings", emb)
        if self.tp_labels is not None:
            labels = tuple(bool(x) for x in self.tp_labels)
            if len(labels) != N_TPS:
                raise ValueError(f"scene {self.scene_id}: tp_labels must have {N_TPS} entries")
            object.__setattr__(self, "tp_labels", labels)
        if self.sentiment is not None:
            s = _readonly(self.sentiment)
            if s.shape != (3,) or np.any(s < 0) or abs(float(s.sum()) - 1.0) > 1e-6:
                raise ValueError(f"scene {self.scene_id}: sentiment must be a 3-way distribution")
            object.__setattr__(self, "sentiment", s)


@dataclass(frozen=True)
class TrailerShot:
    """One shot from a released trailer, used to mine silver labels."""

    embedding: np.ndarray
    duration_s: float

    def __post_init__(self):
        emb = _readonly(self.embedding)
        if emb.ndim != 1 or not np.all(np.isfinite(emb)):
            raise ValueError("trailer shot embedding must be a finite vector")
        object.__setattr__(self, "embedding", emb)
        if not self.duration_s > 0:
            raise ValueError("trailer shot duration must be positive")


@dataclass(frozen=True)
class MovieBundle:
    """Everything known about one movie, validated and immutable."""

    movie_id: str
    dim: int
    shots: tuple[ShotRecord, ...]
    scenes: tuple[SceneRecord, ...] | None = None
    shot_to_scene: tuple[int, ...] | None = None
    trailer_shots: tuple[TrailerShot, ...] | None = None
    provenance: tuple[str, ...] = ()

    def __post_init__(self):
        if not self.movie_id:
            raise ValueError("movie_id must be a non-empty string")
        if self.dim < 1:
            raise ValueError("dim must be >= 1")
        shots = tuple(self.shots)
        if not shots:
            raise ValueError("bundle has no shots")
        object.__setattr__(self, "shots", shots)
        prev_start = -1.0
        for pos, shot in enumerate(shots):
            if shot.id != pos:
                raise ValueError(
                    f"shots[{pos}].id: expected {pos}, got {shot.id} (ids must be contiguous from 0)"
                )
            if shot.embedding.shape != (self.dim,):
                raise ValueError(
                    f"shots[{pos}].embedding: expected dim {self.dim}, got {shot.embedding.shape[0]}"
                )
            if shot.start_s < prev_start:
                raise ValueError(f"shots[{pos}]: start_s decreases; shots must be in temporal order")
            prev_start = shot.start_s
        if self.scenes is not None:
            scenes = tuple(self.scenes)
            for pos, scene in enumerate(scenes):
                if scene.scene_id != pos:
                    raise ValueError(
                        f"scenes[{pos}].scene_id: expected {pos}, got {scene.scene_id}"
                    )
            object.__setattr__(self, "scenes", scenes)
        if self.shot_to_scene is not None:
            if self.scenes is None:
                raise ValueError("shot_to_scene requires scenes")
            mapping = tuple(int(s) for s in self.shot_to_scene)
            if len(mapping) != len(shots):
                raise ValueError(
                    f"shot_to_scene: expected {len(shots)} entries, got {len(mapping)}"
                )
            n_scenes = len(self.scenes)
            prev = 0
            for pos, scene_id in enumerate(mapping):
                if not (0 <= scene_id < n_scenes):
                    raise ValueError(f"shot_to_scene[{pos}]: scene {scene_id} does not exist")
                if scene_id < prev:
                    raise ValueError(
                        f"shot_to_scene[{pos}]: mapping must be monotone (scene spans are contiguous)"
                    )
                prev = scene_id
            object.__setattr__(self, "shot_to_scene", mapping)
        if self.trailer_shots is not None:
            trailer = tuple(self.trailer_shots)
            for pos, ts in enumerate(trailer):
                if ts.embedding.shape != (self.dim,):
                    raise ValueError(
                        f"trailer_shots[{pos}].embedding: expected dim {self.dim}"
                    )
            object.__setattr__(self, "trailer_shots", trailer)
        object.__setattr__(self, "provenance", tuple(str(s) for s in self.provenance))

    @property
    def n_shots(self) -> int:
        return len(self.shots)


@dataclass(frozen=True)
class AlignmentResult:
    """A monotone DTW warping path and its accumulated cost."""

    path: tuple[tuple[int, int], ...]
    total_cost: float

    def __post_init__(self):
        if not self.path:
            raise ValueError("alignment path is empty")
        path = tuple((int(i), int(j)) for i, j in self.path)
        if path[0] != (0, 0):
            raise ValueError("alignment path must start at (0, 0)")
        for (i0, j0), (i1, j1) in zip(path, path[1:]):
            if (i1 - i0, j1 - j0) not in ((1, 0), (0, 1), (1, 1)):
                raise ValueError("alignment path must advance one index or both by 1")
        object.__setattr__(self, "path", path)
        if self.total_cost < 0:
            raise ValueError("alignment cost cannot be negative")


# --- canonical JSON ---------------------------------------------------------
#
# json.dumps formats floats via repr, whose output is the *shortest* faithful
# string and so depends on the value's history less predictably than a fixed
# format. Canonical bundles pin every float to 17 significant digits and sort
# keys, making save(load(x)) byte-identical.


def _fmt(value, out: io.StringIO):
    if isinstance(value, str):
        out.write(json.dumps(value))
    elif value is True:
        out.write("true")
    elif value is False:
        out.write("false")
    elif isinstance(value, (int, np.integer)):
        out.write(str(int(value)))
    elif isinstance(value, (float, np.floating)):
        v = float(value)
        if not np.isfinite(v):
            raise ValueError("cannot serialize non-finite number")
        out.write(format(v, ".17g"))
    elif isinstance(value, dict):
        out.write("{")
        for pos, key in enumerate(sorted(value)):
            if pos:
                out.write(",")
            _fmt(str(key), out)
            out.write(":")
            _fmt(value[key], out)
        out.write("}")
    elif isinstance(value, (list, tuple, np.ndarray)):
        out.write("[")
        seq = value.tolist() if isinstance(value, np.ndarray) else value
        for pos, item in enumerate(seq):
            if pos:
                out.write(",")
            _fmt(item, out)
        out.write("]")
    else:
        raise TypeError(f"cannot serialize {type(value).__name__}")


def canonical_json(obj) -> str:
    """Deterministic JSON: sorted keys, compact, 17-significant-digit floats.

    The same value always serializes to the same bytes, so reports and
    bundles can be compared byte for byte.
    """
    out = io.StringIO()
    _fmt(obj, out)
    out.write("\n")
    return out.getvalue()


_dumps_canonical = canonical_json


def _shot_to_dict(shot: ShotRecord) -> dict:
    d = {
        "id": shot.id,
        "start_s": float(shot.start_s),
        "end_s": float(shot.end_s),
        "embedding": shot.embedding,
    }
    if shot.sentiment is not None:
        d["sentiment"] = shot.sentiment
    if shot.tp_scores is not None:
        d["tp_scores"] = shot.tp_scores
    if shot.is_trailer is not None:
        d["is_trailer"] = bool(shot.is_trailer)
    if shot.thumbnail_ref is not None:
        d["thumbnail_ref"] = shot.thumbnail_ref
    return d


def bundle_to_json(bundle: MovieBundle) -> str:
    doc = {
        "movie_id": bundle.movie_id,
        "dim": bundle.dim,
        "shots": [_shot_to_dict(s) for s in bundle.shots],
    }
    if bundle.scenes is not None:
        scenes = []
        for scene in bundle.scenes:
            d = {"scene_id": scene.scene_id, "sentence_embeddings": scene.sentence_embeddings}
            if scene.tp_labels is not None:
                d["tp_labels"] = list(scene.tp_labels)
            if scene.sentiment is not None:
                d["sentiment"] = scene.sentiment
            scenes.append(d)
        doc["scenes"] = scenes
    if bundle.shot_to_scene is not None:
        doc["shot_to_scene"] = list(bundle.shot_to_scene)
    if bundle.trailer_shots is not None:
        doc["trailer_shots"] = [
            {"embedding": t.embedding, "duration_s": float(t.duration_s)}
            for t in bundle.trailer_shots
        ]
    if bundle.provenance:
        doc["provenance"] = list(bundle.provenance)
    return _dumps_canonical(doc)


class _Field:
    """Tiny schema walker that reports the JSON path on every failure."""

    def __init__(self, data, path):
        self.data = data
        self.path = path

    def fail(self, message):
        raise ValueError(f"{self.path}: {message}")

    def get(self, key, required=True, default=None):
        if not isinstance(self.data, dict):
            self.fail("expected an object")
        if key not in self.data:
            if required:
                self.fail(f"missing field {key!r}")
            return _Field(default, f"{self.path}.{key}")
        return _Field(self.data[key], f"{self.path}.{key}")

    def items(self):
        if not isinstance(self.data, list):
            self.fail("expected a list")
        return [_Field(v, f"{self.path}[{i}]") for i, v in enumerate(self.data)]

    def number(self):
        if isinstance(self.data, bool) or not isinstance(self.data, (int, float)):
            self.fail("expected a number")
        return float(self.data)

    def integer(self):
        if isinstance(self.data, bool) or not isinstance(self.data, int):
            self.fail("expected an integer")
        return int(self.data)

    def string(self):
        if not isinstance(self.data, str):
            self.fail("expected a string")
        return self.data

    def boolean(self):
        if not isinstance(self.data, bool):
            self.fail("expected a boolean")
        return self.data

    def numbers(self):
        return [f.number() for f in self.items()]

    def check_keys(self, allowed):
        if not isinstance(self.data, dict):
            self.fail("expected an object")
        for key in self.data:
            if key not in allowed:
                self.fail(f"unexpected field {key!r}")


def _parse_shot(f: _Field) -> ShotRecord:
    f.check_keys(
        {"id", "start_s", "end_s", "embedding", "sentiment", "tp_scores", "is_trailer", "thumbnail_ref"}
    )
    kwargs = {}
    if "sentiment" in f.data:
        kwargs["sentiment"] = f.get("sentiment").numbers()
    if "tp_scores" in f.data:
        kwargs["tp_scores"] = f.get("tp_scores").numbers()
    if "is_trailer" in f.data:
        kwargs["is_trailer"] = f.get("is_trailer").boolean()
    if "thumbnail_ref" in f.data:
        kwargs["thumbnail_ref"] = f.get("thumbnail_ref").string()
    try:
        return ShotRecord(
            id=f.get("id").integer(),
            start_s=f.get("start_s").number(),
            end_s=f.get("end_s").number(),
            embedding=np.asarray(f.get("embedding").numbers(), dtype=float),
            **kwargs,
        )
    except ValueError as e:
        f.fail(str(e))


def _parse_scene(f: _Field) -> SceneRecord:
    f.check_keys({"scene_id", "sentence_embeddings", "tp_labels", "sentiment"})
    kwargs = {}
    if "tp_labels" in f.data:
        kwargs["tp_labels"] = [x.boolean() for x in f.get("tp_labels").items()]
    if "sentiment" in f.data:
        kwargs["sentiment"] = f.get("sentiment").numbers()
    rows = [row.numbers() for row in f.get("sentence_embeddings").items()]
    try:
        return SceneRecord(
            scene_id=f.get("scene_id").integer(),
            sentence_embeddings=np.asarray(rows, dtype=float),
            **kwargs,
        )
    except ValueError as e:
        f.fail(str(e))


def bundle_from_json(text: str) -> MovieBundle:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ValueError(f"invalid JSON: {e}") from None
    root = _Field(data, "$")
    if not isinstance(data, dict):
        root.fail("expected a top-level object")
    root.check_keys(
        {"movie_id", "dim", "shots", "scenes", "shot_to_scene", "trailer_shots", "provenance"}
    )
    kwargs = {}
    if "scenes" in data:
        kwargs["scenes"] = tuple(_parse_scene(f) for f in root.get("scenes").items())
    if "shot_to_scene" in data:
        kwargs["shot_to_scene"] = tuple(f.integer() for f in root.get("shot_to_scene").items())
    if "trailer_shots" in data:
        shots = []
        for f in root.get("trailer_shots").items():
            f.check_keys({"embedding", "duration_s"})
            try:
                shots.append(
                    TrailerShot(
                        embedding=np.asarray(f.get("embedding").numbers(), dtype=float),
                        duration_s=f.get("duration_s").number(),
                    )
                )
            except ValueError as e:
                f.fail(str(e))
        kwargs["trailer_shots"] = tuple(shots)
    if "provenance" in data:
        kwargs["provenance"] = tuple(f.string() for f in root.get("provenance").items())
    try:
        return MovieBundle(
            movie_id=root.get("movie_id").string(),
            dim=root.get("dim").integer(),
            shots=tuple(_parse_shot(f) for f in root.get("shots").items()),
            **kwargs,
        )
    except ValueError as e:
        if str(e).startswith("$"):
            raise
        raise ValueError(f"$: {e}") from None


def load_bundle(path) -> MovieBundle:
    with open(path, encoding="utf-8") as fh:
        return bundle_from_json(fh.read())


def save_bundle(bundle: MovieBundle, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(bundle_to_json(bundle))


# --- alignment and labeling -------------------------------------------------


def _unit_rows(m):
    m = np.asarray(m, dtype=float)
    norms = np.linalg.norm(m, axis=1, keepdims=True)
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(norms > 0, m / norms, 0.0)
    return out


def _warp_cost(seq_a, seq_b):
    """Pairwise 1 - cosine cost matrix.

    Computed as half the squared distance between unit rows, which is the
    same quantity but exactly 0 for identical vectors. Rows with no
    direction (zero norm) cost 1 against everything.
    """
    a = np.asarray(seq_a, dtype=float)
    b = np.asarray(seq_b, dtype=float)
    ua, ub = _unit_rows(a), _unit_rows(b)
    cost = np.empty((a.shape[0], b.shape[0]))
    for i in range(a.shape[0]):
        diff = ua[i] - ub
        cost[i] = 0.5 * (diff * diff).sum(axis=1)
    zero_a = np.linalg.norm(a, axis=1) == 0
    zero_b = np.linalg.norm(b, axis=1) == 0
    cost[zero_a, :] = 1.0
    cost[:, zero_b] = 1.0
    return cost


def dtw_align(seq_a, seq_b) -> AlignmentResult:
    """Dynamic-time-warping alignment of two embedding sequences.

    Steps may advance either index or both; the warping cost of a pair is
    one minus their cosine similarity. Backtracking prefers the diagonal,
    then advancing ``seq_a``, so the path is deterministic.
    """
    a = np.asarray(seq_a, dtype=float)
    b = np.asarray(seq_b, dtype=float)
    if a.ndim != 2 or b.ndim != 2 or a.shape[0] < 1 or b.shape[0] < 1:
        raise ValueError("both sequences must be non-empty embedding matrices")
    if a.shape[1] != b.shape[1]:
        raise ValueError("sequences must share one embedding dimension")
    cost = _warp_cost(a, b)
    n, m = cost.shape
    acc = np.full((n, m), np.inf)
    acc[0, 0] = cost[0, 0]
    for j in range(1, m):
        acc[0, j] = cost[0, j] + acc[0, j - 1]
    for i in range(1, n):
        acc[i, 0] = cost[i, 0] + acc[i - 1, 0]
        for j in range(1, m):
            acc[i, j] = cost[i, j] + min(acc[i - 1, j - 1], acc[i - 1, j], acc[i, j - 1])

    path = [(n - 1, m - 1)]
    i, j = n - 1, m - 1
    while (i, j) != (0, 0):
        steps = []
        if i > 0 and j > 0:
            steps.append((acc[i - 1, j - 1], (i - 1, j - 1)))
        if i > 0:
            steps.append((acc[i - 1, j], (i - 1, j)))
        if j > 0:
            steps.append((acc[i, j - 1], (i, j - 1)))
        _, (i, j) = min(steps, key=lambda s: s[0])
        path.append((i, j))
    path.reverse()
    return AlignmentResult(path=tuple(path), total_cost=float(acc[n - 1, m - 1]))


def _embedding_matrix(items):
    rows = [getattr(item, "embedding", item) for item in items]
    return np.asarray(rows, dtype=float)


def silver_trailer_labels(shots, trailer_shots, threshold) -> np.ndarray:
    """Mark movie shots that best match some trailer shot.

    Each trailer shot nominates its most cosine-similar movie shot (ties go
    to the earlier one); the nomination sticks only when the similarity
    reaches ``threshold``. Returns one boolean per movie shot.
    """
    if len(trailer_shots) == 0:
        raise ValueError("trailer has no shots")
    if not np.isfinite(threshold):
        raise ValueError("threshold must be finite")
    movie = _embedding_matrix(shots)
    trailer = _embedding_matrix(trailer_shots)
    if movie.shape[1] != trailer.shape[1]:
        raise ValueError("movie and trailer embeddings must share one dimension")
    sims = _unit_rows(trailer) @ _unit_rows(movie).T
    labels = np.zeros(movie.shape[0], dtype=bool)
    for row in sims:
        best = int(np.argmax(row))
        if row[best] >= threshold:
            labels[best] = True
    return labels


def project_scene_labels(scene_labels, shot_to_scene):
    """Give every shot its scene's label (flags, distributions, anything)."""
    labels = np.asarray(scene_labels)
    mapping = np.asarray(shot_to_scene, dtype=int)
    if mapping.ndim != 1 or mapping.size == 0:
        raise ValueError("shot_to_scene must be a non-empty vector")
    if mapping.min() < 0 or mapping.max() >= labels.shape[0]:
        bad = int(np.flatnonzero((mapping < 0) | (mapping >= labels.shape[0]))[0])
        raise ValueError(f"shot {bad} maps to a scene without labels")
    return labels[mapping]


def derive_shot_to_scene(bundle: MovieBundle) -> MovieBundle:
    """Fill in ``shot_to_scene`` by warping scene text against shot video.

    Scenes are summarized by their mean sentence embedding and aligned to
    the shot sequence with DTW; each shot takes the first scene matched to
    it on the warping path. Requires scene sentence embeddings to share the
    shot embedding dimension.
    """
    if bundle.scenes is None or not bundle.scenes:
        raise ValueError("bundle has no scenes to align")
    scene_reps = np.stack([s.sentence_embeddings.mean(axis=0) for s in bundle.scenes])
    if scene_reps.shape[1] != bundle.dim:
        raise ValueError(
            f"scene sentence embeddings have dim {scene_reps.shape[1]}, shots have {bundle.dim}"
        )
    shot_reps = np.stack([s.embedding for s in bundle.shots])
    alignment = dtw_align(scene_reps, shot_reps)
    mapping = {}
    for scene_idx, shot_idx in alignment.path:
        mapping.setdefault(shot_idx, scene_idx)
    return replace(bundle, shot_to_scene=tuple(mapping[j] for j in range(bundle.n_shots)))
