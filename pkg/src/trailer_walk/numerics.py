"""Loss formulas with analytic gradients.

These are the differentiable pieces of the training objective: cross-modal
attention fusion, the shot/scene prediction-consistency KL, two contrastive
representation losses, the teacher-distillation KL, their weighted sum, and
the greedy-walk pooling used to build contrastive anchors. Everything is a
pure numpy function; gradients are closed-form and unit-tested against
central finite differences.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model_core import MovieGraph

__all__ = [
    "LossReport",
    "ContrastiveBatch",
    "bidaf_fuse",
    "bidaf_fuse_grad",
    "kl_prediction_consistency",
    "nce_representation",
    "info_nce",
    "kl_teacher",
    "joint_loss",
    "cpc_walk_representation",
]

# Distribution rows may drift from sum 1 by this much. Loose enough that a
# finite-difference probe of a single entry stays in-domain.
DISTRIBUTION_SUM_TOL = 1e-4


@dataclass(frozen=True)
class LossReport:
    """A scalar loss value plus gradients keyed by input name."""

    value: float
    gradients: dict[str, np.ndarray]

    def __post_init__(self):
        if not np.isfinite(self.value):
            raise ValueError(f"loss value is not finite: {self.value}")
        object.__setattr__(self, "value", float(self.value))


@dataclass(frozen=True)
class ContrastiveBatch:
    """Matched anchor/positive representation rows with a softmax temperature."""

    anchors: np.ndarray
    positives: np.ndarray
    temperature: float

    def __post_init__(self):
        a = np.asarray(self.anchors, dtype=float)
        p = np.asarray(self.positives, dtype=float)
        if a.ndim != 2 or a.shape != p.shape:
            raise ValueError("anchors and positives must be matching N x D matrices")
        if a.shape[0] < 2:
            raise ValueError("contrastive batch needs at least 2 rows")
        if not (np.isfinite(a).all() and np.isfinite(p).all()):
            raise ValueError("contrastive batch contains non-finite values")
        if not (self.temperature > 0):
            raise ValueError("temperature must be > 0")
        object.__setattr__(self, "anchors", a)
        object.__setattr__(self, "positives", p)


def _rowsoftmax(z):
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _attend(x, y):
    """Each row of x attends over the rows of y."""
    return _rowsoftmax(x @ y.T) @ y


def _attend_vjp(x, y, g):
    """Backward pass of ``_attend`` for an upstream cotangent ``g``."""
    r = _rowsoftmax(x @ y.T)
    a = g @ y.T
    ds = r * (a - (r * a).sum(axis=1, keepdims=True))
    dx = ds @ y
    dy = r.T @ g + ds.T @ x
    return dx, dy


def _check_sequences(text, audio, video):
    mats = [np.asarray(m, dtype=float) for m in (text, audio, video)]
    shape = mats[0].shape
    for m in mats:
        if m.ndim != 2 or m.shape != shape:
            raise ValueError("all three sequences must share one (length, dim) shape")
        if not np.isfinite(m).all():
            raise ValueError("sequence contains non-finite values")
    return mats


def bidaf_fuse(text, audio, video):
    """Fuse three aligned modality sequences by cross-attention.

    Each output sequence is the sum of the input attending over the other
    two modalities plus the input itself, so with zero audio and video the
    text passes through untouched.
    """
    t, a, v = _check_sequences(text, audio, video)
    t2 = _attend(t, a) + _attend(t, v) + t
    a2 = _attend(a, t) + _attend(a, v) + a
    v2 = _attend(v, t) + _attend(v, a) + v
    return t2, a2, v2


def bidaf_fuse_grad(text, audio, video, grad_text, grad_audio, grad_video):
    """Gradients of the scalar <grad_text, text'> + <grad_audio, audio'> +
    <grad_video, video'> with respect to the three input sequences."""
    t, a, v = _check_sequences(text, audio, video)
    gt, ga, gv = _check_sequences(grad_text, grad_audio, grad_video)
    if gt.shape != t.shape:
        raise ValueError("cotangent shapes must match sequence shapes")

    t2, a2, v2 = bidaf_fuse(t, a, v)
    value = float((gt * t2).sum() + (ga * a2).sum() + (gv * v2).sum())

    acc = {"t": gt.copy(), "a": ga.copy(), "v": gv.copy()}
    for x, y, g, x_name, y_name in (
        (t, a, gt, "t", "a"),
        (t, v, gt, "t", "v"),
        (a, t, ga, "a", "t"),
        (a, v, ga, "a", "v"),
        (v, t, gv, "v", "t"),
        (v, a, gv, "v", "a"),
    ):
        dx, dy = _attend_vjp(x, y, g)
        acc[x_name] += dx
        acc[y_name] += dy
    return LossReport(
        value=value, gradients={"text": acc["t"], "audio": acc["a"], "video": acc["v"]}
    )


def _check_support(p, q, smoothing, what):
    """KL(p || q) needs q > 0 wherever p > 0; smooth q only on request."""
    q = np.asarray(q, dtype=float)
    if smoothing is not None:
        if not (smoothing > 0):
            raise ValueError("smoothing must be > 0")
        q = q + smoothing
        q = q / q.sum(axis=-1, keepdims=True)
    if ((np.asarray(p) > 0) & (q <= 0)).any():
        raise ValueError(
            f"{what} has zero mass where the compared distribution is positive; "
            "pass smoothing= to smooth it explicitly"
        )
    return q


def _kl(p, q):
    """Sum of p*log(p/q) treating 0*log(0) as 0."""
    p = np.asarray(p, dtype=float)
    mask = p > 0
    out = np.zeros_like(p)
    out[mask] = p[mask] * np.log(p[mask] / np.asarray(q, dtype=float)[mask])
    return float(out.sum())


def kl_prediction_consistency(shot_probs, scene_probs, shot_to_scene, smoothing=None):
    """Mean KL between pooled shot-level TP distributions and scene-level ones.

    ``shot_probs`` is (T, n_shots): for each of the T turning points, a
    non-negative score distribution over shots. ``scene_probs`` is
    (T, n_scenes). Shot rows are max-pooled into their scenes via
    ``shot_to_scene`` and renormalized, then compared row-wise against
    ``scene_probs``. Gradients flow to each scene's argmax shot (ties to the
    smaller shot id); zero-probability shots get unbounded descent entries.
    """
    p = np.asarray(shot_probs, dtype=float)
    q = np.asarray(scene_probs, dtype=float)
    mapping = np.asarray(shot_to_scene, dtype=int)
    if p.ndim != 2 or q.ndim != 2 or p.shape[0] != q.shape[0]:
        raise ValueError("shot and scene distributions must be (T, n) matrices with equal T")
    if (p < 0).any() or (q < 0).any():
        raise ValueError("distributions must be non-negative")
    if mapping.shape != (p.shape[1],):
        raise ValueError("shot_to_scene must map every shot to a scene")
    n_scenes = q.shape[1]
    if mapping.min() < 0 or mapping.max() >= n_scenes:
        raise ValueError("shot_to_scene references a scene outside the scene axis")
    members = [np.flatnonzero(mapping == s) for s in range(n_scenes)]
    for s, m in enumerate(members):
        if m.size == 0:
            raise ValueError(f"scene {s} has no shots mapped to it")

    n_tps = p.shape[0]
    value = 0.0
    grad = np.zeros_like(p)
    for t in range(n_tps):
        pooled = np.array([p[t, m].max() for m in members])
        z = pooled.sum()
        if z <= 0:
            raise ValueError(f"turning point {t}: pooled distribution sums to zero")
        pbar = pooled / z
        qt = _check_support(pbar, q[t], smoothing, "scene distribution")
        kl = _kl(pbar, qt)
        value += kl
        with np.errstate(divide="ignore"):
            dpool = (np.log(pbar / qt) - kl) / z
        for s, m in enumerate(members):
            # route through the pooled maximum; earliest shot wins ties
            winner = m[np.argmax(p[t, m])]
            grad[t, winner] += dpool[s] / n_tps
    return LossReport(value=value / n_tps, gradients={"shot_probs": grad})


def _scaled_dot_logits(anchors, candidates, temperature):
    dim = anchors.shape[-1]
    return anchors @ candidates.T / (temperature * np.sqrt(dim))


def nce_representation(scene_reps, shot_reps, temperature):
    """Batch contrastive loss tying mean-pooled shot reps to their scene reps.

    Row j of ``shot_reps`` should score highest against row j of
    ``scene_reps`` among all scenes; similarity is the scaled dot product
    x.y/sqrt(D) divided by the temperature.
    """
    batch = ContrastiveBatch(anchors=shot_reps, positives=scene_reps, temperature=temperature)
    h, s = batch.anchors, batch.positives
    n, dim = h.shape
    logits = _scaled_dot_logits(h, s, batch.temperature)
    lse = _logsumexp_rows(logits)
    value = float(-(np.diagonal(logits) - lse).mean())
    probs = np.exp(logits - lse[:, None])
    dlogits = (probs - np.eye(n)) / n
    scale = 1.0 / (batch.temperature * np.sqrt(dim))
    return LossReport(
        value=value,
        gradients={
            "shot_reps": dlogits @ s * scale,
            "scene_reps": dlogits.T @ h * scale,
        },
    )


def _logsumexp_rows(z):
    m = z.max(axis=1)
    return m + np.log(np.exp(z - m[:, None]).sum(axis=1))


def info_nce(anchor, positive, negatives, temperature):
    """Single-anchor InfoNCE: the positive against K negatives."""
    g = np.asarray(anchor, dtype=float)
    c_pos = np.asarray(positive, dtype=float)
    c_neg = np.asarray(negatives, dtype=float)
    if g.ndim != 1 or c_pos.shape != g.shape:
        raise ValueError("anchor and positive must be matching vectors")
    if c_neg.ndim != 2 or c_neg.shape[1] != g.shape[0] or c_neg.shape[0] < 1:
        raise ValueError("negatives must be a non-empty (K, D) matrix")
    if not (temperature > 0):
        raise ValueError("temperature must be > 0")
    dim = g.shape[0]
    scale = 1.0 / (temperature * np.sqrt(dim))
    z = np.concatenate(([g @ c_pos], c_neg @ g)) * scale
    m = z.max()
    lse = m + np.log(np.exp(z - m).sum())
    value = float(-z[0] + lse)
    probs = np.exp(z - lse)
    d_anchor = ((probs[0] - 1.0) * c_pos + probs[1:] @ c_neg) * scale
    return LossReport(
        value=value,
        gradients={
            "anchor": d_anchor,
            "positive": (probs[0] - 1.0) * g * scale,
            "negatives": probs[1:, None] * g[None, :] * scale,
        },
    )


def kl_teacher(model_probs, teacher_probs, smoothing=None):
    """Sum over turning points of KL(model || teacher), with d/d(model).

    Rows must each sum to 1 within a small slack; the value is computed on
    the raw rows so the gradient log(p/q) + 1 matches an unconstrained
    finite-difference probe.
    """
    p = np.asarray(model_probs, dtype=float)
    q = np.asarray(teacher_probs, dtype=float)
    if p.ndim != 2 or p.shape != q.shape:
        raise ValueError("model and teacher must be matching (T, n) matrices")
    if (p < 0).any() or (q < 0).any():
        raise ValueError("distributions must be non-negative")
    for name, m in (("model", p), ("teacher", q)):
        bad = np.abs(m.sum(axis=1) - 1.0) > DISTRIBUTION_SUM_TOL
        if bad.any():
            raise ValueError(f"{name} row {int(np.flatnonzero(bad)[0])} does not sum to 1")
    q = _check_support(p, q, smoothing, "teacher")
    value = sum(_kl(p[t], q[t]) for t in range(p.shape[0]))
    with np.errstate(divide="ignore"):
        grad = np.where(p > 0, np.log(np.where(p > 0, p, 1.0) / q) + 1.0, -np.inf)
    return LossReport(value=value, gradients={"model_probs": grad})


def joint_loss(
    screenplay_loss,
    video_loss,
    consistency_loss,
    representation_loss,
    consistency_weight=10.0,
    representation_weight=0.03,
):
    """Weighted training objective combining the four loss terms."""
    terms = (
        screenplay_loss,
        video_loss,
        consistency_loss,
        representation_loss,
        consistency_weight,
        representation_weight,
    )
    if not all(np.isfinite(x) for x in terms):
        raise ValueError("joint loss inputs must be finite")
    return float(
        screenplay_loss
        + video_loss
        + consistency_weight * consistency_loss
        + representation_weight * representation_loss
    )


def cpc_walk_representation(graph: MovieGraph, reps, anchor: int, steps: int = 3):
    """Mean representation along a greedy walk from ``anchor``.

    Takes up to ``steps`` hops, each time following the heaviest outgoing
    edge (ties to the smaller shot id), stopping early at dead ends. The
    anchor itself is always included in the mean.
    """
    graph._check_node(anchor)
    if steps < 0:
        raise ValueError("steps must be >= 0")
    r = np.asarray(reps, dtype=float)
    if r.ndim != 2 or r.shape[0] != graph.n_shots:
        raise ValueError("reps must have one row per shot")
    path = [anchor]
    for _ in range(steps):
        nbrs = graph.neighbors(path[-1])
        if not nbrs:
            break
        best_j, best_w = nbrs[0]
        for j, w in nbrs[1:]:
            if w > best_w:
                best_j, best_w = j, w
        path.append(best_j)
    return r[path].mean(axis=0)
