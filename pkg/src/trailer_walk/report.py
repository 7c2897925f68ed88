"""Report rendering for the command-line tools.

Every command produces a machine-readable JSON document plus a plain-text
table; generation and corpus analysis additionally render a figure (PNG) and
a delimited CSV next to the JSON. All JSON goes through the canonical writer
so identical inputs give byte-identical files.
"""

from __future__ import annotations

import csv
import io
import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .evalkit import UNIT_NAMES, AnalysisReport
from .ingest import canonical_json
from .model_core import FlowSchedule, flow_targets
from .traversal import TrailerPath, TraversalConfig

__all__ = [
    "proposal_to_dict",
    "proposals_report",
    "proposals_table",
    "write_proposals_outputs",
    "evaluation_table",
    "analysis_to_dict",
    "corpus_report",
    "analysis_table",
    "write_analysis_outputs",
]


def proposal_to_dict(path: TrailerPath, config: TraversalConfig) -> dict:
    steps = []
    for step in path.steps:
        d = {"shot": step.shot}
        if step.score is not None:
            d["criteria"] = {
                "similarity": step.score.similarity,
                "proximity": step.score.proximity,
                "structure": step.score.structure,
                "sentiment_gap": step.score.sentiment_gap,
                "spoiler": step.score.spoiler,
            }
            d["contributions"] = step.score.contributions(config)
            d["total"] = step.score.total
        steps.append(d)
    doc = {
        "start": path.start,
        "shots": list(path.shot_ids),
        "steps": steps,
        "flow_realized": list(path.flow_trace),
        "tps_covered": sorted(path.tps_covered),
        "terminated": path.terminated_reason,
    }
    if np.isfinite(path.mean_score):
        doc["mean_score"] = path.mean_score
    if path.duplicate_of is not None:
        doc["duplicate_of"] = path.duplicate_of
    return doc


def proposals_report(movie_id: str, proposals, config: TraversalConfig, seed) -> dict:
    return {
        "movie_id": movie_id,
        "budget": config.budget,
        "seed": seed,
        "flow_target": list(flow_targets(config.schedule)),
        "proposals": [proposal_to_dict(p, config) for p in proposals],
    }


def _table(rows, headers) -> str:
    widths = [len(h) for h in headers]
    body = [[str(c) for c in row] for row in rows]
    for row in body:
        widths = [max(w, len(c)) for w, c in zip(widths, row)]
    lines = [
        "  ".join(h.ljust(w) for h, w in zip(headers, widths)).rstrip(),
        "  ".join("-" * w for w in widths),
    ]
    for row in body:
        lines.append("  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip())
    return "\n".join(lines) + "\n"


def proposals_table(report: dict) -> str:
    rows = []
    for rank, p in enumerate(report["proposals"], start=1):
        mean = p.get("mean_score")
        rows.append(
            [
                rank,
                p["start"],
                " ".join(str(s) for s in p["shots"]),
                "-" if mean is None else f"{mean:.4f}",
                ",".join(str(t) for t in p["tps_covered"]) or "-",
                p["terminated"],
                "-" if p.get("duplicate_of") is None else f"dup of {p['duplicate_of']}",
            ]
        )
    return _table(rows, ["rank", "start", "shots", "mean score", "TPs", "ended", "note"])


def _write(path: str, text: str) -> None:
    with open(path, "w") as f:
        f.write(text)


def _proposals_csv(report: dict) -> str:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["rank", "start", "step", "shot", "total", "tps_covered", "terminated"])
    for rank, p in enumerate(report["proposals"], start=1):
        tps = " ".join(str(t) for t in p["tps_covered"])
        for k, step in enumerate(p["steps"], start=1):
            total = step.get("total")
            w.writerow(
                [
                    rank,
                    p["start"],
                    k,
                    step["shot"],
                    "" if total is None else format(total, ".17g"),
                    tps,
                    p["terminated"],
                ]
            )
    return out.getvalue()


def _flow_figure(report: dict, out_path: str) -> None:
    fig, ax = plt.subplots(figsize=(7, 4))
    target = report["flow_target"]
    ax.plot(range(1, len(target) + 1), target, "k--", label="target", linewidth=2)
    for rank, p in enumerate(report["proposals"], start=1):
        realized = p["flow_realized"]
        ax.plot(range(1, len(realized) + 1), realized, marker="o", label=f"proposal {rank}")
    ax.set_xlabel("step")
    ax.set_ylabel("sentiment intensity")
    ax.set_title(f"{report['movie_id']}: target vs realized flow")
    ax.set_ylim(-0.05, 1.05)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(out_path, dpi=110)
    plt.close(fig)


def write_proposals_outputs(out_dir: str, report: dict) -> dict[str, str]:
    """JSON + CSV + flow figure; returns the written paths by kind."""
    os.makedirs(out_dir, exist_ok=True)
    stem = os.path.join(out_dir, f"{report['movie_id']}-proposals")
    paths = {"json": stem + ".json", "csv": stem + ".csv", "figure": stem + "-flow.png"}
    _write(paths["json"], canonical_json(report))
    _write(paths["csv"], _proposals_csv(report))
    _flow_figure(report, paths["figure"])
    return paths


def evaluation_table(report: dict) -> str:
    rows = []
    for name in ("partial_agreement", "trailer_accuracy"):
        if name in report:
            rows.append([name.replace("_", " "), f"{report[name]:.2f}"])
    for note in report.get("omitted", []):
        rows.append(["omitted", note])
    return _table(rows, ["metric", "value (%)"])


def analysis_to_dict(report: AnalysisReport) -> dict:
    doc = {
        "movie_id": report.movie_id,
        "n_trailer_shots": report.n_trailer_shots,
        "omitted": list(report.omitted),
    }
    if report.tp_positions is not None:
        doc["tp_positions"] = [p if p is not None else -1 for p in report.tp_positions]
    if report.unit_percentages is not None:
        doc["unit_percentages"] = list(report.unit_percentages)
    if report.tp_in_trailer is not None:
        doc["tp_in_trailer"] = [c if c is not None else -1.0 for c in report.tp_in_trailer]
    if report.third_intensities is not None:
        doc["third_intensities"] = list(report.third_intensities)
        doc["v_shape"] = report.v_shape
    return doc


def corpus_report(reports, overlaps: dict[str, float]) -> dict:
    """Aggregate per-movie analyses; means skip movies missing a section."""
    units = [r.unit_percentages for r in reports if r.unit_percentages is not None]
    thirds = [r.third_intensities for r in reports if r.third_intensities is not None]
    vshape = [r.v_shape for r in reports if r.v_shape is not None]
    coverage_rows = [r.tp_in_trailer for r in reports if r.tp_in_trailer is not None]
    doc = {
        "n_movies": len(reports),
        "movies": [analysis_to_dict(r) for r in reports],
    }
    if units:
        doc["mean_unit_percentages"] = [float(v) for v in np.mean(units, axis=0)]
    if coverage_rows:
        means = []
        for t in range(5):
            vals = [row[t] for row in coverage_rows if row[t] is not None]
            means.append(float(np.mean(vals)) if vals else -1.0)
        doc["mean_tp_in_trailer"] = means
    if thirds:
        doc["mean_third_intensities"] = [float(v) for v in np.mean(thirds, axis=0)]
        doc["v_shape_percent"] = 100.0 * sum(vshape) / len(vshape)
    if overlaps:
        doc["overlap_upper_bound"] = {k: overlaps[k] for k in sorted(overlaps)}
        doc["overlap_definition"] = (
            "mean over trailer pairs of 100 * |A & B| / min(|A|, |B|); "
            "an upper bound, not symmetric-difference agreement"
        )
    return doc


def analysis_table(doc: dict) -> str:
    rows = [["movies analyzed", str(doc["n_movies"])]]
    if "mean_unit_percentages" in doc:
        for name, v in zip(UNIT_NAMES, doc["mean_unit_percentages"]):
            rows.append([f"trailer shots in {name}", f"{v:.2f}%"])
    if "mean_tp_in_trailer" in doc:
        for t, v in enumerate(doc["mean_tp_in_trailer"], start=1):
            rows.append([f"trailers containing TP{t}", "-" if v < 0 else f"{v:.2f}%"])
    if "mean_third_intensities" in doc:
        m = doc["mean_third_intensities"]
        rows.append(["intensity by third", f"{m[0]:.3f} / {m[1]:.3f} / {m[2]:.3f}"])
        rows.append(["V-shaped flow", f"{doc['v_shape_percent']:.1f}% of movies"])
    if "overlap_upper_bound" in doc:
        for movie, v in doc["overlap_upper_bound"].items():
            rows.append([f"trailer overlap: {movie}", f"{v:.2f}% (upper bound)"])
    return _table(rows, ["statistic", "value"])


def _analysis_csv(doc: dict) -> str:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(
        ["movie_id", "n_trailer_shots"]
        + [f"unit_{n}" for n in range(1, 7)]
        + [f"tp{t}_in_trailer" for t in range(1, 6)]
        + ["third_1", "third_2", "third_3", "v_shape"]
    )
    for m in doc["movies"]:
        units = m.get("unit_percentages", [""] * 6)
        cov = m.get("tp_in_trailer", [""] * 5)
        thirds = m.get("third_intensities", [""] * 3)
        w.writerow(
            [m["movie_id"], m["n_trailer_shots"]]
            + list(units)
            + list(cov)
            + list(thirds)
            + [m.get("v_shape", "")]
        )
    return out.getvalue()


def _units_figure(doc: dict, out_path: str) -> None:
    fig, axes = plt.subplots(1, 2, figsize=(10, 4))
    if "mean_unit_percentages" in doc:
        axes[0].bar(range(6), doc["mean_unit_percentages"], color="tab:blue")
        axes[0].set_xticks(range(6))
        axes[0].set_xticklabels(UNIT_NAMES, rotation=30, ha="right", fontsize=8)
        axes[0].set_ylabel("% of trailer shots")
        axes[0].set_title("trailer shots by thematic unit")
    if "mean_third_intensities" in doc:
        axes[1].plot([1, 2, 3], doc["mean_third_intensities"], marker="o", color="tab:red")
        axes[1].set_xticks([1, 2, 3])
        axes[1].set_xlabel("trailer third")
        axes[1].set_ylabel("mean |sentiment|")
        axes[1].set_title("sentiment flow across thirds")
    fig.tight_layout()
    fig.savefig(out_path, dpi=110)
    plt.close(fig)


def write_analysis_outputs(out_dir: str, doc: dict) -> dict[str, str]:
    os.makedirs(out_dir, exist_ok=True)
    stem = os.path.join(out_dir, "corpus-analysis")
    paths = {"json": stem + ".json", "csv": stem + ".csv", "figure": stem + ".png"}
    _write(paths["json"], canonical_json(doc))
    _write(paths["csv"], _analysis_csv(doc))
    _units_figure(doc, paths["figure"])
    return paths
