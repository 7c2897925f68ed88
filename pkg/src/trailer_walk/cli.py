"""Command-line tools: proposal generation, evaluation, corpus analysis,
bundle ingestion utilities, and the HTTP service launcher.

`trailer-walk` is the main entry point; `ingest` is also installed as its
own command for data-preparation pipelines.
"""

from __future__ import annotations

import json
import os
from dataclasses import replace as dc_replace

import click
import numpy as np

from . import engine as eng
from . import evalkit, report
from .config import load_config, load_service_config
from .ingest import (
    MovieBundle,
    canonical_json,
    derive_shot_to_scene,
    load_bundle,
    save_bundle,
    silver_trailer_labels,
)


@click.group()
def main():
    """Trailer proposal engine: shot-graph walks over movie bundles."""


@main.command()
@click.argument("bundle_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--seed", type=int, default=None, help="Override the configured RNG seed.")
@click.option("--out-dir", type=click.Path(file_okay=False), default=".", show_default=True)
def generate(bundle_path, config_path, seed, out_dir):
    """Walk the shot graph and write ranked trailer proposals."""
    config = load_config(config_path)
    if seed is not None:
        config = dc_replace(config, rng_seed=seed)
    bundle = load_bundle(bundle_path)
    proposals = eng.generate_proposals(bundle, config)
    doc = report.proposals_report(bundle.movie_id, proposals, config.traversal(), config.rng_seed)
    paths = report.write_proposals_outputs(out_dir, doc)
    click.echo(report.proposals_table(doc), nl=False)
    for kind in ("json", "csv", "figure"):
        click.echo(f"wrote {paths[kind]}")


def _selected_tp_sets(bundle: MovieBundle, top_k: int):
    """Predicted TP sets from per-shot scores; None without full scores."""
    if not all(s.tp_scores is not None for s in bundle.shots):
        return None
    scores = np.array([s.tp_scores for s in bundle.shots])
    sets = []
    for t in range(5):
        order = np.argsort(-scores[:, t], kind="stable")
        sets.append(set(int(i) for i in order[:top_k]))
    return sets


def _gold_tp_sets(bundle: MovieBundle):
    """Scene-label TP sets projected to shots; None without scene labels."""
    if (
        bundle.scenes is None
        or bundle.shot_to_scene is None
        or not any(s.tp_labels is not None for s in bundle.scenes)
    ):
        return None
    sets = evalkit.tp_shot_sets(bundle)
    return [set(s) for s in sets]


@main.command()
@click.argument("bundle_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--proposals", "proposals_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--top-k", type=int, default=5, show_default=True, help="Predicted shots per TP for agreement.")
@click.option("--out-dir", type=click.Path(file_okay=False), default=".", show_default=True)
def evaluate(bundle_path, proposals_path, top_k, out_dir):
    """Score generated proposals against the bundle's labels."""
    bundle = load_bundle(bundle_path)
    with open(proposals_path) as f:
        proposals_doc = json.load(f)
    if proposals_doc.get("movie_id") != bundle.movie_id:
        raise click.ClickException(
            f"proposals are for {proposals_doc.get('movie_id')!r}, bundle is {bundle.movie_id!r}"
        )

    doc = {"movie_id": bundle.movie_id, "omitted": []}

    silver = [s.is_trailer for s in bundle.shots]
    if any(v is None for v in silver):
        doc["omitted"].append("trailer-accuracy (bundle has shots without silver labels)")
    else:
        per = []
        for p in proposals_doc.get("proposals", []):
            per.append(
                {
                    "start": p["start"],
                    "trailer_accuracy": evalkit.trailer_accuracy(p["shots"], silver),
                }
            )
        if not per:
            raise click.ClickException("proposals file contains no proposals")
        doc["per_proposal"] = per
        doc["trailer_accuracy"] = float(np.mean([p["trailer_accuracy"] for p in per]))

    gold = _gold_tp_sets(bundle)
    predicted = _selected_tp_sets(bundle, top_k)
    if gold is None:
        doc["omitted"].append("partial-agreement (no scene turning-point labels)")
    elif predicted is None:
        doc["omitted"].append("partial-agreement (shots lack turning-point scores)")
    elif all(not g for g in gold):
        doc["omitted"].append("partial-agreement (every gold set is empty)")
    else:
        doc["partial_agreement"] = evalkit.partial_agreement(predicted, gold)

    os.makedirs(out_dir, exist_ok=True)
    out_path = os.path.join(out_dir, f"{bundle.movie_id}-evaluation.json")
    with open(out_path, "w") as f:
        f.write(canonical_json(doc))
    click.echo(report.evaluation_table(doc), nl=False)
    click.echo(f"wrote {out_path}")


@main.command()
@click.argument("corpus_dir", type=click.Path(exists=True, file_okay=False))
@click.option("--out-dir", type=click.Path(file_okay=False), default=".", show_default=True)
def analyze(corpus_dir, out_dir):
    """Descriptive trailer statistics over every bundle in a directory."""
    paths = sorted(
        os.path.join(corpus_dir, name)
        for name in os.listdir(corpus_dir)
        if name.endswith(".json")
    )
    if not paths:
        raise click.ClickException(f"no bundle files (*.json) in {corpus_dir}")
    reports = []
    trailer_sets: dict[str, list[set]] = {}
    for path in paths:
        bundle = load_bundle(path)
        reports.append(evalkit.analysis_stats(bundle))
        shots = {s.id for s in bundle.shots if s.is_trailer}
        if shots:
            trailer_sets.setdefault(bundle.movie_id, []).append(shots)
    overlaps = {
        movie: evalkit.overlap_upper_bound(sets)
        for movie, sets in trailer_sets.items()
        if len(sets) >= 2
    }
    doc = report.corpus_report(reports, overlaps)
    out = report.write_analysis_outputs(out_dir, doc)
    click.echo(report.analysis_table(doc), nl=False)
    for kind in ("json", "csv", "figure"):
        click.echo(f"wrote {out[kind]}")


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--port", type=int, default=None, help="Override the configured port.")
@click.option("--bundle-dir", type=click.Path(file_okay=False), default=None)
def serve(config_path, port, bundle_dir):
    """Run the interactive session service."""
    import uvicorn

    from .service import create_app

    service = load_service_config(config_path)
    if port is not None:
        service = dc_replace(service, port=port)
    if bundle_dir is not None:
        service = dc_replace(service, bundle_dir=bundle_dir)
    uvicorn.run(create_app(service), host="127.0.0.1", port=service.port)


@click.group()
def ingest():
    """Bundle ingestion utilities: validate, label, align."""


@ingest.command()
@click.argument("bundle_path", type=click.Path(exists=True, dir_okay=False))
def validate(bundle_path):
    """Check a bundle file against the schema and report its contents."""
    try:
        bundle = load_bundle(bundle_path)
    except ValueError as e:
        raise click.ClickException(str(e))
    parts = [f"{bundle.n_shots} shots", f"dim {bundle.dim}"]
    if bundle.scenes is not None:
        parts.append(f"{len(bundle.scenes)} scenes")
    if bundle.shot_to_scene is not None:
        parts.append("shot-to-scene mapping")
    if bundle.trailer_shots is not None:
        parts.append(f"{len(bundle.trailer_shots)} trailer shots")
    if any(s.is_trailer is not None for s in bundle.shots):
        n = sum(1 for s in bundle.shots if s.is_trailer)
        parts.append(f"{n} silver-positive shots")
    click.echo(f"OK {bundle.movie_id}: " + ", ".join(parts))


@ingest.command()
@click.argument("bundle_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--threshold", type=float, required=True, help="Minimum cosine similarity for a positive label.")
@click.option("--out", "out_path", type=click.Path(dir_okay=False), default=None, help="Defaults to rewriting the input.")
def label(bundle_path, threshold, out_path):
    """Project trailer shots onto movie shots as silver is_trailer labels."""
    bundle = load_bundle(bundle_path)
    if not bundle.trailer_shots:
        raise click.ClickException("bundle has no trailer shots to label from")
    flags = silver_trailer_labels(bundle.shots, bundle.trailer_shots, threshold)
    shots = tuple(dc_replace(s, is_trailer=bool(flags[s.id])) for s in bundle.shots)
    labeled = dc_replace(bundle, shots=shots)
    save_bundle(labeled, out_path or bundle_path)
    click.echo(
        f"labeled {int(flags.sum())} of {bundle.n_shots} shots positive "
        f"at threshold {threshold}"
    )
    click.echo(f"wrote {out_path or bundle_path}")


@ingest.command()
@click.argument("bundle_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_path", type=click.Path(dir_okay=False), default=None, help="Defaults to rewriting the input.")
def align(bundle_path, out_path):
    """Derive the shot-to-scene mapping by warping scenes against shots."""
    bundle = load_bundle(bundle_path)
    try:
        aligned = derive_shot_to_scene(bundle)
    except ValueError as e:
        raise click.ClickException(str(e))
    save_bundle(aligned, out_path or bundle_path)
    n_scenes = len(set(aligned.shot_to_scene))
    click.echo(f"mapped {aligned.n_shots} shots onto {n_scenes} scenes")
    click.echo(f"wrote {out_path or bundle_path}")


main.add_command(ingest)
