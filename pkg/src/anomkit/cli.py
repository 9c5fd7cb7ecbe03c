"""Command-line entry point exposing every workflow.

Subcommands: annotate, review-serve, finalize, evaluate, evaluate-deepfake,
audit, stats. Reports are echoed to stdout and written to the output
directory as JSON plus CSV and PNG companions, together with a run manifest.

Exit codes: 0 success, 1 partial success (annotate only), 2 failure.
"""

from __future__ import annotations

import json
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from functools import wraps
from pathlib import Path

import click

from . import reporting
from .auditing import audit_annotations, dataset_stats
from .matching import (
    ConfidenceMode,
    EvaluationError,
    evaluate,
    evaluate_classified,
    per_image_metrics,
)
from .pipeline import (
    OpenAIChatBackend,
    PipelineConfig,
    PipelineError,
    UsageTrackingBackend,
    demo_backend,
    load_pipeline_config,
    run_pipeline,
)
from .records import (
    ImageAnnotation,
    Provenance,
    SchemaError,
    SimilarityConfig,
    ThresholdSet,
    load_annotations,
    load_predictions,
    load_verdicts,
    save_annotations,
)
from .review import PendingItemsError, ReviewSession, UnknownItemError, create_app, finalize
from .similarity import RemoteScoreBackend, ScoringError, SurrogateBackend

IMAGE_EXTENSIONS = {".png", ".jpg", ".jpeg", ".webp", ".bmp", ".gif"}


@dataclass
class RunManifest:
    command: str
    arguments: dict
    inputs: list[str]
    outputs: list[str]
    started_at: str = ""
    wall_time_s: float = 0.0
    tokens: dict | None = None
    notes: list[str] = field(default_factory=list)

    def write(self, out_dir: Path) -> Path:
        path = out_dir / "manifest.json"
        path.write_text(json.dumps(asdict(self), indent=2) + "\n", encoding="utf-8")
        return path


def _manifest(command: str, arguments: dict, inputs: list) -> RunManifest:
    return RunManifest(
        command=command,
        arguments={k: str(v) if isinstance(v, Path) else v for k, v in arguments.items()},
        inputs=[str(p) for p in inputs],
        outputs=[],
        started_at=datetime.now(timezone.utc).isoformat(),
    )


def _finish(manifest: RunManifest, out_dir: Path, started: float) -> None:
    manifest.wall_time_s = round(time.monotonic() - started, 3)
    manifest.outputs.append(str(out_dir / "manifest.json"))
    manifest.write(out_dir)


def fail_cleanly(func):
    @wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except (
            SchemaError,
            EvaluationError,
            ScoringError,
            PendingItemsError,
            UnknownItemError,
            PipelineError,
            FileNotFoundError,
            ValueError,
        ) as err:
            click.echo(f"error: {err}", err=True)
            sys.exit(2)

    return wrapper


@click.group()
@click.version_option(package_name="anomkit")
def main() -> None:
    """Structured semantic-anomaly annotation, screening, and evaluation."""


def _similarity_backend(backend: str, endpoint: str | None, cache: str | None):
    if backend == "surrogate":
        return SurrogateBackend()
    if not endpoint:
        raise click.UsageError("--endpoint is required with --backend remote")
    return RemoteScoreBackend(endpoint, cache_path=cache)


def _parse_thresholds(raw: str) -> ThresholdSet:
    return ThresholdSet(tuple(float(part) for part in raw.split(",") if part.strip()))


evaluation_options = [
    click.option("--gt", "gt_path", required=True, type=click.Path(exists=True, dir_okay=False)),
    click.option("--pred", "pred_path", required=True, type=click.Path(exists=True, dir_okay=False)),
    click.option("--backend", type=click.Choice(["surrogate", "remote"]), default="surrogate", show_default=True),
    click.option("--endpoint", default=None, help="Scoring service URL (remote backend)."),
    click.option("--score-cache", default=None, type=click.Path(dir_okay=False), help="JSONL score cache for the remote backend."),
    click.option("--alpha", default=0.5, show_default=True, type=float),
    click.option("--thresholds", default="0.7,0.8,0.9", show_default=True),
    click.option(
        "--confidence",
        type=click.Choice([m.value for m in ConfidenceMode]),
        default=ConfidenceMode.INV_SEVERITY.value,
        show_default=True,
    ),
    click.option("--out", "out_dir", default="reports/evaluate", show_default=True, type=click.Path(file_okay=False)),
    click.option("--figures/--no-figures", default=True, show_default=True),
]


def add_options(options):
    def wrap(func):
        for option in reversed(options):
            func = option(func)
        return func

    return wrap


def _run_evaluation(classified: bool, **kw):
    started = time.monotonic()
    out_dir = Path(kw["out_dir"])
    out_dir.mkdir(parents=True, exist_ok=True)
    dataset = load_annotations(kw["gt_path"])
    preds = load_predictions(kw["pred_path"])
    thresholds = _parse_thresholds(kw["thresholds"])
    cfg = SimilarityConfig(alpha=kw["alpha"], backend_id=kw["backend"])
    backend = _similarity_backend(kw["backend"], kw["endpoint"], kw["score_cache"])
    confidence = ConfidenceMode(kw["confidence"])

    per_image = per_image_metrics(dataset, preds, thresholds, cfg, backend, confidence)
    if classified:
        report = evaluate_classified(
            dataset, preds, thresholds, cfg, backend, confidence, per_image=per_image
        )
        report_name = "deepfake_metrics.json"
    else:
        report = evaluate(
            dataset, preds, thresholds, cfg, backend, confidence, per_image=per_image
        )
        report_name = "metrics.json"

    obj = report.to_json_obj()
    click.echo(json.dumps(obj, indent=2))
    (out_dir / report_name).write_text(json.dumps(obj, indent=2) + "\n", encoding="utf-8")
    reporting.write_per_image_csv(per_image, out_dir / "per_image.csv")

    command = "evaluate-deepfake" if classified else "evaluate"
    manifest = _manifest(command, {k: kw[k] for k in kw if k != "out_dir"}, [kw["gt_path"], kw["pred_path"]])
    manifest.outputs = [str(out_dir / report_name), str(out_dir / "per_image.csv")]
    if kw["figures"]:
        reporting.render_metric_bars(report, out_dir / "metrics.png")
        manifest.outputs.append(str(out_dir / "metrics.png"))
    _finish(manifest, out_dir, started)


@main.command(name="evaluate")
@add_options(evaluation_options)
@fail_cleanly
def evaluate_cmd(**kw):
    """Score predictions against ground truth (SemAP / SemF1)."""
    _run_evaluation(classified=False, **kw)


@main.command(name="evaluate-deepfake")
@add_options(evaluation_options)
@fail_cleanly
def evaluate_deepfake_cmd(**kw):
    """Score source classification plus gated explanations (Acc / CSem)."""
    _run_evaluation(classified=True, **kw)


@main.command()
@click.option("--annotations", "annotations_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option(
    "--group-by",
    type=click.Choice(["generator_tag", "source_label", "provenance"]),
    default="generator_tag",
    show_default=True,
)
@click.option("--out", "out_dir", default="reports/audit", show_default=True, type=click.Path(file_okay=False))
@click.option("--figures/--no-figures", default=True, show_default=True)
@fail_cleanly
def audit(annotations_path, group_by, out_dir, figures):
    """Rank generators by MAI / AF / CAP (lower is better)."""
    started = time.monotonic()
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    annotations = load_annotations(annotations_path)
    rows = audit_annotations(annotations, group_by=group_by)

    text = reporting.leaderboard_text(rows)
    click.echo(text)
    (out_dir / "leaderboard.txt").write_text(text + "\n", encoding="utf-8")
    obj = [
        {
            "generator_tag": row.generator_tag,
            "mean_mai": row.mean_mai,
            "mean_af": row.mean_af,
            "mean_cap": row.mean_cap,
            "image_count": row.image_count,
        }
        for row in rows
    ]
    (out_dir / "leaderboard.json").write_text(json.dumps(obj, indent=2) + "\n", encoding="utf-8")
    reporting.write_leaderboard_csv(rows, out_dir / "leaderboard.csv")

    manifest = _manifest("audit", {"annotations": annotations_path, "group_by": group_by}, [annotations_path])
    manifest.outputs = [
        str(out_dir / name) for name in ("leaderboard.txt", "leaderboard.json", "leaderboard.csv")
    ]
    if figures:
        reporting.render_leaderboard(rows, out_dir / "leaderboard.png")
        manifest.outputs.append(str(out_dir / "leaderboard.png"))
    _finish(manifest, out_dir, started)


def _stats_obj(stats) -> dict:
    def group(g):
        return {
            "image_count": g.image_count,
            "anomaly_count": g.anomaly_count,
            "mean_anomalies": g.mean_anomalies,
            "severity_histogram": list(g.severity_histogram),
        }

    return {
        "overall": group(stats.overall),
        "per_generator": {tag: group(g) for tag, g in stats.per_generator.items()},
    }


@main.command()
@click.option("--annotations", "annotations_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option(
    "--compare",
    "compare_path",
    default=None,
    type=click.Path(exists=True, dir_okay=False),
    help="Second annotation file (e.g. after screening) for a before/after report.",
)
@click.option("--out", "out_dir", default="reports/stats", show_default=True, type=click.Path(file_okay=False))
@click.option("--figures/--no-figures", default=True, show_default=True)
@fail_cleanly
def stats(annotations_path, compare_path, out_dir, figures):
    """Dataset statistics: counts, per-image means, severity histograms."""
    started = time.monotonic()
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    before = dataset_stats(load_annotations(annotations_path))
    after = dataset_stats(load_annotations(compare_path)) if compare_path else None

    if after is None:
        obj = _stats_obj(before)
        datasets = [("all", before)]
    else:
        obj = {"before": _stats_obj(before), "after": _stats_obj(after)}
        datasets = [("before", before), ("after", after)]
    click.echo(json.dumps(obj, indent=2))
    (out_dir / "stats.json").write_text(json.dumps(obj, indent=2) + "\n", encoding="utf-8")
    reporting.write_stats_csv(datasets, out_dir / "stats.csv")

    manifest = _manifest(
        "stats", {"annotations": annotations_path, "compare": compare_path},
        [p for p in (annotations_path, compare_path) if p],
    )
    manifest.outputs = [str(out_dir / "stats.json"), str(out_dir / "stats.csv")]
    if figures:
        reporting.render_severity_histogram(before, out_dir / "severity_hist.png", compare=after)
        manifest.outputs.append(str(out_dir / "severity_hist.png"))
        if after is not None:
            reporting.render_count_comparison(before, after, out_dir / "counts.png")
            manifest.outputs.append(str(out_dir / "counts.png"))
    _finish(manifest, out_dir, started)


@main.command()
@click.option("--images", "images_dir", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--config", "config_path", default=None, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_dir", default="annotate-out", show_default=True, type=click.Path(file_okay=False))
@click.option("--backend", default=None, help="'mock' for the offline scripted backend; otherwise the configured endpoint is used.")
@click.option("--endpoint", default=None, help="Chat-completions endpoint (overrides config).")
@click.option("--model", default=None, help="Model id (overrides config).")
@click.option("--jobs", default=None, type=int, help="Concurrent images (and per-object parallelism).")
@click.option("--generator-tag", default=None, help="Tag stamped on every produced annotation.")
@fail_cleanly
def annotate(images_dir, config_path, out_dir, backend, endpoint, model, jobs, generator_tag):
    """Run the annotation pipeline over a directory of images."""
    started = time.monotonic()
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    config = load_pipeline_config(config_path) if config_path else PipelineConfig()
    overrides = {}
    if endpoint:
        overrides["endpoint"] = endpoint
    if model:
        overrides["model"] = model
    if jobs:
        overrides["parallelism"] = jobs
    if config.cache_dir is None and backend != "mock":
        overrides.setdefault("cache_dir", str(out_dir / "cache"))
    if overrides:
        config = PipelineConfig(**{**config.snapshot(), **overrides})

    if backend == "mock":
        chat = demo_backend()
    elif config.endpoint:
        chat = OpenAIChatBackend(config.endpoint, config.model, retries=config.retries)
    else:
        click.echo(
            "error: no chat endpoint configured; pass --endpoint/--config or use --backend mock",
            err=True,
        )
        sys.exit(2)
    tracker = UsageTrackingBackend(chat)

    images = sorted(
        p for p in Path(images_dir).iterdir() if p.suffix.lower() in IMAGE_EXTENSIONS
    )
    if not images:
        click.echo(f"error: no images found under {images_dir}", err=True)
        sys.exit(2)

    state_dir = out_dir / "states"
    results: dict[str, ImageAnnotation] = {}
    failures: dict[str, str] = {}

    def process(path: Path):
        state = run_pipeline(str(path), config, tracker, state_dir=state_dir)
        return path.stem, state

    workers = max(1, jobs or config.parallelism)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = {pool.submit(process, path): path for path in images}
        for future, path in futures.items():
            try:
                image_id, state = future.result()
            except Exception as err:  # noqa: BLE001 - per-image failures must not abort the batch
                failures[path.stem] = str(err)
                click.echo(f"failed {path.name}: {err}", err=True)
                continue
            results[image_id] = ImageAnnotation(
                image_id=image_id,
                image_uri=str(path),
                anomalies=tuple(state.final),
                generator_tag=generator_tag,
                provenance=Provenance.AGENT_RAW,
            )

    annotations = [results[path.stem] for path in images if path.stem in results]
    annotations_path = out_dir / "annotations.jsonl"
    save_annotations(annotations, annotations_path)

    manifest = _manifest(
        "annotate",
        {
            "images": images_dir,
            "config": config.snapshot(),
            "backend": backend or "endpoint",
            "generator_tag": generator_tag,
        },
        [str(p) for p in images],
    )
    manifest.outputs = [str(annotations_path), str(state_dir)]
    manifest.tokens = {
        "new_prompt_tokens": tracker.prompt_tokens,
        "new_completion_tokens": tracker.completion_tokens,
        "new_total": tracker.total_tokens,
        "backend_calls": tracker.calls,
    }
    if failures:
        manifest.notes = [f"failed {image_id}: {reason}" for image_id, reason in failures.items()]
    _finish(manifest, out_dir, started)

    click.echo(f"annotated {len(annotations)}/{len(images)} images -> {annotations_path}")
    if not annotations:
        sys.exit(2)
    if failures:
        sys.exit(1)


@main.command(name="finalize")
@click.option("--annotations", "annotations_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--verdicts", "verdicts_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_dir", default="reports/finalize", show_default=True, type=click.Path(file_okay=False))
@click.option("--partial", is_flag=True, help="Drop still-pending candidates instead of failing.")
@fail_cleanly
def finalize_cmd(annotations_path, verdicts_path, out_dir, partial):
    """Keep the accepted candidates and emit the verified annotation set."""
    started = time.monotonic()
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    annotations = load_annotations(annotations_path)
    verdicts = load_verdicts(verdicts_path)
    final = finalize(annotations, verdicts, allow_partial=partial)
    final_path = out_dir / "finalized.jsonl"
    save_annotations(final, final_path)

    before = dataset_stats(annotations)
    after = dataset_stats(final)
    summary = {
        "images": before.overall.image_count,
        "candidates_before": before.overall.anomaly_count,
        "candidates_after": after.overall.anomaly_count,
        "mean_per_image_before": before.overall.mean_anomalies,
        "mean_per_image_after": after.overall.mean_anomalies,
    }
    click.echo(json.dumps(summary, indent=2))
    (out_dir / "summary.json").write_text(json.dumps(summary, indent=2) + "\n", encoding="utf-8")

    manifest = _manifest(
        "finalize",
        {"annotations": annotations_path, "verdicts": verdicts_path, "partial": partial},
        [annotations_path, verdicts_path],
    )
    manifest.outputs = [str(final_path), str(out_dir / "summary.json")]
    _finish(manifest, out_dir, started)


@main.command(name="review-serve")
@click.option("--annotations", "annotations_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--log", "log_path", default="verdicts.jsonl", show_default=True, type=click.Path(dir_okay=False))
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8090, show_default=True, type=int)
@click.option("--images-root", default=None, type=click.Path(file_okay=False), help="Base directory for relative image paths.")
@click.option("--ui", "ui_dir", default=None, type=click.Path(file_okay=False), help="Directory of built review-UI assets to serve at /.")
@fail_cleanly
def review_serve(annotations_path, log_path, host, port, images_root, ui_dir):
    """Serve the screening queue and verdict API for the review UI."""
    import uvicorn

    session = ReviewSession(
        load_annotations(annotations_path), log_path, images_root=images_root
    )
    manifest = _manifest(
        "review-serve",
        {"annotations": annotations_path, "log": log_path, "host": host, "port": port},
        [annotations_path],
    )
    manifest.outputs = [str(log_path)]
    log_parent = Path(log_path).parent
    log_parent.mkdir(parents=True, exist_ok=True)
    manifest.write(log_parent)

    app = create_app(session, ui_dir=ui_dir)
    progress = session.queue.progress()
    click.echo(
        f"serving {len(session.queue)} candidates ({progress.pending} pending) "
        f"on http://{host}:{port}"
    )
    uvicorn.run(app, host=host, port=port, log_level="warning")


if __name__ == "__main__":
    main()
