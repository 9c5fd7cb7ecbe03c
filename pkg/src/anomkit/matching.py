"""Greedy one-to-one anomaly matching and the SemAP / SemF1 / CSem metrics.

Per image, predictions are ranked by confidence and scanned in rank order;
each prediction claims the unmatched ground-truth anomaly with the highest
view similarity at or above the threshold (ties broken by highest full-view
similarity, then smallest ground-truth index). Matches are true positives,
unmatched predictions false positives, unmatched ground truths false
negatives. AP and F1 derive from that assignment per threshold, are averaged
over thresholds per image, then macro-averaged over the dataset. The
classification-aware variants zero an image's contribution whenever its
real/ai source label is mispredicted.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Mapping, Sequence

from .records import (
    DEFAULT_THRESHOLDS,
    AnomalyRecord,
    ImageAnnotation,
    PredictionSet,
    SimilarityConfig,
    ThresholdSet,
    View,
)
from .similarity import ScoringError, SimilarityBackend, SurrogateBackend, ViewScore


class EvaluationError(ValueError):
    """The prediction file is inconsistent with the ground-truth dataset."""


class ConfidenceMode(str, Enum):
    """How a prediction's ranking confidence is derived from its severity."""

    INV_SEVERITY = "inv_severity"
    SEVERITY = "severity"
    ORDER = "order"


@dataclass(frozen=True)
class RankedPrediction:
    record: AnomalyRecord
    confidence: float
    original_index: int


@dataclass(frozen=True)
class MatchResult:
    """Assignment trace for one image at one threshold.

    ``assignments`` holds ``(pred_rank, gt_index, similarity)`` with ranks
    1-based in scan order and ``gt_index`` a 0-based list index; ``fp_ranks``
    are the ranks of unmatched predictions.
    """

    threshold: float
    view: View
    assignments: tuple[tuple[int, int, float], ...]
    fp_ranks: tuple[int, ...]
    fn_count: int


@dataclass(frozen=True)
class ThresholdMetrics:
    ap: float
    f1: float


@dataclass(frozen=True)
class ViewMetrics:
    sem_ap: float
    sem_f1: float
    per_threshold: Mapping[float, ThresholdMetrics]


@dataclass(frozen=True)
class MetricsReport:
    views: Mapping[View, ViewMetrics]
    images: int

    def to_json_obj(self) -> dict:
        obj: dict = {}
        for view, metrics in self.views.items():
            obj[view.value] = {
                "sem_ap": metrics.sem_ap,
                "sem_f1": metrics.sem_f1,
                "per_threshold": {
                    f"{tau:g}": {"ap": tm.ap, "f1": tm.f1}
                    for tau, tm in metrics.per_threshold.items()
                },
            }
        obj["images"] = self.images
        return obj


@dataclass(frozen=True)
class ClassifiedReport:
    """Accuracy plus the classification-gated metric variants."""

    accuracy: float
    views: Mapping[View, ViewMetrics]
    images: int

    def to_json_obj(self) -> dict:
        obj: dict = {"accuracy": self.accuracy}
        for view, metrics in self.views.items():
            obj[view.value] = {
                "csem_ap": metrics.sem_ap,
                "csem_f1": metrics.sem_f1,
                "per_threshold": {
                    f"{tau:g}": {"ap": tm.ap, "f1": tm.f1}
                    for tau, tm in metrics.per_threshold.items()
                },
            }
        obj["images"] = self.images
        return obj


def rank_predictions(
    anomalies: Sequence[AnomalyRecord],
    mode: ConfidenceMode = ConfidenceMode.INV_SEVERITY,
) -> list[RankedPrediction]:
    """Attach confidences and sort descending, ties by original position.

    The default treats low severity as high confidence (a more implausible
    finding is a stronger anomaly claim); ``order`` keeps the input order.
    """
    mode = ConfidenceMode(mode)
    ranked = []
    for index, record in enumerate(anomalies):
        if mode is ConfidenceMode.INV_SEVERITY:
            confidence = 100.0 - record.severity
        elif mode is ConfidenceMode.SEVERITY:
            confidence = record.severity
        else:
            confidence = 0.0
        ranked.append(RankedPrediction(record, confidence, index))
    ranked.sort(key=lambda p: (-p.confidence, p.original_index))
    return ranked


def score_matrix(
    preds: Sequence[AnomalyRecord],
    gts: Sequence[AnomalyRecord],
    cfg: SimilarityConfig,
    backend: SimilarityBackend,
) -> list[list[ViewScore]]:
    """Similarity of every (prediction, ground truth) pair, computed once."""
    pairs = []
    for pred in preds:
        for gt in gts:
            pairs.append((pred.phenomenon, gt.phenomenon))
            pairs.append((pred.reasoning, gt.reasoning))
    try:
        flat = backend.score_pairs(pairs)
    except ScoringError as err:
        raise ScoringError(
            f"similarity backend failed scoring {len(preds)}x{len(gts)} record pairs: {err}"
        ) from err
    matrix: list[list[ViewScore]] = []
    cursor = 0
    for _ in preds:
        row = []
        for _ in gts:
            phe, rea = flat[cursor], flat[cursor + 1]
            cursor += 2
            row.append(ViewScore(phe=phe, rea=rea, full=cfg.alpha * phe + (1.0 - cfg.alpha) * rea))
        matrix.append(row)
    return matrix


def _view_value(score: ViewScore, view: View) -> float:
    if view is View.PHE:
        return score.phe
    if view is View.REA:
        return score.rea
    return score.full


def match_scored(
    scores: Sequence[Sequence[ViewScore]],
    gt_count: int,
    view: View,
    threshold: float,
) -> MatchResult:
    """Run the greedy scan over a precomputed similarity matrix.

    Rows must already be in rank order. Each prediction takes the unmatched
    ground truth maximizing the view similarity subject to sim >= threshold;
    among equals, the highest full-view similarity wins, then the smallest
    ground-truth index.
    """
    taken: set[int] = set()
    assignments: list[tuple[int, int, float]] = []
    fp_ranks: list[int] = []
    for rank, row in enumerate(scores, 1):
        candidates = [
            (_view_value(score, view), score.full, -gt_index, gt_index)
            for gt_index, score in enumerate(row)
            if gt_index not in taken and _view_value(score, view) >= threshold
        ]
        if candidates:
            sim, _, _, gt_index = max(candidates)
            taken.add(gt_index)
            assignments.append((rank, gt_index, sim))
        else:
            fp_ranks.append(rank)
    return MatchResult(
        threshold=threshold,
        view=view,
        assignments=tuple(assignments),
        fp_ranks=tuple(fp_ranks),
        fn_count=gt_count - len(assignments),
    )


def match_image(
    preds: Sequence[RankedPrediction],
    gts: Sequence[AnomalyRecord],
    view: View,
    threshold: float,
    cfg: SimilarityConfig,
    backend: SimilarityBackend,
) -> MatchResult:
    """Rank, score and greedily match one image's predictions."""
    ordered = sorted(preds, key=lambda p: (-p.confidence, p.original_index))
    matrix = score_matrix([p.record for p in ordered], gts, cfg, backend)
    return match_scored(matrix, len(gts), View(view), threshold)


def ap_of_match(result: MatchResult, gt_count: int) -> float:
    """Average precision of one assignment trace.

    Empty-set conventions: no ground truth and no predictions scores 1;
    no ground truth with predictions (or no true positive) scores 0.
    """
    pred_count = len(result.assignments) + len(result.fp_ranks)
    if gt_count == 0:
        return 1.0 if pred_count == 0 else 0.0
    if not result.assignments:
        return 0.0
    fp_ranks = set(result.fp_ranks)
    precision_sum = 0.0
    cum_tp = 0
    cum_fp = 0
    for rank in range(1, pred_count + 1):
        if rank in fp_ranks:
            cum_fp += 1
        else:
            cum_tp += 1
            precision_sum += cum_tp / (cum_tp + cum_fp)
    assert cum_tp == len(result.assignments)
    # Each new TP adds exactly 1/gt_count recall, so AP = sum(P at TP)/gt_count.
    return precision_sum / gt_count


def f1_of_match(result: MatchResult, gt_count: int) -> float:
    """F1 over the full prediction set (no confidence cutoff).

    Both sides empty scores 1; any undefined precision/recall scores 0.
    """
    tp = len(result.assignments)
    pred_count = tp + len(result.fp_ranks)
    if pred_count == 0 and gt_count == 0:
        return 1.0
    if pred_count == 0 or gt_count == 0 or tp == 0:
        return 0.0
    precision = tp / pred_count
    recall = tp / gt_count
    return 2.0 * precision * recall / (precision + recall)


@dataclass(frozen=True)
class ImageMetrics:
    """Per-image, per-(view, threshold) AP/F1 plus match counts for debugging."""

    image_id: str
    gt_count: int
    pred_count: int
    values: Mapping[tuple[View, float], ThresholdMetrics]
    tp_counts: Mapping[tuple[View, float], int]


def _index_predictions(
    dataset_gt: Sequence[ImageAnnotation], preds: Sequence[PredictionSet]
) -> dict[str, PredictionSet]:
    known = {annotation.image_id for annotation in dataset_gt}
    unknown = sorted(p.image_id for p in preds if p.image_id not in known)
    if unknown:
        raise EvaluationError(
            "unknown image_id(s) in predictions: " + ", ".join(unknown)
        )
    return {p.image_id: p for p in preds}


def per_image_metrics(
    dataset_gt: Sequence[ImageAnnotation],
    preds: Sequence[PredictionSet],
    thresholds: ThresholdSet = DEFAULT_THRESHOLDS,
    cfg: SimilarityConfig | None = None,
    backend: SimilarityBackend | None = None,
    confidence: ConfidenceMode = ConfidenceMode.INV_SEVERITY,
) -> list[ImageMetrics]:
    """Evaluate every image once; similarities are shared across thresholds.

    Images without a prediction set are scored against an empty set so that
    partial model runs remain scorable.
    """
    cfg = cfg or SimilarityConfig()
    backend = backend or SurrogateBackend()
    by_image = _index_predictions(dataset_gt, preds)
    out: list[ImageMetrics] = []
    for annotation in dataset_gt:
        pred_set = by_image.get(annotation.image_id)
        pred_records = [
            p.record
            for p in rank_predictions(
                pred_set.anomalies if pred_set else (), confidence
            )
        ]
        gts = annotation.anomalies
        matrix = score_matrix(pred_records, gts, cfg, backend)
        values: dict[tuple[View, float], ThresholdMetrics] = {}
        tp_counts: dict[tuple[View, float], int] = {}
        for view in (View.PHE, View.REA, View.FULL):
            for tau in thresholds:
                result = match_scored(matrix, len(gts), view, tau)
                values[(view, tau)] = ThresholdMetrics(
                    ap=ap_of_match(result, len(gts)),
                    f1=f1_of_match(result, len(gts)),
                )
                tp_counts[(view, tau)] = len(result.assignments)
        out.append(
            ImageMetrics(
                image_id=annotation.image_id,
                gt_count=len(gts),
                pred_count=len(pred_records),
                values=values,
                tp_counts=tp_counts,
            )
        )
    return out


def _aggregate(
    per_image: Sequence[ImageMetrics],
    thresholds: ThresholdSet,
    weights: Sequence[float] | None = None,
) -> dict[View, ViewMetrics]:
    count = len(per_image)
    views: dict[View, ViewMetrics] = {}
    if weights is None:
        weights = [1.0] * count
    for view in (View.PHE, View.REA, View.FULL):
        per_threshold: dict[float, ThresholdMetrics] = {}
        ap_total = 0.0
        f1_total = 0.0
        for tau in thresholds:
            tau_ap = sum(
                w * im.values[(view, tau)].ap for w, im in zip(weights, per_image)
            )
            tau_f1 = sum(
                w * im.values[(view, tau)].f1 for w, im in zip(weights, per_image)
            )
            per_threshold[tau] = ThresholdMetrics(
                ap=tau_ap / count if count else 0.0,
                f1=tau_f1 / count if count else 0.0,
            )
            ap_total += tau_ap
            f1_total += tau_f1
        denom = count * len(thresholds)
        views[view] = ViewMetrics(
            sem_ap=ap_total / denom if denom else 0.0,
            sem_f1=f1_total / denom if denom else 0.0,
            per_threshold=per_threshold,
        )
    return views


def evaluate(
    dataset_gt: Sequence[ImageAnnotation],
    preds: Sequence[PredictionSet],
    thresholds: ThresholdSet = DEFAULT_THRESHOLDS,
    cfg: SimilarityConfig | None = None,
    backend: SimilarityBackend | None = None,
    confidence: ConfidenceMode = ConfidenceMode.INV_SEVERITY,
    per_image: Sequence[ImageMetrics] | None = None,
) -> MetricsReport:
    """Dataset-level SemAP/SemF1 per view with per-threshold breakdowns.

    SemAP averages AP over thresholds per image then macro-averages over
    images; SemF1 is the simple average over images and thresholds. A
    precomputed ``per_image`` table may be passed to avoid rescoring.
    """
    if per_image is None:
        per_image = per_image_metrics(
            dataset_gt, preds, thresholds, cfg, backend, confidence
        )
    return MetricsReport(
        views=_aggregate(per_image, thresholds), images=len(per_image)
    )


def evaluate_classified(
    dataset_gt: Sequence[ImageAnnotation],
    preds: Sequence[PredictionSet],
    thresholds: ThresholdSet = DEFAULT_THRESHOLDS,
    cfg: SimilarityConfig | None = None,
    backend: SimilarityBackend | None = None,
    confidence: ConfidenceMode = ConfidenceMode.INV_SEVERITY,
    per_image: Sequence[ImageMetrics] | None = None,
) -> ClassifiedReport:
    """Source-classification accuracy plus CSemAP/CSemF1 per view.

    An image contributes its per-threshold AP/F1 only when its predicted
    source label equals the ground truth; misclassified (or unpredicted)
    images contribute zero while still counting in the denominator.
    """
    missing_gt = sorted(a.image_id for a in dataset_gt if a.source_label is None)
    if missing_gt:
        raise EvaluationError(
            "ground-truth images missing source_label: " + ", ".join(missing_gt)
        )
    by_image = _index_predictions(dataset_gt, preds)
    missing_pred = sorted(
        p.image_id for p in preds if p.predicted_label is None
    )
    if missing_pred:
        raise EvaluationError(
            "prediction sets missing predicted_label: " + ", ".join(missing_pred)
        )
    if per_image is None:
        per_image = per_image_metrics(
            dataset_gt, preds, thresholds, cfg, backend, confidence
        )
    labels = {a.image_id: a.source_label for a in dataset_gt}
    weights = []
    for im in per_image:
        pred_set = by_image.get(im.image_id)
        correct = pred_set is not None and pred_set.predicted_label == labels[im.image_id]
        weights.append(1.0 if correct else 0.0)
    accuracy = sum(weights) / len(weights) if weights else 0.0
    return ClassifiedReport(
        accuracy=accuracy,
        views=_aggregate(per_image, thresholds, weights),
        images=len(per_image),
    )
