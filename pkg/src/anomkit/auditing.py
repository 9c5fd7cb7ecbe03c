"""Semantic-reasonableness audit metrics and dataset statistics.

Per image, three lower-is-better scores quantify how implausible its
annotated anomalies are:

* MAI  — summed implausibility, sum((100 - severity) / 100) over anomalies
* AF   — anomaly count
* CAP  — MAI * AF, the cumulative penalty

Aggregate CAP is the mean of per-image products, not the product of column
means (the two genuinely differ; see ``audit_generator``). Zero on all three
means a flawless image; AF distinguishes "no anomalies" from "all anomalies
fully realistic".
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .records import AnomalyRecord, ImageAnnotation

UNTAGGED = "(untagged)"

HISTOGRAM_BINS = 10


@dataclass(frozen=True)
class ImageAudit:
    image_id: str
    mai: float
    af: int
    cap: float


@dataclass(frozen=True)
class GeneratorAudit:
    generator_tag: str
    mean_mai: float
    mean_af: float
    mean_cap: float
    image_count: int


@dataclass(frozen=True)
class GroupStats:
    image_count: int
    anomaly_count: int
    mean_anomalies: float
    severity_histogram: tuple[int, ...]


@dataclass(frozen=True)
class DatasetStats:
    overall: GroupStats
    per_generator: Mapping[str, GroupStats]


def audit_image(anomalies: Sequence[AnomalyRecord], image_id: str = "") -> ImageAudit:
    """Score one image; an empty anomaly list scores (0, 0, 0)."""
    mai = sum((100.0 - record.severity) / 100.0 for record in anomalies)
    af = len(anomalies)
    return ImageAudit(image_id=image_id, mai=mai, af=af, cap=mai * af)


def audit_generator(
    images: Iterable[tuple[str, ImageAudit]]
) -> list[GeneratorAudit]:
    """Per-tag arithmetic means, sorted best (lowest mean CAP) first.

    Ties break by mean MAI, then tag lexicographically.
    """
    groups: dict[str, list[ImageAudit]] = {}
    for tag, audit in images:
        groups.setdefault(tag, []).append(audit)
    rows = []
    for tag, audits in groups.items():
        count = len(audits)
        rows.append(
            GeneratorAudit(
                generator_tag=tag,
                mean_mai=sum(a.mai for a in audits) / count,
                mean_af=sum(a.af for a in audits) / count,
                mean_cap=sum(a.cap for a in audits) / count,
                image_count=count,
            )
        )
    rows.sort(key=lambda r: (r.mean_cap, r.mean_mai, r.generator_tag))
    return rows


def audit_annotations(
    annotations: Sequence[ImageAnnotation], group_by: str = "generator_tag"
) -> list[GeneratorAudit]:
    """Audit a dataset grouped by an annotation attribute (tag by default)."""
    pairs = []
    for annotation in annotations:
        key = getattr(annotation, group_by, None)
        key = getattr(key, "value", key)  # enums group by their string value
        pairs.append(
            (key or UNTAGGED, audit_image(annotation.anomalies, annotation.image_id))
        )
    return audit_generator(pairs)


def severity_bin(severity: float) -> int:
    """10-wide bin index over [0, 100]; the last bin is closed at 100."""
    return min(int(severity // 10), HISTOGRAM_BINS - 1)


def _group_stats(annotations: Sequence[ImageAnnotation]) -> GroupStats:
    histogram = [0] * HISTOGRAM_BINS
    anomaly_count = 0
    for annotation in annotations:
        anomaly_count += len(annotation.anomalies)
        for record in annotation.anomalies:
            histogram[severity_bin(record.severity)] += 1
    image_count = len(annotations)
    return GroupStats(
        image_count=image_count,
        anomaly_count=anomaly_count,
        mean_anomalies=anomaly_count / image_count if image_count else 0.0,
        severity_histogram=tuple(histogram),
    )


def dataset_stats(annotations: Sequence[ImageAnnotation]) -> DatasetStats:
    """Counts, per-image anomaly means and severity histograms, per tag and overall."""
    by_tag: dict[str, list[ImageAnnotation]] = {}
    for annotation in annotations:
        by_tag.setdefault(annotation.generator_tag or UNTAGGED, []).append(annotation)
    return DatasetStats(
        overall=_group_stats(annotations),
        per_generator={tag: _group_stats(group) for tag, group in sorted(by_tag.items())},
    )
