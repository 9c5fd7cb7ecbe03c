"""Canonical domain types and the JSONL persistence schemas shared by every module.

Datasets are stored as JSON Lines, one object per line:

    {"image_id": str, "image_uri": str, "source_label": "real"|"ai"|null,
     "generator_tag": str|null, "provenance": str,
     "anomalies": [{"name": str, "phenomenon": str, "reasoning": str, "severity": number}]}

Unknown extra JSON fields are preserved on round-trip so files carrying
intermediate outputs or foreign metadata survive a load/save cycle unchanged.
All types are immutable value objects and safe to share across threads.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path
from typing import Any, Iterable, Sequence


class SchemaError(ValueError):
    """A persisted record violates the dataset schema or a type invariant."""

    def __init__(
        self,
        message: str,
        *,
        line: int | None = None,
        image_id: str | None = None,
        field_name: str | None = None,
    ):
        parts = []
        if line is not None:
            parts.append(f"line {line}")
        if image_id:
            parts.append(f"image {image_id!r}")
        prefix = ", ".join(parts)
        super().__init__(f"{prefix}: {message}" if prefix else message)
        self.line = line
        self.image_id = image_id
        self.field_name = field_name
        self.bare_message = message


class SourceLabel(str, Enum):
    REAL = "real"
    AI = "ai"


class Provenance(str, Enum):
    AGENT_RAW = "agent_raw"
    HITL_VERIFIED = "hitl_verified"
    MODEL_PREDICTION = "model_prediction"
    HUMAN = "human"


class Decision(str, Enum):
    ACCEPT = "accept"
    REJECT = "reject"
    UNSURE = "unsure"


class View(str, Enum):
    """Which text fields of a record are compared by the similarity metrics."""

    PHE = "phe"
    REA = "rea"
    FULL = "full"


def _require_text(value: Any, field_name: str) -> str:
    if not isinstance(value, str) or not value.strip():
        raise SchemaError(f"{field_name} must be non-empty text", field_name=field_name)
    return value


@dataclass(frozen=True)
class AnomalyRecord:
    """One structured anomaly: what is wrong, why, and how severe.

    Severity is a real in [0, 100]; 0 means completely implausible and 100
    fully realistic. Integer severities are accepted and stored as floats.
    """

    name: str
    phenomenon: str
    reasoning: str
    severity: float
    extra: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        _require_text(self.name, "name")
        _require_text(self.phenomenon, "phenomenon")
        _require_text(self.reasoning, "reasoning")
        if isinstance(self.severity, bool) or not isinstance(self.severity, (int, float)):
            raise SchemaError("severity must be a number", field_name="severity")
        severity = float(self.severity)
        if not severity == severity or not 0.0 <= severity <= 100.0:
            raise SchemaError("severity out of range [0,100]", field_name="severity")
        object.__setattr__(self, "severity", severity)


@dataclass(frozen=True)
class ImageAnnotation:
    """An image's anomaly set plus source label and provenance."""

    image_id: str
    image_uri: str
    anomalies: tuple[AnomalyRecord, ...] = ()
    source_label: SourceLabel | None = None
    generator_tag: str | None = None
    provenance: Provenance = Provenance.AGENT_RAW
    extra: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        _require_text(self.image_id, "image_id")
        object.__setattr__(self, "anomalies", tuple(self.anomalies))
        if self.source_label is not None:
            object.__setattr__(self, "source_label", SourceLabel(self.source_label))
        object.__setattr__(self, "provenance", Provenance(self.provenance))


@dataclass(frozen=True)
class PredictionSet:
    """A model's predicted anomaly set (and optional source guess) for one image."""

    image_id: str
    anomalies: tuple[AnomalyRecord, ...] = ()
    predicted_label: SourceLabel | None = None
    extra: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        _require_text(self.image_id, "image_id")
        object.__setattr__(self, "anomalies", tuple(self.anomalies))
        if self.predicted_label is not None:
            object.__setattr__(self, "predicted_label", SourceLabel(self.predicted_label))


@dataclass(frozen=True)
class Verdict:
    """One human screening decision on one candidate anomaly."""

    image_id: str
    anomaly_index: int
    decision: Decision
    annotator_id: str
    timestamp: datetime

    def __post_init__(self) -> None:
        _require_text(self.image_id, "image_id")
        _require_text(self.annotator_id, "annotator_id")
        if not isinstance(self.anomaly_index, int) or self.anomaly_index < 0:
            raise SchemaError(
                "anomaly_index must be a non-negative integer", field_name="anomaly_index"
            )
        object.__setattr__(self, "decision", Decision(self.decision))
        ts = self.timestamp
        if not isinstance(ts, datetime):
            raise SchemaError("timestamp must be a datetime", field_name="timestamp")
        if ts.tzinfo is None:
            object.__setattr__(self, "timestamp", ts.replace(tzinfo=timezone.utc))


def make_verdict(
    image_id: str, anomaly_index: int, decision: Decision | str, annotator_id: str
) -> Verdict:
    """Build a verdict stamped with the current UTC time."""
    return Verdict(
        image_id=image_id,
        anomaly_index=anomaly_index,
        decision=Decision(decision),
        annotator_id=annotator_id,
        timestamp=datetime.now(timezone.utc),
    )


@dataclass(frozen=True)
class ThresholdSet:
    """Strictly increasing similarity thresholds in (0, 1]."""

    thresholds: tuple[float, ...] = (0.7, 0.8, 0.9)

    def __post_init__(self) -> None:
        values = tuple(float(t) for t in self.thresholds)
        if not values:
            raise SchemaError("thresholds must be non-empty", field_name="thresholds")
        for t in values:
            if not 0.0 < t <= 1.0:
                raise SchemaError(
                    f"threshold {t} outside (0,1]", field_name="thresholds"
                )
        if any(b <= a for a, b in zip(values, values[1:])):
            raise SchemaError(
                "thresholds must be strictly increasing", field_name="thresholds"
            )
        object.__setattr__(self, "thresholds", values)

    def __iter__(self):
        return iter(self.thresholds)

    def __len__(self) -> int:
        return len(self.thresholds)


DEFAULT_THRESHOLDS = ThresholdSet()


@dataclass(frozen=True)
class SimilarityConfig:
    """Weighting and view selection for field-wise similarity."""

    alpha: float = 0.5
    view: View = View.FULL
    backend_id: str = "surrogate"

    def __post_init__(self) -> None:
        if not 0.0 <= float(self.alpha) <= 1.0:
            raise SchemaError("alpha must be in [0,1]", field_name="alpha")
        object.__setattr__(self, "alpha", float(self.alpha))
        object.__setattr__(self, "view", View(self.view))


# --- JSON (de)serialization -------------------------------------------------

_RECORD_KEYS = ("name", "phenomenon", "reasoning", "severity")
_ANNOTATION_KEYS = (
    "image_id",
    "image_uri",
    "source_label",
    "generator_tag",
    "provenance",
    "anomalies",
)
_PREDICTION_KEYS = ("image_id", "predicted_label", "anomalies")
_VERDICT_KEYS = ("image_id", "anomaly_index", "decision", "annotator_id", "timestamp")


def record_to_obj(record: AnomalyRecord) -> dict:
    obj = {
        "name": record.name,
        "phenomenon": record.phenomenon,
        "reasoning": record.reasoning,
        "severity": record.severity,
    }
    for key, value in record.extra.items():
        obj.setdefault(key, value)
    return obj


def record_from_obj(obj: Any) -> AnomalyRecord:
    if not isinstance(obj, dict):
        raise SchemaError("anomaly entry must be a JSON object")
    extra = {k: v for k, v in obj.items() if k not in _RECORD_KEYS}
    return AnomalyRecord(
        name=obj.get("name"),
        phenomenon=obj.get("phenomenon"),
        reasoning=obj.get("reasoning"),
        severity=obj.get("severity"),
        extra=extra,
    )


def annotation_to_obj(annotation: ImageAnnotation) -> dict:
    obj = {
        "image_id": annotation.image_id,
        "image_uri": annotation.image_uri,
        "source_label": annotation.source_label.value if annotation.source_label else None,
        "generator_tag": annotation.generator_tag,
        "provenance": annotation.provenance.value,
        "anomalies": [record_to_obj(r) for r in annotation.anomalies],
    }
    for key, value in annotation.extra.items():
        obj.setdefault(key, value)
    return obj


def annotation_from_obj(obj: Any) -> ImageAnnotation:
    if not isinstance(obj, dict):
        raise SchemaError("expected a JSON object")
    image_id = obj.get("image_id")
    try:
        anomalies = tuple(record_from_obj(a) for a in obj.get("anomalies") or ())
        extra = {k: v for k, v in obj.items() if k not in _ANNOTATION_KEYS}
        return ImageAnnotation(
            image_id=image_id,
            image_uri=obj.get("image_uri") or "",
            anomalies=anomalies,
            source_label=obj.get("source_label") or None,
            generator_tag=obj.get("generator_tag"),
            provenance=obj.get("provenance") or Provenance.AGENT_RAW,
            extra=extra,
        )
    except SchemaError as err:
        if err.image_id is None and isinstance(image_id, str) and image_id:
            raise SchemaError(
                err.bare_message, image_id=image_id, field_name=err.field_name
            ) from err
        raise
    except ValueError as err:
        raise SchemaError(str(err), image_id=image_id if isinstance(image_id, str) else None)


def prediction_to_obj(pred: PredictionSet) -> dict:
    obj = {
        "image_id": pred.image_id,
        "predicted_label": pred.predicted_label.value if pred.predicted_label else None,
        "anomalies": [record_to_obj(r) for r in pred.anomalies],
    }
    for key, value in pred.extra.items():
        obj.setdefault(key, value)
    return obj


def prediction_from_obj(obj: Any) -> PredictionSet:
    if not isinstance(obj, dict):
        raise SchemaError("expected a JSON object")
    image_id = obj.get("image_id")
    try:
        anomalies = tuple(record_from_obj(a) for a in obj.get("anomalies") or ())
        extra = {k: v for k, v in obj.items() if k not in _PREDICTION_KEYS}
        return PredictionSet(
            image_id=image_id,
            anomalies=anomalies,
            predicted_label=obj.get("predicted_label") or None,
            extra=extra,
        )
    except SchemaError as err:
        if err.image_id is None and isinstance(image_id, str) and image_id:
            raise SchemaError(
                err.bare_message, image_id=image_id, field_name=err.field_name
            ) from err
        raise
    except ValueError as err:
        raise SchemaError(str(err), image_id=image_id if isinstance(image_id, str) else None)


def verdict_to_obj(verdict: Verdict) -> dict:
    return {
        "image_id": verdict.image_id,
        "anomaly_index": verdict.anomaly_index,
        "decision": verdict.decision.value,
        "annotator_id": verdict.annotator_id,
        "timestamp": verdict.timestamp.isoformat(),
    }


def verdict_from_obj(obj: Any) -> Verdict:
    if not isinstance(obj, dict):
        raise SchemaError("expected a JSON object")
    raw_ts = obj.get("timestamp")
    if not isinstance(raw_ts, str):
        raise SchemaError("timestamp must be an ISO-8601 string", field_name="timestamp")
    try:
        ts = datetime.fromisoformat(raw_ts.replace("Z", "+00:00"))
    except ValueError as err:
        raise SchemaError(f"bad timestamp: {raw_ts!r}", field_name="timestamp") from err
    try:
        return Verdict(
            image_id=obj.get("image_id"),
            anomaly_index=obj.get("anomaly_index"),
            decision=obj.get("decision"),
            annotator_id=obj.get("annotator_id"),
            timestamp=ts,
        )
    except ValueError as err:
        if isinstance(err, SchemaError):
            raise
        raise SchemaError(str(err))


# --- JSONL files ------------------------------------------------------------


def _load_jsonl(path: str | Path, from_obj, *, unique_image_ids: bool) -> list:
    path = Path(path)
    out = []
    seen: set[str] = set()
    with path.open("r", encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as err:
                raise SchemaError(f"malformed JSON ({err.msg})", line=line_no) from err
            try:
                item = from_obj(obj)
            except SchemaError as err:
                raise SchemaError(
                    err.bare_message,
                    line=line_no,
                    image_id=err.image_id,
                    field_name=err.field_name,
                ) from err
            image_id = getattr(item, "image_id", None)
            if unique_image_ids and image_id is not None:
                if image_id in seen:
                    raise SchemaError(
                        "duplicate image_id", line=line_no, image_id=image_id
                    )
                seen.add(image_id)
            out.append(item)
    return out


def _save_jsonl(items: Iterable[Any], path: str | Path, to_obj) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as handle:
        for item in items:
            handle.write(json.dumps(to_obj(item), ensure_ascii=False))
            handle.write("\n")


def load_annotations(path: str | Path) -> list[ImageAnnotation]:
    """Load and fully validate an annotation JSONL file.

    Raises SchemaError naming the offending line (and image_id / field where
    known); either the whole file validates or nothing is returned.
    """
    return _load_jsonl(path, annotation_from_obj, unique_image_ids=True)


def save_annotations(records: Sequence[ImageAnnotation], path: str | Path) -> None:
    """Write annotations as JSONL; ``load_annotations`` round-trips the result."""
    _save_jsonl(records, path, annotation_to_obj)


def load_predictions(path: str | Path) -> list[PredictionSet]:
    return _load_jsonl(path, prediction_from_obj, unique_image_ids=True)


def save_predictions(records: Sequence[PredictionSet], path: str | Path) -> None:
    _save_jsonl(records, path, prediction_to_obj)


def load_verdicts(path: str | Path) -> list[Verdict]:
    """Load a verdict log; order is the append order and duplicates are kept."""
    return _load_jsonl(path, verdict_from_obj, unique_image_ids=False)


def save_verdicts(records: Sequence[Verdict], path: str | Path) -> None:
    _save_jsonl(records, path, verdict_to_obj)
