"""Screening queue and verdict accounting for human-in-the-loop review.

Every candidate anomaly of every image becomes one queue item, ordered by
(image_id, anomaly_index). The verdict log is append-only: corrections are
superseding appends, and the latest verdict per item governs. The in-memory
queue is a pure function of (annotations, log), so replaying the log always
reconstructs the exact pending/decided state.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from ..records import (
    AnomalyRecord,
    Decision,
    ImageAnnotation,
    Provenance,
    Verdict,
)


class UnknownItemError(KeyError):
    """A verdict references an (image_id, anomaly_index) outside the queue."""


class PendingItemsError(ValueError):
    """Finalization was requested while some candidates are still undecided."""

    def __init__(self, pending: Sequence[tuple[str, int]]):
        preview = ", ".join(f"{image_id}[{index}]" for image_id, index in pending[:10])
        suffix = "" if len(pending) <= 10 else f" (+{len(pending) - 10} more)"
        super().__init__(f"{len(pending)} candidates still pending: {preview}{suffix}")
        self.pending = list(pending)


@dataclass(frozen=True)
class QueueItem:
    image_id: str
    anomaly_index: int
    anomaly: AnomalyRecord
    image_uri: str


@dataclass(frozen=True)
class Progress:
    pending: int
    accepted: int
    rejected: int
    unsure: int


class ReviewQueue:
    """Derived review state over a fixed candidate set and an append-only log."""

    def __init__(self, annotations: Sequence[ImageAnnotation]):
        self._items: list[QueueItem] = []
        self._by_key: dict[tuple[str, int], QueueItem] = {}
        self.image_uris: dict[str, str] = {}
        for annotation in sorted(annotations, key=lambda a: a.image_id):
            self.image_uris[annotation.image_id] = annotation.image_uri
            for index, anomaly in enumerate(annotation.anomalies):
                item = QueueItem(annotation.image_id, index, anomaly, annotation.image_uri)
                self._items.append(item)
                self._by_key[(annotation.image_id, index)] = item
        self._latest: dict[tuple[str, int], Verdict] = {}

    def __len__(self) -> int:
        return len(self._items)

    @property
    def items(self) -> list[QueueItem]:
        return list(self._items)

    def apply(self, verdict: Verdict) -> None:
        """Record one verdict; later applications supersede earlier ones."""
        key = (verdict.image_id, verdict.anomaly_index)
        if key not in self._by_key:
            raise UnknownItemError(f"no candidate at {verdict.image_id}[{verdict.anomaly_index}]")
        self._latest[key] = verdict

    def replay(self, verdicts: Iterable[Verdict]) -> None:
        for verdict in verdicts:
            self.apply(verdict)

    def next_item(self, annotator_id: str) -> QueueItem | None:
        """First undecided item in stable order; None when exhausted.

        Reads are idempotent: the same item is returned until a verdict for
        it lands, regardless of which annotator asks.
        """
        for item in self._items:
            if (item.image_id, item.anomaly_index) not in self._latest:
                return item
        return None

    def latest_verdicts(self) -> Mapping[tuple[str, int], Verdict]:
        return dict(self._latest)

    def progress(self) -> Progress:
        counts = {Decision.ACCEPT: 0, Decision.REJECT: 0, Decision.UNSURE: 0}
        for verdict in self._latest.values():
            counts[verdict.decision] += 1
        return Progress(
            pending=len(self._items) - len(self._latest),
            accepted=counts[Decision.ACCEPT],
            rejected=counts[Decision.REJECT],
            unsure=counts[Decision.UNSURE],
        )


def latest_by_item(verdicts: Sequence[Verdict]) -> dict[tuple[str, int], Verdict]:
    """Last verdict in log order wins per (image_id, anomaly_index)."""
    latest: dict[tuple[str, int], Verdict] = {}
    for verdict in verdicts:
        latest[(verdict.image_id, verdict.anomaly_index)] = verdict
    return latest


def finalize(
    annotations: Sequence[ImageAnnotation],
    verdicts: Sequence[Verdict],
    *,
    allow_partial: bool = False,
) -> list[ImageAnnotation]:
    """Keep exactly the candidates whose latest verdict is accept.

    Rejected and unsure candidates are excluded from the output (the log
    retains them); candidate order within an image is preserved. Undecided
    candidates raise unless ``allow_partial``, which drops them.
    """
    known = {
        (annotation.image_id, index)
        for annotation in annotations
        for index in range(len(annotation.anomalies))
    }
    unknown = [key for key in latest_by_item(verdicts) if key not in known]
    if unknown:
        image_id, index = unknown[0]
        raise UnknownItemError(
            f"verdict references unknown candidate {image_id}[{index}]"
        )
    latest = latest_by_item(verdicts)
    pending = [key for key in sorted(known) if key not in latest]
    if pending and not allow_partial:
        raise PendingItemsError(pending)
    out = []
    for annotation in annotations:
        kept = tuple(
            anomaly
            for index, anomaly in enumerate(annotation.anomalies)
            if (key := (annotation.image_id, index)) in latest
            and latest[key].decision is Decision.ACCEPT
        )
        out.append(
            ImageAnnotation(
                image_id=annotation.image_id,
                image_uri=annotation.image_uri,
                anomalies=kept,
                source_label=annotation.source_label,
                generator_tag=annotation.generator_tag,
                provenance=Provenance.HITL_VERIFIED,
                extra=dict(annotation.extra),
            )
        )
    return out
