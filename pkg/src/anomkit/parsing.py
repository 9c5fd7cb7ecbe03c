"""Parser and formatter for the structured anomaly text formats.

The canonical block format, as emitted by :func:`format_structured_list`:

    @1. **Name**: <short title>
    **Phenomenon**: <what is visibly wrong>
    **Reasoning**: <why it is implausible>
    **Severity Score**: <value>.

Parsing is deliberately tolerant: blocks may start with ``@1.`` or ``1.``,
labels may carry bold markers and leading bullets, and the label synonyms
below are all accepted (case-insensitively). Severity values accept the
forms ``N``, ``N.``, ``N/100`` and ``N/100 (label)``.

Label synonyms:

    name        <- Name
    phenomenon  <- Phenomenon | Observed Phenomenon | Observed Issue | Observed
    reasoning   <- Reasoning | Explanation
    severity    <- Severity Score | Severity

Parsing never fails as a whole: malformed blocks are reported in
``ParseReport.skipped_blocks`` with a reason instead of aborting, so one bad
block cannot void an image at annotation scale. Text before the first
numbered block (model preamble) is ignored.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Sequence

from .records import AnomalyRecord, SchemaError, SourceLabel


class SourceAnswerError(ValueError):
    """A free-form source answer carries neither a yes nor a no signal."""


@dataclass(frozen=True)
class ParseReport:
    """Parsed records in document order plus the blocks that were skipped."""

    records: tuple[AnomalyRecord, ...]
    skipped_blocks: tuple[tuple[int, str], ...]


_BLOCK_START_RE = re.compile(r"^\s*(?:[-*•]\s*)?@?(\d+)\.\s*(.*)$")

_FIELD_LABELS = {
    "name": "name",
    "phenomenon": "phenomenon",
    "observed phenomenon": "phenomenon",
    "observed issue": "phenomenon",
    "observed": "phenomenon",
    "reasoning": "reasoning",
    "explanation": "reasoning",
    "severity score": "severity",
    "severity": "severity",
}

# Longest labels first so "observed phenomenon" wins over "observed".
_LABEL_ALTERNATION = "|".join(
    sorted((re.escape(label) for label in _FIELD_LABELS), key=len, reverse=True)
)
_FIELD_RE = re.compile(
    rf"^\s*(?:[-*•]\s*)?(?:\*\*)?\s*({_LABEL_ALTERNATION})\s*(?:\*\*)?\s*[::]\s*(.*)$",
    re.IGNORECASE,
)

_SEVERITY_RE = re.compile(
    r"^\s*(\d+(?:\.\d+)?(?:[eE][-+]?\d+)?)\s*(?:/\s*100)?\s*\.?\s*(?:\([^)]*\))?\s*\.?\s*$"
)


def parse_severity_text(text: str) -> float:
    """Parse a severity value in any of the accepted textual forms."""
    match = _SEVERITY_RE.match(text)
    if match is None:
        raise ValueError(f"unparseable severity: {text.strip()!r}")
    return float(match.group(1))


def _split_blocks(text: str) -> list[list[str]]:
    """Group lines into numbered blocks, dropping any preamble."""
    blocks: list[list[str]] = []
    current: list[str] | None = None
    for line in text.splitlines():
        start = _BLOCK_START_RE.match(line)
        if start is not None:
            current = [start.group(2)]
            blocks.append(current)
        elif current is not None:
            current.append(line)
    return blocks


def _parse_block(lines: Sequence[str]) -> AnomalyRecord:
    fields: dict[str, list[str]] = {}
    active: list[str] | None = None
    for line in lines:
        match = _FIELD_RE.match(line)
        if match is not None:
            key = _FIELD_LABELS[match.group(1).lower()]
            # First occurrence wins; repeats fall through as continuations.
            if key not in fields:
                fields[key] = [match.group(2).rstrip()]
                active = fields[key]
                continue
        if active is not None:
            active.append(line.rstrip())

    values = {key: "\n".join(parts).strip() for key, parts in fields.items()}
    for key in ("name", "phenomenon", "reasoning", "severity"):
        if not values.get(key):
            raise ValueError(f"missing {key}")
    severity = parse_severity_text(values["severity"])
    try:
        return AnomalyRecord(
            name=values["name"],
            phenomenon=values["phenomenon"],
            reasoning=values["reasoning"],
            severity=severity,
        )
    except SchemaError as err:
        raise ValueError(err.bare_message) from err


def parse_structured_list(text: str) -> ParseReport:
    """Parse a numbered anomaly list. Total: bad blocks are skipped, not fatal."""
    records: list[AnomalyRecord] = []
    skipped: list[tuple[int, str]] = []
    for index, block in enumerate(_split_blocks(text)):
        try:
            records.append(_parse_block(block))
        except ValueError as err:
            skipped.append((index, str(err)))
    return ParseReport(records=tuple(records), skipped_blocks=tuple(skipped))


def format_severity(value: float) -> str:
    if float(value).is_integer():
        return str(int(value))
    return repr(float(value))


def format_structured_list(records: Sequence[AnomalyRecord]) -> str:
    """Emit the canonical block form; parse_structured_list round-trips it."""
    blocks = []
    for number, record in enumerate(records, 1):
        blocks.append(
            f"@{number}. **Name**: {record.name}\n"
            f"**Phenomenon**: {record.phenomenon}\n"
            f"**Reasoning**: {record.reasoning}\n"
            f"**Severity Score**: {format_severity(record.severity)}."
        )
    return "\n\n".join(blocks)


_YES_RE = re.compile(r"^\W*yes\b", re.IGNORECASE)
_NO_RE = re.compile(r"^\W*no\b", re.IGNORECASE)

_AI_PHRASES = (
    "generated by ai",
    "generated by artificial intelligence",
    "ai-generated",
    "ai generated",
    "is generated",
)
_REAL_PHRASES = (
    "real photograph",
    "real photo",
    "real image",
    "not generated",
    "is real",
)


def parse_source_answer(text: str) -> SourceLabel:
    """Map a free-form yes/no source answer to a real|ai label.

    Only the first sentence is inspected; a leading yes/no wins over any
    phrase found later in that sentence.
    """
    first_sentence = re.split(r"[.!?\n]", text, maxsplit=1)[0]
    if _YES_RE.match(first_sentence):
        return SourceLabel.AI
    if _NO_RE.match(first_sentence):
        return SourceLabel.REAL
    lowered = first_sentence.lower()
    if any(phrase in lowered for phrase in _AI_PHRASES):
        return SourceLabel.AI
    if any(phrase in lowered for phrase in _REAL_PHRASES):
        return SourceLabel.REAL
    raise SourceAnswerError(f"unparseable source answer: {text.strip()[:80]!r}")
