"""Staged orchestration of the annotation agents over one image.

Stage 1 parses visual entities (several perceiver passes, union-merged by
normalized object name). Stage 2 mines candidate anomalies per object, first
intra-object attributes then inter-object relations, the latter seeded with
the object's attribute findings. Stage 3 consolidates every object's findings
in one global pass, categorizes them, and formats the survivors into the
structured block list parsed back into validated records.

Every backend call is content-addressed in an on-disk cache keyed by
(image hash, stage, subject object, prompt hash, model id), so rerunning an
image is a no-op that replays identical state without network traffic.
"""

from __future__ import annotations

import hashlib
import json
import logging
import re
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Sequence

from ..parsing import parse_structured_list
from ..records import AnomalyRecord, record_from_obj, record_to_obj
from .backends import ChatBackend, ChatBackendError
from . import prompts

logger = logging.getLogger(__name__)

STAGE_PERCEIVE = "perceive"
STAGE_ATTRIBUTES = "attributes"
STAGE_RELATIONS = "relations"
STAGE_INTEGRATE = "integrate"
STAGE_FORMAT = "format"

STAGES = (STAGE_PERCEIVE, STAGE_ATTRIBUTES, STAGE_RELATIONS, STAGE_INTEGRATE, STAGE_FORMAT)


class PipelineError(RuntimeError):
    """The image could not be processed at all (unreadable, or no stage succeeded)."""


class CandidateOrigin(str, Enum):
    ATTRIBUTE = "attribute"
    RELATION = "relation"
    INTEGRATED = "integrated"


@dataclass(frozen=True)
class DetectedObject:
    name: str
    description: str


@dataclass(frozen=True)
class CandidateAnomaly:
    origin: CandidateOrigin
    subject_object: str
    text: str


@dataclass
class StageTokens:
    prompt_tokens: int = 0
    completion_tokens: int = 0

    @property
    def total(self) -> int:
        return self.prompt_tokens + self.completion_tokens


@dataclass(frozen=True)
class PipelineConfig:
    endpoint: str = ""
    model: str = "gpt-4o"
    perceiver_passes: int = 3
    parallelism: int = 4
    retries: int = 3
    cache_dir: str | None = None

    def snapshot(self) -> dict:
        return {
            "endpoint": self.endpoint,
            "model": self.model,
            "perceiver_passes": self.perceiver_passes,
            "parallelism": self.parallelism,
            "retries": self.retries,
            "cache_dir": self.cache_dir,
        }


_CONFIG_KEYS = {"endpoint", "model", "perceiver_passes", "parallelism", "retries", "cache_dir"}
_INT_KEYS = {"perceiver_passes", "parallelism", "retries"}


def load_pipeline_config(path: str | Path) -> PipelineConfig:
    """Read a config file, either JSON or plain key=value lines."""
    text = Path(path).read_text(encoding="utf-8")
    stripped = text.lstrip()
    if stripped.startswith("{"):
        raw = json.loads(text)
    else:
        raw = {}
        for line_no, line in enumerate(text.splitlines(), 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValueError(f"config line {line_no} is not key=value: {line!r}")
            key, value = line.split("=", 1)
            raw[key.strip()] = value.strip()
    unknown = set(raw) - _CONFIG_KEYS
    if unknown:
        raise ValueError(f"unknown config keys: {', '.join(sorted(unknown))}")
    kwargs = {}
    for key, value in raw.items():
        kwargs[key] = int(value) if key in _INT_KEYS else value
    return PipelineConfig(**kwargs)


@dataclass
class PipelineState:
    """Everything one image produced: stage outputs, records, tokens, warnings."""

    image_id: str
    image_uri: str
    objects: list[DetectedObject] = field(default_factory=list)
    attribute_candidates: dict[str, list[CandidateAnomaly]] = field(default_factory=dict)
    relation_candidates: dict[str, list[CandidateAnomaly]] = field(default_factory=dict)
    integrated: list[CandidateAnomaly] = field(default_factory=list)
    final: list[AnomalyRecord] = field(default_factory=list)
    token_usage: dict[str, StageTokens] = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)
    config_snapshot: dict = field(default_factory=dict)

    @property
    def total_tokens(self) -> int:
        return sum(t.total for t in self.token_usage.values())

    def to_json_obj(self) -> dict:
        return {
            "image_id": self.image_id,
            "image_uri": self.image_uri,
            "objects": [{"name": o.name, "description": o.description} for o in self.objects],
            "attribute_candidates": {
                name: [_candidate_to_obj(c) for c in candidates]
                for name, candidates in self.attribute_candidates.items()
            },
            "relation_candidates": {
                name: [_candidate_to_obj(c) for c in candidates]
                for name, candidates in self.relation_candidates.items()
            },
            "integrated": [_candidate_to_obj(c) for c in self.integrated],
            "final": [record_to_obj(r) for r in self.final],
            "token_usage": {
                stage: {
                    "prompt_tokens": tokens.prompt_tokens,
                    "completion_tokens": tokens.completion_tokens,
                }
                for stage, tokens in self.token_usage.items()
            },
            "warnings": list(self.warnings),
            "config_snapshot": dict(self.config_snapshot),
        }

    @classmethod
    def from_json_obj(cls, obj: dict) -> "PipelineState":
        return cls(
            image_id=obj["image_id"],
            image_uri=obj.get("image_uri", ""),
            objects=[DetectedObject(**o) for o in obj.get("objects", [])],
            attribute_candidates={
                name: [_candidate_from_obj(c) for c in candidates]
                for name, candidates in obj.get("attribute_candidates", {}).items()
            },
            relation_candidates={
                name: [_candidate_from_obj(c) for c in candidates]
                for name, candidates in obj.get("relation_candidates", {}).items()
            },
            integrated=[_candidate_from_obj(c) for c in obj.get("integrated", [])],
            final=[record_from_obj(r) for r in obj.get("final", [])],
            token_usage={
                stage: StageTokens(**tokens)
                for stage, tokens in obj.get("token_usage", {}).items()
            },
            warnings=list(obj.get("warnings", [])),
            config_snapshot=dict(obj.get("config_snapshot", {})),
        )

    def save(self, path: str | Path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(
            json.dumps(self.to_json_obj(), indent=2, ensure_ascii=False) + "\n",
            encoding="utf-8",
        )

    @classmethod
    def load(cls, path: str | Path) -> "PipelineState":
        return cls.from_json_obj(json.loads(Path(path).read_text(encoding="utf-8")))


def _candidate_to_obj(candidate: CandidateAnomaly) -> dict:
    return {
        "origin": candidate.origin.value,
        "subject_object": candidate.subject_object,
        "text": candidate.text,
    }


def _candidate_from_obj(obj: dict) -> CandidateAnomaly:
    return CandidateAnomaly(
        origin=CandidateOrigin(obj["origin"]),
        subject_object=obj.get("subject_object", ""),
        text=obj["text"],
    )


# --- Sub-grammars -----------------------------------------------------------

_OBJECT_LINE_RE = re.compile(r"^\s*(?:[-*•]\s*)?#?\s*([^#:\n]{1,80}?)\s*#?\s*:\s*(\S.*)$")
_NUMBERED_ITEM_RE = re.compile(r"^\s*(?:[-*]\s*)?@?\d+\.\s")


def normalize_object_name(name: str) -> str:
    return " ".join(name.casefold().split())


def parse_object_list(text: str) -> list[DetectedObject]:
    """Parse ``#Name#: Description.`` lines (the hash marks are optional)."""
    objects = []
    for line in text.splitlines():
        match = _OBJECT_LINE_RE.match(line)
        if match is not None:
            objects.append(DetectedObject(name=match.group(1), description=match.group(2)))
    return objects


def split_numbered_blocks(text: str) -> list[str]:
    """Split a structured reply into its numbered items, dropping preamble."""
    blocks: list[list[str]] = []
    for line in text.splitlines():
        if _NUMBERED_ITEM_RE.match(line):
            blocks.append([line])
        elif blocks:
            blocks[-1].append(line)
    return ["\n".join(block).strip() for block in blocks if "\n".join(block).strip()]


_SUBJECT_RE = re.compile(r"(?im)^\s*(?:[-*•]\s*)?(?:\*\*)?\s*object name\s*(?:\*\*)?\s*[::]\s*(.+)$")


def _block_subject(text: str) -> str:
    match = _SUBJECT_RE.search(text)
    return match.group(1).strip() if match else ""


# --- Call plumbing ----------------------------------------------------------


class _CallContext:
    """Shared per-image plumbing: backend, ledger, warnings, optional cache."""

    def __init__(
        self,
        backend: ChatBackend,
        image: str | None,
        *,
        cache_dir: str | Path | None = None,
        image_hash: str = "",
    ):
        self.backend = backend
        self.image = image
        self.cache_dir = Path(cache_dir) if cache_dir else None
        self.image_hash = image_hash
        self.token_usage: dict[str, StageTokens] = {}
        self.warnings: list[str] = []
        self._lock = threading.Lock()

    def _cache_key(self, stage: str, subject: str, prompt: str) -> str:
        payload = "\n".join(
            (
                self.image_hash,
                stage,
                subject,
                hashlib.sha256(prompt.encode("utf-8")).hexdigest(),
                self.backend.model,
            )
        )
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()

    def _record_tokens(self, stage: str, prompt_tokens: int, completion_tokens: int) -> None:
        with self._lock:
            tokens = self.token_usage.setdefault(stage, StageTokens())
            tokens.prompt_tokens += prompt_tokens
            tokens.completion_tokens += completion_tokens

    def warn(self, message: str) -> None:
        with self._lock:
            self.warnings.append(message)

    def chat(self, stage: str, subject: str, prompt: str) -> str:
        if self.cache_dir is not None:
            entry_path = self.cache_dir / f"{self._cache_key(stage, subject, prompt)}.json"
            if entry_path.exists():
                entry = json.loads(entry_path.read_text(encoding="utf-8"))
                self._record_tokens(
                    stage, entry["prompt_tokens"], entry["completion_tokens"]
                )
                return entry["text"]
        result = self.backend.complete(prompt, self.image)
        self._record_tokens(stage, result.prompt_tokens, result.completion_tokens)
        if self.cache_dir is not None:
            self.cache_dir.mkdir(parents=True, exist_ok=True)
            # Unique temp name per writer: concurrent writers of the same key
            # produce identical content, and replace() keeps entries whole.
            tmp_path = entry_path.with_suffix(f".{threading.get_ident()}.tmp")
            tmp_path.write_text(
                json.dumps(
                    {
                        "text": result.text,
                        "prompt_tokens": result.prompt_tokens,
                        "completion_tokens": result.completion_tokens,
                    },
                    ensure_ascii=False,
                ),
                encoding="utf-8",
            )
            tmp_path.replace(entry_path)
        return result.text


# --- Stage implementations ---------------------------------------------------


def _perceive(ctx: _CallContext, passes: int) -> list[DetectedObject]:
    if passes < 1:
        raise ValueError("perceiver_passes must be >= 1")
    merged: dict[str, DetectedObject] = {}
    successes = 0
    for index in range(1, passes + 1):
        prompt = prompts.perceiver_prompt(index, passes)
        try:
            reply = ctx.chat(STAGE_PERCEIVE, f"pass-{index}", prompt)
        except ChatBackendError as err:
            ctx.warn(f"perceiver pass {index}/{passes} failed: {err}")
            continue
        successes += 1
        for obj in parse_object_list(reply):
            merged.setdefault(normalize_object_name(obj.name), obj)
    if successes == 0:
        raise PipelineError(f"all {passes} perceiver passes failed")
    return list(merged.values())


def _analyze_attributes(ctx: _CallContext, obj: DetectedObject) -> list[CandidateAnomaly]:
    try:
        analysis = ctx.chat(STAGE_ATTRIBUTES, obj.name, prompts.attribute_step1_prompt(obj.name))
        structured = ctx.chat(
            STAGE_ATTRIBUTES, obj.name, prompts.attribute_step2_prompt(obj.name, analysis)
        )
    except ChatBackendError as err:
        ctx.warn(f"attribute analysis failed for {obj.name!r}: {err}")
        return []
    return [
        CandidateAnomaly(origin=CandidateOrigin.ATTRIBUTE, subject_object=obj.name, text=block)
        for block in split_numbered_blocks(structured)
    ]


def _reason_relations(
    ctx: _CallContext,
    obj: DetectedObject,
    others: Sequence[DetectedObject],
    attr_context: Sequence[CandidateAnomaly],
) -> list[CandidateAnomaly]:
    if not others:
        return []
    other_names = [o.name for o in others]
    context_text = "\n".join(c.text for c in attr_context)
    try:
        analysis = ctx.chat(
            STAGE_RELATIONS,
            obj.name,
            prompts.relation_step1_prompt(obj.name, other_names, context_text),
        )
        structured = ctx.chat(
            STAGE_RELATIONS,
            obj.name,
            prompts.relation_step2_prompt(obj.name, other_names, analysis),
        )
    except ChatBackendError as err:
        ctx.warn(f"relation reasoning failed for {obj.name!r}: {err}")
        return []
    return [
        CandidateAnomaly(origin=CandidateOrigin.RELATION, subject_object=obj.name, text=block)
        for block in split_numbered_blocks(structured)
    ]


def _integrate_and_format(
    ctx: _CallContext,
    objects: Sequence[DetectedObject],
    attribute_candidates: dict[str, list[CandidateAnomaly]],
    relation_candidates: dict[str, list[CandidateAnomaly]],
) -> tuple[list[CandidateAnomaly], list[AnomalyRecord]]:
    has_candidates = any(attribute_candidates.values()) or any(relation_candidates.values())
    if not has_candidates:
        return [], []
    sections = []
    for obj in objects:
        sections.append(
            {
                "object_name": obj.name,
                "other_objects": [o.name for o in objects if o is not obj],
                "attribute_findings": "\n".join(
                    c.text for c in attribute_candidates.get(obj.name, [])
                ),
                "relation_findings": "\n".join(
                    c.text for c in relation_candidates.get(obj.name, [])
                ),
            }
        )
    try:
        consolidated = ctx.chat(STAGE_INTEGRATE, "", prompts.integrator_step1_prompt(sections))
        categorized = ctx.chat(
            STAGE_INTEGRATE, "", prompts.integrator_step2_prompt(consolidated)
        )
    except ChatBackendError as err:
        ctx.warn(f"integration failed: {err}")
        return [], []
    integrated = [
        CandidateAnomaly(
            origin=CandidateOrigin.INTEGRATED,
            subject_object=_block_subject(block),
            text=block,
        )
        for block in split_numbered_blocks(categorized)
    ]
    try:
        formatted = ctx.chat(STAGE_FORMAT, "", prompts.formatter_prompt(categorized))
    except ChatBackendError as err:
        ctx.warn(f"formatting failed: {err}")
        return integrated, []
    report = parse_structured_list(formatted)
    for block_index, reason in report.skipped_blocks:
        ctx.warn(f"formatter block {block_index} skipped: {reason}")
    if not report.records:
        ctx.warn("formatter emitted no parseable anomaly blocks")
    return integrated, list(report.records)


# --- Public operations -------------------------------------------------------


def perceive_objects(image: str, passes: int, backend: ChatBackend) -> list[DetectedObject]:
    """Run the perceiver ``passes`` times and union the parsed objects.

    Objects are deduplicated by case-folded, whitespace-collapsed name; the
    first-seen description wins. Fails only if every pass fails.
    """
    return _perceive(_CallContext(backend, image), passes)


def analyze_attributes(
    image: str, obj: DetectedObject, backend: ChatBackend
) -> list[CandidateAnomaly]:
    """Two-step intra-object analysis: free-form findings, then structured issues."""
    return _analyze_attributes(_CallContext(backend, image), obj)


def reason_relations(
    image: str,
    obj: DetectedObject,
    others: Sequence[DetectedObject],
    attr_context: Sequence[CandidateAnomaly],
    backend: ChatBackend,
) -> list[CandidateAnomaly]:
    """Two-step inter-object analysis seeded with the object's attribute findings.

    Skipped (empty result) for single-object images.
    """
    return _reason_relations(_CallContext(backend, image), obj, others, attr_context)


def integrate_and_format(
    image: str, state: PipelineState, backend: ChatBackend
) -> list[AnomalyRecord]:
    """Consolidate a state's candidates and format them into validated records."""
    ctx = _CallContext(backend, image)
    _, final = _integrate_and_format(
        ctx, state.objects, state.attribute_candidates, state.relation_candidates
    )
    state.warnings.extend(ctx.warnings)
    return final


def _image_identity(image: str) -> tuple[str, str]:
    """(image_id, content hash); local files must exist and are hashed by bytes."""
    if image.startswith(("http://", "https://")):
        tail = image.rstrip("/").rsplit("/", 1)[-1] or "image"
        return Path(tail).stem, hashlib.sha256(image.encode("utf-8")).hexdigest()
    path = Path(image)
    if not path.is_file():
        raise PipelineError(f"image not readable: {image}")
    return path.stem, hashlib.sha256(path.read_bytes()).hexdigest()


def run_pipeline(
    image: str,
    config: PipelineConfig,
    backend: ChatBackend,
    *,
    image_id: str | None = None,
    state_dir: str | Path | None = None,
) -> PipelineState:
    """Run all three stages over one image and return (and optionally persist) its state.

    Per-object stage-2 work runs concurrently up to ``config.parallelism``;
    stages 1 and 3 are barriers. With a cache directory configured, a rerun
    on identical inputs issues zero backend calls and replays identical state.
    """
    derived_id, image_hash = _image_identity(image)
    ctx = _CallContext(backend, image, cache_dir=config.cache_dir, image_hash=image_hash)

    objects = _perceive(ctx, config.perceiver_passes)

    attribute_candidates: dict[str, list[CandidateAnomaly]] = {}
    relation_candidates: dict[str, list[CandidateAnomaly]] = {}

    def mine(obj: DetectedObject) -> tuple[str, list[CandidateAnomaly], list[CandidateAnomaly]]:
        attrs = _analyze_attributes(ctx, obj)
        others = [o for o in objects if o is not obj]
        relations = _reason_relations(ctx, obj, others, attrs)
        return obj.name, attrs, relations

    if objects:
        workers = max(1, min(config.parallelism, len(objects)))
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for name, attrs, relations in pool.map(mine, objects):
                attribute_candidates[name] = attrs
                relation_candidates[name] = relations
    # Reassemble in object order so concurrency never changes the state.
    attribute_candidates = {o.name: attribute_candidates[o.name] for o in objects}
    relation_candidates = {o.name: relation_candidates[o.name] for o in objects}

    integrated, final = _integrate_and_format(
        ctx, objects, attribute_candidates, relation_candidates
    )

    state = PipelineState(
        image_id=image_id or derived_id,
        image_uri=image,
        objects=objects,
        attribute_candidates=attribute_candidates,
        relation_candidates=relation_candidates,
        integrated=integrated,
        final=final,
        token_usage=ctx.token_usage,
        warnings=ctx.warnings,
        config_snapshot=config.snapshot(),
    )
    if state_dir is not None:
        state.save(Path(state_dir) / f"{state.image_id}.json")
    return state


def expected_call_count(passes: int, object_count: int, *, with_candidates: bool = True) -> int:
    """Cold-cache backend calls for the default stage graph.

    perceiver passes + 2 attribute calls per object + 2 relation calls per
    object when relations exist (two or more objects) + 3 consolidation calls
    (global integration step, categorization step, formatter) when any
    candidates were mined.
    """
    calls = passes + 2 * object_count
    if object_count >= 2:
        calls += 2 * object_count
    if with_candidates and object_count:
        calls += 3
    return calls
