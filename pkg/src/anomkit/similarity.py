"""Field-wise text similarity backends and the per-view score combination.

Two interchangeable backends implement the same [0, 1] scoring contract:

* :class:`SurrogateBackend` — deterministic token-overlap F1, so the whole
  metric engine is testable offline and bit-reproducible.
* :class:`RemoteScoreBackend` — client for an embedding-based scoring
  service speaking ``POST {"pairs": [[hyp, ref], ...]} -> {"scores": [...]}``,
  with retries, response clamping and a persistent score cache.

Swapping backends changes scores only, never metric-engine control flow.
"""

from __future__ import annotations

import hashlib
import json
import logging
import re
import threading
import time
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import httpx

from .records import AnomalyRecord, SimilarityConfig

logger = logging.getLogger(__name__)


class ScoringError(RuntimeError):
    """Remote scoring failed after the configured retries."""


class ScoringProtocolError(ScoringError):
    """The scoring endpoint answered with something other than numeric scores."""


@dataclass(frozen=True)
class ViewScore:
    """Similarity of one (prediction, ground-truth) pair under all three views."""

    phe: float
    rea: float
    full: float


class SimilarityBackend:
    """Behavioral contract: deterministic ``score(hyp, ref)`` clamped to [0, 1]."""

    backend_id: str = "base"

    def score(self, hypothesis: str, reference: str) -> float:
        raise NotImplementedError

    def score_pairs(self, pairs: Sequence[tuple[str, str]]) -> list[float]:
        return [self.score(h, r) for h, r in pairs]


_TOKEN_RE = re.compile(r"\w+", re.UNICODE)


def surrogate_score(hypothesis: str, reference: str) -> float:
    """Token-overlap F1 between two texts.

    Both texts are lowercased and split on whitespace/punctuation boundaries;
    precision and recall are computed over token multisets and combined by
    harmonic mean. Two token-empty texts score 1, exactly one scores 0.
    """
    hyp = _TOKEN_RE.findall(hypothesis.lower())
    ref = _TOKEN_RE.findall(reference.lower())
    if not hyp and not ref:
        return 1.0
    if not hyp or not ref:
        return 0.0
    overlap = sum((Counter(hyp) & Counter(ref)).values())
    if overlap == 0:
        return 0.0
    precision = overlap / len(hyp)
    recall = overlap / len(ref)
    return 2.0 * precision * recall / (precision + recall)


class SurrogateBackend(SimilarityBackend):
    """Deterministic lexical stand-in for the embedding-based scorer."""

    backend_id = "surrogate"

    def score(self, hypothesis: str, reference: str) -> float:
        return surrogate_score(hypothesis, reference)


def _text_hash(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


class RemoteScoreBackend(SimilarityBackend):
    """HTTP client for the pair-scoring protocol, with caching and retries.

    Scores are cached in memory by ``(backend_id, sha256(hyp), sha256(ref))``
    and optionally persisted to a JSONL cache file with entries
    ``{"backend_id", "h_hash", "r_hash", "score"}``. Cached pairs are never
    re-sent; ``network_calls`` counts actual HTTP requests.
    """

    def __init__(
        self,
        endpoint: str,
        *,
        backend_id: str = "remote",
        retries: int = 3,
        backoff: float = 0.2,
        timeout: float = 30.0,
        cache_path: str | Path | None = None,
        transport: httpx.BaseTransport | None = None,
    ):
        self.endpoint = endpoint
        self.backend_id = backend_id
        self.retries = retries
        self.backoff = backoff
        self.network_calls = 0
        self._cache: dict[tuple[str, str, str], float] = {}
        self._lock = threading.Lock()
        self._cache_path = Path(cache_path) if cache_path else None
        self._client = httpx.Client(timeout=timeout, transport=transport)
        if self._cache_path and self._cache_path.exists():
            self._load_cache_file()

    def _load_cache_file(self) -> None:
        for line in self._cache_path.read_text(encoding="utf-8").splitlines():
            if not line.strip():
                continue
            try:
                entry = json.loads(line)
                key = (entry["backend_id"], entry["h_hash"], entry["r_hash"])
                self._cache[key] = float(entry["score"])
            except (ValueError, KeyError, TypeError):
                logger.warning("skipping malformed cache line in %s", self._cache_path)

    def _append_cache_file(self, entries: Iterable[tuple[tuple[str, str, str], float]]) -> None:
        if self._cache_path is None:
            return
        self._cache_path.parent.mkdir(parents=True, exist_ok=True)
        with self._cache_path.open("a", encoding="utf-8") as handle:
            for (backend_id, h_hash, r_hash), score in entries:
                handle.write(
                    json.dumps(
                        {
                            "backend_id": backend_id,
                            "h_hash": h_hash,
                            "r_hash": r_hash,
                            "score": score,
                        }
                    )
                    + "\n"
                )

    def _post(self, pairs: list[list[str]], pair_indices: Sequence[int]) -> list[float]:
        last_error: Exception | None = None
        for attempt in range(self.retries + 1):
            if attempt:
                time.sleep(self.backoff * 2 ** (attempt - 1))
            try:
                with self._lock:
                    self.network_calls += 1
                response = self._client.post(self.endpoint, json={"pairs": pairs})
                if response.status_code >= 500:
                    last_error = ScoringError(f"server error {response.status_code}")
                    continue
                if response.status_code >= 400:
                    raise ScoringProtocolError(
                        f"scoring endpoint rejected request: {response.status_code}"
                    )
                payload = response.json()
                scores = payload.get("scores") if isinstance(payload, dict) else None
                if (
                    not isinstance(scores, list)
                    or len(scores) != len(pairs)
                    or any(isinstance(s, bool) or not isinstance(s, (int, float)) for s in scores)
                ):
                    raise ScoringProtocolError(
                        "scoring endpoint returned a malformed scores payload"
                    )
                return [min(1.0, max(0.0, float(s))) for s in scores]
            except httpx.TransportError as err:
                last_error = err
        raise ScoringError(
            f"scoring request failed after {self.retries} retries "
            f"(pair indices {list(pair_indices)}): {last_error}"
        )

    def score_pairs(self, pairs: Sequence[tuple[str, str]]) -> list[float]:
        keys = [
            (self.backend_id, _text_hash(h), _text_hash(r)) for h, r in pairs
        ]
        with self._lock:
            missing = [i for i, key in enumerate(keys) if key not in self._cache]
        if missing:
            fetched = self._post([[pairs[i][0], pairs[i][1]] for i in missing], missing)
            new_entries = []
            with self._lock:
                for i, score in zip(missing, fetched):
                    # Last writer wins; scores are deterministic so races are benign.
                    if keys[i] not in self._cache:
                        new_entries.append((keys[i], score))
                    self._cache[keys[i]] = score
            self._append_cache_file(new_entries)
        with self._lock:
            return [self._cache[key] for key in keys]

    def score(self, hypothesis: str, reference: str) -> float:
        return self.score_pairs([(hypothesis, reference)])[0]

    def close(self) -> None:
        self._client.close()


def remote_score(hypothesis: str, reference: str, endpoint: str, **kwargs) -> float:
    """One-shot convenience wrapper around :class:`RemoteScoreBackend`."""
    backend = RemoteScoreBackend(endpoint, **kwargs)
    try:
        return backend.score(hypothesis, reference)
    finally:
        backend.close()


def view_similarity(
    pred: AnomalyRecord,
    gt: AnomalyRecord,
    cfg: SimilarityConfig,
    backend: SimilarityBackend,
) -> ViewScore:
    """Score one record pair under all views.

    phe compares the phenomenon fields, rea the reasoning fields, and
    full = alpha * phe + (1 - alpha) * rea. Name and severity are never scored.
    """
    phe, rea = backend.score_pairs(
        [(pred.phenomenon, gt.phenomenon), (pred.reasoning, gt.reasoning)]
    )
    return ViewScore(phe=phe, rea=rea, full=cfg.alpha * phe + (1.0 - cfg.alpha) * rea)
