from __future__ import annotations

import json

import httpx
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from anomkit.records import SimilarityConfig
from anomkit.similarity import (
    RemoteScoreBackend,
    ScoringError,
    ScoringProtocolError,
    SurrogateBackend,
    surrogate_score,
    view_similarity,
)
from conftest import record
from scoring_sidecar import create_app, sidecar_transport


class TestSurrogate:
    def test_identical_text(self):
        assert surrogate_score("the chair floats", "the chair floats") == 1.0

    def test_hand_token_count_oracle(self):
        # hyp tokens {chair, floats, above, floor}, ref {chair, floats}:
        # P = 2/4, R = 2/2, F1 = 2*0.5*1/(0.5+1) = 2/3
        expected = 2 * 0.5 * 1.0 / (0.5 + 1.0)
        assert surrogate_score("chair floats above floor", "chair floats") == expected

    def test_both_empty(self):
        assert surrogate_score("", "") == 1.0
        assert surrogate_score("...", "!!") == 1.0  # punctuation-only means no tokens

    def test_one_empty(self):
        assert surrogate_score("a chair", "") == 0.0
        assert surrogate_score("", "a chair") == 0.0

    def test_case_and_punctuation_folded(self):
        assert surrogate_score("The Chair!", "the chair") == 1.0

    def test_multiset_counting(self):
        # "a a b" vs "a b b": overlap = min counts = a:1 + b:1 = 2, P = R = 2/3
        assert surrogate_score("a a b", "a b b") == pytest.approx(2 / 3)

    @settings(max_examples=100, deadline=None)
    @given(st.text(min_size=1).filter(lambda s: any(c.isalnum() for c in s)))
    def test_self_similarity_is_one(self, text):
        assert surrogate_score(text, text) == 1.0

    @settings(max_examples=100, deadline=None)
    @given(st.text(max_size=40), st.text(max_size=40))
    def test_bounds(self, a, b):
        assert 0.0 <= surrogate_score(a, b) <= 1.0


class TestViewSimilarity:
    def test_identity_pair(self):
        rec = record()
        score = view_similarity(rec, rec, SimilarityConfig(), SurrogateBackend())
        assert (score.phe, score.rea, score.full) == (1.0, 1.0, 1.0)

    def test_alpha_mix(self):
        pred = record(phenomenon="a b c d e", reasoning="x y z w q")
        gt = record(phenomenon="a b c d f", reasoning="x y z n m")
        backend = SurrogateBackend()
        score = view_similarity(pred, gt, SimilarityConfig(alpha=0.5), backend)
        assert score.full == pytest.approx(0.5 * score.phe + 0.5 * score.rea)

    def test_formula_substitution(self):
        class Fixed(SurrogateBackend):
            def score(self, h, r):
                return 0.8 if "phe" in h else 0.6

        score = view_similarity(
            record(phenomenon="phe text", reasoning="rea text"),
            record(),
            SimilarityConfig(alpha=0.5),
            Fixed(),
        )
        assert score.full == pytest.approx(0.7)

    def test_alpha_one_equals_phe(self):
        pred = record(phenomenon="a b", reasoning="totally different words")
        gt = record(phenomenon="a b", reasoning="nothing shared here")
        score = view_similarity(pred, gt, SimilarityConfig(alpha=1.0), SurrogateBackend())
        assert score.full == score.phe == 1.0

    def test_name_and_severity_never_scored(self):
        seen = []

        class Spy(SurrogateBackend):
            def score(self, h, r):
                seen.append((h, r))
                return 1.0

        pred = record(name="LEFT-NAME", severity=5)
        gt = record(name="RIGHT-NAME", severity=95)
        view_similarity(pred, gt, SimilarityConfig(), Spy())
        for h, r in seen:
            assert "NAME" not in h and "NAME" not in r

    def test_full_monotone_in_components(self):
        cfg = SimilarityConfig(alpha=0.3)
        low = view_similarity(
            record(phenomenon="a b c d", reasoning="p q"), record(phenomenon="a b x y", reasoning="p q"), cfg, SurrogateBackend()
        )
        high = view_similarity(
            record(phenomenon="a b c d", reasoning="p q"), record(phenomenon="a b c d", reasoning="p q"), cfg, SurrogateBackend()
        )
        assert high.full >= low.full


class TestRemoteBackend:
    def test_identical_strings_score_one(self):
        backend = RemoteScoreBackend("http://sidecar/score", transport=sidecar_transport())
        assert backend.score("same text", "same text") == pytest.approx(1.0, abs=1e-3)

    def test_cache_avoids_network(self):
        backend = RemoteScoreBackend("http://sidecar/score", transport=sidecar_transport())
        first = backend.score("a b", "a c")
        calls_after_first = backend.network_calls
        second = backend.score("a b", "a c")
        assert backend.network_calls == calls_after_first == 1
        assert first == second

    def test_batch_queries_only_uncached(self):
        backend = RemoteScoreBackend("http://sidecar/score", transport=sidecar_transport())
        backend.score("h1", "r1")
        scores = backend.score_pairs([("h1", "r1"), ("h2", "r2")])
        assert backend.network_calls == 2
        assert len(scores) == 2

    def test_endpoint_down_errors_after_retries(self):
        attempts = []

        def handler(request):
            attempts.append(1)
            raise httpx.ConnectError("down", request=request)

        backend = RemoteScoreBackend(
            "http://sidecar/score",
            retries=2,
            backoff=0.0,
            transport=httpx.MockTransport(handler),
        )
        with pytest.raises(ScoringError, match="pair indices \\[0\\]"):
            backend.score("h", "r")
        assert len(attempts) == 3  # initial call + 2 retries

    def test_server_error_retried_then_recovers(self):
        state = {"n": 0}

        def handler(request):
            state["n"] += 1
            if state["n"] == 1:
                return httpx.Response(503)
            payload = json.loads(request.content)
            return httpx.Response(200, json={"scores": [0.5] * len(payload["pairs"])})

        backend = RemoteScoreBackend(
            "http://sidecar/score", backoff=0.0, transport=httpx.MockTransport(handler)
        )
        assert backend.score("h", "r") == 0.5
        assert state["n"] == 2

    def test_non_numeric_response_is_protocol_error(self):
        transport = httpx.MockTransport(
            lambda request: httpx.Response(200, json={"scores": ["high"]})
        )
        backend = RemoteScoreBackend("http://sidecar/score", transport=transport)
        with pytest.raises(ScoringProtocolError):
            backend.score("h", "r")

    def test_scores_clamped(self):
        transport = httpx.MockTransport(
            lambda request: httpx.Response(200, json={"scores": [1.7]})
        )
        backend = RemoteScoreBackend("http://sidecar/score", transport=transport)
        assert backend.score("h", "r") == 1.0

    def test_cache_file_round_trip(self, tmp_path):
        cache = tmp_path / "scores.jsonl"
        first = RemoteScoreBackend(
            "http://sidecar/score", transport=sidecar_transport(), cache_path=cache
        )
        value = first.score("hello there", "hello world")
        entry = json.loads(cache.read_text().splitlines()[0])
        assert set(entry) == {"backend_id", "h_hash", "r_hash", "score"}

        def refuse(request):
            raise httpx.ConnectError("no network allowed", request=request)

        second = RemoteScoreBackend(
            "http://sidecar/score",
            transport=httpx.MockTransport(refuse),
            cache_path=cache,
        )
        assert second.score("hello there", "hello world") == value
        assert second.network_calls == 0


def test_sidecar_app_speaks_the_protocol():
    from fastapi.testclient import TestClient

    client = TestClient(create_app())
    response = client.post("/score", json={"pairs": [["a b", "a b"], ["a", "z"]]})
    assert response.status_code == 200
    assert response.json()["scores"] == [1.0, 0.0]
