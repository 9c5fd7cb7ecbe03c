"""Chat-completions backends for the annotation pipeline.

The wire format is the OpenAI-compatible subset only:

    request:  {"model": str, "messages": [{"role": "user", "content":
                  [{"type": "text", "text": ...},
                   {"type": "image_url", "image_url": {"url": ...}}]}]}
    response: {"choices": [{"message": {"content": str}}],
               "usage": {"prompt_tokens": int, "completion_tokens": int}}

Images are attached as http(s) URLs or inlined as base64 data URLs for local
files. Transport failures are retried with exponential backoff up to the
configured budget.
"""

from __future__ import annotations

import base64
import mimetypes
import threading
import time
from abc import ABC, abstractmethod
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import httpx


class ChatBackendError(RuntimeError):
    """A chat request could not be completed within the retry budget."""


@dataclass(frozen=True)
class ChatResult:
    text: str
    prompt_tokens: int
    completion_tokens: int


class ChatBackend(ABC):
    """Behavioral contract: one user turn in, text plus token usage out."""

    model: str = "unknown"

    @abstractmethod
    def complete(self, prompt: str, image: str | None = None) -> ChatResult:
        ...


def image_content_part(image: str) -> dict:
    """Build the image attachment part: pass URLs through, inline local files."""
    if image.startswith(("http://", "https://", "data:")):
        url = image
    else:
        path = Path(image)
        mime = mimetypes.guess_type(path.name)[0] or "application/octet-stream"
        encoded = base64.b64encode(path.read_bytes()).decode("ascii")
        url = f"data:{mime};base64,{encoded}"
    return {"type": "image_url", "image_url": {"url": url}}


class OpenAIChatBackend(ChatBackend):
    """Client for any chat-completions endpoint speaking the subset above."""

    def __init__(
        self,
        endpoint: str,
        model: str,
        *,
        api_key: str | None = None,
        retries: int = 3,
        backoff: float = 0.5,
        timeout: float = 120.0,
        transport: httpx.BaseTransport | None = None,
    ):
        self.endpoint = endpoint
        self.model = model
        self.retries = retries
        self.backoff = backoff
        headers = {"Authorization": f"Bearer {api_key}"} if api_key else {}
        self._client = httpx.Client(timeout=timeout, headers=headers, transport=transport)

    def build_request(self, prompt: str, image: str | None) -> dict:
        content: list[dict] = [{"type": "text", "text": prompt}]
        if image is not None:
            content.append(image_content_part(image))
        return {"model": self.model, "messages": [{"role": "user", "content": content}]}

    def complete(self, prompt: str, image: str | None = None) -> ChatResult:
        payload = self.build_request(prompt, image)
        last_error: Exception | None = None
        for attempt in range(self.retries + 1):
            if attempt:
                time.sleep(self.backoff * 2 ** (attempt - 1))
            try:
                response = self._client.post(self.endpoint, json=payload)
                if response.status_code == 429 or response.status_code >= 500:
                    last_error = ChatBackendError(f"status {response.status_code}")
                    continue
                response.raise_for_status()
                body = response.json()
                text = body["choices"][0]["message"]["content"]
                usage = body.get("usage") or {}
                return ChatResult(
                    text=text,
                    prompt_tokens=int(usage.get("prompt_tokens", 0)),
                    completion_tokens=int(usage.get("completion_tokens", 0)),
                )
            except httpx.TransportError as err:
                last_error = err
            except (httpx.HTTPStatusError, KeyError, IndexError, ValueError) as err:
                raise ChatBackendError(f"malformed chat response: {err}") from err
        raise ChatBackendError(
            f"chat request failed after {self.retries} retries: {last_error}"
        )

    def close(self) -> None:
        self._client.close()


class ScriptedChatBackend(ChatBackend):
    """Deterministic in-process backend driven by a responder function.

    The responder maps ``(prompt, image)`` to the reply text; token counts
    default to whitespace word counts so ledgers stay deterministic. Raising
    from the responder simulates a transport failure. Thread safe; keeps a
    call log for prompt audits.
    """

    def __init__(
        self,
        responder: Callable[[str, str | None], str],
        *,
        model: str = "scripted",
        token_counter: Callable[[str], int] | None = None,
    ):
        self.model = model
        self.responder = responder
        self.token_counter = token_counter or (lambda text: len(text.split()))
        self.calls: list[tuple[str, str | None]] = []
        self._lock = threading.Lock()

    @property
    def call_count(self) -> int:
        return len(self.calls)

    def complete(self, prompt: str, image: str | None = None) -> ChatResult:
        with self._lock:
            self.calls.append((prompt, image))
        text = self.responder(prompt, image)
        return ChatResult(
            text=text,
            prompt_tokens=self.token_counter(prompt),
            completion_tokens=self.token_counter(text),
        )


class UsageTrackingBackend(ChatBackend):
    """Decorator counting the calls and tokens actually spent on a backend."""

    def __init__(self, inner: ChatBackend):
        self.inner = inner
        self.model = inner.model
        self.calls = 0
        self.prompt_tokens = 0
        self.completion_tokens = 0
        self._lock = threading.Lock()

    @property
    def total_tokens(self) -> int:
        return self.prompt_tokens + self.completion_tokens

    def complete(self, prompt: str, image: str | None = None) -> ChatResult:
        result = self.inner.complete(prompt, image)
        with self._lock:
            self.calls += 1
            self.prompt_tokens += result.prompt_tokens
            self.completion_tokens += result.completion_tokens
        return result
