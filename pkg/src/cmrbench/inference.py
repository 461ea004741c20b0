"""Local-inference client: Ollama-compatible HTTP backend and an in-process mock.

Both backends expose the same three calls (``generate``, ``health_check``,
``list_models``). Latency is always wall clock measured on this side of the
wire; the server's own ``total_duration`` is kept as metadata only.
"""

from __future__ import annotations

import json
import logging
import os
import threading
import time
from dataclasses import dataclass, field
from typing import Mapping, Optional
from urllib.parse import urlparse

import requests

logger = logging.getLogger(__name__)

DEFAULT_ENDPOINT = "http://localhost:11434"
DEFAULT_MOCK_RESPONSE = '{"diagnosis":"OTHER"}'


class InferenceError(Exception):
    """Base class for backend failures."""

    def __init__(self, message: str, attempts: int = 1):
        super().__init__(message)
        self.attempts = attempts


class TransportError(InferenceError):
    pass


class RequestTimeout(TransportError):
    pass


class ServerError(InferenceError):
    def __init__(self, message: str, status: int, attempts: int = 1):
        super().__init__(message, attempts)
        self.status = status


class ModelNotFound(ServerError):
    pass


@dataclass(frozen=True)
class GenerationRequest:
    model_ref: str
    prompt: str
    temperature: float = 0.0
    max_tokens: Optional[int] = None
    timeout: float = 120.0
    stream: bool = False

    def __post_init__(self) -> None:
        if not self.prompt:
            raise ValueError("prompt must be non-empty")
        if self.timeout <= 0:
            raise ValueError("timeout must be > 0")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.stream:
            raise ValueError("streaming is not supported")

    def payload(self) -> dict:
        options: dict = {"temperature": float(self.temperature)}
        if self.max_tokens is not None:
            options["num_predict"] = int(self.max_tokens)
        return {"model": self.model_ref, "prompt": self.prompt, "stream": False, "options": options}


@dataclass(frozen=True)
class GenerationResult:
    text: str
    wall_latency: float
    server_reported_duration: Optional[float] = None
    attempts: int = 1


@dataclass(frozen=True)
class Health:
    healthy: bool
    reason: Optional[str] = None

    def __bool__(self) -> bool:
        return self.healthy


HEALTHY = Health(True)


def resolve_endpoint(flag: Optional[str] = None) -> str:
    return flag or os.environ.get("HARNESS_ENDPOINT") or DEFAULT_ENDPOINT


class HttpBackend:
    """Non-streaming client for ``/api/generate`` and ``/api/tags``."""

    kind = "http"

    def __init__(
        self,
        endpoint: str = DEFAULT_ENDPOINT,
        max_retries: int = 2,
        retry_backoff: float = 1.0,
        session: Optional[requests.Session] = None,
    ):
        parsed = urlparse(endpoint)
        if parsed.scheme not in ("http", "https") or not parsed.netloc:
            raise ValueError(f"invalid endpoint URL {endpoint!r}")
        if max_retries < 0:
            raise ValueError("max_retries must be >= 0")
        self.endpoint = endpoint.rstrip("/")
        self.max_retries = max_retries
        self.retry_backoff = retry_backoff
        self.session = session or requests.Session()

    def __repr__(self) -> str:
        return f"HttpBackend({self.endpoint!r})"

    def generate(self, req: GenerationRequest) -> GenerationResult:
        url = f"{self.endpoint}/api/generate"
        body = req.payload()
        attempts = 0
        last_error: Optional[Exception] = None
        while attempts <= self.max_retries:
            if attempts:
                time.sleep(self.retry_backoff)
            attempts += 1
            start = time.perf_counter()
            try:
                resp = self.session.post(url, json=body, timeout=req.timeout)
                content = resp.content
            except requests.Timeout as exc:
                last_error = exc
                logger.warning("timeout on attempt %d for %s", attempts, req.model_ref)
                continue
            except requests.RequestException as exc:
                last_error = exc
                logger.warning("transport failure on attempt %d: %s", attempts, exc)
                continue
            latency = time.perf_counter() - start
            return self._decode(resp, content, req, latency, attempts)

        if isinstance(last_error, requests.Timeout):
            raise RequestTimeout(f"request timed out after {attempts} attempt(s)", attempts)
        raise TransportError(f"transport failure after {attempts} attempt(s): {last_error}", attempts)

    def _decode(self, resp, content: bytes, req: GenerationRequest, latency: float, attempts: int):
        try:
            data = json.loads(content.decode("utf-8")) if content else {}
        except (UnicodeDecodeError, json.JSONDecodeError):
            data = {}
        if resp.status_code == 404 or (
            resp.status_code >= 400 and "not found" in str(data.get("error", "")).lower()
        ):
            raise ModelNotFound(f"model {req.model_ref!r} not found", resp.status_code, attempts)
        if resp.status_code >= 400:
            raise ServerError(
                f"server returned {resp.status_code}: {data.get('error', '')}", resp.status_code, attempts
            )
        if not isinstance(data, dict) or not isinstance(data.get("response"), str):
            raise ServerError("malformed generate response", resp.status_code, attempts)
        total = data.get("total_duration")
        server_seconds = total / 1e9 if isinstance(total, (int, float)) else None
        return GenerationResult(data["response"], latency, server_seconds, attempts)

    def list_models(self) -> list[str]:
        try:
            resp = self.session.get(f"{self.endpoint}/api/tags", timeout=10)
            resp.raise_for_status()
            data = resp.json()
        except requests.RequestException as exc:
            raise TransportError(f"cannot list models: {exc}") from exc
        except ValueError as exc:
            raise TransportError(f"malformed model listing: {exc}") from exc
        return [m["name"] for m in data.get("models", []) if "name" in m]

    def health_check(self, model_ref: Optional[str] = None) -> Health:
        try:
            names = self.list_models()
        except TransportError as exc:
            return Health(False, f"transport: {exc}")
        if model_ref is not None and model_ref not in names:
            # Ollama treats "name" and "name:latest" as the same model.
            if f"{model_ref}:latest" not in names:
                return Health(False, f"model-missing: {model_ref}")
        return HEALTHY


@dataclass(frozen=True)
class MockProfile:
    """Keyword table for one mock model.

    The response whose keyword occurs earliest in the prompt wins
    (case-insensitive); at equal positions the longer keyword wins, then
    table order.
    """

    answers: Mapping[str, str] = field(default_factory=dict)
    latency: float = 0.0
    default: str = DEFAULT_MOCK_RESPONSE

    def __post_init__(self) -> None:
        object.__setattr__(self, "answers", dict(self.answers))
        if self.latency < 0:
            raise ValueError("latency must be >= 0")

    def respond(self, prompt: str) -> str:
        haystack = prompt.casefold()
        best = None
        for order, (keyword, answer) in enumerate(self.answers.items()):
            pos = haystack.find(keyword.casefold())
            if pos < 0:
                continue
            key = (pos, -len(keyword), order)
            if best is None or key < best[0]:
                best = (key, answer)
        return best[1] if best else self.default

    def to_dict(self) -> dict:
        return {"answers": dict(self.answers), "latency": self.latency, "default": self.default}

    @classmethod
    def from_dict(cls, data: Mapping) -> "MockProfile":
        return cls(
            answers=data.get("answers", {}),
            latency=float(data.get("latency", 0.0)),
            default=data.get("default", DEFAULT_MOCK_RESPONSE),
        )


class MockBackend:
    """Deterministic in-process backend serving one keyword profile per model.

    Every call is recorded in ``calls`` as ``(model_ref, prompt)`` so tests can
    count requests per model.
    """

    kind = "mock"

    def __init__(self, profiles: Mapping[str, MockProfile]):
        if not profiles:
            raise ValueError("a mock backend needs at least one profile")
        self.profiles = dict(profiles)
        self.calls: list[tuple[str, str]] = []
        self._lock = threading.Lock()

    @classmethod
    def single(cls, answers: Mapping[str, str] | None = None, latency: float = 0.0, name: str = "mock"):
        return cls({name: MockProfile(answers or {}, latency)})

    @classmethod
    def from_file(cls, path) -> "MockBackend":
        """Load ``{"models": {name: profile}}`` or a bare single profile."""
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
        if "models" in data:
            return cls({name: MockProfile.from_dict(p) for name, p in data["models"].items()})
        return cls({"mock": MockProfile.from_dict(data)})

    def __repr__(self) -> str:
        return f"MockBackend({sorted(self.profiles)})"

    def request_count(self, model_ref: Optional[str] = None) -> int:
        with self._lock:
            return sum(1 for m, _ in self.calls if model_ref is None or m == model_ref)

    def generate(self, req: GenerationRequest) -> GenerationResult:
        profile = self.profiles.get(req.model_ref)
        if profile is None:
            raise ModelNotFound(f"model {req.model_ref!r} not found", 404)
        start = time.perf_counter()
        with self._lock:
            self.calls.append((req.model_ref, req.prompt))
        text = profile.respond(req.prompt)
        if profile.latency:
            time.sleep(profile.latency)
        return GenerationResult(text, time.perf_counter() - start, None, 1)

    def list_models(self) -> list[str]:
        return list(self.profiles)

    def health_check(self, model_ref: Optional[str] = None) -> Health:
        if model_ref is not None and model_ref not in self.profiles:
            return Health(False, f"model-missing: {model_ref}")
        return HEALTHY
