"""Cache-first chat client for remote LLM providers.

Every response is stored as ``<cache_dir>/<prompt_hash>.json``. A cached prompt
is never sent again, and in offline mode a miss raises instead of calling out,
which is what makes recorded runs replayable.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import tempfile
import threading
import time
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable

import httpx

from ..config import read_toml
from ..errors import CredentialMissing, OfflineCacheMiss, ProviderError

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ProviderConfig:
    provider: str
    model: str
    endpoint: str | None = None
    api_key_env: str | None = None
    temperature: float = 0.0
    max_tokens: int | None = None
    timeout: float = 120.0
    max_attempts: int = 3
    backoff: float = 1.0
    max_concurrency: int = 4

    def __post_init__(self):
        if self.provider not in ADAPTERS:
            raise ValueError(f"unknown provider {self.provider!r}; expected one of {sorted(ADAPTERS)}")

    @property
    def adapter(self) -> ProviderAdapter:
        return ADAPTERS[self.provider]

    @property
    def key_env(self) -> str:
        return self.api_key_env or self.adapter.key_env

    def describe(self) -> dict:
        """Settings that influence outputs (recorded in run manifests)."""
        return {
            "provider": self.provider,
            "model": self.model,
            "endpoint": self.endpoint or self.adapter.endpoint,
            "temperature": self.temperature,
            "max_tokens": self.max_tokens,
        }


def load_provider_config(path: str | Path | None, **overrides) -> ProviderConfig:
    values: dict = {}
    if path is not None:
        values.update(read_toml(path).get("provider", {}))
    values.update({k: v for k, v in overrides.items() if v is not None})
    if "provider" not in values or "model" not in values:
        raise ValueError("provider config needs 'provider' and 'model'")
    return ProviderConfig(**values)


@dataclass(frozen=True)
class RawResponse:
    provider: str
    model: str
    prompt_hash: str
    text: str
    timestamp: str
    from_cache: bool = False
    latency_s: float = 0.0


@dataclass(frozen=True)
class ProviderAdapter:
    """Wire shape of one provider's chat endpoint."""

    name: str
    endpoint: str
    key_env: str
    build: Callable[[ProviderConfig, str, str], tuple[str, dict, dict]]
    extract: Callable[[dict], str]


def _openai_build(cfg: ProviderConfig, prompt: str, key: str) -> tuple[str, dict, dict]:
    body: dict = {
        "model": cfg.model,
        "messages": [{"role": "user", "content": prompt}],
        "temperature": cfg.temperature,
        "stream": False,
    }
    if cfg.max_tokens:
        body["max_tokens"] = cfg.max_tokens
    url = cfg.endpoint or ADAPTERS[cfg.provider].endpoint
    return url, {"Authorization": f"Bearer {key}"}, body


def _openai_extract(payload: dict) -> str:
    try:
        return payload["choices"][0]["message"]["content"] or ""
    except (KeyError, IndexError, TypeError):
        raise ProviderError(f"unexpected chat-completion payload: {str(payload)[:200]}") from None


def _gemini_build(cfg: ProviderConfig, prompt: str, key: str) -> tuple[str, dict, dict]:
    base = (cfg.endpoint or ADAPTERS["gemini"].endpoint).rstrip("/")
    generation: dict = {"temperature": cfg.temperature}
    if cfg.max_tokens:
        generation["maxOutputTokens"] = cfg.max_tokens
    body = {
        "contents": [{"role": "user", "parts": [{"text": prompt}]}],
        "generationConfig": generation,
    }
    return f"{base}/models/{cfg.model}:generateContent", {"x-goog-api-key": key}, body


def _gemini_extract(payload: dict) -> str:
    try:
        parts = payload["candidates"][0]["content"]["parts"]
    except (KeyError, IndexError, TypeError):
        raise ProviderError(f"unexpected Gemini payload: {str(payload)[:200]}") from None
    return "".join(p.get("text", "") for p in parts)


ADAPTERS: dict[str, ProviderAdapter] = {
    "gemini": ProviderAdapter(
        "gemini",
        "https://generativelanguage.googleapis.com/v1beta",
        "GEMINI_API_KEY",
        _gemini_build,
        _gemini_extract,
    ),
    "deepseek": ProviderAdapter(
        "deepseek",
        "https://api.deepseek.com/chat/completions",
        "DEEPSEEK_API_KEY",
        _openai_build,
        _openai_extract,
    ),
    "openai": ProviderAdapter(
        "openai",
        "https://api.openai.com/v1/chat/completions",
        "OPENAI_API_KEY",
        _openai_build,
        _openai_extract,
    ),
}


def prompt_hash(prompt: str, provider: str, model: str, template_digest: str = "") -> str:
    key = json.dumps(
        {"provider": provider, "model": model, "template": template_digest, "prompt": prompt},
        ensure_ascii=False,
        sort_keys=True,
    )
    return hashlib.sha256(key.encode("utf-8")).hexdigest()


class ResponseCache:
    def __init__(self, directory: str | Path):
        self.directory = Path(directory)

    def path(self, key: str) -> Path:
        return self.directory / f"{key}.json"

    def get(self, key: str) -> RawResponse | None:
        try:
            data = json.loads(self.path(key).read_text(encoding="utf-8"))
        except FileNotFoundError:
            return None
        data["from_cache"] = True
        return RawResponse(**data)

    def put(self, response: RawResponse) -> None:
        self.directory.mkdir(parents=True, exist_ok=True)
        payload = asdict(response)
        payload["from_cache"] = False
        fd, tmp = tempfile.mkstemp(dir=self.directory, suffix=".tmp")
        try:
            with os.fdopen(fd, "w", encoding="utf-8") as fh:
                json.dump(payload, fh, ensure_ascii=False, sort_keys=True, indent=1)
            os.replace(tmp, self.path(response.prompt_hash))
        except BaseException:
            Path(tmp).unlink(missing_ok=True)
            raise


@dataclass
class ClientStats:
    cache_hits: int = 0
    network_calls: int = 0
    retries: int = 0
    latencies: list[float] = field(default_factory=list)

    def summary(self) -> dict:
        lat = sorted(self.latencies)
        return {
            "cache_hits": self.cache_hits,
            "network_calls": self.network_calls,
            "retries": self.retries,
            "latency_mean_s": sum(lat) / len(lat) if lat else 0.0,
            "latency_max_s": lat[-1] if lat else 0.0,
        }


class LLMClient:
    def __init__(
        self,
        cfg: ProviderConfig,
        cache_dir: str | Path,
        *,
        offline: bool = False,
        template_digest: str = "",
        http: httpx.Client | None = None,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self.cfg = cfg
        self.cache = ResponseCache(cache_dir)
        self.offline = offline
        self.template_digest = template_digest
        self._http = http
        self._sleep = sleep
        self._slots = threading.BoundedSemaphore(max(1, cfg.max_concurrency))
        self._lock = threading.Lock()
        self.stats = ClientStats()

    def hash(self, prompt: str) -> str:
        return prompt_hash(prompt, self.cfg.provider, self.cfg.model, self.template_digest)

    def query(self, prompt: str) -> RawResponse:
        key = self.hash(prompt)
        cached = self.cache.get(key)
        if cached is not None:
            with self._lock:
                self.stats.cache_hits += 1
            return cached
        if self.offline:
            raise OfflineCacheMiss(key)
        api_key = os.environ.get(self.cfg.key_env)
        if not api_key:
            raise CredentialMissing(f"environment variable {self.cfg.key_env} is not set")
        with self._slots:
            start = time.perf_counter()
            text = self._call(prompt, api_key)
            latency = time.perf_counter() - start
        response = RawResponse(
            provider=self.cfg.provider,
            model=self.cfg.model,
            prompt_hash=key,
            text=text,
            timestamp=datetime.now(timezone.utc).isoformat(timespec="seconds"),
            from_cache=False,
            latency_s=latency,
        )
        self.cache.put(response)
        with self._lock:
            self.stats.network_calls += 1
            self.stats.latencies.append(latency)
        return response

    def _call(self, prompt: str, api_key: str) -> str:
        url, headers, body = self.cfg.adapter.build(self.cfg, prompt, api_key)
        http = self._http or httpx.Client(timeout=self.cfg.timeout)
        try:
            last_error: Exception | None = None
            for attempt in range(self.cfg.max_attempts):
                if attempt:
                    with self._lock:
                        self.stats.retries += 1
                    self._sleep(self.cfg.backoff * 2 ** (attempt - 1))
                try:
                    resp = http.post(url, headers=headers, json=body)
                except httpx.TransportError as exc:
                    last_error = exc
                    log.warning("transport error on attempt %d: %s", attempt + 1, exc)
                    continue
                if resp.status_code >= 500:
                    last_error = ProviderError(f"HTTP {resp.status_code}: {resp.text[:200]}")
                    log.warning("server error on attempt %d: %s", attempt + 1, resp.status_code)
                    continue
                if resp.status_code >= 400:
                    raise ProviderError(f"HTTP {resp.status_code}: {resp.text[:200]}")
                return self.cfg.adapter.extract(resp.json())
            raise ProviderError(
                f"{self.cfg.provider} request failed after {self.cfg.max_attempts} attempts: {last_error}"
            )
        finally:
            if self._http is None:
                http.close()


def query_model(
    cfg: ProviderConfig,
    prompt: str,
    cache_dir: str | Path,
    *,
    offline: bool = False,
    template_digest: str = "",
    http: httpx.Client | None = None,
) -> RawResponse:
    client = LLMClient(cfg, cache_dir, offline=offline, template_digest=template_digest, http=http)
    return client.query(prompt)
