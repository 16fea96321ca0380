"""Text-completion provider contract, prompt templating, and output parsing.

Two providers ship in-tree: a scripted provider that replays pinned
responses for offline tests, and a generic HTTP chat-completion client.
Prompt templates live in versioned JSON files under `prompts/`; few-shot
pairs are rendered ahead of the task body. Temperature defaults to zero
everywhere because nothing in this system benefits from sampling.
"""

from __future__ import annotations

import hashlib
import json
import os
import re
import threading
import time
from dataclasses import dataclass, field
from importlib import resources
from typing import Any, Optional, Protocol

from .errors import (
    LlmTimeout,
    MalformedJson,
    MissingSlot,
    NoJsonFound,
    NoScriptedMatch,
    ProviderError,
)

_PLACEHOLDER_RE = re.compile(r"\{([a-z_][a-z0-9_]*)\}")
_FENCE_RE = re.compile(r"```(?:json)?\s*(.*?)```", re.DOTALL)


@dataclass(frozen=True)
class CompletionRequest:
    prompt: str
    max_tokens: int = 1024
    temperature: float = 0.0

    def __post_init__(self):
        if not self.prompt:
            raise ValueError("prompt must be non-empty")
        if self.max_tokens <= 0:
            raise ValueError("max_tokens must be positive")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")


class LlmProvider(Protocol):
    def complete(self, req: CompletionRequest, timeout_s: Optional[float] = None) -> str: ...


@dataclass(frozen=True)
class PromptTemplate:
    name: str
    body: str
    few_shot: tuple = ()  # ((input, output), ...), order preserved
    version: str = "v1"

    def placeholders(self) -> set[str]:
        return set(_PLACEHOLDER_RE.findall(self.body))


def render(template: PromptTemplate, slots: dict[str, str]) -> str:
    """Few-shot pairs first, then the body with every placeholder filled."""
    missing = template.placeholders() - set(slots)
    if missing:
        raise MissingSlot(
            f"template {template.name!r} is missing slots: {sorted(missing)}",
            template=template.name,
            slots=sorted(missing),
        )
    body = _PLACEHOLDER_RE.sub(lambda m: str(slots[m.group(1)]), template.body)
    if not template.few_shot:
        return body
    parts = []
    for shot_in, shot_out in template.few_shot:
        parts.append(f"Example input:\n{shot_in}\nExample output:\n{shot_out}")
    return "\n\n".join(parts) + "\n\n" + body


def load_template(name: str) -> PromptTemplate:
    """Load a packaged template by name (prompts/<name>.json)."""
    text = resources.files("seller_insights.prompts").joinpath(f"{name}.json").read_text(
        encoding="utf-8"
    )
    return template_from_dict(json.loads(text))


def template_from_dict(doc: dict) -> PromptTemplate:
    return PromptTemplate(
        name=doc["name"],
        body=doc["body"],
        few_shot=tuple((pair[0], pair[1]) for pair in doc.get("few_shot", [])),
        version=doc.get("version", "v1"),
    )


def prompt_hash(prompt: str) -> str:
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()


MATCH_EXACT = "exact_prompt_hash"
MATCH_CONTAINS = "contains_substring"


@dataclass(frozen=True)
class ScriptedRule:
    match: str  # exact_prompt_hash | contains_substring
    key: str
    response: str

    def __post_init__(self):
        if self.match not in (MATCH_EXACT, MATCH_CONTAINS):
            raise ValueError(f"unknown match kind {self.match!r}")

    def matches(self, prompt: str) -> bool:
        if self.match == MATCH_EXACT:
            return prompt_hash(prompt) == self.key
        return self.key in prompt


class ScriptedProvider:
    """Deterministic test double: ordered rules, first match wins."""

    def __init__(self, rules: list[ScriptedRule]):
        self.rules = list(rules)

    @classmethod
    def from_file(cls, path: str) -> "ScriptedProvider":
        with open(path, encoding="utf-8") as f:
            doc = json.load(f)
        return cls(
            [ScriptedRule(match=r["match"], key=r["key"], response=r["response"]) for r in doc]
        )

    def complete(self, req: CompletionRequest, timeout_s: Optional[float] = None) -> str:
        for rule in self.rules:
            if rule.matches(req.prompt):
                return rule.response
        raise NoScriptedMatch(
            "no scripted rule matches the prompt (missing fixture?); "
            f"prompt starts with {req.prompt[:80]!r}"
        )


def save_scripted_rules(rules: list[ScriptedRule], path: str) -> None:
    doc = [{"match": r.match, "key": r.key, "response": r.response} for r in rules]
    with open(path, "w", encoding="utf-8") as f:
        json.dump(doc, f, indent=1)


class DelayedProvider:
    """Wraps a provider, sleeping before prompts that contain a marker.

    Used to emulate slow stages in latency and cancellation tests. Honors
    the caller's timeout the way a remote provider would: if the delay
    exceeds it, sleeps only until the deadline and raises LlmTimeout.
    """

    def __init__(self, inner: LlmProvider, delays: dict[str, float]):
        self.inner = inner
        self.delays = dict(delays)

    def complete(self, req: CompletionRequest, timeout_s: Optional[float] = None) -> str:
        delay = 0.0
        for marker, seconds in self.delays.items():
            if marker in req.prompt:
                delay = max(delay, seconds)
        if delay:
            if timeout_s is not None and delay > timeout_s:
                time.sleep(timeout_s)
                raise LlmTimeout(f"provider exceeded {timeout_s:.3f}s timeout")
            time.sleep(delay)
        return self.inner.complete(req, timeout_s)


class HttpProvider:
    """Generic chat-completion endpoint client.

    POST {url} with {"prompt", "max_tokens", "temperature"}; expects
    {"text": ...}. Bearer token, if any, comes from the LLM_API_TOKEN
    environment variable.
    """

    def __init__(self, url: str, token_env: str = "LLM_API_TOKEN"):
        import requests

        self.url = url
        self.token_env = token_env
        self._session = requests.Session()
        self._lock = threading.Lock()

    def complete(self, req: CompletionRequest, timeout_s: Optional[float] = None) -> str:
        import requests

        headers = {}
        token = os.environ.get(self.token_env)
        if token:
            headers["Authorization"] = f"Bearer {token}"
        body = {
            "prompt": req.prompt,
            "max_tokens": req.max_tokens,
            "temperature": req.temperature,
        }
        try:
            resp = self._session.post(
                self.url, json=body, headers=headers, timeout=timeout_s
            )
        except requests.Timeout as exc:
            raise LlmTimeout(f"completion endpoint timed out after {timeout_s}s") from exc
        except requests.RequestException as exc:
            raise ProviderError(f"completion endpoint failed: {exc}") from exc
        if resp.status_code != 200:
            raise ProviderError(
                f"completion endpoint returned {resp.status_code}",
                status=resp.status_code,
            )
        try:
            text = resp.json()["text"]
        except (ValueError, KeyError) as exc:
            raise ProviderError(f"malformed completion response: {exc}") from exc
        if not text:
            raise ProviderError("completion endpoint returned empty text")
        return text


def extract_json_block(text: str) -> Any:
    """First well-formed JSON object or array in the text.

    Fenced ``` blocks are tried first, then any balanced candidate starting
    at a `{` or `[`. NoJsonFound means nothing even looked like JSON;
    MalformedJson means candidates existed but none parsed.
    """
    decoder = json.JSONDecoder()
    saw_candidate = False

    for fenced in _FENCE_RE.findall(text):
        candidate = fenced.strip()
        if not candidate:
            continue
        saw_candidate = True
        try:
            return json.loads(candidate)
        except json.JSONDecodeError:
            pass

    for i, ch in enumerate(text):
        if ch not in "{[":
            continue
        saw_candidate = True
        try:
            value, _ = decoder.raw_decode(text[i:])
        except json.JSONDecodeError:
            continue
        return value

    if saw_candidate:
        raise MalformedJson("found JSON-like content but none of it parses")
    raise NoJsonFound("no JSON object or array in the response")
