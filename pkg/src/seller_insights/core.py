"""Shared domain types, configuration, and deterministic-seed plumbing.

All types here are immutable value objects, safe to share between threads.
Serialization is canonical UTF-8 JSON with stable field names; see
docs/schemas.md for the wire formats.
"""

from __future__ import annotations

import hashlib
import json
import threading
from collections import deque
from dataclasses import dataclass, field
from datetime import date, datetime, timezone
from enum import Enum
from typing import Any, Optional

import numpy as np

from .errors import EmptyQuery, QueryTooLong

MAX_QUERY_CHARS = 4096


class Branch(str, Enum):
    PRESENTER = "presenter"
    INSIGHT_GENERATOR = "insight_generator"
    REFUSED = "refused"


class GateVerdict(str, Enum):
    IN_DOMAIN = "in_domain"
    OUT_OF_DOMAIN = "out_of_domain"


class RouteLabel(str, Enum):
    PRESENTER = "presenter"
    INSIGHT_GENERATOR = "insight_generator"


@dataclass(frozen=True)
class Query:
    """A single seller turn. `text` is trimmed and length-bounded."""

    text: str
    session_id: str = ""
    asked_at: datetime = field(
        default_factory=lambda: datetime(1970, 1, 1, tzinfo=timezone.utc)
    )


def validate_query(raw: str, session_id: str = "", asked_at: Optional[datetime] = None) -> Query:
    """Trim and bound-check raw input, producing a Query or raising."""
    if asked_at is None:
        asked_at = datetime.now(timezone.utc)
    text = raw.strip()
    if not text:
        raise EmptyQuery("query text is empty after trimming")
    if len(text) > MAX_QUERY_CHARS:
        raise QueryTooLong(
            f"query is {len(text)} characters, limit is {MAX_QUERY_CHARS}",
            length=len(text),
            limit=MAX_QUERY_CHARS,
        )
    return Query(text=text, session_id=session_id, asked_at=asked_at)


@dataclass(frozen=True)
class SellerContext:
    """Identity and calendar context for the seller asking the question."""

    seller_id: str
    today: date
    locale: str = "en-US"


@dataclass(frozen=True)
class GuardrailVerdict:
    status: str  # "pass" | "blocked"
    reason: Optional[str] = None  # PII_EMAIL | PII_PHONE | PII_NATIONAL_ID | TOXIC_TERM

    def __post_init__(self):
        if (self.status == "blocked") != (self.reason is not None):
            raise ValueError("reason must be present iff status is blocked")

    @property
    def blocked(self) -> bool:
        return self.status == "blocked"

    def to_dict(self) -> dict:
        return {"status": self.status, "reason": self.reason}


GUARDRAIL_PASS = GuardrailVerdict(status="pass")


@dataclass(frozen=True)
class ExecutionTrace:
    """Everything needed to audit one answered turn offline."""

    gate_verdict: GateVerdict
    gate_score: float
    route: Optional[RouteLabel] = None
    route_confidence: Optional[float] = None
    plan: Optional[Any] = None  # workflow.Plan; kept loose to avoid an import cycle
    planner_raw: Optional[str] = None
    step_timings: tuple = ()  # ((step_id, ms), ...)
    guardrail: GuardrailVerdict = GUARDRAIL_PASS
    scope_status: Optional[str] = None  # "in_scope" | "out"
    scope_reason: Optional[str] = None
    domain: Optional[str] = None
    claims: tuple = ()  # ((metric, value, comparison), ...), machine-readable
    cancelled_branch: Optional[str] = None
    error_code: Optional[str] = None

    def to_dict(self) -> dict:
        return {
            "gate_verdict": self.gate_verdict.value,
            "gate_score": self.gate_score,
            "route": self.route.value if self.route else None,
            "route_confidence": self.route_confidence,
            "plan": self.plan.to_dict() if self.plan is not None else None,
            "planner_raw": self.planner_raw,
            "step_timings": [[sid, ms] for sid, ms in self.step_timings],
            "guardrail": self.guardrail.to_dict(),
            "scope_status": self.scope_status,
            "scope_reason": self.scope_reason,
            "domain": self.domain,
            "claims": [list(c) for c in self.claims],
            "cancelled_branch": self.cancelled_branch,
            "error_code": self.error_code,
        }


@dataclass(frozen=True)
class ChatResponse:
    """Guarded outbound answer plus its trace."""

    answer: str
    branch: Branch
    trace: ExecutionTrace
    latency_ms: int

    def __post_init__(self):
        if not self.answer:
            raise ValueError("answer must be non-empty")
        if self.latency_ms < 0:
            raise ValueError("latency_ms must be non-negative")
        refusal_grounds = (
            self.trace.gate_verdict == GateVerdict.OUT_OF_DOMAIN
            or self.trace.guardrail.blocked
        )
        if (self.branch == Branch.REFUSED) != refusal_grounds:
            raise ValueError(
                "refused responses require an out-of-domain gate verdict or a "
                "guardrail block, and vice versa"
            )

    def to_dict(self) -> dict:
        return {
            "answer": self.answer,
            "branch": self.branch.value,
            "trace": self.trace.to_dict(),
            "latency_ms": self.latency_ms,
        }


@dataclass(frozen=True)
class Budgets:
    total_timeout_ms: int = 30000
    llm_timeout_ms: int = 20000

    def __post_init__(self):
        if self.total_timeout_ms <= 0 or self.llm_timeout_ms <= 0:
            raise ValueError("timeouts must be positive")


@dataclass(frozen=True)
class OodConfig:
    hidden_dim: int = 64
    lam: float = 4.0
    epochs: int = 500
    learning_rate: float = 0.01
    seed: int = 0

    def __post_init__(self):
        if self.hidden_dim < 1:
            raise ValueError("hidden_dim must be >= 1")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")


@dataclass(frozen=True)
class RouterConfig:
    epochs: int = 400
    learning_rate: float = 0.5
    holdout_fraction: float = 0.2
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")
        if not 0 <= self.holdout_fraction < 1:
            raise ValueError("holdout_fraction must be in [0, 1)")


@dataclass(frozen=True)
class EngineConfig:
    ood: OodConfig = OodConfig()
    router: RouterConfig = RouterConfig()
    budgets: Budgets = Budgets()
    seed: int = 0
    serial_mode: bool = False


def seeded_rng(seed: int, stream: str) -> np.random.Generator:
    """Deterministic random stream, keyed by (seed, stream label).

    The same pair always yields the same sequence; distinct labels or seeds
    yield independent sequences. Stream labels are hashed with SHA-256 so
    the mapping is stable across processes and platforms.
    """
    digest = hashlib.sha256(stream.encode("utf-8")).digest()
    stream_key = int.from_bytes(digest[:8], "big")
    return np.random.default_rng([seed & 0xFFFFFFFFFFFFFFFF, stream_key])


def canonical_json(obj: Any) -> str:
    """Canonical serialization used for byte-identity checks."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


class SessionMemory:
    """Per-session rolling buffer of the most recent turns.

    Conversation memory semantics are an assumption of this artifact: we
    keep the last `capacity` (query, answer) pairs per session, in memory
    only, and nothing downstream consumes them yet.
    """

    def __init__(self, capacity: int = 10):
        self._capacity = capacity
        self._sessions: dict[str, deque] = {}
        self._lock = threading.Lock()

    def record(self, session_id: str, query_text: str, answer: str) -> None:
        with self._lock:
            buf = self._sessions.setdefault(session_id, deque(maxlen=self._capacity))
            buf.append((query_text, answer))

    def turns(self, session_id: str) -> tuple:
        with self._lock:
            return tuple(self._sessions.get(session_id, ()))
