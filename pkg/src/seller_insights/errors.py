"""Shared error taxonomy.

Every failure mode surfaced by the engine carries a stable machine-readable
code so callers (HTTP service, CLI, benchmark harness) can map errors to
consistent responses without parsing message text.
"""

from __future__ import annotations


class EngineError(Exception):
    """Base class for all engine errors. `code` is stable across releases."""

    code = "INTERNAL"

    def __init__(self, message: str, **details):
        super().__init__(message)
        self.message = message
        self.details = details

    def to_dict(self) -> dict:
        return {"code": self.code, "message": self.message, **self.details}


# --- core / query validation ---

class EmptyQuery(EngineError):
    code = "EMPTY_QUERY"


class QueryTooLong(EngineError):
    code = "QUERY_TOO_LONG"


# --- embedding providers ---

class EmptyText(EngineError):
    code = "EMPTY_TEXT"


class ProviderUnavailable(EngineError):
    code = "PROVIDER_UNAVAILABLE"


class DimensionMismatch(EngineError):
    code = "DIMENSION_MISMATCH"


# --- model training ---

class TooFewSamples(EngineError):
    code = "TOO_FEW_SAMPLES"


class NonFiniteLoss(EngineError):
    code = "NON_FINITE_LOSS"


class SingleClassData(EngineError):
    code = "SINGLE_CLASS_DATA"


# --- LLM gateway ---

class LlmTimeout(EngineError):
    code = "LLM_TIMEOUT"


class NoScriptedMatch(EngineError):
    code = "NO_SCRIPTED_MATCH"


class ProviderError(EngineError):
    code = "PROVIDER_ERROR"


class MissingSlot(EngineError):
    code = "MISSING_SLOT"


class NoJsonFound(EngineError):
    code = "NO_JSON_FOUND"


class MalformedJson(EngineError):
    code = "MALFORMED_JSON"


# --- dataplane ---

class UnknownApi(EngineError):
    code = "UNKNOWN_API"


class PayloadInvalid(EngineError):
    code = "PAYLOAD_INVALID"


class UnknownFunction(EngineError):
    code = "UNKNOWN_FUNCTION"


class ArgsInvalid(EngineError):
    code = "ARGS_INVALID"


class ArithmeticDomain(EngineError):
    code = "ARITHMETIC_DOMAIN"


class BadTable(EngineError):
    code = "BAD_TABLE"


# --- workflow ---

class PlanEmpty(EngineError):
    code = "PLAN_EMPTY"


class PlanInvalid(EngineError):
    code = "PLAN_INVALID"

    def __init__(self, violations: list[str]):
        super().__init__(
            "plan failed validation: " + "; ".join(violations),
            violations=list(violations),
        )
        self.violations = list(violations)


class StepFailed(EngineError):
    code = "STEP_FAILED"

    def __init__(self, step_id: str, cause: EngineError):
        super().__init__(
            f"step {step_id!r} failed: {cause.message}",
            step_id=step_id,
            cause_code=cause.code,
        )
        self.step_id = step_id
        self.cause = cause


class DataOutOfScope(EngineError):
    code = "DATA_OUT_OF_SCOPE"


# --- orchestration ---

class TotalTimeout(EngineError):
    code = "TOTAL_TIMEOUT"


class BranchCancelled(EngineError):
    code = "BRANCH_CANCELLED"


class GuardrailBlocked(EngineError):
    code = "GUARDRAIL_BLOCKED"


# --- evaluation harness ---

class NoKeywords(EngineError):
    code = "NO_KEYWORDS"


class EmptyInput(EngineError):
    code = "EMPTY_INPUT"


class InsufficientVariation(EngineError):
    code = "INSUFFICIENT_VARIATION"
