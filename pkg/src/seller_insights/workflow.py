"""Data workflow: scope check, plan parsing, validation, execution, cleanup.

Plans are JSON DAGs of API calls and transform-function calls. Validation
collects every violation (unknown targets, bad payloads, dangling inputs,
column references that no upstream schema provides) so a single repair
prompt can fix them all; the executor only ever runs validated plans.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Callable, Optional

from .embedding import Embedder, HashingEmbedder, cosine, ngram_cosine, tokenize, word_ngrams
from .errors import PlanEmpty, PlanInvalid, StepFailed, EngineError
from .llm import CompletionRequest, LlmProvider, PromptTemplate, extract_json_block, render
from .registry import (
    FUNCTION_INPUT_ARITY,
    NUMERIC,
    Registry,
    validate_payload,
    yoy_delta_types,
)
from .tables import Column, ColumnType, DataTable, format_cell

log = logging.getLogger(__name__)

KIND_API = "api_call"
KIND_FUNCTION = "function_call"

SEMANTIC_FILTER_THRESHOLD = 0.35


@dataclass(frozen=True)
class PlanStep:
    id: str
    kind: str  # api_call | function_call
    target: str
    payload: dict = field(default_factory=dict)
    inputs: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "kind": self.kind,
            "target": self.target,
            "payload": self.payload,
            "inputs": list(self.inputs),
        }


@dataclass(frozen=True)
class Plan:
    steps: tuple[PlanStep, ...]
    final_step: str
    rationale: str = ""

    def to_dict(self) -> dict:
        return {
            "steps": [s.to_dict() for s in self.steps],
            "final": self.final_step,
        }

    @staticmethod
    def from_dict(doc: dict) -> "Plan":
        return parse_plan(doc)


@dataclass(frozen=True)
class ScopeVerdict:
    status: str  # in_scope | out
    reason: str = ""

    def __post_init__(self):
        if self.status == "out" and not self.reason:
            raise ValueError("out-of-scope verdict needs a reason")

    @property
    def in_scope(self) -> bool:
        return self.status == "in_scope"


def detect_data_out_of_scope(
    llm: LlmProvider,
    query_text: str,
    catalog: str,
    template: PromptTemplate,
    timeout_s: Optional[float] = None,
) -> ScopeVerdict:
    """Ask the LLM whether the available tools can answer the query.

    The prompt offers an explicit "out" option; replies matching neither
    option are treated as out-of-scope rather than guessed at.
    """
    prompt = render(template, {"catalog": catalog, "query": query_text})
    reply = llm.complete(CompletionRequest(prompt=prompt), timeout_s=timeout_s).strip()
    lowered = reply.lower()
    if lowered == "in" or lowered.startswith("in\n") or lowered.startswith("in "):
        return ScopeVerdict(status="in_scope")
    if lowered.startswith("out"):
        _, _, reason = reply.partition(":")
        return ScopeVerdict(status="out", reason=reason.strip() or "outside the available data")
    log.warning("unparseable scope verdict %r; treating as out of scope", reply[:120])
    return ScopeVerdict(status="out", reason="scope reply did not match either option")


def parse_plan(doc) -> Plan:
    """Wire format v1: {"steps": [{id, kind, target, payload, inputs}], "final": id}."""
    if not isinstance(doc, dict):
        raise PlanEmpty(f"plan must be a JSON object, got {type(doc).__name__}")
    raw_steps = doc.get("steps")
    if not raw_steps or not isinstance(raw_steps, list):
        raise PlanEmpty("plan has no steps")
    steps = []
    for i, raw in enumerate(raw_steps):
        if not isinstance(raw, dict):
            raise PlanEmpty(f"step {i} is not an object")
        try:
            step = PlanStep(
                id=str(raw["id"]),
                kind=str(raw["kind"]),
                target=str(raw["target"]),
                payload=dict(raw.get("payload") or {}),
                inputs=tuple(str(s) for s in raw.get("inputs") or ()),
            )
        except KeyError as exc:
            raise PlanEmpty(f"step {i} is missing field {exc}") from exc
        steps.append(step)
    final = doc.get("final")
    if final is None:
        final = steps[-1].id
    return Plan(steps=tuple(steps), final_step=str(final), rationale=str(doc.get("rationale", "")))


def make_plan(
    llm: LlmProvider,
    augmented_query: str,
    catalog: str,
    template: PromptTemplate,
    timeout_s: Optional[float] = None,
) -> tuple[Plan, str]:
    """One planning call; returns the parsed plan and the raw reply for the trace."""
    prompt = render(template, {"catalog": catalog, "query": augmented_query})
    raw = llm.complete(CompletionRequest(prompt=prompt), timeout_s=timeout_s)
    plan = parse_plan(extract_json_block(raw))
    return plan, raw


# --- validation -----------------------------------------------------------

def _infer_function_schema(
    target: str, payload: dict, input_schemas: list, violations: list[str], step_id: str
):
    """Output columns of a function step, or None when inputs are unknowable.

    Column references in the payload are checked against the input schemas
    here; this is the schema-linking step that catches hallucinated columns.
    """
    if any(s is None for s in input_schemas):
        return None
    schema = input_schemas[0] if input_schemas else None

    def column(name):
        for c in schema:
            if c.name == name:
                return c
        violations.append(f"step {step_id!r}: column {name!r} does not exist upstream")
        return None

    if target == "top_k":
        c = column(payload.get("by", ""))
        if c is not None and c.ctype not in NUMERIC:
            violations.append(f"step {step_id!r}: top_k column {c.name!r} is not numeric")
        return schema
    if target == "filter":
        column(payload.get("column", ""))
        return schema
    if target == "aggregate":
        names = payload.get("columns")
        out = []
        for c in _resolve_numeric(schema, names, violations, step_id):
            out.append(Column(c.name, _agg_type(c.ctype, payload.get("op", "sum"))))
        return tuple(out) if out else None
    if target == "group_by":
        keys = payload.get("keys") or []
        out = []
        for k in keys:
            c = column(k)
            if c is not None:
                out.append(c)
        for c in _resolve_numeric(schema, payload.get("columns"), violations, step_id):
            if c.name not in keys:
                out.append(Column(c.name, _agg_type(c.ctype, payload.get("op", "sum"))))
        return tuple(out) if out else None
    if target == "time_bucket":
        date_col = column(payload.get("date_column", ""))
        if date_col is not None and date_col.ctype != ColumnType.DATE:
            violations.append(
                f"step {step_id!r}: time_bucket date_column {date_col.name!r} is not a date"
            )
        out = [Column("bucket", ColumnType.DATE)]
        for c in _resolve_numeric(schema, payload.get("columns"), violations, step_id):
            if date_col is None or c.name != date_col.name:
                out.append(c)
        return tuple(out)
    if target == "yoy_delta":
        name = payload.get("column")
        if name is None:
            numeric = [c for c in schema if c.ctype in NUMERIC]
            if len(numeric) != 1:
                violations.append(
                    f"step {step_id!r}: yoy_delta needs an explicit column for this input"
                )
                return None
            base = numeric[0]
        else:
            base = column(name)
            for other_schema in input_schemas[1:]:
                if not any(c.name == name for c in other_schema):
                    violations.append(
                        f"step {step_id!r}: column {name!r} does not exist in the prior input"
                    )
            if base is None:
                return None
        delta_t, pct_t = yoy_delta_types(base.ctype)
        return (
            Column("current", base.ctype),
            Column("prior", base.ctype),
            Column("delta", delta_t),
            Column("pct", pct_t),
        )
    return None


def _resolve_numeric(schema, names, violations: list[str], step_id: str):
    if names is None:
        return [c for c in schema if c.ctype in NUMERIC]
    out = []
    for name in names:
        found = next((c for c in schema if c.name == name), None)
        if found is None:
            violations.append(f"step {step_id!r}: column {name!r} does not exist upstream")
        elif found.ctype not in NUMERIC:
            violations.append(f"step {step_id!r}: column {name!r} is not numeric")
        else:
            out.append(found)
    return out


def _agg_type(ctype: ColumnType, op: str) -> ColumnType:
    if op == "avg" and ctype == ColumnType.INTEGER:
        return ColumnType.DECIMAL
    return ctype


def validate_plan(plan: Plan, registry: Registry) -> Plan:
    """Check the whole plan against the registry, collecting all violations."""
    violations: list[str] = []
    if not plan.steps:
        raise PlanInvalid(["plan has no steps"])

    seen: dict[str, object] = {}  # id -> output schema (tuple of Column) or None
    for step in plan.steps:
        if step.id in seen:
            violations.append(f"duplicate step id {step.id!r}")
        input_schemas = []
        for dep in step.inputs:
            if dep not in seen:
                violations.append(
                    f"step {step.id!r}: input {dep!r} is not an earlier step"
                )
                input_schemas.append(None)
            else:
                input_schemas.append(seen[dep])

        schema = None
        if step.kind == KIND_API:
            if step.inputs:
                violations.append(f"step {step.id!r}: api calls take no table inputs")
            if step.target not in registry.apis:
                violations.append(f"step {step.id!r}: unknown api {step.target!r}")
            else:
                spec = registry.apis[step.target]
                for problem in validate_payload(spec.params, step.payload):
                    violations.append(f"step {step.id!r}: {problem}")
                schema = spec.output_columns
        elif step.kind == KIND_FUNCTION:
            if step.target not in registry.functions:
                violations.append(f"step {step.id!r}: unknown function {step.target!r}")
            else:
                spec = registry.functions[step.target]
                for problem in validate_payload(spec.params, step.payload):
                    violations.append(f"step {step.id!r}: {problem}")
                arity = FUNCTION_INPUT_ARITY[step.target]
                if len(step.inputs) != arity:
                    violations.append(
                        f"step {step.id!r}: {step.target!r} takes {arity} input(s), "
                        f"got {len(step.inputs)}"
                    )
                else:
                    schema = _infer_function_schema(
                        step.target, step.payload, input_schemas, violations, step.id
                    )
        else:
            violations.append(f"step {step.id!r}: unknown kind {step.kind!r}")
        seen[step.id] = schema

    if plan.final_step not in seen:
        violations.append(f"final step {plan.final_step!r} does not exist")
    else:
        reachable = {plan.final_step}
        for step in reversed(plan.steps):
            if step.id in reachable:
                reachable.update(step.inputs)
        for step in plan.steps:
            if step.id not in reachable:
                violations.append(f"step {step.id!r} is not connected to the final step")

    if violations:
        raise PlanInvalid(violations)
    return plan


def plan_with_repair(
    llm: LlmProvider,
    augmented_query: str,
    catalog: str,
    registry: Registry,
    template: PromptTemplate,
    repair_template: PromptTemplate,
    timeout_s: Optional[float] = None,
    checkpoint: Optional[Callable[[], None]] = None,
) -> tuple[Plan, str]:
    """Plan, validate, and on failure re-prompt exactly once with the violations."""
    plan, raw = make_plan(llm, augmented_query, catalog, template, timeout_s=timeout_s)
    try:
        return validate_plan(plan, registry), raw
    except PlanInvalid as first:
        if checkpoint:
            checkpoint()
        prompt = render(
            repair_template,
            {
                "catalog": catalog,
                "query": augmented_query,
                "violations": "\n".join(first.violations),
                "previous": raw,
            },
        )
        raw2 = llm.complete(CompletionRequest(prompt=prompt), timeout_s=timeout_s)
        plan2 = parse_plan(extract_json_block(raw2))
        return validate_plan(plan2, registry), raw2


# --- execution ------------------------------------------------------------

@dataclass(frozen=True)
class ExecutionResult:
    tables: dict[str, DataTable]
    timings: tuple[tuple[str, int], ...]  # (step_id, ms) in execution order

    def final(self, plan: Plan) -> DataTable:
        return self.tables[plan.final_step]


def execute(
    plan: Plan,
    registry: Registry,
    checkpoint: Optional[Callable[[], None]] = None,
    clock: Callable[[], float] = time.monotonic,
) -> ExecutionResult:
    """Run a validated plan in declared order, timing each step.

    The declared order is already topological (validation rejects forward
    references). `checkpoint` runs before every step; raising from it
    aborts the remaining steps.
    """
    tables: dict[str, DataTable] = {}
    timings: list[tuple[str, int]] = []
    for step in plan.steps:
        if checkpoint:
            checkpoint()
        started = clock()
        try:
            if step.kind == KIND_API:
                result = registry.invoke_api(step.target, step.payload)
            else:
                inputs = [tables[dep] for dep in step.inputs]
                result = registry.invoke_function(step.target, step.payload, inputs)
        except EngineError as exc:
            raise StepFailed(step.id, exc) from exc
        elapsed_ms = int(round((clock() - started) * 1000))
        tables[step.id] = result
        timings.append((step.id, elapsed_ms))
    return ExecutionResult(tables=tables, timings=tuple(timings))


# --- post-processing ------------------------------------------------------

PROTECTED_SUFFIX = "_id"
PROTECTED_NAMES = {"metric"}


def _is_protected(col: Column) -> bool:
    # Key columns always survive: identifiers and dates anchor the rows.
    return (
        col.ctype == ColumnType.DATE
        or col.name.endswith(PROTECTED_SUFFIX)
        or col.name in PROTECTED_NAMES
    )


def semantic_similarity(embedder: Embedder, column_name: str, query_text: str) -> float:
    """Best cosine between the column name and any word n-gram of the query.

    Matching against individual n-grams rather than the whole-query vector
    keeps single-word column names comparable: a long query dilutes any one
    term's cosine toward zero. For the built-in hashing embedder the cosine
    is computed over exact n-gram counts, since its 1-sparse gram vectors
    would otherwise turn any bucket collision into a huge false similarity.
    """
    if isinstance(embedder, HashingEmbedder):
        best = 0.0
        for gram in word_ngrams(tokenize(query_text)):
            best = max(best, ngram_cosine(column_name, gram))
        return best
    col_vec = embedder.embed(column_name)
    best = 0.0
    for gram in word_ngrams(tokenize(query_text)):
        best = max(best, cosine(col_vec, embedder.embed(gram)))
    return best


def post_process(
    table: DataTable,
    query_text: str,
    embedder: Embedder,
    display_names: dict[str, str],
    threshold: float = SEMANTIC_FILTER_THRESHOLD,
    aliases: Optional[dict[str, tuple]] = None,
) -> DataTable:
    """Drop columns irrelevant to the query, rename for display, format cells.

    Protected key columns (ids, dates, metric labels) are always kept; a
    column also survives when any of its registered aliases matches the
    query. Row order is preserved and no columns are invented. All output
    cells are formatted text.
    """
    aliases = aliases or {}
    kept: list[int] = []
    for i, col in enumerate(table.columns):
        names = (col.name, *aliases.get(col.name, ()))
        sim = max(semantic_similarity(embedder, n, query_text) for n in names)
        if _is_protected(col) or sim >= threshold:
            kept.append(i)
    if not kept:
        # A filter that deletes the whole result is worse than no filter.
        kept = list(range(len(table.columns)))
    out_columns = tuple(
        Column(display_names.get(table.columns[i].name, table.columns[i].name), ColumnType.TEXT)
        for i in kept
    )
    out_rows = tuple(
        tuple(format_cell(row[i], table.columns[i].ctype) for i in kept) for row in table.rows
    )
    return DataTable(columns=out_columns, rows=out_rows)
