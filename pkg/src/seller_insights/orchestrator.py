"""Control flow for one chat turn.

The OOD gate and the branch router run in parallel; both worker branches
start speculatively at the same time, and the loser is cancelled as soon as
routing resolves. An out-of-domain verdict always wins over routing, even
when routing finishes first. Cancellation is cooperative: branches observe
their token between pipeline stages (before each LLM call, API execution,
and generation), which are the safe abort points. Every outbound answer
passes through the guardrail exactly once.
"""

from __future__ import annotations

import dataclasses
import logging
import time
from concurrent.futures import ThreadPoolExecutor, TimeoutError as FutureTimeout
from dataclasses import dataclass
from threading import Event
from typing import Callable, Optional

from .core import (
    Branch,
    ChatResponse,
    EngineConfig,
    ExecutionTrace,
    GateVerdict,
    Query,
    RouteLabel,
    SellerContext,
    SessionMemory,
)
from .embedding import Embedder
from .errors import (
    BranchCancelled,
    DataOutOfScope,
    EngineError,
    LlmTimeout,
    TotalTimeout,
)
from .guardrail import Guardrail
from .llm import LlmProvider, PromptTemplate, load_template
from .ood import OodDecision, OodModel, classify_ood
from .registry import Registry, catalog_text
from .router import RouteDecision, RouterModel, route
from .temporal import augment_query, build_temporal_context
from .workers import (
    DomainCategory,
    ResolutionPath,
    classify_domain,
    extract_table_claims,
    generate_insight,
    present,
    run_analyses,
)
from .workflow import ScopeVerdict, detect_data_out_of_scope, execute, plan_with_repair, post_process

log = logging.getLogger(__name__)

REASON_OOD = "out_of_domain"
REASON_DATA_OUT_OF_SCOPE = "data_out_of_scope"
REASON_GUARDRAIL = "guardrail"
REASON_TIMEOUT = "timeout"
REASON_GENERIC = "generic"


@dataclass(frozen=True)
class RefusalMessages:
    ood: str = (
        "I can only help with questions about your own business data, so I "
        "cannot answer that one."
    )
    data_out_of_scope: str = (
        "The data I can reach does not cover that question ({reason}), so I "
        "cannot answer it reliably."
    )
    guardrail: str = (
        "I generated a response that did not pass our safety screen, so I "
        "cannot share it. Please rephrase your question."
    )
    timeout: str = (
        "I could not finish answering within the time budget. Please try "
        "again or narrow the question."
    )
    generic: str = (
        "Something went wrong while answering your question. Please try again."
    )

    def for_reason(self, reason: str, detail: str = "") -> str:
        if reason == REASON_OOD:
            return self.ood
        if reason == REASON_DATA_OUT_OF_SCOPE:
            return self.data_out_of_scope.format(reason=detail or "no matching data")
        if reason == REASON_GUARDRAIL:
            return self.guardrail
        if reason == REASON_TIMEOUT:
            return self.timeout
        return self.generic


class CancelToken:
    """Cooperative cancellation, observed at stage boundaries."""

    def __init__(self):
        self._event = Event()

    def cancel(self) -> None:
        self._event.set()

    @property
    def cancelled(self) -> bool:
        return self._event.is_set()

    def check(self) -> None:
        if self._event.is_set():
            raise BranchCancelled("branch cancelled")


class Deadline:
    def __init__(self, budget_s: float, clock: Callable[[], float]):
        self._clock = clock
        self._end = clock() + budget_s

    def remaining(self) -> float:
        return self._end - self._clock()

    def check(self) -> None:
        if self.remaining() <= 0:
            raise TotalTimeout("request budget exhausted")


@dataclass
class BranchOutcome:
    branch: RouteLabel
    answer: str
    claims: tuple = ()
    plan: Optional[object] = None
    planner_raw: Optional[str] = None
    step_timings: tuple = ()
    scope: Optional[ScopeVerdict] = None
    domain: Optional[DomainCategory] = None
    error_code: Optional[str] = None


class Engine:
    """Immutable shared models plus per-request orchestration state."""

    def __init__(
        self,
        embedder: Embedder,
        ood_model: OodModel,
        router_model: RouterModel,
        llm: LlmProvider,
        registry: Registry,
        resolution_paths: dict[DomainCategory, ResolutionPath],
        guardrail: Optional[Guardrail] = None,
        config: EngineConfig = EngineConfig(),
        templates: Optional[dict[str, PromptTemplate]] = None,
        refusals: RefusalMessages = RefusalMessages(),
        clock: Callable[[], float] = time.monotonic,
        ood_gate: Optional[Callable] = None,
        route_gate: Optional[Callable] = None,
        max_workers: int = 16,
    ):
        self.embedder = embedder
        self.ood_model = ood_model
        self.router_model = router_model
        self.llm = llm
        self.registry = registry
        self.resolution_paths = resolution_paths
        self.guardrail = guardrail or Guardrail()
        self.config = config
        self.refusals = refusals
        self.clock = clock
        self.sessions = SessionMemory()
        self._catalog = catalog_text(registry)
        self._ood_gate = ood_gate or (lambda x: classify_ood(self.ood_model, x))
        self._route_gate = route_gate or (lambda x: route(self.router_model, x))
        t = templates or {}
        self._templates = {
            "scope_check": t.get("scope_check") or load_template("scope_check"),
            "plan": t.get("plan") or load_template("plan"),
            "plan_repair": t.get("plan_repair") or load_template("plan_repair"),
            "present": t.get("present") or load_template("present"),
            "domain_classify": t.get("domain_classify") or load_template("domain_classify"),
        }
        self._pool = ThreadPoolExecutor(max_workers=max_workers, thread_name_prefix="engine")

    # --- public entry points ---------------------------------------------

    def handle(self, query: Query, ctx: SellerContext) -> ChatResponse:
        started = self.clock()
        deadline = Deadline(self.config.budgets.total_timeout_ms / 1000, self.clock)
        response = (
            self._handle_serial(query, ctx, deadline)
            if self.config.serial_mode
            else self._handle_parallel(query, ctx, deadline)
        )
        latency_ms = int(round((self.clock() - started) * 1000))
        response = ChatResponse(
            answer=response.answer,
            branch=response.branch,
            trace=response.trace,
            latency_ms=latency_ms,
        )
        self.sessions.record(query.session_id, query.text, response.answer)
        return response

    def refusal_response(
        self,
        reason: str,
        detail: str = "",
        trace: Optional[ExecutionTrace] = None,
    ) -> ChatResponse:
        """Fixed, configurable refusal copy per reason; unknown reasons get the
        generic message."""
        answer = self.refusals.for_reason(reason, detail)
        return ChatResponse(
            answer=answer,
            branch=Branch.REFUSED,
            trace=trace
            if trace is not None
            else ExecutionTrace(gate_verdict=GateVerdict.OUT_OF_DOMAIN, gate_score=0.0),
            latency_ms=0,
        )

    # --- orchestration ----------------------------------------------------

    def _handle_parallel(self, query: Query, ctx: SellerContext, deadline: Deadline) -> ChatResponse:
        x = self.embedder.embed(query.text)
        tctx = build_temporal_context(ctx.today)
        augmented = augment_query(query, tctx)

        gate_ood = self._pool.submit(self._ood_gate, x)
        gate_route = self._pool.submit(self._route_gate, x)
        tokens = {label: CancelToken() for label in RouteLabel}
        branch_futures = {
            label: self._pool.submit(
                self._run_branch, label, query, augmented, tctx, tokens[label], deadline
            )
            for label in RouteLabel
        }

        try:
            ood_decision: OodDecision = gate_ood.result(timeout=max(deadline.remaining(), 0.001))
            route_decision: RouteDecision = gate_route.result(
                timeout=max(deadline.remaining(), 0.001)
            )
        except FutureTimeout:
            for token in tokens.values():
                token.cancel()
            return self._timeout_response(None, None, None)

        if ood_decision.verdict == GateVerdict.OUT_OF_DOMAIN:
            for token in tokens.values():
                token.cancel()
            trace = ExecutionTrace(
                gate_verdict=GateVerdict.OUT_OF_DOMAIN,
                gate_score=ood_decision.error,
                route=route_decision.label,
                route_confidence=route_decision.confidence,
                cancelled_branch="both",
            )
            return self._finish(self.refusals.ood, Branch.REFUSED, trace)

        winner = route_decision.label
        loser = (
            RouteLabel.PRESENTER
            if winner == RouteLabel.INSIGHT_GENERATOR
            else RouteLabel.INSIGHT_GENERATOR
        )
        tokens[loser].cancel()

        try:
            outcome: BranchOutcome = branch_futures[winner].result(
                timeout=max(deadline.remaining(), 0.001) + 0.25
            )
        except FutureTimeout:
            tokens[winner].cancel()
            return self._timeout_response(ood_decision, route_decision, loser)

        return self._respond(outcome, ood_decision, route_decision, cancelled=loser.value)

    def _handle_serial(self, query: Query, ctx: SellerContext, deadline: Deadline) -> ChatResponse:
        x = self.embedder.embed(query.text)
        tctx = build_temporal_context(ctx.today)
        augmented = augment_query(query, tctx)
        ood_decision = self._ood_gate(x)
        route_decision = self._route_gate(x)
        if ood_decision.verdict == GateVerdict.OUT_OF_DOMAIN:
            trace = ExecutionTrace(
                gate_verdict=GateVerdict.OUT_OF_DOMAIN,
                gate_score=ood_decision.error,
                route=route_decision.label,
                route_confidence=route_decision.confidence,
            )
            return self._finish(self.refusals.ood, Branch.REFUSED, trace)
        try:
            outcome = self._run_branch(
                route_decision.label, query, augmented, tctx, CancelToken(), deadline
            )
        except TotalTimeout:
            return self._timeout_response(ood_decision, route_decision, None)
        return self._respond(outcome, ood_decision, route_decision, cancelled=None)

    def _respond(
        self,
        outcome: BranchOutcome,
        ood_decision: OodDecision,
        route_decision: RouteDecision,
        cancelled: Optional[str],
    ) -> ChatResponse:
        trace = ExecutionTrace(
            gate_verdict=GateVerdict.IN_DOMAIN,
            gate_score=ood_decision.error,
            route=route_decision.label,
            route_confidence=route_decision.confidence,
            plan=outcome.plan,
            planner_raw=outcome.planner_raw,
            step_timings=outcome.step_timings,
            scope_status=outcome.scope.status if outcome.scope else None,
            scope_reason=outcome.scope.reason if outcome.scope else None,
            domain=outcome.domain.value if outcome.domain else None,
            claims=outcome.claims,
            cancelled_branch=cancelled,
            error_code=outcome.error_code,
        )
        branch = Branch(outcome.branch.value)
        return self._finish(outcome.answer, branch, trace)

    def _finish(self, answer: str, branch: Branch, trace: ExecutionTrace) -> ChatResponse:
        """The single guardrail pass every outbound answer goes through."""
        verdict = self.guardrail.screen(answer)
        if verdict.blocked:
            trace = dataclasses.replace(trace, guardrail=verdict, claims=())
            return ChatResponse(
                answer=self.refusals.guardrail,
                branch=Branch.REFUSED,
                trace=trace,
                latency_ms=0,
            )
        return ChatResponse(answer=answer, branch=branch, trace=trace, latency_ms=0)

    def _timeout_response(
        self,
        ood_decision: Optional[OodDecision],
        route_decision: Optional[RouteDecision],
        cancelled: Optional[RouteLabel],
    ) -> ChatResponse:
        trace = ExecutionTrace(
            gate_verdict=(
                ood_decision.verdict if ood_decision else GateVerdict.IN_DOMAIN
            ),
            gate_score=ood_decision.error if ood_decision else 0.0,
            route=route_decision.label if route_decision else None,
            route_confidence=route_decision.confidence if route_decision else None,
            cancelled_branch=cancelled.value if cancelled else None,
            error_code="TOTAL_TIMEOUT",
        )
        branch = Branch(route_decision.label.value) if route_decision else Branch.PRESENTER
        return self._finish(self.refusals.timeout, branch, trace)

    # --- branch pipelines ---------------------------------------------------

    def _llm_timeout(self, deadline: Deadline) -> float:
        return max(min(self.config.budgets.llm_timeout_ms / 1000, deadline.remaining()), 0.001)

    def _run_branch(
        self,
        label: RouteLabel,
        query: Query,
        augmented: str,
        tctx,
        token: CancelToken,
        deadline: Deadline,
    ) -> BranchOutcome:
        def checkpoint():
            token.check()
            deadline.check()

        try:
            checkpoint()
            scope = detect_data_out_of_scope(
                self.llm,
                query.text,
                self._catalog,
                self._templates["scope_check"],
                timeout_s=self._llm_timeout(deadline),
            )
            if not scope.in_scope:
                raise DataOutOfScope(scope.reason)
            if label == RouteLabel.PRESENTER:
                return self._run_presenter(query, augmented, scope, checkpoint, deadline)
            return self._run_insight(query, tctx, scope, checkpoint, deadline)
        except BranchCancelled:
            raise
        except DataOutOfScope as exc:
            return BranchOutcome(
                branch=label,
                answer=self.refusals.for_reason(REASON_DATA_OUT_OF_SCOPE, exc.message),
                scope=ScopeVerdict(status="out", reason=exc.message),
                error_code=exc.code,
            )
        except TotalTimeout:
            raise
        except LlmTimeout as exc:
            return BranchOutcome(
                branch=label,
                answer=self.refusals.timeout,
                error_code=exc.code,
            )
        except EngineError as exc:
            log.warning("branch %s failed: %s", label.value, exc)
            return BranchOutcome(
                branch=label,
                answer=self.refusals.generic,
                error_code=exc.code,
            )

    def _run_presenter(
        self, query: Query, augmented: str, scope: ScopeVerdict, checkpoint, deadline: Deadline
    ) -> BranchOutcome:
        checkpoint()
        plan, raw = plan_with_repair(
            self.llm,
            augmented,
            self._catalog,
            self.registry,
            self._templates["plan"],
            self._templates["plan_repair"],
            timeout_s=self._llm_timeout(deadline),
            checkpoint=checkpoint,
        )
        checkpoint()
        result = execute(plan, self.registry, checkpoint=checkpoint, clock=self.clock)
        final = result.final(plan)
        processed = post_process(
            final,
            query.text,
            self.embedder,
            self.registry.display_names,
            aliases=self.registry.column_aliases,
        )
        checkpoint()
        answer = present(
            self.llm,
            query.text,
            [processed],
            self._templates["present"],
            timeout_s=self._llm_timeout(deadline),
        )
        return BranchOutcome(
            branch=RouteLabel.PRESENTER,
            answer=answer,
            claims=extract_table_claims(processed),
            plan=plan,
            planner_raw=raw,
            step_timings=result.timings,
            scope=scope,
        )

    def _run_insight(
        self, query: Query, tctx, scope: ScopeVerdict, checkpoint, deadline: Deadline
    ) -> BranchOutcome:
        checkpoint()
        category = classify_domain(
            self.llm,
            query.text,
            self._templates["domain_classify"],
            timeout_s=self._llm_timeout(deadline),
        )
        path = self.resolution_paths[category]
        checkpoint()
        named_tables = run_analyses(path, self.registry, tctx)
        checkpoint()
        insight = generate_insight(
            self.llm,
            query.text,
            named_tables,
            path,
            timeout_s=self._llm_timeout(deadline),
        )
        return BranchOutcome(
            branch=RouteLabel.INSIGHT_GENERATOR,
            answer=insight.text,
            claims=insight.supporting,
            scope=scope,
            domain=category,
        )

    def close(self) -> None:
        self._pool.shutdown(wait=False)
