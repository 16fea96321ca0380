"""Quantitative evaluation: per-question metrics and benchmark runs.

Relevance, correctness, and completeness are computed in exact rational
arithmetic and rendered as decimals only at the edges. A question passes
when all three metrics strictly exceed 0.8. Relevance comes from keyword
matching against the response; correctness and completeness come from
human annotation files when present, otherwise from the machine-readable
claims in the trace measured against the item's ground truth.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

from .core import Branch, ChatResponse, SellerContext, canonical_json, validate_query
from .errors import EmptyInput, NoKeywords
from .orchestrator import Engine

PASS_BAR = Fraction(4, 5)


@dataclass(frozen=True)
class BenchmarkItem:
    id: str
    question: str
    in_scope: bool
    keywords: tuple[str, ...] = ()
    required_insights: tuple[str, ...] = ()
    ground_truth: tuple[tuple[str, str], ...] = ()  # (metric, value) pairs

    def __post_init__(self):
        if self.in_scope and not self.keywords:
            raise ValueError(f"in-scope item {self.id!r} needs keywords")


@dataclass(frozen=True)
class Annotation:
    item_id: str
    addressed_keywords: tuple[str, ...] = ()
    insights_in_response: int = 0
    correct_insights: int = 0
    required_covered: int = 0

    def __post_init__(self):
        if self.correct_insights > self.insights_in_response:
            raise ValueError("correct_insights cannot exceed insights_in_response")


@dataclass(frozen=True)
class MetricReport:
    relevance: Fraction
    correctness: Fraction
    completeness: Fraction
    zero_insights: bool = False

    @property
    def question_pass(self) -> bool:
        return (
            self.relevance > PASS_BAR
            and self.correctness > PASS_BAR
            and self.completeness > PASS_BAR
        )


def relevance(ann: Annotation, item: BenchmarkItem) -> Fraction:
    if not item.keywords:
        raise NoKeywords(f"item {item.id!r} has no keywords")
    addressed = set(ann.addressed_keywords) & set(item.keywords)
    return Fraction(len(addressed), len(item.keywords))


def correctness(ann: Annotation) -> Fraction:
    # A response with zero insights scores 0 by convention; callers flag it.
    if ann.insights_in_response == 0:
        return Fraction(0)
    return Fraction(ann.correct_insights, ann.insights_in_response)


def completeness(ann: Annotation, item: BenchmarkItem) -> Fraction:
    if not item.required_insights:
        return Fraction(1)
    return Fraction(
        min(ann.required_covered, len(item.required_insights)), len(item.required_insights)
    )


def question_accuracy(reports: Sequence[MetricReport]) -> tuple[Fraction, dict]:
    """Fraction of questions passing all three bars, plus the counts table."""
    if not reports:
        raise EmptyInput("no reports to score")
    passes = sum(1 for r in reports if r.question_pass)
    total = len(reports)
    fraction = Fraction(passes, total)
    counts = {
        "true": passes,
        "false": total - passes,
        "true_pct": float(fraction) * 100,
        "false_pct": float(Fraction(total - passes, total)) * 100,
    }
    return fraction, counts


def aggregate_stats(values: Sequence) -> dict:
    """Population statistics with the midpoint convention for even medians."""
    if not values:
        raise EmptyInput("no values to aggregate")
    floats = [float(v) for v in values]
    n = len(floats)
    avg = sum(floats) / n
    std = math.sqrt(sum((v - avg) ** 2 for v in floats) / n)
    ordered = sorted(floats)
    mid = n // 2
    median = ordered[mid] if n % 2 else (ordered[mid - 1] + ordered[mid]) / 2
    return {
        "avg": avg,
        "std": std,
        "min": ordered[0],
        "max": ordered[-1],
        "median": median,
        "n": n,
    }


def latency_percentile(samples_ms: Sequence[float], p: float) -> float:
    """Nearest-rank percentile."""
    if not samples_ms:
        raise EmptyInput("no latency samples")
    if not 0 < p < 100:
        raise ValueError(f"percentile must be in (0, 100), got {p}")
    ordered = sorted(samples_ms)
    rank = math.ceil(p / 100 * len(ordered))
    return float(ordered[rank - 1])


# --- benchmark running ------------------------------------------------------

@dataclass(frozen=True)
class ItemResult:
    item_id: str
    question: str
    in_scope: bool
    branch: Optional[str] = None
    latency_ms: Optional[int] = None
    report: Optional[MetricReport] = None
    refused_correctly: Optional[bool] = None  # out-of-scope items only
    error: Optional[str] = None

    def to_dict(self) -> dict:
        doc = {
            "item_id": self.item_id,
            "question": self.question,
            "in_scope": self.in_scope,
            "branch": self.branch,
            "latency_ms": self.latency_ms,
            "error": self.error,
            "refused_correctly": self.refused_correctly,
        }
        if self.report is not None:
            doc.update(
                relevance=float(self.report.relevance),
                correctness=float(self.report.correctness),
                completeness=float(self.report.completeness),
                zero_insights=self.report.zero_insights,
                question_pass=self.report.question_pass,
            )
        return doc


@dataclass(frozen=True)
class BenchmarkReport:
    results: tuple[ItemResult, ...]
    accuracy: dict
    metric_stats: dict
    latency: dict

    def to_dict(self) -> dict:
        return {
            "results": [r.to_dict() for r in self.results],
            "accuracy": self.accuracy,
            "metric_stats": self.metric_stats,
            "latency": self.latency,
        }

    def canonical_bytes(self) -> bytes:
        return canonical_json(self.to_dict()).encode("utf-8")


def _machine_annotation(item: BenchmarkItem, response: ChatResponse) -> Annotation:
    """Automatic scoring from trace claims and answer text."""
    answer = response.answer.lower()
    addressed = tuple(kw for kw in item.keywords if kw.lower() in answer)
    claims = response.trace.claims
    truth = {(metric, value) for metric, value in item.ground_truth}
    correct = sum(1 for metric, value, _ in claims if (metric, value) in truth)
    covered = sum(1 for req in item.required_insights if req.lower() in answer)
    return Annotation(
        item_id=item.id,
        addressed_keywords=addressed,
        insights_in_response=len(claims),
        correct_insights=correct,
        required_covered=covered,
    )


def score_item(
    item: BenchmarkItem,
    response: ChatResponse,
    annotation: Optional[Annotation] = None,
) -> MetricReport:
    """Human annotations override the automatic path when provided."""
    machine = _machine_annotation(item, response)
    ann = annotation or machine
    if annotation is not None and not annotation.addressed_keywords:
        # Keyword matching stays automatic unless the annotator supplied it.
        ann = Annotation(
            item_id=ann.item_id,
            addressed_keywords=machine.addressed_keywords,
            insights_in_response=ann.insights_in_response,
            correct_insights=ann.correct_insights,
            required_covered=ann.required_covered,
        )
    return MetricReport(
        relevance=relevance(ann, item),
        correctness=correctness(ann),
        completeness=completeness(ann, item),
        zero_insights=ann.insights_in_response == 0,
    )


def run_benchmark(
    engine: Engine,
    items: Sequence[BenchmarkItem],
    ctx: SellerContext,
    annotations: Optional[dict[str, Annotation]] = None,
) -> BenchmarkReport:
    """Run every item through the engine and assemble the full report.

    Per-item failures are recorded, not fatal. Out-of-scope items are scored
    only on whether the engine refused them; metric aggregates cover the
    in-scope items.
    """
    if not items:
        raise EmptyInput("no benchmark items")
    annotations = annotations or {}
    results: list[ItemResult] = []
    for item in items:
        try:
            response = engine.handle(
                validate_query(item.question, session_id=f"bench-{item.id}"), ctx
            )
        except Exception as exc:  # noqa: BLE001 - isolation is the contract
            results.append(
                ItemResult(
                    item_id=item.id,
                    question=item.question,
                    in_scope=item.in_scope,
                    error=f"{type(exc).__name__}: {exc}",
                )
            )
            continue
        if not item.in_scope:
            results.append(
                ItemResult(
                    item_id=item.id,
                    question=item.question,
                    in_scope=False,
                    branch=response.branch.value,
                    latency_ms=response.latency_ms,
                    refused_correctly=response.branch == Branch.REFUSED,
                )
            )
            continue
        report = score_item(item, response, annotations.get(item.id))
        results.append(
            ItemResult(
                item_id=item.id,
                question=item.question,
                in_scope=True,
                branch=response.branch.value,
                latency_ms=response.latency_ms,
                report=report,
            )
        )

    scored = [r.report for r in results if r.report is not None]
    if scored:
        fraction, counts = question_accuracy(scored)
        accuracy = {"fraction": float(fraction), **counts}
        metric_stats = {
            "relevance": aggregate_stats([r.relevance for r in scored]),
            "correctness": aggregate_stats([r.correctness for r in scored]),
            "completeness": aggregate_stats([r.completeness for r in scored]),
        }
    else:
        accuracy = {"fraction": None, "true": 0, "false": 0}
        metric_stats = {}
    latencies = [r.latency_ms for r in results if r.latency_ms is not None]
    latency = (
        {
            "p50_ms": latency_percentile(latencies, 50),
            "p90_ms": latency_percentile(latencies, 90),
            "mean_ms": sum(latencies) / len(latencies),
            "n": len(latencies),
        }
        if latencies
        else {"n": 0}
    )
    return BenchmarkReport(
        results=tuple(results),
        accuracy=accuracy,
        metric_stats=metric_stats,
        latency=latency,
    )


def render_report(report: BenchmarkReport) -> str:
    """Human-readable summary: metric table then accuracy counts."""
    lines = ["Metric        Avg     Std     Min     Max     Median  Samples"]
    for name in ("relevance", "correctness", "completeness"):
        stats = report.metric_stats.get(name)
        if not stats:
            continue
        lines.append(
            f"{name.capitalize():<12}  "
            f"{stats['avg']:.3f}   {stats['std']:.3f}   {stats['min']:.3f}   "
            f"{stats['max']:.3f}   {stats['median']:.3f}   {stats['n']}"
        )
    lines.append("")
    lines.append("Question-level accuracy   Count   Percentage")
    lines.append(
        f"False                     {report.accuracy.get('false', 0):<7} "
        f"{report.accuracy.get('false_pct', 0.0):.1f}"
    )
    lines.append(
        f"True                      {report.accuracy.get('true', 0):<7} "
        f"{report.accuracy.get('true_pct', 0.0):.1f}"
    )
    if report.latency.get("n"):
        lines.append("")
        lines.append(
            f"Latency: p50 {report.latency['p50_ms']:.0f} ms, "
            f"p90 {report.latency['p90_ms']:.0f} ms over {report.latency['n']} runs"
        )
    failures = [r for r in report.results if r.error]
    if failures:
        lines.append("")
        lines.append(f"Failed items: {', '.join(r.item_id for r in failures)}")
    return "\n".join(lines)


# --- file formats -----------------------------------------------------------

def load_benchmark(path: str) -> list[BenchmarkItem]:
    """JSON lines, one item per line."""
    items = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            doc = json.loads(line)
            items.append(
                BenchmarkItem(
                    id=doc["id"],
                    question=doc["question"],
                    in_scope=doc["in_scope"],
                    keywords=tuple(doc.get("keywords", ())),
                    required_insights=tuple(doc.get("required_insights", ())),
                    ground_truth=tuple(
                        (pair[0], pair[1]) for pair in doc.get("ground_truth", ())
                    ),
                )
            )
    return items


def save_benchmark(items: Sequence[BenchmarkItem], path: str) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for item in items:
            f.write(
                json.dumps(
                    {
                        "id": item.id,
                        "question": item.question,
                        "in_scope": item.in_scope,
                        "keywords": list(item.keywords),
                        "required_insights": list(item.required_insights),
                        "ground_truth": [list(pair) for pair in item.ground_truth],
                    }
                )
                + "\n"
            )


def load_annotations(path: str) -> dict[str, Annotation]:
    """JSON lines keyed by item_id."""
    out: dict[str, Annotation] = {}
    with open(path, encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            doc = json.loads(line)
            ann = Annotation(
                item_id=doc["item_id"],
                addressed_keywords=tuple(doc.get("addressed_keywords", ())),
                insights_in_response=doc.get("insights_in_response", 0),
                correct_insights=doc.get("correct_insights", 0),
                required_covered=doc.get("required_covered", 0),
            )
            out[ann.item_id] = ann
    return out
