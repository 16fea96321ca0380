"""Worker agents: the data presenter and the insight generator.

The presenter turns retrieved tables into a formatted answer. The insight
generator first classifies the question into a domain category, runs that
category's predefined analyses against the dataplane, then generates text
with the domain knowledge snippet injected into the prompt. Supporting
claims always come from the computed tables, never from LLM prose, so the
evaluation harness has a machine-readable basis for correctness.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from datetime import date
from enum import Enum
from importlib import resources
from pathlib import Path
from typing import Callable, Optional

from .errors import ArgsInvalid
from .llm import (
    CompletionRequest,
    LlmProvider,
    PromptTemplate,
    load_template,
    render,
    template_from_dict,
)
from .registry import Registry
from .tables import NA, ColumnType, DataTable, format_cell, render_table
from .temporal import DateRange, TemporalContext, month_range

log = logging.getLogger(__name__)

NO_DATA_ANSWER = "No data was found for the requested period."


class DomainCategory(str, Enum):
    PERFORMANCE = "performance"
    BENCHMARKING = "benchmarking"
    RECOMMENDATION = "recommendation"
    OTHER = "other"


# --- analyses -------------------------------------------------------------

METRIC_FORMATS = {
    "sales": "currency",
    "avg_price": "currency",
    "units": "count",
    "page_views": "count",
    "conversion": "percent",
    "traffic": "count",
}


def format_metric_value(metric: str, value) -> str:
    """Metric-aware rendering for normalized decimal analysis values."""
    if value is NA:
        return "n/a"
    kind = METRIC_FORMATS.get(metric, "decimal")
    if kind == "currency":
        sign = "-" if value < 0 else ""
        return f"{sign}${abs(value):,.2f}"
    if kind == "count":
        return f"{int(round(value)):,}"
    if kind == "percent":
        return f"{float(value) * 100:.2f}%"
    return f"{float(value):,.2f}"


def _month_metrics(registry: Registry, window: DateRange) -> dict[str, float]:
    """Normalized seller totals for one month: dollars, counts, fraction."""
    payload = {"start_date": window.start.isoformat(), "end_date": window.end.isoformat()}
    sales_t = registry.invoke_api("get_sales_monthly", payload)
    traffic_t = registry.invoke_api("get_traffic_monthly", payload)
    conv_t = registry.invoke_api("get_conversion_monthly", payload)
    sales = units = views = 0.0
    conversion = NA
    if not sales_t.is_empty:
        sales = sales_t.rows[0][sales_t.column_index("sales")] / 100
        units = float(sales_t.rows[0][sales_t.column_index("units")])
    if not traffic_t.is_empty:
        views = float(traffic_t.rows[0][traffic_t.column_index("page_views")])
    if not conv_t.is_empty:
        conversion = conv_t.rows[0][conv_t.column_index("conversion")]
    avg_price = sales / units if units else NA
    return {
        "sales": sales,
        "units": units,
        "avg_price": avg_price,
        "page_views": views,
        "conversion": conversion,
    }


def _reference_month(ctx: TemporalContext) -> DateRange:
    # The most recent complete month is the reporting period.
    return ctx.last_month


def _analysis_period_aggregate(registry: Registry, ctx: TemporalContext) -> DataTable:
    ref = _reference_month(ctx)
    m = _month_metrics(registry, ref)
    return DataTable.build(
        [
            ("month", ColumnType.DATE),
            ("sales", ColumnType.DECIMAL),
            ("units", ColumnType.INTEGER),
            ("avg_price", ColumnType.DECIMAL),
            ("page_views", ColumnType.INTEGER),
            ("conversion", ColumnType.PERCENT),
        ],
        [
            (
                ref.start,
                m["sales"],
                int(m["units"]),
                m["avg_price"],
                int(m["page_views"]),
                m["conversion"],
            )
        ],
    )


def _analysis_yoy_compare(registry: Registry, ctx: TemporalContext) -> DataTable:
    ref = _reference_month(ctx)
    prior = month_range(ref.start.year - 1, ref.start.month)
    current = _month_metrics(registry, ref)
    previous = _month_metrics(registry, prior)
    rows = []
    for metric in ("sales", "units", "avg_price", "page_views", "conversion"):
        cur, pre = current[metric], previous[metric]
        if cur is NA or pre is NA:
            rows.append((metric, NA if cur is NA else float(cur), NA if pre is NA else float(pre), NA, NA))
            continue
        delta = float(cur) - float(pre)
        pct = delta / float(pre) if pre else NA
        rows.append((metric, float(cur), float(pre), delta, pct))
    return DataTable.build(
        [
            ("metric", ColumnType.TEXT),
            ("current", ColumnType.DECIMAL),
            ("prior", ColumnType.DECIMAL),
            ("delta", ColumnType.DECIMAL),
            ("pct", ColumnType.PERCENT),
        ],
        rows,
    )


def _trailing_months(ref: DateRange, n: int) -> list[DateRange]:
    months = []
    year, month = ref.start.year, ref.start.month
    for _ in range(n):
        months.append(month_range(year, month))
        month -= 1
        if month == 0:
            year, month = year - 1, 12
    return list(reversed(months))


def least_squares_slope(values: list[float]) -> float:
    n = len(values)
    if n < 2:
        return 0.0
    mean_x = (n - 1) / 2
    mean_y = sum(values) / n
    num = sum((i - mean_x) * (y - mean_y) for i, y in enumerate(values))
    den = sum((i - mean_x) ** 2 for i in range(n))
    return num / den


TREND_DEAD_BAND = 0.01  # |slope| below 1% of the series mean reads as flat


def trend_direction(values: list[float]) -> tuple[float, str]:
    slope = least_squares_slope(values)
    mean = sum(values) / len(values) if values else 0.0
    if abs(slope) < TREND_DEAD_BAND * abs(mean):
        return slope, "Flat"
    if slope > 0:
        return slope, "Up"
    if slope < 0:
        return slope, "Down"
    return slope, "Flat"


def _monthly_series(registry: Registry, ctx: TemporalContext, months: int = 12):
    ref = _reference_month(ctx)
    windows = _trailing_months(ref, months)
    series: dict[str, list[float]] = {"sales": [], "units": [], "page_views": []}
    for window in windows:
        m = _month_metrics(registry, window)
        series["sales"].append(m["sales"])
        series["units"].append(m["units"])
        series["page_views"].append(m["page_views"])
    return windows, series


def _analysis_trend(registry: Registry, ctx: TemporalContext) -> DataTable:
    _, series = _monthly_series(registry, ctx)
    rows = []
    for metric in ("sales", "units", "page_views"):
        slope, direction = trend_direction(series[metric])
        rows.append((metric, float(slope), direction))
    return DataTable.build(
        [
            ("metric", ColumnType.TEXT),
            ("slope", ColumnType.DECIMAL),
            ("direction", ColumnType.TEXT),
        ],
        rows,
    )


def _analysis_seasonal_index(registry: Registry, ctx: TemporalContext) -> DataTable:
    windows, series = _monthly_series(registry, ctx)
    totals = series["sales"]
    overall = sum(totals) / len(totals) if totals else 0.0
    by_month: dict[int, list[float]] = {}
    for window, value in zip(windows, totals):
        by_month.setdefault(window.start.month, []).append(value)
    rows = []
    for month in sorted(by_month):
        month_mean = sum(by_month[month]) / len(by_month[month])
        index = month_mean / overall if overall else NA
        rows.append((month, index if index is NA else float(index)))
    return DataTable.build(
        [("month_number", ColumnType.INTEGER), ("index", ColumnType.DECIMAL)], rows
    )


def _analysis_benchmark_compare(registry: Registry, ctx: TemporalContext) -> DataTable:
    ref = _reference_month(ctx)
    m = _month_metrics(registry, ref)
    seller_values = {
        "sales": m["sales"],
        "traffic": m["page_views"],
        "conversion": m["conversion"],
    }
    rows = []
    for metric, peer in registry.store.benchmarks:
        seller = seller_values.get(metric)
        if seller is None or seller is NA:
            rows.append((metric, NA, float(peer), NA, "Unknown"))
            continue
        delta = float(seller) - float(peer)
        position = "Above" if delta > 0 else ("Below" if delta < 0 else "At")
        rows.append((metric, float(seller), float(peer), delta, position))
    return DataTable.build(
        [
            ("metric", ColumnType.TEXT),
            ("seller", ColumnType.DECIMAL),
            ("peer", ColumnType.DECIMAL),
            ("delta", ColumnType.DECIMAL),
            ("position", ColumnType.TEXT),
        ],
        rows,
    )


ANALYSES: dict[str, Callable[[Registry, TemporalContext], DataTable]] = {
    "period_aggregate": _analysis_period_aggregate,
    "yoy_compare": _analysis_yoy_compare,
    "trend": _analysis_trend,
    "seasonal_index": _analysis_seasonal_index,
    "benchmark_compare": _analysis_benchmark_compare,
}


@dataclass(frozen=True)
class ResolutionPath:
    category: DomainCategory
    analyses: tuple[str, ...]
    knowledge: str
    template: PromptTemplate

    def __post_init__(self):
        unknown = [a for a in self.analyses if a not in ANALYSES]
        if unknown:
            raise ArgsInvalid(f"unregistered analyses: {unknown}")


@dataclass(frozen=True)
class Insight:
    text: str
    supporting: tuple[tuple[str, str, str], ...]
    category: DomainCategory


def run_analyses(
    path: ResolutionPath, registry: Registry, ctx: TemporalContext
) -> list[tuple[str, DataTable]]:
    """Run the path's analyses in order; each is a pure dataplane computation."""
    return [(name, ANALYSES[name](registry, ctx)) for name in path.analyses]


def classify_domain(
    llm: LlmProvider,
    query_text: str,
    template: PromptTemplate,
    timeout_s: Optional[float] = None,
) -> DomainCategory:
    prompt = render(template, {"query": query_text})
    reply = llm.complete(CompletionRequest(prompt=prompt), timeout_s=timeout_s)
    word = reply.strip().split()[0].lower().strip(".,:") if reply.strip() else ""
    for category in DomainCategory:
        if word == category.value:
            return category
    log.warning("unrecognized domain reply %r; falling back to 'other'", reply[:80])
    return DomainCategory.OTHER


def extract_insight_claims(
    named_tables: list[tuple[str, DataTable]]
) -> tuple[tuple[str, str, str], ...]:
    """Machine-readable (metric, value, comparison) triples from analysis tables."""
    claims: list[tuple[str, str, str]] = []
    for name, table in named_tables:
        if name == "period_aggregate" and not table.is_empty:
            row = table.rows[0]
            for i, col in enumerate(table.columns):
                if col.name == "month":
                    continue
                claims.append((col.name, format_metric_value(col.name, row[i]), ""))
        elif name == "yoy_compare":
            for row in table.rows:
                metric = row[0]
                comparison = (
                    f"{format_metric_value(metric, row[3])} or "
                    f"{format_cell(row[4], ColumnType.PERCENT)} YoY"
                )
                claims.append((metric, format_metric_value(metric, row[1]), comparison))
        elif name == "trend":
            for row in table.rows:
                claims.append((f"{row[0]}_trend", row[2], f"slope {row[1]:,.2f} per month"))
        elif name == "seasonal_index":
            for row in table.rows:
                claims.append(
                    (f"seasonal_index_m{row[0]:02d}", format_cell(row[1], ColumnType.DECIMAL), "")
                )
        elif name == "benchmark_compare":
            for row in table.rows:
                claims.append(
                    (
                        f"{row[0]}_vs_peer",
                        format_metric_value(row[0], row[1]),
                        f"{row[4]} peer {format_metric_value(row[0], row[2])}",
                    )
                )
        else:
            claims.extend(extract_table_claims(table))
    return tuple(claims)


def extract_table_claims(table: DataTable) -> tuple[tuple[str, str, str], ...]:
    """Generic claims: one per non-key cell, keyed by the row's first column."""
    if not table.columns:
        return ()
    claims = []
    for row in table.rows:
        key = format_cell(row[0], table.columns[0].ctype)
        if len(table.columns) == 1:
            claims.append((table.columns[0].name, key, ""))
            continue
        for i in range(1, len(table.columns)):
            claims.append(
                (
                    f"{key} {table.columns[i].name}",
                    format_cell(row[i], table.columns[i].ctype),
                    "",
                )
            )
    return tuple(claims)


def present(
    llm: LlmProvider,
    query_text: str,
    tables: list[DataTable],
    template: PromptTemplate,
    timeout_s: Optional[float] = None,
) -> str:
    """Format retrieved tables into the answer; values must come from the tables."""
    if not tables:
        raise ArgsInvalid("presenter needs at least one table")
    if all(t.is_empty for t in tables):
        return NO_DATA_ANSWER
    rendered = "\n\n".join(render_table(t) for t in tables)
    prompt = render(template, {"tables": rendered, "query": query_text})
    return llm.complete(CompletionRequest(prompt=prompt), timeout_s=timeout_s)


def generate_insight(
    llm: LlmProvider,
    query_text: str,
    named_tables: list[tuple[str, DataTable]],
    path: ResolutionPath,
    timeout_s: Optional[float] = None,
) -> Insight:
    """Knowledge-injected generation grounded in the computed analyses."""
    rendered = "\n\n".join(f"[{name}]\n{render_table(t)}" for name, t in named_tables)
    prompt = render(
        path.template,
        {"knowledge": path.knowledge, "analyses": rendered or "(none)", "query": query_text},
    )
    text = llm.complete(CompletionRequest(prompt=prompt), timeout_s=timeout_s)
    return Insight(
        text=text,
        supporting=extract_insight_claims(named_tables),
        category=path.category,
    )


def audit_insight(insight: Insight) -> list[str]:
    """Metrics worded into the text without a supporting claim; warn, not fail."""
    cited = {metric for metric, _, _ in insight.supporting}
    missing = []
    for metric in METRIC_FORMATS:
        if metric.replace("_", " ") in insight.text.lower() and metric not in cited:
            missing.append(metric)
    return missing


def load_resolution_paths(path: Optional[str] = None) -> dict[DomainCategory, ResolutionPath]:
    """Category config: analyses list, knowledge text file, template file."""
    if path is None:
        base = resources.files("seller_insights.configs")
        doc = json.loads(base.joinpath("resolution_paths.json").read_text(encoding="utf-8"))
        read_knowledge = lambda rel: base.joinpath(rel).read_text(encoding="utf-8").strip()
        read_template = load_template
    else:
        cfg = Path(path)
        doc = json.loads(cfg.read_text(encoding="utf-8"))
        read_knowledge = lambda rel: (cfg.parent / rel).read_text(encoding="utf-8").strip()

        def read_template(name: str) -> PromptTemplate:
            candidate = cfg.parent / f"{name}.json"
            if candidate.exists():
                return template_from_dict(json.loads(candidate.read_text(encoding="utf-8")))
            return load_template(name)

    paths = {}
    for entry in doc:
        category = DomainCategory(entry["category"])
        paths[category] = ResolutionPath(
            category=category,
            analyses=tuple(entry["analyses"]),
            knowledge=read_knowledge(entry["knowledge_file"]),
            template=read_template(entry["template"]),
        )
    missing = [c for c in DomainCategory if c not in paths]
    if missing:
        raise ValueError(f"resolution paths missing categories: {[c.value for c in missing]}")
    return paths
