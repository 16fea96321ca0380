"""Calendar context injection for time-ambiguous queries.

Questions about seller data usually pivot on a period ("last week", "this
month") that an LLM cannot resolve without knowing today's date. The
augmenter appends explicit date ranges to the query so every downstream
prompt sees concrete boundaries. Weeks are ISO weeks, Monday through Sunday.
"""

from __future__ import annotations

import calendar
from dataclasses import dataclass
from datetime import date, timedelta

from .core import Query


@dataclass(frozen=True)
class DateRange:
    start: date
    end: date  # inclusive

    def __post_init__(self):
        if self.start > self.end:
            raise ValueError(f"range start {self.start} after end {self.end}")

    def __contains__(self, d: date) -> bool:
        return self.start <= d <= self.end

    def days(self) -> int:
        return (self.end - self.start).days + 1

    def __str__(self) -> str:
        return f"{self.start.isoformat()}..{self.end.isoformat()}"


@dataclass(frozen=True)
class TemporalContext:
    today: date
    this_week: DateRange
    last_week: DateRange
    this_month: DateRange
    last_month: DateRange
    this_year: DateRange
    last_year: DateRange


def month_range(year: int, month: int) -> DateRange:
    last_day = calendar.monthrange(year, month)[1]
    return DateRange(date(year, month, 1), date(year, month, last_day))


def build_temporal_context(today: date) -> TemporalContext:
    monday = today - timedelta(days=today.weekday())
    this_week = DateRange(monday, monday + timedelta(days=6))
    last_week = DateRange(monday - timedelta(days=7), monday - timedelta(days=1))

    this_month = month_range(today.year, today.month)
    if today.month == 1:
        last_month = month_range(today.year - 1, 12)
    else:
        last_month = month_range(today.year, today.month - 1)

    this_year = DateRange(date(today.year, 1, 1), date(today.year, 12, 31))
    last_year = DateRange(date(today.year - 1, 1, 1), date(today.year - 1, 12, 31))
    return TemporalContext(
        today=today,
        this_week=this_week,
        last_week=last_week,
        this_month=this_month,
        last_month=last_month,
        this_year=this_year,
        last_year=last_year,
    )


def augment_query(q: Query, ctx: TemporalContext) -> str:
    """Original text verbatim, then labeled calendar lines."""
    lines = [
        q.text,
        "",
        "[context]",
        f"today: {ctx.today.isoformat()}",
        f"this_week: {ctx.this_week}",
        f"last_week: {ctx.last_week}",
        f"this_month: {ctx.this_month}",
        f"last_month: {ctx.last_month}",
        f"this_year: {ctx.this_year}",
        f"last_year: {ctx.last_year}",
        'note: "week" means the calendar week, Monday through Sunday.',
    ]
    return "\n".join(lines)
