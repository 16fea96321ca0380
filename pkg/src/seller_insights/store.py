"""Synthetic seller store: daily per-product facts plus peer benchmarks.

Stands in for production data services so the whole pipeline is testable
offline. Generation is deterministic per seed and bakes in seasonality and
per-product trend so diagnostic analyses have structure to find. Sales are
always units times the product's unit price, in integer cents.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from datetime import date, timedelta

from .core import seeded_rng

BENCHMARK_METRICS = ("sales", "traffic", "conversion")


@dataclass(frozen=True)
class FactRow:
    seller_id: str
    product_id: str
    day: date
    sales_cents: int
    units: int
    page_views: int
    conversion: float  # units / page_views, in [0, 1]


@dataclass(frozen=True)
class SellerStore:
    seller_id: str
    facts: tuple[FactRow, ...]
    benchmarks: tuple[tuple[str, float], ...]  # (metric, peer_value)

    def __post_init__(self):
        seen = set()
        for f in self.facts:
            key = (f.seller_id, f.product_id, f.day)
            if key in seen:
                raise ValueError(f"duplicate fact row for {key}")
            seen.add(key)
            if not 0.0 <= f.conversion <= 1.0:
                raise ValueError(f"conversion out of range for {key}: {f.conversion}")

    def date_span(self) -> tuple[date, date]:
        days = [f.day for f in self.facts]
        return min(days), max(days)

    def product_ids(self) -> tuple[str, ...]:
        return tuple(sorted({f.product_id for f in self.facts}))

    def benchmark(self, metric: str) -> float:
        for name, value in self.benchmarks:
            if name == metric:
                return value
        raise KeyError(metric)


def _seasonal_factor(month: int, phase: float) -> float:
    return 1.0 + 0.35 * math.sin(2.0 * math.pi * (month - 1) / 12.0 + phase)


def generate_store(
    seed: int,
    n_products: int,
    start: date,
    end: date,
    seller_id: str = "seller-1",
) -> SellerStore:
    """One fact row per (product, day) over the range, deterministic per seed."""
    if n_products < 1:
        raise ValueError("n_products must be >= 1")
    if start > end:
        raise ValueError("empty date range")
    rng = seeded_rng(seed, "store")
    n_days = (end - start).days + 1

    facts: list[FactRow] = []
    total_sales = 0
    total_views = 0
    total_units = 0
    for p in range(n_products):
        product_id = f"P{p + 1:03d}"
        base_units = float(rng.integers(3, 40))
        unit_price_cents = int(rng.integers(500, 15000))
        phase = float(rng.uniform(0, 2 * math.pi))
        # Annualized growth between -25% and +40%, applied linearly.
        trend_per_day = float(rng.uniform(-0.25, 0.40)) / 365.0
        view_multiplier = float(rng.uniform(8, 30))
        for i in range(n_days):
            day = start + timedelta(days=i)
            level = base_units * _seasonal_factor(day.month, phase) * (1.0 + trend_per_day * i)
            units = int(rng.poisson(max(level, 0.05)))
            views = int(round(units * view_multiplier + float(rng.integers(5, 60))))
            views = max(views, units, 1)
            conversion = units / views
            facts.append(
                FactRow(
                    seller_id=seller_id,
                    product_id=product_id,
                    day=day,
                    sales_cents=units * unit_price_cents,
                    units=units,
                    page_views=views,
                    conversion=conversion,
                )
            )
            total_sales += units * unit_price_cents
            total_views += views
            total_units += units

    months = max(_months_spanned(start, end), 1)
    # Peer values in display units: dollars, views per month, fraction.
    seller_monthly_sales = total_sales / months / 100
    seller_monthly_views = total_views / months
    seller_conversion = total_units / total_views if total_views else 0.0
    benchmarks = (
        ("sales", round(seller_monthly_sales * float(rng.uniform(0.8, 1.25)), 2)),
        ("traffic", round(seller_monthly_views * float(rng.uniform(0.8, 1.25)), 2)),
        ("conversion", round(min(seller_conversion * float(rng.uniform(0.8, 1.25)), 1.0), 6)),
    )
    return SellerStore(seller_id=seller_id, facts=tuple(facts), benchmarks=benchmarks)


def _months_spanned(start: date, end: date) -> int:
    return (end.year - start.year) * 12 + (end.month - start.month) + 1


FACTS_HEADER = ["seller_id", "product_id", "date", "sales_cents", "units", "page_views", "conversion_bp"]
BENCHMARKS_HEADER = ["metric", "peer_value"]


def save_store_csv(store: SellerStore, facts_path: str, benchmarks_path: str) -> None:
    """Facts with conversion in basis points; benchmarks as (metric, peer_value)."""
    with open(facts_path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(FACTS_HEADER)
        for fact in store.facts:
            writer.writerow(
                [
                    fact.seller_id,
                    fact.product_id,
                    fact.day.isoformat(),
                    fact.sales_cents,
                    fact.units,
                    fact.page_views,
                    round(fact.conversion * 10000),
                ]
            )
    with open(benchmarks_path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(BENCHMARKS_HEADER)
        for metric, value in store.benchmarks:
            writer.writerow([metric, value])


def load_store_csv(facts_path: str, benchmarks_path: str) -> SellerStore:
    facts: list[FactRow] = []
    seller_id = ""
    with open(facts_path, newline="", encoding="utf-8") as f:
        reader = csv.DictReader(f)
        if reader.fieldnames != FACTS_HEADER:
            raise ValueError(
                f"unexpected facts header {reader.fieldnames}, want {FACTS_HEADER}"
            )
        for row in reader:
            seller_id = row["seller_id"]
            facts.append(
                FactRow(
                    seller_id=row["seller_id"],
                    product_id=row["product_id"],
                    day=date.fromisoformat(row["date"]),
                    sales_cents=int(row["sales_cents"]),
                    units=int(row["units"]),
                    page_views=int(row["page_views"]),
                    conversion=int(row["conversion_bp"]) / 10000,
                )
            )
    benchmarks: list[tuple[str, float]] = []
    with open(benchmarks_path, newline="", encoding="utf-8") as f:
        reader = csv.DictReader(f)
        if reader.fieldnames != BENCHMARKS_HEADER:
            raise ValueError(
                f"unexpected benchmarks header {reader.fieldnames}, want {BENCHMARKS_HEADER}"
            )
        for row in reader:
            benchmarks.append((row["metric"], float(row["peer_value"])))
    return SellerStore(seller_id=seller_id, facts=tuple(facts), benchmarks=tuple(benchmarks))
