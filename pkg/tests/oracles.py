"""Naive full-scan reference implementations for the dataplane.

Deliberately dumb: plain loops and dicts, no shared code with the registry
executors beyond the table type, so agreement is meaningful evidence.
"""

from __future__ import annotations

from datetime import date, timedelta

from seller_insights.store import SellerStore
from seller_insights.tables import NA, ColumnType, DataTable


def _d(value) -> date:
    return value if isinstance(value, date) else date.fromisoformat(value)


def oracle_api(store: SellerStore, name: str, payload: dict) -> DataTable:
    if name == "get_benchmarks":
        rows = [(m, float(v)) for m, v in store.benchmarks if m == payload["metric"]]
        return DataTable.build(
            [("metric", ColumnType.TEXT), ("peer_value", ColumnType.DECIMAL)], rows
        )
    start, end = _d(payload["start_date"]), _d(payload["end_date"])
    facts = [f for f in store.facts if start <= f.day <= end]
    by_product = "by_product" in name
    groups: dict = {}
    for f in facts:
        key = f.product_id if by_product else f.day.replace(day=1)
        g = groups.setdefault(key, {"sales": 0, "units": 0, "views": 0})
        g["sales"] += f.sales_cents
        g["units"] += f.units
        g["views"] += f.page_views
    rows = []
    for key in sorted(groups):
        g = groups[key]
        if name.startswith("get_sales"):
            rows.append((key, g["sales"], g["units"]))
        elif name.startswith("get_traffic"):
            rows.append((key, g["views"]))
        else:
            conv = g["units"] / g["views"] if g["views"] > 0 else NA
            rows.append((key, conv))
    first = ("product_id", ColumnType.TEXT) if by_product else ("month", ColumnType.DATE)
    if name.startswith("get_sales"):
        cols = [first, ("sales", ColumnType.CURRENCY), ("units", ColumnType.INTEGER)]
    elif name.startswith("get_traffic"):
        cols = [first, ("page_views", ColumnType.INTEGER)]
    else:
        cols = [first, ("conversion", ColumnType.PERCENT)]
    return DataTable.build(cols, rows)


def _numeric_cols(table: DataTable, names):
    numeric = {ColumnType.INTEGER, ColumnType.DECIMAL, ColumnType.PERCENT, ColumnType.CURRENCY}
    if names is None:
        return [c for c in table.columns if c.ctype in numeric]
    return [table.column(n) for n in names]


def _agg(values, ctype, op):
    concrete = [v for v in values if v is not NA]
    if op == "sum":
        total = sum(concrete)
        return int(total) if ctype in (ColumnType.INTEGER, ColumnType.CURRENCY) else float(total)
    mean = sum(concrete) / len(concrete)
    if ctype == ColumnType.CURRENCY:
        return round(mean)
    return float(mean)


def _agg_type(ctype, op):
    if op == "avg" and ctype == ColumnType.INTEGER:
        return ColumnType.DECIMAL
    return ctype


def oracle_aggregate(table: DataTable, op: str, columns=None) -> DataTable:
    cols = _numeric_cols(table, columns)
    out_cols = [(c.name, _agg_type(c.ctype, op)) for c in cols]
    row = tuple(_agg(table.column_values(c.name), c.ctype, op) for c in cols)
    return DataTable.build(out_cols, [row])


def oracle_group_by(table: DataTable, keys, op: str, columns=None) -> DataTable:
    value_cols = [c for c in _numeric_cols(table, columns) if c.name not in keys]
    key_idx = [table.column_index(k) for k in keys]
    groups: dict = {}
    for row in table.rows:
        groups.setdefault(tuple(row[i] for i in key_idx), []).append(row)
    out_rows = []
    for key in sorted(groups):
        cells = list(key)
        for c in value_cols:
            i = table.column_index(c.name)
            cells.append(_agg([r[i] for r in groups[key]], c.ctype, op))
        out_rows.append(tuple(cells))
    out_cols = [(table.column(k).name, table.column(k).ctype) for k in keys] + [
        (c.name, _agg_type(c.ctype, op)) for c in value_cols
    ]
    return DataTable.build(out_cols, out_rows)


def oracle_top_k(table: DataTable, by: str, k: int) -> DataTable:
    by_idx = table.column_index(by)
    others = [i for i in range(len(table.columns)) if i != by_idx]

    def tie_cell(v):
        if v is NA:
            return (0, "")
        if isinstance(v, str):
            return (1, v)
        if isinstance(v, date):
            return (1, v.isoformat())
        return (2, v)

    remaining = list(table.rows)
    picked = []
    while remaining and len(picked) < k:
        best = None
        for row in remaining:
            if best is None:
                best = row
                continue
            bv, rv = best[by_idx], row[by_idx]
            b_key = (0, 0) if bv is NA else (1, bv)
            r_key = (0, 0) if rv is NA else (1, rv)
            if r_key > b_key:
                best = row
            elif r_key == b_key:
                if tuple(tie_cell(row[i]) for i in others) < tuple(
                    tie_cell(best[i]) for i in others
                ):
                    best = row
        picked.append(best)
        remaining.remove(best)
    return DataTable(columns=table.columns, rows=tuple(picked))


def oracle_filter(table: DataTable, column: str, op: str, value) -> DataTable:
    idx = table.column_index(column)
    if table.column(column).ctype == ColumnType.DATE and isinstance(value, str):
        value = date.fromisoformat(value)
    ops = {
        "eq": lambda a: a == value,
        "ne": lambda a: a != value,
        "lt": lambda a: a < value,
        "le": lambda a: a <= value,
        "gt": lambda a: a > value,
        "ge": lambda a: a >= value,
    }
    rows = tuple(r for r in table.rows if r[idx] is not NA and ops[op](r[idx]))
    return DataTable(columns=table.columns, rows=rows)


def oracle_yoy_delta(current: DataTable, prior: DataTable, column=None) -> DataTable:
    numeric = {ColumnType.INTEGER, ColumnType.DECIMAL, ColumnType.PERCENT, ColumnType.CURRENCY}
    if column is None:
        column = next(c.name for c in current.columns if c.ctype in numeric)
    ctype = current.column(column).ctype
    cur = current.rows[0][current.column_index(column)]
    pre = prior.rows[0][prior.column_index(column)]
    delta = cur - pre
    if ctype in (ColumnType.INTEGER, ColumnType.CURRENCY):
        delta = int(delta)
    pct = (cur - pre) / pre if pre != 0 else NA
    delta_t = ColumnType.DECIMAL if ctype == ColumnType.PERCENT else ctype
    return DataTable.build(
        [("current", ctype), ("prior", ctype), ("delta", delta_t), ("pct", ColumnType.PERCENT)],
        [(cur, pre, delta, pct)],
    )


def oracle_month_metrics(store: SellerStore, year: int, month: int) -> dict:
    """Normalized monthly seller totals from a raw fact scan."""
    sales_cents = units = views = 0
    for f in store.facts:
        if f.day.year == year and f.day.month == month:
            sales_cents += f.sales_cents
            units += f.units
            views += f.page_views
    sales = sales_cents / 100
    conversion = units / views if views else NA
    avg_price = sales / units if units else NA
    return {
        "sales": sales,
        "units": float(units),
        "avg_price": avg_price,
        "page_views": float(views),
        "conversion": conversion,
    }


def _slope(values: list[float]) -> float:
    # Closed form, distinct from the centered-sums implementation.
    n = len(values)
    sx = sum(range(n))
    sy = sum(values)
    sxy = sum(i * y for i, y in enumerate(values))
    sxx = sum(i * i for i in range(n))
    return (n * sxy - sx * sy) / (n * sxx - sx * sx)


def oracle_insight_claims(store: SellerStore, category: str, today: date):
    """Recompute the insight supporting claims for the reference month."""
    from seller_insights.tables import ColumnType, format_cell
    from seller_insights.workers import format_metric_value

    ref_year, ref_month = (today.year, today.month - 1) if today.month > 1 else (
        today.year - 1, 12
    )
    current = oracle_month_metrics(store, ref_year, ref_month)
    claims = []
    for metric in ("sales", "units", "avg_price", "page_views", "conversion"):
        claims.append((metric, format_metric_value(metric, current[metric]), ""))

    if category == "benchmarking":
        seller_by_metric = {
            "sales": current["sales"],
            "traffic": current["page_views"],
            "conversion": current["conversion"],
        }
        for metric, peer in store.benchmarks:
            seller = seller_by_metric[metric]
            delta = float(seller) - float(peer)
            position = "Above" if delta > 0 else ("Below" if delta < 0 else "At")
            claims.append(
                (
                    f"{metric}_vs_peer",
                    format_metric_value(metric, seller),
                    f"{position} peer {format_metric_value(metric, peer)}",
                )
            )
        return claims

    prior = oracle_month_metrics(store, ref_year - 1, ref_month)
    for metric in ("sales", "units", "avg_price", "page_views", "conversion"):
        cur, pre = current[metric], prior[metric]
        if cur is NA or pre is NA:
            comparison = "n/a or n/a YoY"
        else:
            delta = float(cur) - float(pre)
            pct = delta / float(pre) if pre else NA
            comparison = (
                f"{format_metric_value(metric, delta)} or "
                f"{format_cell(pct, ColumnType.PERCENT)} YoY"
            )
        claims.append((metric, format_metric_value(metric, cur), comparison))

    months = []
    y, m = ref_year, ref_month
    for _ in range(12):
        months.append((y, m))
        m -= 1
        if m == 0:
            y, m = y - 1, 12
    months.reverse()
    series = {"sales": [], "units": [], "page_views": []}
    for y, m in months:
        metrics = oracle_month_metrics(store, y, m)
        for key in series:
            series[key].append(float(metrics[key]))
    for metric in ("sales", "units", "page_views"):
        slope = _slope(series[metric])
        mean = sum(series[metric]) / len(series[metric])
        if abs(slope) < 0.01 * abs(mean):
            direction = "Flat"
        else:
            direction = "Up" if slope > 0 else "Down"
        claims.append((f"{metric}_trend", direction, f"slope {slope:,.2f} per month"))

    totals = series["sales"]
    overall = sum(totals) / len(totals)
    by_month: dict[int, list[float]] = {}
    for (y, m), value in zip(months, totals):
        by_month.setdefault(m, []).append(value)
    for m in sorted(by_month):
        index = (sum(by_month[m]) / len(by_month[m])) / overall if overall else NA
        claims.append(
            (f"seasonal_index_m{m:02d}", format_cell(index, ColumnType.DECIMAL), "")
        )
    return claims


def oracle_time_bucket(table: DataTable, granularity: str, date_column: str, columns=None) -> DataTable:
    value_cols = [c for c in _numeric_cols(table, columns) if c.name != date_column]
    d_idx = table.column_index(date_column)
    groups: dict = {}
    for row in table.rows:
        d = row[d_idx]
        if granularity == "daily":
            bucket = d
        elif granularity == "weekly":
            bucket = d - timedelta(days=d.weekday())
        else:
            bucket = d.replace(day=1)
        groups.setdefault(bucket, []).append(row)
    out_rows = []
    for bucket in sorted(groups):
        cells = [bucket]
        for c in value_cols:
            i = table.column_index(c.name)
            op = "avg" if c.ctype == ColumnType.PERCENT else "sum"
            cells.append(_agg([r[i] for r in groups[bucket]], c.ctype, op))
        out_rows.append(tuple(cells))
    out_cols = [("bucket", ColumnType.DATE)] + [(c.name, c.ctype) for c in value_cols]
    return DataTable.build(out_cols, out_rows)
