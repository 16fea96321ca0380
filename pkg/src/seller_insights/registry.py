"""API and function registry: the planner's entire tool universe.

Retrieval APIs read the seller store; transform functions are pure table
operations. Specs (names, descriptions, parameters, output columns) live in
a JSON config file so the catalog can grow; each spec must bind to a
built-in executor of the same name. The rendered catalog text is what the
planner prompts reason over, so descriptions are load-bearing.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from datetime import date, timedelta
from importlib import resources
from typing import Any, Callable, Optional, Sequence

from .errors import (
    ArgsInvalid,
    ArithmeticDomain,
    PayloadInvalid,
    UnknownApi,
    UnknownFunction,
)
from .store import SellerStore
from .tables import NA, Column, ColumnType, DataTable

GRANULARITIES = ("daily", "weekly", "monthly")

# Stable display names applied by response post-processing.
DISPLAY_NAMES = {
    "product_id": "Product",
    "sales": "Sales",
    "units": "Units Sold",
    "page_views": "Page Views",
    "conversion": "Conversion Rate",
    "month": "Month",
    "bucket": "Period",
    "metric": "Metric",
    "peer_value": "Peer Value",
    "current": "Current",
    "prior": "Prior",
    "delta": "Change",
    "pct": "Change %",
}

# Query-side synonyms for semantic column matching.
COLUMN_ALIASES = {
    "page_views": ("traffic", "page views", "views"),
    "sales": ("revenue",),
    "units": ("units sold", "quantity", "items sold"),
    "conversion": ("conversion rate",),
    "peer_value": ("benchmark", "peer"),
    "current": ("total", "now"),
    "prior": ("year earlier", "previous", "before"),
    "delta": ("change", "difference"),
    "pct": ("percent", "change"),
}


@dataclass(frozen=True)
class ParamSpec:
    name: str
    ptype: str  # date | text | integer | text_list | any
    required: bool = True
    allowed_values: Optional[tuple[str, ...]] = None


@dataclass(frozen=True)
class ApiSpec:
    name: str
    description: str
    params: tuple[ParamSpec, ...]
    output_columns: tuple[Column, ...]
    granularity: str  # daily | weekly | monthly

    def __post_init__(self):
        if not self.description:
            raise ValueError(f"api {self.name!r} needs a description")
        names = [p.name for p in self.params]
        if len(set(names)) != len(names):
            raise ValueError(f"api {self.name!r} has duplicate params")
        if self.granularity not in GRANULARITIES:
            raise ValueError(f"api {self.name!r} has bad granularity {self.granularity!r}")


@dataclass(frozen=True)
class FunctionSpec:
    name: str
    description: str
    params: tuple[ParamSpec, ...]
    pure: bool = True

    def __post_init__(self):
        if not self.description:
            raise ValueError(f"function {self.name!r} needs a description")


def _parse_date(value: Any) -> Optional[date]:
    if isinstance(value, date):
        return value
    if isinstance(value, str):
        try:
            return date.fromisoformat(value)
        except ValueError:
            return None
    return None


def _check_param(p: ParamSpec, value: Any) -> Optional[str]:
    if p.ptype == "date":
        if _parse_date(value) is None:
            return f"param {p.name!r} must be an ISO date, got {value!r}"
    elif p.ptype == "text":
        if not isinstance(value, str):
            return f"param {p.name!r} must be a string, got {value!r}"
    elif p.ptype == "integer":
        if not isinstance(value, int) or isinstance(value, bool):
            return f"param {p.name!r} must be an integer, got {value!r}"
    elif p.ptype == "text_list":
        if not isinstance(value, (list, tuple)) or not all(isinstance(v, str) for v in value):
            return f"param {p.name!r} must be a list of strings, got {value!r}"
    elif p.ptype == "any":
        if isinstance(value, (dict, list, tuple)):
            return f"param {p.name!r} must be a scalar, got {value!r}"
    else:
        return f"param {p.name!r} has unknown type {p.ptype!r}"
    if p.allowed_values is not None and isinstance(value, str) and value not in p.allowed_values:
        return (
            f"param {p.name!r} must be one of {list(p.allowed_values)}, got {value!r}"
        )
    return None


def validate_payload(params: Sequence[ParamSpec], payload: dict) -> list[str]:
    """All violations, not just the first; the plan validator reuses this."""
    violations: list[str] = []
    by_name = {p.name: p for p in params}
    for key in payload:
        if key not in by_name:
            violations.append(f"unknown param {key!r}")
    for p in params:
        if p.name not in payload:
            if p.required:
                violations.append(f"missing required param {p.name!r}")
            continue
        problem = _check_param(p, payload[p.name])
        if problem:
            violations.append(problem)
    start = _parse_date(payload.get("start_date"))
    end = _parse_date(payload.get("end_date"))
    if start and end and start > end:
        violations.append(f"start_date {start} is after end_date {end}")
    return violations


# --- API executors -------------------------------------------------------

def _facts_in_range(store: SellerStore, payload: dict):
    start = _parse_date(payload["start_date"])
    end = _parse_date(payload["end_date"])
    return [f for f in store.facts if start <= f.day <= end]


def _by_product(store, payload, value_fn, out_cols):
    totals: dict[str, list] = {}
    for f in _facts_in_range(store, payload):
        totals.setdefault(f.product_id, [0, 0, 0])
        totals[f.product_id][0] += f.sales_cents
        totals[f.product_id][1] += f.units
        totals[f.product_id][2] += f.page_views
    rows = [
        (pid, *value_fn(sales, units, views))
        for pid, (sales, units, views) in sorted(totals.items())
    ]
    return DataTable.build(out_cols, rows)


def _monthly(store, payload, value_fn, out_cols):
    totals: dict[date, list] = {}
    for f in _facts_in_range(store, payload):
        key = f.day.replace(day=1)
        totals.setdefault(key, [0, 0, 0])
        totals[key][0] += f.sales_cents
        totals[key][1] += f.units
        totals[key][2] += f.page_views
    rows = [
        (month, *value_fn(sales, units, views))
        for month, (sales, units, views) in sorted(totals.items())
    ]
    return DataTable.build(out_cols, rows)


def _conversion_of(sales, units, views):
    return (units / views if views > 0 else NA,)


def _api_sales_by_product(store, payload):
    return _by_product(
        store,
        payload,
        lambda s, u, v: (s, u),
        [("product_id", ColumnType.TEXT), ("sales", ColumnType.CURRENCY), ("units", ColumnType.INTEGER)],
    )


def _api_sales_monthly(store, payload):
    return _monthly(
        store,
        payload,
        lambda s, u, v: (s, u),
        [("month", ColumnType.DATE), ("sales", ColumnType.CURRENCY), ("units", ColumnType.INTEGER)],
    )


def _api_traffic_by_product(store, payload):
    return _by_product(
        store,
        payload,
        lambda s, u, v: (v,),
        [("product_id", ColumnType.TEXT), ("page_views", ColumnType.INTEGER)],
    )


def _api_traffic_monthly(store, payload):
    return _monthly(
        store,
        payload,
        lambda s, u, v: (v,),
        [("month", ColumnType.DATE), ("page_views", ColumnType.INTEGER)],
    )


def _api_conversion_by_product(store, payload):
    return _by_product(
        store,
        payload,
        lambda s, u, v: _conversion_of(s, u, v),
        [("product_id", ColumnType.TEXT), ("conversion", ColumnType.PERCENT)],
    )


def _api_conversion_monthly(store, payload):
    return _monthly(
        store,
        payload,
        lambda s, u, v: _conversion_of(s, u, v),
        [("month", ColumnType.DATE), ("conversion", ColumnType.PERCENT)],
    )


def _api_benchmarks(store, payload):
    metric = payload["metric"]
    rows = [(m, float(v)) for m, v in store.benchmarks if m == metric]
    return DataTable.build(
        [("metric", ColumnType.TEXT), ("peer_value", ColumnType.DECIMAL)], rows
    )


API_EXECUTORS: dict[str, Callable[[SellerStore, dict], DataTable]] = {
    "get_sales_by_product": _api_sales_by_product,
    "get_sales_monthly": _api_sales_monthly,
    "get_traffic_by_product": _api_traffic_by_product,
    "get_traffic_monthly": _api_traffic_monthly,
    "get_conversion_by_product": _api_conversion_by_product,
    "get_conversion_monthly": _api_conversion_monthly,
    "get_benchmarks": _api_benchmarks,
}


# --- function executors --------------------------------------------------

NUMERIC = (ColumnType.INTEGER, ColumnType.DECIMAL, ColumnType.PERCENT, ColumnType.CURRENCY)


def _numeric_columns(table: DataTable, names: Optional[Sequence[str]]) -> list[Column]:
    if names is None:
        return [c for c in table.columns if c.ctype in NUMERIC]
    cols = []
    for name in names:
        col = table.column(name)
        if col.ctype not in NUMERIC:
            raise ArgsInvalid(f"column {name!r} is not numeric")
        cols.append(col)
    return cols


def _agg_output_type(ctype: ColumnType, op: str) -> ColumnType:
    if op == "sum":
        return ctype
    # avg: integers become decimals; money stays money (rounded cents).
    if ctype == ColumnType.INTEGER:
        return ColumnType.DECIMAL
    return ctype


def _aggregate_values(values: Sequence, ctype: ColumnType, op: str):
    concrete = [v for v in values if v is not NA]
    if op == "sum":
        total = sum(concrete)
        return int(total) if ctype in (ColumnType.INTEGER, ColumnType.CURRENCY) else float(total)
    if not concrete:
        raise ArithmeticDomain("avg over zero values")
    mean = sum(concrete) / len(concrete)
    if ctype == ColumnType.CURRENCY:
        return round(mean)
    return float(mean)


def _fn_aggregate(args: dict, inputs: list[DataTable]) -> DataTable:
    table = inputs[0]
    op = args["op"]
    cols = _numeric_columns(table, args.get("columns"))
    if not cols:
        raise ArgsInvalid("aggregate needs at least one numeric column")
    if table.is_empty and op == "avg":
        raise ArithmeticDomain("avg over an empty table")
    out_cols = [(c.name, _agg_output_type(c.ctype, op)) for c in cols]
    row = tuple(
        _aggregate_values(table.column_values(c.name), c.ctype, op) for c in cols
    )
    return DataTable.build(out_cols, [row])


def _fn_group_by(args: dict, inputs: list[DataTable]) -> DataTable:
    table = inputs[0]
    keys = list(args["keys"])
    if not keys:
        raise ArgsInvalid("group_by needs at least one key column")
    op = args["op"]
    key_cols = [table.column(k) for k in keys]
    value_cols = _numeric_columns(
        table, args.get("columns")
    )
    value_cols = [c for c in value_cols if c.name not in keys]
    if not value_cols:
        raise ArgsInvalid("group_by needs at least one numeric value column")
    key_idx = [table.column_index(k) for k in keys]
    val_idx = [table.column_index(c.name) for c in value_cols]
    groups: dict[tuple, list[list]] = {}
    for row in table.rows:
        k = tuple(row[i] for i in key_idx)
        groups.setdefault(k, [[] for _ in val_idx])
        for slot, i in enumerate(val_idx):
            groups[k][slot].append(row[i])
    out_cols = [(c.name, c.ctype) for c in key_cols] + [
        (c.name, _agg_output_type(c.ctype, op)) for c in value_cols
    ]
    rows = []
    for k in sorted(groups):
        aggs = tuple(
            _aggregate_values(groups[k][slot], c.ctype, op)
            for slot, c in enumerate(value_cols)
        )
        rows.append(k + aggs)
    return DataTable.build(out_cols, rows)


def _sort_key_cell(value):
    # NA sorts below every concrete value in a descending sort.
    return (0, 0) if value is NA else (1, value)


def _fn_top_k(args: dict, inputs: list[DataTable]) -> DataTable:
    table = inputs[0]
    by = args["by"]
    k = args["k"]
    if k < 1:
        raise ArgsInvalid(f"k must be >= 1, got {k}")
    col = table.column(by)
    if col.ctype not in NUMERIC:
        raise ArgsInvalid(f"top_k column {by!r} is not numeric")
    by_idx = table.column_index(by)
    other_idx = [i for i in range(len(table.columns)) if i != by_idx]
    # Stable two-pass sort: ascending on the remaining columns first, then
    # descending on the target value, so ties break ascending left-to-right.
    ordered = sorted(
        table.rows, key=lambda r: tuple(_text_sort_cell(r[i]) for i in other_idx)
    )
    ordered.sort(key=lambda r: _sort_key_cell(r[by_idx]), reverse=True)
    return DataTable(columns=table.columns, rows=tuple(ordered[:k]))


def _text_sort_cell(value):
    if value is NA:
        return (0, "")
    if isinstance(value, str):
        return (1, value)
    if isinstance(value, date):
        return (1, value.isoformat())
    return (2, value)


_FILTER_OPS = {
    "eq": lambda a, b: a == b,
    "ne": lambda a, b: a != b,
    "lt": lambda a, b: a < b,
    "le": lambda a, b: a <= b,
    "gt": lambda a, b: a > b,
    "ge": lambda a, b: a >= b,
}


def _fn_filter(args: dict, inputs: list[DataTable]) -> DataTable:
    table = inputs[0]
    col = table.column(args["column"])
    op = _FILTER_OPS[args["op"]]
    value = args["value"]
    if col.ctype == ColumnType.DATE:
        parsed = _parse_date(value)
        if parsed is None:
            raise ArgsInvalid(f"filter value {value!r} is not a date")
        value = parsed
    idx = table.column_index(col.name)
    rows = []
    for row in table.rows:
        cell = row[idx]
        if cell is NA:
            continue
        try:
            keep = op(cell, value)
        except TypeError as exc:
            raise ArgsInvalid(
                f"cannot compare column {col.name!r} with {value!r}"
            ) from exc
        if keep:
            rows.append(row)
    return DataTable(columns=table.columns, rows=tuple(rows))


def yoy_delta_types(ctype: ColumnType) -> tuple[ColumnType, ColumnType]:
    """(delta type, pct type) for a compared column type."""
    delta = ColumnType.DECIMAL if ctype == ColumnType.PERCENT else ctype
    return delta, ColumnType.PERCENT


def _fn_yoy_delta(args: dict, inputs: list[DataTable]) -> DataTable:
    current_t, prior_t = inputs
    for name, t in (("current", current_t), ("prior", prior_t)):
        if len(t.rows) != 1:
            raise ArgsInvalid(
                f"yoy_delta {name} input must have exactly one row, got {len(t.rows)}"
            )
    column = args.get("column")
    if column is None:
        numeric = [c.name for c in current_t.columns if c.ctype in NUMERIC]
        if len(numeric) != 1:
            raise ArgsInvalid(
                "yoy_delta needs an explicit column when the input has "
                f"{len(numeric)} numeric columns"
            )
        column = numeric[0]
    cur_col = current_t.column(column)
    prior_col = prior_t.column(column)
    if prior_col.ctype != cur_col.ctype:
        raise ArgsInvalid(
            f"column {column!r} has type {cur_col.ctype.value} now but "
            f"{prior_col.ctype.value} in the prior table"
        )
    cur = current_t.rows[0][current_t.column_index(column)]
    prior = prior_t.rows[0][prior_t.column_index(column)]
    if cur is NA or prior is NA:
        raise ArithmeticDomain(f"column {column!r} has no value to compare")
    delta = cur - prior
    if cur_col.ctype in (ColumnType.INTEGER, ColumnType.CURRENCY):
        delta = int(delta)
    pct = (cur - prior) / prior if prior != 0 else NA
    delta_type, pct_type = yoy_delta_types(cur_col.ctype)
    return DataTable.build(
        [
            ("current", cur_col.ctype),
            ("prior", cur_col.ctype),
            ("delta", delta_type),
            ("pct", pct_type),
        ],
        [(cur, prior, delta, pct)],
    )


def week_start(d: date) -> date:
    return d - timedelta(days=d.weekday())


def _bucket_of(d: date, granularity: str) -> date:
    if granularity == "daily":
        return d
    if granularity == "weekly":
        return week_start(d)
    return d.replace(day=1)


def _fn_time_bucket(args: dict, inputs: list[DataTable]) -> DataTable:
    table = inputs[0]
    granularity = args["granularity"]
    date_col = table.column(args["date_column"])
    if date_col.ctype != ColumnType.DATE:
        raise ArgsInvalid(f"column {date_col.name!r} is not a date column")
    value_cols = [
        c
        for c in _numeric_columns(table, args.get("columns"))
        if c.name != date_col.name
    ]
    if not value_cols:
        raise ArgsInvalid("time_bucket needs at least one numeric column")
    d_idx = table.column_index(date_col.name)
    v_idx = [table.column_index(c.name) for c in value_cols]
    groups: dict[date, list[list]] = {}
    for row in table.rows:
        bucket = _bucket_of(row[d_idx], granularity)
        groups.setdefault(bucket, [[] for _ in v_idx])
        for slot, i in enumerate(v_idx):
            groups[bucket][slot].append(row[i])
    out_cols = [("bucket", ColumnType.DATE)] + [
        # Sums for counts and money; unweighted mean for rate columns.
        (c.name, c.ctype if c.ctype != ColumnType.PERCENT else ColumnType.PERCENT)
        for c in value_cols
    ]
    rows = []
    for bucket in sorted(groups):
        values = []
        for slot, c in enumerate(value_cols):
            op = "avg" if c.ctype == ColumnType.PERCENT else "sum"
            values.append(_aggregate_values(groups[bucket][slot], c.ctype, op))
        rows.append((bucket, *values))
    return DataTable.build(out_cols, rows)


FUNCTION_EXECUTORS: dict[str, Callable[[dict, list[DataTable]], DataTable]] = {
    "aggregate": _fn_aggregate,
    "group_by": _fn_group_by,
    "top_k": _fn_top_k,
    "filter": _fn_filter,
    "yoy_delta": _fn_yoy_delta,
    "time_bucket": _fn_time_bucket,
}

FUNCTION_INPUT_ARITY = {
    "aggregate": 1,
    "group_by": 1,
    "top_k": 1,
    "filter": 1,
    "yoy_delta": 2,
    "time_bucket": 1,
}


# --- registry -------------------------------------------------------------

@dataclass(frozen=True)
class Registry:
    store: SellerStore
    apis: dict[str, ApiSpec] = field(default_factory=dict)
    functions: dict[str, FunctionSpec] = field(default_factory=dict)
    display_names: dict[str, str] = field(default_factory=lambda: dict(DISPLAY_NAMES))
    column_aliases: dict[str, tuple] = field(default_factory=lambda: dict(COLUMN_ALIASES))

    def __post_init__(self):
        overlap = set(self.apis) & set(self.functions)
        if overlap:
            raise ValueError(f"names registered as both api and function: {sorted(overlap)}")

    def api_spec(self, name: str) -> ApiSpec:
        try:
            return self.apis[name]
        except KeyError:
            raise UnknownApi(f"no api named {name!r}") from None

    def function_spec(self, name: str) -> FunctionSpec:
        try:
            return self.functions[name]
        except KeyError:
            raise UnknownFunction(f"no function named {name!r}") from None

    def invoke_api(self, name: str, payload: dict) -> DataTable:
        spec = self.api_spec(name)
        violations = validate_payload(spec.params, payload)
        if violations:
            raise PayloadInvalid(
                f"payload for {name!r} invalid: " + "; ".join(violations),
                violations=violations,
            )
        return API_EXECUTORS[name](self.store, payload)

    def invoke_function(self, name: str, args: dict, inputs: list[DataTable]) -> DataTable:
        spec = self.function_spec(name)
        violations = validate_payload(spec.params, args)
        if violations:
            raise ArgsInvalid(
                f"args for {name!r} invalid: " + "; ".join(violations),
                violations=violations,
            )
        arity = FUNCTION_INPUT_ARITY[name]
        if len(inputs) != arity:
            raise ArgsInvalid(
                f"function {name!r} takes {arity} input table(s), got {len(inputs)}"
            )
        try:
            return FUNCTION_EXECUTORS[name](args, inputs)
        except KeyError as exc:
            raise ArgsInvalid(f"bad argument for {name!r}: {exc}") from exc


def catalog_text(registry: Registry) -> str:
    """Deterministic, stable-ordered tool catalog for planner prompts."""
    if not registry.apis and not registry.functions:
        return "No tools are registered."
    lines: list[str] = []
    for name in sorted(registry.apis):
        spec = registry.apis[name]
        lines.append(f"API {spec.name} ({spec.granularity}): {spec.description}")
        for p in spec.params:
            lines.append(_param_line(p))
        cols = ", ".join(f"{c.name}:{c.ctype.value}" for c in spec.output_columns)
        lines.append(f"  returns: {cols}")
    for name in sorted(registry.functions):
        spec = registry.functions[name]
        lines.append(f"FUNCTION {spec.name}: {spec.description}")
        for p in spec.params:
            lines.append(_param_line(p))
    return "\n".join(lines)


def _param_line(p: ParamSpec) -> str:
    required = "required" if p.required else "optional"
    allowed = f" one of {list(p.allowed_values)}" if p.allowed_values else ""
    return f"  param {p.name} ({p.ptype}, {required}){allowed}"


def _spec_from_config(entry: dict):
    params = tuple(
        ParamSpec(
            name=p["name"],
            ptype=p["type"],
            required=p.get("required", True),
            allowed_values=tuple(p["allowed_values"]) if p.get("allowed_values") else None,
        )
        for p in entry.get("params", [])
    )
    if entry["kind"] == "api":
        return ApiSpec(
            name=entry["name"],
            description=entry["description"],
            params=params,
            output_columns=tuple(
                Column(c["name"], ColumnType(c["type"])) for c in entry["output_columns"]
            ),
            granularity=entry["granularity"],
        )
    if entry["kind"] == "function":
        return FunctionSpec(name=entry["name"], description=entry["description"], params=params)
    raise ValueError(f"unknown registry entry kind {entry['kind']!r}")


def load_registry(store: SellerStore, path: Optional[str] = None) -> Registry:
    """Build a registry from a config file (default: the packaged catalog).

    Every configured name must have a built-in executor; the config controls
    which tools are exposed and how they are described to the planner.
    """
    if path is None:
        text = resources.files("seller_insights.configs").joinpath("registry.json").read_text(
            encoding="utf-8"
        )
    else:
        with open(path, encoding="utf-8") as f:
            text = f.read()
    apis: dict[str, ApiSpec] = {}
    functions: dict[str, FunctionSpec] = {}
    for entry in json.loads(text):
        spec = _spec_from_config(entry)
        if isinstance(spec, ApiSpec):
            if spec.name not in API_EXECUTORS:
                raise ValueError(f"api {spec.name!r} has no executor")
            apis[spec.name] = spec
        else:
            if spec.name not in FUNCTION_EXECUTORS:
                raise ValueError(f"function {spec.name!r} has no executor")
            functions[spec.name] = spec
    return Registry(store=store, apis=apis, functions=functions)
