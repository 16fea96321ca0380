"""Build the committed end-to-end benchmark fixture set.

Writes into fixtures/: the seller store CSVs, trained gate and router
models, the scripted completion rules, the 20-item benchmark file, an
engine config, and a manifest describing each item's plan so tests can
recompute ground truth independently. Everything is deterministic; the
script verifies routing, gating, guardrail cleanliness, and a perfect
benchmark run before writing.
"""

from __future__ import annotations

import json
import sys
from datetime import date
from pathlib import Path

import numpy as np

REPO = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(REPO / "src"))

from seller_insights.core import (  # noqa: E402
    Branch,
    EngineConfig,
    GateVerdict,
    OodConfig,
    RouteLabel,
    RouterConfig,
    SellerContext,
)
from seller_insights.corpus import (  # noqa: E402
    LABEL_OOD,
    LABEL_PRESENTER,
    TemplateParaphraseProvider,
    generate_corpus,
    save_corpus,
    supersample,
)
from seller_insights.embedding import HashingEmbedder  # noqa: E402
from seller_insights.evalharness import (  # noqa: E402
    BenchmarkItem,
    run_benchmark,
    save_benchmark,
)
from seller_insights.guardrail import Guardrail  # noqa: E402
from seller_insights.llm import ScriptedProvider, ScriptedRule, save_scripted_rules  # noqa: E402
from seller_insights.ood import classify_ood, save_ood_model, train_ood  # noqa: E402
from seller_insights.orchestrator import Engine  # noqa: E402
from seller_insights.registry import load_registry  # noqa: E402
from seller_insights.router import route, save_router_model, train_router  # noqa: E402
from seller_insights.store import generate_store, save_store_csv  # noqa: E402
from seller_insights.tables import DataTable  # noqa: E402
from seller_insights.temporal import build_temporal_context  # noqa: E402
from seller_insights.workers import (  # noqa: E402
    DomainCategory,
    extract_insight_claims,
    extract_table_claims,
    load_resolution_paths,
    run_analyses,
)
from seller_insights.workflow import Plan, execute, parse_plan, post_process, validate_plan  # noqa: E402

FIXTURES = REPO / "fixtures"
STORE_SEED = 11
CORPUS_SEED = 7
TODAY = date(2024, 9, 15)
SELLER = "seller-1"

AUG = {"start_date": "2024-08-01", "end_date": "2024-08-31"}
AUG_PRIOR = {"start_date": "2023-08-01", "end_date": "2023-08-31"}
THIS_YEAR = {"start_date": "2024-01-01", "end_date": "2024-09-15"}
LAST_YEAR = {"start_date": "2023-01-01", "end_date": "2023-12-31"}
THIS_WEEK = {"start_date": "2024-09-09", "end_date": "2024-09-15"}

AUG_LABEL = ("August 2024", "2024-08-01", "2024-08-31")
THIS_YEAR_LABEL = ("2024 so far", "2024-01-01", "2024-09-15")
LAST_YEAR_LABEL = ("2023", "2023-01-01", "2023-12-31")
THIS_WEEK_LABEL = ("this week", "2024-09-09", "2024-09-15")


def api_step(step_id, target, payload):
    return {"id": step_id, "kind": "api_call", "target": target, "payload": payload, "inputs": []}


def fn_step(step_id, target, payload, inputs):
    return {"id": step_id, "kind": "function_call", "target": target, "payload": payload,
            "inputs": inputs}


def plan_doc(steps, final):
    return {"steps": steps, "final": final}


# Presenter item definitions: question, plan, title, period label.
PRESENTER_ITEMS = [
    ("p01", "what were my sales for the top 10 products last month",
     plan_doc([api_step("s1", "get_sales_by_product", AUG),
               fn_step("s2", "top_k", {"by": "sales", "k": 10}, ["s1"])], "s2"),
     "top 10 products by Sales", AUG_LABEL),
    ("p02", "top 5 products by units sold last month",
     plan_doc([api_step("s1", "get_sales_by_product", AUG),
               fn_step("s2", "top_k", {"by": "units", "k": 5}, ["s1"])], "s2"),
     "top 5 products by Units Sold", AUG_LABEL),
    ("p03", "show me page views for all my products last month",
     plan_doc([api_step("s1", "get_traffic_by_product", AUG)], "s1"),
     "Page Views by product", AUG_LABEL),
    ("p04", "top 3 products by page views this year",
     plan_doc([api_step("s1", "get_traffic_by_product", THIS_YEAR),
               fn_step("s2", "top_k", {"by": "page_views", "k": 3}, ["s1"])], "s2"),
     "top 3 products by Page Views", THIS_YEAR_LABEL),
    ("p05", "what were my monthly sales this year",
     plan_doc([api_step("s1", "get_sales_monthly", THIS_YEAR)], "s1"),
     "monthly Sales", THIS_YEAR_LABEL),
    ("p06", "list my monthly page views last year",
     plan_doc([api_step("s1", "get_traffic_monthly", LAST_YEAR)], "s1"),
     "monthly Page Views", LAST_YEAR_LABEL),
    ("p07", "what was my conversion rate by product last month",
     plan_doc([api_step("s1", "get_conversion_by_product", AUG)], "s1"),
     "Conversion Rate by product", AUG_LABEL),
    ("p08", "show me monthly conversion rate this year",
     plan_doc([api_step("s1", "get_conversion_monthly", THIS_YEAR)], "s1"),
     "monthly Conversion Rate", THIS_YEAR_LABEL),
    ("p09", "what were my total sales last month",
     plan_doc([api_step("s1", "get_sales_by_product", AUG),
               fn_step("s2", "aggregate", {"op": "sum", "columns": ["sales"]}, ["s1"])], "s2"),
     "total Sales", AUG_LABEL),
    ("p10", "how did my total sales change last month compared to a year earlier",
     plan_doc([api_step("s1", "get_sales_by_product", AUG),
               fn_step("s2", "aggregate", {"op": "sum", "columns": ["sales"]}, ["s1"]),
               api_step("s3", "get_sales_by_product", AUG_PRIOR),
               fn_step("s4", "aggregate", {"op": "sum", "columns": ["sales"]}, ["s3"]),
               fn_step("s5", "yoy_delta", {"column": "sales"}, ["s2", "s4"])], "s5"),
     "Sales change versus a year earlier", AUG_LABEL),
    ("p11", "which products had sales above $50,000 last month",
     plan_doc([api_step("s1", "get_sales_by_product", AUG),
               fn_step("s2", "filter", {"column": "sales", "op": "gt", "value": 5000000},
                       ["s1"])], "s2"),
     "products with Sales above $50,000.00", AUG_LABEL),
    ("p12", "top 10 products by sales this week",
     plan_doc([api_step("s1", "get_sales_by_product", THIS_WEEK),
               fn_step("s2", "top_k", {"by": "sales", "k": 10}, ["s1"])], "s2"),
     "top 10 products by Sales", THIS_WEEK_LABEL),
    ("p13", "what were my benchmarks for sales",
     plan_doc([api_step("s1", "get_benchmarks", {"metric": "sales"})], "s1"),
     "peer benchmarks for Sales", None),
    ("p14", "show me my sales by product for August 2024",
     plan_doc([api_step("s1", "get_sales_by_product", AUG)], "s1"),
     "Sales by product", AUG_LABEL),
]

INSIGHT_ITEMS = [
    ("i01", "how does my business perform", "performance"),
    ("i02", "summarize my business performance last month", "performance"),
    ("i03", "how is my business doing with respect to my benchmarks", "benchmarking"),
    ("i04", "how am I doing compared to my benchmarks", "benchmarking"),
]

OOD_ITEMS = [
    ("o01", "what's the weather in Tokyo"),
    ("o02", "write me a poem about the moon"),
]


def presenter_answer(title: str, period, table: DataTable) -> str:
    """Canonical presenter copy: period with explicit dates, enumerated rows."""
    if period:
        name, start, end = period
        lead = f"Your {title} for {name} ({start} ~ {end}) were: "
    else:
        lead = f"Your {title} is: "
    if table.is_empty:
        return f"No data was found for {title}."
    parts = []
    for i, row in enumerate(table.rows, start=1):
        if len(row) == 1:
            parts.append(f"{i}. {row[0]}")
        else:
            parts.append(f"{i}. {row[0]}: " + ", ".join(str(c) for c in row[1:]))
    return lead + ", ".join(parts) + "."


def insight_answer(category: str, named_tables) -> str:
    claims = extract_insight_claims(named_tables)
    by_metric = {m: (v, c) for m, v, c in claims}
    if category == "performance":
        sales, sales_cmp = by_metric["sales"]
        units, units_cmp = by_metric["units"]
        price, price_cmp = by_metric["avg_price"]
        views, views_cmp = by_metric["page_views"]
        conv, conv_cmp = by_metric["conversion"]
        trend = by_metric.get("sales_trend", ("Flat", ""))[0]
        return (
            f"In August 2024, your sales were {sales} ({sales_cmp}). "
            f"You sold {units} units ({units_cmp}). "
            f"Average selling price came in at {price} ({price_cmp}). "
            f"Traffic was {views} page views ({views_cmp}). "
            f"Conversion rate was {conv} ({conv_cmp}). "
            f"Overall business insights: the twelve-month sales trend is {trend}; "
            "focus inventory and pricing on the products driving the change."
        )
    sales, sales_cmp = by_metric["sales_vs_peer"]
    traffic, traffic_cmp = by_metric["traffic_vs_peer"]
    conv, conv_cmp = by_metric["conversion_vs_peer"]
    return (
        f"Against peer benchmarks for August 2024: sales {sales} ({sales_cmp}); "
        f"traffic {traffic} ({traffic_cmp}); conversion {conv} ({conv_cmp}). "
        "Closing the largest Below gap is the fastest path to parity."
    )


def keywords_for(question: str, answer: str):
    """Question keywords that the pinned answer actually addresses."""
    stop = {"what", "were", "my", "for", "the", "show", "me", "how", "did", "was",
            "list", "which", "had", "to", "a", "by", "all", "is", "with", "respect",
            "above", "compared", "year", "earlier", "value", "doing", "am", "i", "does"}
    words = [w.strip("?$,.").lower() for w in question.split()]
    lowered = answer.lower()
    picked = tuple(
        dict.fromkeys(w for w in words if w and w not in stop and w in lowered)
    )[:4]
    assert picked, f"no keyword of {question!r} appears in the answer"
    return picked


def main() -> int:
    FIXTURES.mkdir(exist_ok=True)
    embedder = HashingEmbedder(256)
    guardrail = Guardrail()

    store = generate_store(seed=STORE_SEED, n_products=6, start=date(2023, 1, 1),
                           end=date(2024, 9, 30), seller_id=SELLER)
    save_store_csv(store, str(FIXTURES / "facts.csv"), str(FIXTURES / "benchmarks.csv"))
    registry = load_registry(store)

    corpus = generate_corpus(CORPUS_SEED)
    save_corpus(corpus, str(FIXTURES / "corpus.jsonl"))
    in_domain = np.asarray([embedder.embed(q.text) for q in corpus if q.label != LABEL_OOD])
    ood_model = train_ood(in_domain, OodConfig(seed=0), embedder.spec)
    save_ood_model(ood_model, str(FIXTURES / "ood_model.json"),
                   str(FIXTURES / "ood_model.errors.json"))
    # The router trains on the paraphrase-balanced corpus (300 per class).
    base = [q for q in corpus if q.label != LABEL_OOD]
    grown = supersample(TemplateParaphraseProvider(), base, 300)
    save_corpus(grown + [q for q in corpus if q.label == LABEL_OOD],
                str(FIXTURES / "supersampled_corpus.jsonl"))
    examples = [
        (embedder.embed(q.text),
         RouteLabel.PRESENTER if q.label == LABEL_PRESENTER else RouteLabel.INSIGHT_GENERATOR)
        for q in grown
    ]
    router_model = train_router(examples, RouterConfig(seed=0), embedder.spec)
    save_router_model(router_model, str(FIXTURES / "router_model.json"))

    tctx = build_temporal_context(TODAY)
    paths = load_resolution_paths()

    rules: list[ScriptedRule] = []
    items: list[BenchmarkItem] = []
    manifest = []

    def contains(key, response):
        rules.append(ScriptedRule("contains_substring", key, response))

    for item_id, question, doc, title, period in PRESENTER_ITEMS:
        x = embedder.embed(question)
        assert classify_ood(ood_model, x).verdict == GateVerdict.IN_DOMAIN, question
        decision = route(router_model, x)
        assert decision.label == RouteLabel.PRESENTER, f"{question} routed {decision.label}"

        plan = validate_plan(parse_plan(doc), registry)
        result = execute(plan, registry)
        processed = post_process(result.final(plan), question, embedder,
                                 registry.display_names, aliases=registry.column_aliases)
        answer = presenter_answer(title, period, processed)
        assert not guardrail.screen(answer).blocked, answer
        claims = extract_table_claims(processed)
        assert claims, f"{item_id} produced no claims"
        for _, value, _ in claims:
            assert value in answer, f"{item_id}: claim value {value!r} missing from answer"

        contains("Scope question: " + question, "in")
        contains("Plan request: " + question, "```json\n" + json.dumps(doc) + "\n```")
        contains("Present for: " + question, answer)

        required = tuple(dict.fromkeys(v for _, v, _ in claims))[:3]
        items.append(BenchmarkItem(
            id=item_id, question=question, in_scope=True,
            keywords=keywords_for(question, answer),
            required_insights=required,
            ground_truth=tuple((m, v) for m, v, _ in claims),
        ))
        manifest.append({
            "id": item_id, "question": question, "branch": "presenter",
            "plan": doc, "kept_columns": list(processed.column_names), "title": title,
            "period": list(period) if period else None,
        })

    for item_id, question, category in INSIGHT_ITEMS:
        x = embedder.embed(question)
        assert classify_ood(ood_model, x).verdict == GateVerdict.IN_DOMAIN, question
        decision = route(router_model, x)
        assert decision.label == RouteLabel.INSIGHT_GENERATOR, f"{question} routed {decision.label}"

        path = paths[DomainCategory(category)]
        named = run_analyses(path, registry, tctx)
        answer = insight_answer(category, named)
        assert not guardrail.screen(answer).blocked, answer
        claims = extract_insight_claims(named)

        contains("Scope question: " + question, "in")
        contains("Domain of: " + question, category)
        contains("Insight for: " + question, answer)

        required = tuple(v for m, v, _ in claims if m in
                         ("sales", "conversion", "sales_vs_peer", "conversion_vs_peer"))[:2]
        items.append(BenchmarkItem(
            id=item_id, question=question, in_scope=True,
            keywords=keywords_for(question, answer),
            required_insights=required,
            ground_truth=tuple((m, v) for m, v, _ in claims),
        ))
        manifest.append({
            "id": item_id, "question": question, "branch": "insight_generator",
            "category": category,
        })

    for item_id, question in OOD_ITEMS:
        x = embedder.embed(question)
        assert classify_ood(ood_model, x).verdict == GateVerdict.OUT_OF_DOMAIN, question
        items.append(BenchmarkItem(id=item_id, question=question, in_scope=False))
        manifest.append({"id": item_id, "question": question, "branch": "refused"})

    # Catch-alls so speculative loser branches always have a fixture.
    contains("Scope question:", "out: not about the seller's data")
    contains("Plan request:", "```json\n" + json.dumps(PRESENTER_ITEMS[0][2]) + "\n```")
    contains("Domain of:", "other")
    contains("Present for:", "Here is your data.")
    contains("Insight for:", "Business is stable.")

    save_scripted_rules(rules, str(FIXTURES / "scripted_llm.json"))
    save_benchmark(items, str(FIXTURES / "benchmark.jsonl"))
    (FIXTURES / "items_manifest.json").write_text(json.dumps(manifest, indent=1))

    config = {
        "store": {"facts": "facts.csv", "benchmarks": "benchmarks.csv"},
        "ood_model": "ood_model.json",
        "router_model": "router_model.json",
        "llm": {"provider": "scripted", "path": "scripted_llm.json"},
        "embedder": {"name": "hashing-v1", "dimension": 256},
        "budgets": {"total_timeout_ms": 30000, "llm_timeout_ms": 20000},
        "serial_mode": True,
        "seller": {"seller_id": SELLER, "today": TODAY.isoformat()},
    }
    (FIXTURES / "engine.json").write_text(json.dumps(config, indent=1))

    # Self-check: a full benchmark run must be perfect before freezing.
    engine = Engine(
        embedder=embedder, ood_model=ood_model, router_model=router_model,
        llm=ScriptedProvider(rules), registry=registry,
        resolution_paths=paths, guardrail=guardrail,
        config=EngineConfig(serial_mode=True),
    )
    ctx = SellerContext(seller_id=SELLER, today=TODAY)
    report = run_benchmark(engine, items, ctx)
    for result in report.results:
        if result.in_scope:
            assert result.report and result.report.question_pass, (
                f"{result.item_id}: "
                f"rel={result.report.relevance} corr={result.report.correctness} "
                f"comp={result.report.completeness}"
            )
        else:
            assert result.refused_correctly, result.item_id
    assert report.accuracy["fraction"] == 1.0
    print(f"fixtures written to {FIXTURES}: {len(items)} items, {len(rules)} scripted rules")
    print(f"question_accuracy={report.accuracy['fraction']}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
