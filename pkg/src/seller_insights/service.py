"""HTTP chat service and engine assembly.

A config file wires every artifact together: store CSVs, registry catalog,
trained model files, guardrail rules, resolution paths, provider choice,
and budgets. The service itself is stateless across requests apart from
per-session rolling buffers inside the engine.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from datetime import date
from pathlib import Path
from typing import Optional

from fastapi import FastAPI
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .core import Budgets, EngineConfig, SellerContext, validate_query
from .embedding import HashingEmbedder
from .errors import EmptyQuery, EngineError, QueryTooLong
from .guardrail import Guardrail, load_guardrail
from .llm import HttpProvider, ScriptedProvider
from .ood import load_ood_model
from .orchestrator import Engine
from .registry import load_registry
from .router import load_router_model
from .store import load_store_csv
from .workers import load_resolution_paths


@dataclass(frozen=True)
class ServiceConfig:
    facts_csv: str
    benchmarks_csv: str
    ood_model: str
    router_model: str
    llm_provider: str  # scripted | http
    llm_path_or_url: str
    registry: Optional[str] = None
    guardrail_rules: Optional[str] = None
    resolution_paths: Optional[str] = None
    embedder_dimension: int = 256
    budgets: Budgets = Budgets()
    serial_mode: bool = False
    seller_id: str = "seller-1"
    today: Optional[date] = None  # fixed reporting date; None means wall-clock today


def load_config(path: str) -> ServiceConfig:
    cfg_path = Path(path)
    doc = json.loads(cfg_path.read_text(encoding="utf-8"))

    def resolve(p: Optional[str]) -> Optional[str]:
        if p is None:
            return None
        candidate = Path(p)
        return str(candidate if candidate.is_absolute() else cfg_path.parent / candidate)

    budgets_doc = doc.get("budgets", {})
    llm_doc = doc["llm"]
    provider = llm_doc["provider"]
    if provider == "scripted":
        path_or_url = resolve(llm_doc["path"])
    elif provider == "http":
        path_or_url = llm_doc["url"]
    else:
        raise ValueError(f"unknown llm provider {provider!r}")
    seller_doc = doc.get("seller", {})
    return ServiceConfig(
        facts_csv=resolve(doc["store"]["facts"]),
        benchmarks_csv=resolve(doc["store"]["benchmarks"]),
        ood_model=resolve(doc["ood_model"]),
        router_model=resolve(doc["router_model"]),
        llm_provider=provider,
        llm_path_or_url=path_or_url,
        registry=resolve(doc.get("registry")),
        guardrail_rules=resolve(doc.get("guardrail_rules")),
        resolution_paths=resolve(doc.get("resolution_paths")),
        embedder_dimension=doc.get("embedder", {}).get("dimension", 256),
        budgets=Budgets(
            total_timeout_ms=budgets_doc.get("total_timeout_ms", 30000),
            llm_timeout_ms=budgets_doc.get("llm_timeout_ms", 20000),
        ),
        serial_mode=doc.get("serial_mode", False),
        seller_id=seller_doc.get("seller_id", "seller-1"),
        today=date.fromisoformat(seller_doc["today"]) if seller_doc.get("today") else None,
    )


def build_engine(cfg: ServiceConfig) -> tuple[Engine, SellerContext]:
    store = load_store_csv(cfg.facts_csv, cfg.benchmarks_csv)
    registry = load_registry(store, cfg.registry)
    embedder = HashingEmbedder(dimension=cfg.embedder_dimension)
    ood_model = load_ood_model(cfg.ood_model)
    router_model = load_router_model(cfg.router_model)
    if cfg.llm_provider == "scripted":
        llm = ScriptedProvider.from_file(cfg.llm_path_or_url)
    else:
        llm = HttpProvider(cfg.llm_path_or_url)
    guardrail = load_guardrail(cfg.guardrail_rules) if cfg.guardrail_rules else Guardrail()
    paths = load_resolution_paths(cfg.resolution_paths)
    engine = Engine(
        embedder=embedder,
        ood_model=ood_model,
        router_model=router_model,
        llm=llm,
        registry=registry,
        resolution_paths=paths,
        guardrail=guardrail,
        config=EngineConfig(budgets=cfg.budgets, serial_mode=cfg.serial_mode),
    )
    ctx = SellerContext(seller_id=cfg.seller_id, today=cfg.today or date.today())
    return engine, ctx


class ChatApiRequest(BaseModel):
    query: str
    session_id: str = ""
    today: Optional[str] = None
    include_trace: bool = True


def create_app(engine: Optional[Engine] = None, ctx: Optional[SellerContext] = None) -> FastAPI:
    """App factory; an engine can be attached later via app.state."""
    app = FastAPI(title="seller-insights", docs_url=None, redoc_url=None)
    app.state.engine = engine
    app.state.ctx = ctx

    @app.get("/v1/health")
    def health():
        return {"status": "ok", "models_loaded": app.state.engine is not None}

    @app.post("/v1/chat")
    def chat(body: ChatApiRequest):
        engine: Optional[Engine] = app.state.engine
        if engine is None:
            return JSONResponse(
                status_code=503,
                content={"code": "NOT_READY", "message": "models are not loaded"},
            )
        try:
            query = validate_query(body.query, session_id=body.session_id)
        except EmptyQuery as exc:
            return JSONResponse(status_code=400, content=exc.to_dict())
        except QueryTooLong as exc:
            return JSONResponse(status_code=413, content=exc.to_dict())
        ctx: SellerContext = app.state.ctx
        if body.today:
            ctx = SellerContext(
                seller_id=ctx.seller_id, today=date.fromisoformat(body.today), locale=ctx.locale
            )
        try:
            response = engine.handle(query, ctx)
        except EngineError as exc:
            status = 504 if exc.code == "TOTAL_TIMEOUT" else 500
            return JSONResponse(status_code=status, content=exc.to_dict())
        doc = response.to_dict()
        if not body.include_trace:
            doc.pop("trace")
        if response.trace.error_code == "TOTAL_TIMEOUT":
            # The apologetic answer and trace ride along on the 504.
            return JSONResponse(
                status_code=504, content={"code": "TOTAL_TIMEOUT", **doc}
            )
        return doc

    return app
