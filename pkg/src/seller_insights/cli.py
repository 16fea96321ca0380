"""Command-line entry points: data generation, training, serving, evaluation.

Exit codes: 0 success, 1 user error (bad arguments, invalid inputs,
missing files), 2 internal error.
"""

from __future__ import annotations

import argparse
import json
import sys
from datetime import date
from pathlib import Path

from . import corpus as corpus_mod
from .core import OodConfig, RouterConfig, RouteLabel
from .embedding import HashingEmbedder
from .errors import EngineError
from .evalharness import load_annotations, load_benchmark, render_report, run_benchmark
from .ood import save_ood_model, train_ood
from .router import save_router_model, train_router
from .store import generate_store, save_store_csv


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on bad usage; our contract reserves 2 for internal errors.
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        sys.exit(1)


def _build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="seller-insights")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", parents=[], help="generate a synthetic seller store")
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--products", type=int, default=12)
    p.add_argument("--from", dest="start", required=True, help="start date (yyyy-mm-dd)")
    p.add_argument("--to", dest="end", required=True, help="end date (yyyy-mm-dd)")
    p.add_argument("--out-dir", default=".", help="directory for facts.csv and benchmarks.csv")

    p = sub.add_parser("gen-corpus", help="generate the labeled question corpus")
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--presenter", type=int, default=corpus_mod.DEFAULT_COUNTS["presenter"])
    p.add_argument("--insight", type=int, default=corpus_mod.DEFAULT_COUNTS["insight"])
    p.add_argument("--ood", type=int, default=corpus_mod.DEFAULT_COUNTS["ood"])
    p.add_argument("--supersample-to", type=int, default=0,
                   help="paraphrase presenter/insight classes up to this size")
    p.add_argument("--out", required=True)

    p = sub.add_parser("train-ood", help="train the out-of-domain gate")
    p.add_argument("--corpus", required=True, help="corpus JSONL (uses in-domain classes)")
    p.add_argument("--lambda", dest="lam", type=float, default=4.0)
    p.add_argument("--hidden", type=int, default=64)
    p.add_argument("--epochs", type=int, default=500)
    p.add_argument("--lr", type=float, default=0.01)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--dimension", type=int, default=256)
    p.add_argument("--out", required=True, help="model JSON path")
    p.add_argument("--errors-out", default=None,
                   help="per-sample training errors file (default: <out>.errors.json)")

    p = sub.add_parser("train-router", help="train the branch router")
    p.add_argument("--corpus", required=True)
    p.add_argument("--epochs", type=int, default=400)
    p.add_argument("--lr", type=float, default=0.5)
    p.add_argument("--holdout", type=float, default=0.2)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--dimension", type=int, default=256)
    p.add_argument("--out", required=True)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--config", required=True)
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--host", default="127.0.0.1")

    p = sub.add_parser("repl", help="interactive terminal chat")
    p.add_argument("--config", required=True)

    p = sub.add_parser("eval", help="run a benchmark file against the engine")
    p.add_argument("--config", required=True)
    p.add_argument("--benchmark", required=True)
    p.add_argument("--annotations", default=None)
    p.add_argument("--out", required=True, help="report JSON path")
    return parser


def _cmd_gen_data(args) -> int:
    store = generate_store(
        seed=args.seed,
        n_products=args.products,
        start=date.fromisoformat(args.start),
        end=date.fromisoformat(args.end),
    )
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_store_csv(store, str(out / "facts.csv"), str(out / "benchmarks.csv"))
    print(f"wrote {len(store.facts)} fact rows to {out / 'facts.csv'}")
    return 0


def _cmd_gen_corpus(args) -> int:
    questions = corpus_mod.generate_corpus(
        args.seed,
        {"presenter": args.presenter, "insight": args.insight, "ood": args.ood},
    )
    if args.supersample_to:
        in_domain = [q for q in questions if q.label != corpus_mod.LABEL_OOD]
        ood = [q for q in questions if q.label == corpus_mod.LABEL_OOD]
        grown = corpus_mod.supersample(
            corpus_mod.TemplateParaphraseProvider(), in_domain, args.supersample_to
        )
        questions = grown + ood
    corpus_mod.save_corpus(questions, args.out)
    print(f"wrote {len(questions)} questions to {args.out}")
    return 0


def _cmd_train_ood(args) -> int:
    questions = corpus_mod.load_corpus(args.corpus)
    in_domain = [q.text for q in questions if q.label != corpus_mod.LABEL_OOD]
    embedder = HashingEmbedder(dimension=args.dimension)
    vectors = [embedder.embed(t) for t in in_domain]
    import numpy as np

    cfg = OodConfig(
        hidden_dim=args.hidden,
        lam=args.lam,
        epochs=args.epochs,
        learning_rate=args.lr,
        seed=args.seed,
    )
    model = train_ood(np.asarray(vectors), cfg, embedder.spec)
    errors_path = args.errors_out or f"{args.out}.errors.json"
    save_ood_model(model, args.out, errors_path)
    print(
        f"trained on {len(in_domain)} in-domain questions: "
        f"mu={model.mu_id:.6f} sigma={model.sigma_id:.6f} threshold={model.threshold:.6f}"
    )
    print(f"model: {args.out}\nerrors: {errors_path}")
    return 0


def _cmd_train_router(args) -> int:
    questions = corpus_mod.load_corpus(args.corpus)
    embedder = HashingEmbedder(dimension=args.dimension)
    examples = []
    for q in questions:
        if q.label == corpus_mod.LABEL_PRESENTER:
            examples.append((embedder.embed(q.text), RouteLabel.PRESENTER))
        elif q.label == corpus_mod.LABEL_INSIGHT:
            examples.append((embedder.embed(q.text), RouteLabel.INSIGHT_GENERATOR))
    cfg = RouterConfig(
        epochs=args.epochs,
        learning_rate=args.lr,
        holdout_fraction=args.holdout,
        seed=args.seed,
    )
    model = train_router(examples, cfg, embedder.spec)
    save_router_model(model, args.out)
    acc = "n/a" if model.held_out_accuracy is None else f"{model.held_out_accuracy:.3f}"
    print(f"trained on {len(examples)} questions, held-out accuracy {acc}")
    print(f"model: {args.out}")
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import build_engine, create_app, load_config

    engine, ctx = build_engine(load_config(args.config))
    app = create_app(engine, ctx)
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


def _cmd_repl(args) -> int:
    from .core import validate_query
    from .service import build_engine, load_config

    engine, ctx = build_engine(load_config(args.config))
    print("seller-insights repl; type 'exit' to quit")
    while True:
        try:
            line = input("> ").strip()
        except EOFError:
            print()
            return 0
        if line.lower() in {"exit", "quit"}:
            return 0
        if not line:
            continue
        try:
            response = engine.handle(validate_query(line, session_id="repl"), ctx)
        except EngineError as exc:
            print(f"[{exc.code}] {exc.message}")
            continue
        print(f"[{response.branch.value}, {response.latency_ms} ms] {response.answer}")


def _cmd_eval(args) -> int:
    from .service import build_engine, load_config

    engine, ctx = build_engine(load_config(args.config))
    items = load_benchmark(args.benchmark)
    annotations = load_annotations(args.annotations) if args.annotations else None
    report = run_benchmark(engine, items, ctx, annotations)
    Path(args.out).write_bytes(report.canonical_bytes())
    print(render_report(report))
    print(f"\nreport: {args.out}")
    return 0


_COMMANDS = {
    "gen-data": _cmd_gen_data,
    "gen-corpus": _cmd_gen_corpus,
    "train-ood": _cmd_train_ood,
    "train-router": _cmd_train_router,
    "serve": _cmd_serve,
    "repl": _cmd_repl,
    "eval": _cmd_eval,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except EngineError as exc:
        print(f"error [{exc.code}]: {exc.message}", file=sys.stderr)
        return 1
    except (OSError, ValueError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except KeyboardInterrupt:
        return 1
    except Exception as exc:  # noqa: BLE001 - last-resort internal error mapping
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
