"""Gate experiments: OOD detector quality/latency and router accuracy.

Trains both manager models on the synthetic corpus and prints a summary
table per lambda for the detector (precision, recall, per-query time) and
held-out accuracy plus routing time for the router. Useful for eyeballing
the precision/recall trade as lambda moves.

Usage: python scripts/run_gate_experiments.py [--seed 7] [--dimension 256]
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from seller_insights.core import OodConfig, RouteLabel, RouterConfig, seeded_rng  # noqa: E402
from seller_insights.corpus import (  # noqa: E402
    LABEL_OOD,
    LABEL_PRESENTER,
    TemplateParaphraseProvider,
    generate_corpus,
    supersample,
)
from seller_insights.embedding import HashingEmbedder  # noqa: E402
from seller_insights.ood import reconstruction_errors, train_ood  # noqa: E402
from seller_insights.router import route, train_router  # noqa: E402


def main() -> int:
    parser = argparse.ArgumentParser()
    parser.add_argument("--seed", type=int, default=7)
    parser.add_argument("--dimension", type=int, default=256)
    parser.add_argument("--lambdas", type=float, nargs="+", default=[2.0, 4.0, 6.0])
    args = parser.parse_args()

    embedder = HashingEmbedder(args.dimension)
    corpus = generate_corpus(args.seed)
    in_domain = [q.text for q in corpus if q.label != LABEL_OOD]
    out_domain = [q.text for q in corpus if q.label == LABEL_OOD]
    print(f"corpus: {len(in_domain)} in-domain, {len(out_domain)} out-of-domain")

    rng = seeded_rng(args.seed, "experiment-split")
    order = rng.permutation(len(in_domain))
    n_holdout = int(len(in_domain) * 0.2)
    held_in = [in_domain[i] for i in order[:n_holdout]]
    train_in = [in_domain[i] for i in order[n_holdout:]]

    started = time.monotonic()
    model = train_ood(
        np.asarray([embedder.embed(t) for t in train_in]),
        OodConfig(seed=0),
        embedder.spec,
    )
    train_s = time.monotonic() - started
    print(f"autoencoder trained on {len(train_in)} questions in {train_s:.2f}s "
          f"(mu={model.mu_id:.4f}, sigma={model.sigma_id:.4f})")

    in_errors = reconstruction_errors(
        model.params, np.asarray([embedder.embed(t) for t in held_in])
    )
    out_errors = reconstruction_errors(
        model.params, np.asarray([embedder.embed(t) for t in out_domain])
    )
    started = time.monotonic()
    _ = reconstruction_errors(model.params, np.asarray([embedder.embed(t) for t in held_in]))
    per_query = (time.monotonic() - started) / len(held_in)

    print("\nlambda  threshold  precision  recall  sec/query")
    for lam in args.lambdas:
        threshold = model.mu_id + lam * model.sigma_id
        tp = int((out_errors > threshold).sum())
        fp = int((in_errors > threshold).sum())
        fn = len(out_errors) - tp
        precision = tp / (tp + fp) if tp + fp else float("nan")
        recall = tp / (tp + fn)
        print(f"{lam:<7.1f} {threshold:<10.4f} {precision:<10.3f} {recall:<7.3f} {per_query:.5f}")

    base = [q for q in corpus if q.label != LABEL_OOD]
    grown = supersample(TemplateParaphraseProvider(), base, 300)
    examples = [
        (
            embedder.embed(q.text),
            RouteLabel.PRESENTER if q.label == LABEL_PRESENTER else RouteLabel.INSIGHT_GENERATOR,
        )
        for q in grown
    ]
    started = time.monotonic()
    router = train_router(examples, RouterConfig(seed=0), embedder.spec)
    router_s = time.monotonic() - started
    started = time.monotonic()
    for x, _ in examples[:1000]:
        route(router, x)
    route_per_query = (time.monotonic() - started) / 1000
    print(f"\nrouter: trained on {len(examples)} questions in {router_s:.2f}s, "
          f"held-out accuracy {router.held_out_accuracy:.3f}, "
          f"{route_per_query * 1000:.3f} ms per routing call")
    return 0


if __name__ == "__main__":
    sys.exit(main())
