"""Branch router: which worker should answer an in-domain query.

A logistic linear head over the embedding provider's vectors stands in for
a fine-tuned transformer classifier; the embedding contract is the seam
for swapping a heavier model in. Scores above zero route to the insight
generator, everything else (including exact ties) to the data presenter.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .core import RouteLabel, RouterConfig, seeded_rng
from .embedding import EmbedderSpec
from .errors import DimensionMismatch, NonFiniteLoss, SingleClassData

LABELS = (RouteLabel.PRESENTER, RouteLabel.INSIGHT_GENERATOR)


@dataclass(frozen=True)
class RouterModel:
    weights: np.ndarray
    bias: float
    embedder: EmbedderSpec
    held_out_accuracy: Optional[float] = None
    labels: tuple = LABELS

    def __post_init__(self):
        if not np.all(np.isfinite(self.weights)) or not math.isfinite(self.bias):
            raise NonFiniteLoss("router weights must be finite")


@dataclass(frozen=True)
class RouteDecision:
    label: RouteLabel
    confidence: float  # probability of the chosen label


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def train_router(
    examples: Sequence[tuple[np.ndarray, RouteLabel]],
    cfg: RouterConfig,
    embedder: EmbedderSpec,
) -> RouterModel:
    """Full-batch gradient descent on logistic loss.

    The holdout split is drawn from the seeded stream, so training is
    deterministic; held-out accuracy is recorded on the model.
    """
    if not examples:
        raise SingleClassData("no training examples")
    labels = {label for _, label in examples}
    if len(labels) < 2:
        raise SingleClassData(f"all examples share label {labels.pop().value!r}")

    xs = np.asarray([x for x, _ in examples], dtype=np.float64)
    ys = np.asarray(
        [1.0 if label == RouteLabel.INSIGHT_GENERATOR else 0.0 for _, label in examples]
    )
    n, d = xs.shape

    rng = seeded_rng(cfg.seed, "router-split")
    order = rng.permutation(n)
    n_holdout = int(round(n * cfg.holdout_fraction))
    holdout_idx = order[:n_holdout]
    train_idx = order[n_holdout:]
    if len({ys[i] for i in train_idx}) < 2:
        raise SingleClassData("training split collapsed to one label; add data")

    xt, yt = xs[train_idx], ys[train_idx]
    w = np.zeros(d)
    b = 0.0
    lr = cfg.learning_rate
    m = len(xt)
    for _ in range(cfg.epochs):
        p = _sigmoid(xt @ w + b)
        grad = p - yt
        w -= lr * (xt.T @ grad) / m
        b -= lr * float(np.sum(grad)) / m
    if not np.all(np.isfinite(w)) or not math.isfinite(b):
        raise NonFiniteLoss("router training diverged; lower the learning rate")

    accuracy = None
    if n_holdout:
        ph = _sigmoid(xs[holdout_idx] @ w + b)
        predicted = (ph > 0.5).astype(np.float64)
        accuracy = float(np.mean(predicted == ys[holdout_idx]))

    return RouterModel(weights=w, bias=b, embedder=embedder, held_out_accuracy=accuracy)


def route(model: RouterModel, x: np.ndarray) -> RouteDecision:
    """Insight generator iff the linear score is strictly positive."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != model.weights.shape:
        raise DimensionMismatch(
            f"input has shape {x.shape}, expected {model.weights.shape}"
        )
    score = float(model.weights @ x + model.bias)
    p_insight = 1.0 / (1.0 + math.exp(-score)) if score >= 0 else (
        math.exp(score) / (1.0 + math.exp(score))
    )
    if score > 0:
        return RouteDecision(label=RouteLabel.INSIGHT_GENERATOR, confidence=p_insight)
    return RouteDecision(label=RouteLabel.PRESENTER, confidence=1.0 - p_insight)


def save_router_model(model: RouterModel, path: str) -> None:
    doc = {
        "weights": model.weights.tolist(),
        "bias": model.bias,
        "labels": [label.value for label in model.labels],
        "held_out_accuracy": model.held_out_accuracy,
        "embedder": model.embedder.to_dict(),
    }
    with open(path, "w", encoding="utf-8") as f:
        json.dump(doc, f)


def load_router_model(path: str) -> RouterModel:
    with open(path, encoding="utf-8") as f:
        doc = json.load(f)
    return RouterModel(
        weights=np.asarray(doc["weights"], dtype=np.float64),
        bias=float(doc["bias"]),
        embedder=EmbedderSpec.from_dict(doc["embedder"]),
        held_out_accuracy=doc.get("held_out_accuracy"),
    )
