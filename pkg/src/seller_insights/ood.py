"""Autoencoder gate for out-of-domain queries.

A single-hidden-layer autoencoder is trained on embeddings of in-domain
questions only. At serve time a query is flagged out-of-domain when its
reconstruction error exceeds a threshold calibrated on the training set:
mean plus `lam` population standard deviations of the final per-sample
errors. Larger `lam` admits more queries (higher recall for the answerable
set, lower precision for the OOD flag).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .core import GateVerdict, OodConfig, seeded_rng
from .embedding import EmbedderSpec
from .errors import DimensionMismatch, NonFiniteLoss, TooFewSamples


@dataclass(frozen=True)
class AutoencoderParams:
    """Weights of the two-layer tanh autoencoder. Shapes: w1 (H,D), b1 (H,),
    w2 (D,H), b2 (D,)."""

    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    activation: str = "tanh"

    def __post_init__(self):
        h, d = self.w1.shape
        if self.b1.shape != (h,) or self.w2.shape != (d, h) or self.b2.shape != (d,):
            raise DimensionMismatch(
                "inconsistent autoencoder shapes: "
                f"w1 {self.w1.shape}, b1 {self.b1.shape}, w2 {self.w2.shape}, b2 {self.b2.shape}"
            )
        for name, arr in (("w1", self.w1), ("b1", self.b1), ("w2", self.w2), ("b2", self.b2)):
            if not np.all(np.isfinite(arr)):
                raise NonFiniteLoss(f"non-finite entries in {name}")
        if self.activation != "tanh":
            raise ValueError(f"unsupported activation {self.activation!r}")

    @property
    def input_dim(self) -> int:
        return self.w1.shape[1]

    @property
    def hidden_dim(self) -> int:
        return self.w1.shape[0]


@dataclass(frozen=True)
class OodModel:
    params: AutoencoderParams
    mu_id: float
    sigma_id: float
    lam: float
    threshold: float
    embedder: EmbedderSpec
    training_errors: tuple = field(default=(), repr=False)

    def __post_init__(self):
        expected = self.mu_id + self.lam * self.sigma_id
        if self.threshold != expected:
            raise ValueError(
                f"threshold {self.threshold!r} != mu + lam*sigma = {expected!r}"
            )


@dataclass(frozen=True)
class OodDecision:
    verdict: GateVerdict
    error: float


def _check_input(params: AutoencoderParams, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (params.input_dim,):
        raise DimensionMismatch(
            f"input has shape {x.shape}, expected ({params.input_dim},)"
        )
    return x


def ae_forward(params: AutoencoderParams, x: np.ndarray) -> np.ndarray:
    """Reconstruction of one input: tanh(w2 @ tanh(w1 @ x + b1) + b2)."""
    x = _check_input(params, x)
    hidden = np.tanh(params.w1 @ x + params.b1)
    return np.tanh(params.w2 @ hidden + params.b2)


def _forward_batch(params: AutoencoderParams, xs: np.ndarray):
    hidden = np.tanh(xs @ params.w1.T + params.b1)
    recon = np.tanh(hidden @ params.w2.T + params.b2)
    return hidden, recon


def reconstruction_error(params: AutoencoderParams, x: np.ndarray) -> float:
    """Euclidean distance between the input and its reconstruction."""
    x = _check_input(params, x)
    return float(np.linalg.norm(x - ae_forward(params, x)))


def reconstruction_errors(params: AutoencoderParams, xs: np.ndarray) -> np.ndarray:
    xs = np.asarray(xs, dtype=np.float64)
    _, recon = _forward_batch(params, xs)
    return np.linalg.norm(xs - recon, axis=1)


def calibrate(errors: Sequence[float], lam: float) -> tuple[float, float, float]:
    """Mean, population standard deviation, and threshold mu + lam*sigma."""
    arr = np.asarray(errors, dtype=np.float64)
    mu = float(np.mean(arr))
    sigma = float(np.std(arr))  # population std; deterministic down to n=1
    return mu, sigma, mu + lam * sigma


def train_ood(
    in_domain: np.ndarray,
    cfg: OodConfig,
    embedder: EmbedderSpec,
) -> OodModel:
    """Full-batch gradient descent on mean squared reconstruction error.

    `in_domain` is an (n, D) matrix of unit-norm embeddings of in-domain
    questions. Initialization is Xavier-uniform from the seeded stream, so
    identical (seed, data) pairs produce bit-identical models.
    """
    xs = np.asarray(in_domain, dtype=np.float64)
    if xs.ndim != 2 or xs.shape[0] < 2:
        raise TooFewSamples(
            f"need at least 2 in-domain samples, got {xs.shape[0] if xs.ndim == 2 else 0}"
        )
    if not np.all(np.isfinite(xs)):
        raise NonFiniteLoss("training embeddings contain non-finite values")
    n, d = xs.shape
    h = cfg.hidden_dim
    rng = seeded_rng(cfg.seed, "ood-init")
    limit1 = math.sqrt(6.0 / (d + h))
    limit2 = math.sqrt(6.0 / (h + d))
    w1 = rng.uniform(-limit1, limit1, size=(h, d))
    b1 = np.zeros(h)
    w2 = rng.uniform(-limit2, limit2, size=(d, h))
    b2 = np.zeros(d)

    lr = cfg.learning_rate
    for _ in range(cfg.epochs):
        z1 = xs @ w1.T + b1
        hid = np.tanh(z1)
        z2 = hid @ w2.T + b2
        recon = np.tanh(z2)

        diff = recon - xs  # (n, d)
        loss = float(np.mean(np.sum(diff * diff, axis=1)))
        if not math.isfinite(loss):
            raise NonFiniteLoss(
                f"training diverged (loss {loss}); lower the learning rate"
            )

        grad_z2 = (2.0 / n) * diff * (1.0 - recon * recon)
        grad_w2 = grad_z2.T @ hid
        grad_b2 = grad_z2.sum(axis=0)
        grad_hid = grad_z2 @ w2
        grad_z1 = grad_hid * (1.0 - hid * hid)
        grad_w1 = grad_z1.T @ xs
        grad_b1 = grad_z1.sum(axis=0)

        w1 -= lr * grad_w1
        b1 -= lr * grad_b1
        w2 -= lr * grad_w2
        b2 -= lr * grad_b2

    params = AutoencoderParams(w1=w1, b1=b1, w2=w2, b2=b2)
    errors = reconstruction_errors(params, xs)
    mu, sigma, threshold = calibrate(errors, cfg.lam)
    return OodModel(
        params=params,
        mu_id=mu,
        sigma_id=sigma,
        lam=cfg.lam,
        threshold=threshold,
        embedder=embedder,
        training_errors=tuple(float(e) for e in errors),
    )


def classify_ood(model: OodModel, x: np.ndarray) -> OodDecision:
    """Out-of-domain iff reconstruction error strictly exceeds the threshold.

    The boundary case stays in-domain: borderline queries proceed and can
    still be rejected by the data-based scope check downstream.
    """
    r = reconstruction_error(model.params, x)
    verdict = GateVerdict.OUT_OF_DOMAIN if r > model.threshold else GateVerdict.IN_DOMAIN
    return OodDecision(verdict=verdict, error=r)


def mean_loss(params: AutoencoderParams, xs: np.ndarray) -> float:
    xs = np.asarray(xs, dtype=np.float64)
    _, recon = _forward_batch(params, xs)
    diff = recon - xs
    return float(np.mean(np.sum(diff * diff, axis=1)))


def save_ood_model(model: OodModel, path: str, errors_path: Optional[str] = None) -> None:
    """Write the model artifact, optionally with a per-sample errors file."""
    doc = {
        "w1": model.params.w1.tolist(),
        "b1": model.params.b1.tolist(),
        "w2": model.params.w2.tolist(),
        "b2": model.params.b2.tolist(),
        "mu": model.mu_id,
        "sigma": model.sigma_id,
        "lambda": model.lam,
        "threshold": model.threshold,
        "embedder": model.embedder.to_dict(),
    }
    with open(path, "w", encoding="utf-8") as f:
        json.dump(doc, f)
    if errors_path:
        with open(errors_path, "w", encoding="utf-8") as f:
            json.dump({"errors": list(model.training_errors)}, f)


def load_ood_model(path: str) -> OodModel:
    with open(path, encoding="utf-8") as f:
        doc = json.load(f)
    params = AutoencoderParams(
        w1=np.asarray(doc["w1"], dtype=np.float64),
        b1=np.asarray(doc["b1"], dtype=np.float64),
        w2=np.asarray(doc["w2"], dtype=np.float64),
        b2=np.asarray(doc["b2"], dtype=np.float64),
    )
    return OodModel(
        params=params,
        mu_id=doc["mu"],
        sigma_id=doc["sigma"],
        lam=doc["lambda"],
        threshold=doc["threshold"],
        embedder=EmbedderSpec.from_dict(doc["embedder"]),
    )
