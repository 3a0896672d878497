"""Desk-scale training of a linear, L2-normalized embedder.

A single linear layer maps raw feature vectors to unit-norm embeddings and
is trained by SGD against the embedding memory, isolating the loss design
from any backbone.  Two objectives are provided: the hierarchical loss
with its dynamic identity weight (:func:`train`), and a flat baseline that
supervises detection and identity independently (:func:`train_oim_baseline`).

Per-sample order is fixed and part of the contract: forward pass, gradient
step, then memory update (identity rows by momentum blend, backgrounds
pushed to the queue) using the forward-pass embedding.  With batches, all
forwards in a batch see the same memory snapshot, one step is taken on the
batch-mean gradient, and memory updates are applied in data order.
Training is deterministic given (seed, config, data order).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .loss import (
    PROB_EPS,
    LossBreakdown,
    _detection_score_gradient,
    background_probability,
    class_probabilities,
    ihoim_gradient,
    ihoim_loss,
    person_probability,
)
from .memory import ProjectionMemory


@dataclass(frozen=True)
class TrainSample:
    """One training example: raw feature plus its supervision.

    ``is_person`` is the detection label; ``identity`` (1-based) is set only
    for labeled persons.  Backgrounds and unlabeled persons carry None.
    """

    feature: np.ndarray
    is_person: bool
    identity: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "feature", np.asarray(self.feature, dtype=float))
        if self.feature.ndim != 1:
            raise ValueError(f"feature must be 1-D, got shape {self.feature.shape}")
        if self.identity is not None and not self.is_person:
            raise ValueError("background samples cannot carry an identity")


@dataclass
class TrainConfig:
    learning_rate: float = 0.003
    epochs: int = 5
    batch_size: int = 1
    momentum: float = 0.5
    temperature: float = 1.0 / 30.0
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate < 0:
            raise ValueError(f"learning_rate must be >= 0, got {self.learning_rate}")
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")


class LinearEmbedder:
    """Linear map from feature space to the unit sphere in embedding space."""

    def __init__(self, weights):
        self.weights = np.asarray(weights, dtype=float)
        if self.weights.ndim != 2:
            raise ValueError(f"weights must be 2-D, got shape {self.weights.shape}")

    @classmethod
    def init_random(cls, dim: int, feature_dim: int, seed: int = 0) -> "LinearEmbedder":
        rng = np.random.default_rng(seed)
        return cls(rng.normal(0.0, 1.0 / math.sqrt(feature_dim), size=(dim, feature_dim)))

    @property
    def dim(self) -> int:
        return self.weights.shape[0]

    @property
    def feature_dim(self) -> int:
        return self.weights.shape[1]

    def embed(self, feature) -> np.ndarray:
        """L2-normalized projection of ``feature``."""
        x, _ = self._forward(feature)
        return x

    def _forward(self, feature) -> tuple[np.ndarray, float]:
        feature = np.asarray(feature, dtype=float)
        if feature.shape != (self.feature_dim,):
            raise ValueError(
                f"feature must have shape ({self.feature_dim},), got {feature.shape}"
            )
        z = self.weights @ feature
        norm = float(np.linalg.norm(z))
        if norm < 1e-12:
            raise ValueError("feature maps to the zero vector; cannot normalize")
        return z / norm, norm

    def backprop(self, feature, embedding: np.ndarray, norm: float,
                 grad_embedding: np.ndarray) -> np.ndarray:
        """Gradient w.r.t. weights given dL/d(embedding), through the
        normalization: dL/dz = (g - x (x.g)) / ||z||, dL/dW = dL/dz feat^T."""
        feature = np.asarray(feature, dtype=float)
        g_z = (grad_embedding - embedding * float(embedding @ grad_embedding)) / norm
        return np.outer(g_z, feature)


@dataclass(frozen=True)
class EpochStats:
    """Loss telemetry for one epoch.

    ``mean_lambda`` averages the identity-term weight over labeled-person
    samples (fixed at 1.0 for the baseline objective); ``accuracy`` is
    identity-classification accuracy on the training samples at epoch end.
    """

    epoch: int
    mean_loss: float
    mean_lambda: float
    accuracy: float


def _oim_baseline_loss(mem: ProjectionMemory, x, y: int, k: int | None) -> LossBreakdown:
    """Flat baseline: detection BCE plus, for labeled persons, a plain
    cross entropy over all N+B memory rows with fixed weight 1."""
    s = mem.project(x)
    p = class_probabilities(s, mem.temperature)
    p_person = person_probability(p, mem.n_identities)
    if y == 1:
        l_det = float(-np.log(min(max(p_person, PROB_EPS), 1.0 - PROB_EPS)))
    else:
        p_bg = background_probability(p, mem.n_identities)
        l_det = float(-np.log(min(max(p_bg, PROB_EPS), 1.0 - PROB_EPS)))
    if y == 1 and k is not None:
        pk = min(max(float(p[k - 1]), PROB_EPS), 1.0 - PROB_EPS)
        l_id = float(-np.log(pk))
        total = l_det + l_id
    else:
        l_id = None
        total = l_det
    return LossBreakdown(detection_loss=l_det, oim_loss=l_id, lam=1.0,
                         total=float(total), person_prob=p_person)


def _oim_baseline_gradient(mem: ProjectionMemory, x, y: int, k: int | None) -> np.ndarray:
    s = mem.project(x)
    tau = mem.temperature
    n = mem.n_identities
    p = class_probabilities(s, tau)
    g_s = _detection_score_gradient(p, n, y, tau)
    if y == 1 and k is not None and PROB_EPS < p[k - 1] < 1.0 - PROB_EPS:
        g_s = g_s + p / tau
        g_s[k - 1] -= 1.0 / tau
    return mem.w.T @ g_s


def _validate_data(data: list[TrainSample], mem: ProjectionMemory,
                   feature_dim: int) -> None:
    for i, sample in enumerate(data):
        if sample.feature.shape != (feature_dim,):
            raise ValueError(
                f"sample {i}: feature shape {sample.feature.shape} does not match "
                f"embedder input ({feature_dim},)"
            )
        if sample.identity is not None and not (1 <= sample.identity <= mem.n_identities):
            raise ValueError(
                f"sample {i}: identity {sample.identity} outside 1..{mem.n_identities}"
            )


def _run_training(model: LinearEmbedder, data: list[TrainSample],
                  mem: ProjectionMemory, cfg: TrainConfig,
                  loss_fn, grad_fn) -> list[EpochStats]:
    if mem.dim != model.dim:
        raise ValueError(
            f"memory dim {mem.dim} does not match embedder output dim {model.dim}"
        )
    _validate_data(data, mem, model.feature_dim)
    mem.momentum = cfg.momentum
    mem.temperature = cfg.temperature

    rng = np.random.default_rng(cfg.seed)
    history: list[EpochStats] = []
    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(len(data))
        losses: list[float] = []
        lambdas: list[float] = []
        for start in range(0, len(order), cfg.batch_size):
            batch = order[start:start + cfg.batch_size]
            grad_w = np.zeros_like(model.weights)
            forwards = []
            for idx in batch:
                sample = data[idx]
                y = 1 if sample.is_person else 0
                x, norm = model._forward(sample.feature)
                breakdown = loss_fn(mem, x, y, sample.identity)
                g_x = grad_fn(mem, x, y, sample.identity)
                grad_w += model.backprop(sample.feature, x, norm, g_x)
                forwards.append((sample, x))
                losses.append(breakdown.total)
                if sample.identity is not None:
                    lambdas.append(breakdown.lam)
            model.weights -= cfg.learning_rate * grad_w / len(batch)
            for sample, x in forwards:
                if sample.identity is not None:
                    mem.update_labeled(sample.identity, x)
                elif not sample.is_person:
                    mem.push_background(x)
        history.append(EpochStats(
            epoch=epoch,
            mean_loss=float(np.mean(losses)) if losses else 0.0,
            mean_lambda=float(np.mean(lambdas)) if lambdas else 0.0,
            accuracy=identity_accuracy(model, mem, data),
        ))
    return history


def train(model: LinearEmbedder, data: list[TrainSample], mem: ProjectionMemory,
          cfg: TrainConfig) -> list[EpochStats]:
    """Train under the hierarchical objective with dynamic identity weight.

    Mutates ``model`` and ``mem`` in place and returns per-epoch telemetry.
    """
    return _run_training(model, data, mem, cfg, ihoim_loss, ihoim_gradient)


def train_oim_baseline(model: LinearEmbedder, data: list[TrainSample],
                       mem: ProjectionMemory, cfg: TrainConfig) -> list[EpochStats]:
    """Train under the flat baseline: detection BCE plus an all-rows
    cross entropy with fixed weight 1 (no dynamic weighting)."""
    return _run_training(model, data, mem, cfg, _oim_baseline_loss, _oim_baseline_gradient)


def identity_accuracy(model: LinearEmbedder, mem: ProjectionMemory,
                      samples: list[TrainSample]) -> float:
    """Fraction of labeled-person samples whose nearest identity row is
    their own.  NaN when no labeled sample is present."""
    correct = 0
    labeled = 0
    for sample in samples:
        if sample.identity is None:
            continue
        labeled += 1
        scores = mem.project(model.embed(sample.feature))
        if int(np.argmax(scores[: mem.n_identities])) == sample.identity - 1:
            correct += 1
    return correct / labeled if labeled else float("nan")


def write_history_csv(history: list[EpochStats], path) -> None:
    """Loss-history export: ``epoch,mean_loss,mean_lambda,accuracy``."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("epoch,mean_loss,mean_lambda,accuracy\n")
        for row in history:
            fh.write(f"{row.epoch},{row.mean_loss!r},{row.mean_lambda!r},{row.accuracy!r}\n")
