"""Small dense feed-forward networks trained with plain mini-batch SGD.

Everything is numpy and float64. Networks are immutable from the caller's
point of view: :func:`sgd_train` returns a new network.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .core import ScalarField
from .errors import InvalidInputError, TrainingFailure

LOSSES = ("mse", "bce", "composite")


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


class FeedForwardNet:
    """ReLU hidden layers, identity or sigmoid output, scalar output."""

    kind = "feedforward"

    def __init__(self, weights: Sequence[np.ndarray], biases: Sequence[np.ndarray],
                 output: str = "identity"):
        if output not in ("identity", "sigmoid"):
            raise InvalidInputError(f"unknown output activation {output!r}")
        if len(weights) != len(biases) or not weights:
            raise InvalidInputError("need one bias per weight matrix")
        self.weights = [np.array(w, dtype=float) for w in weights]
        self.biases = [np.array(b, dtype=float).reshape(-1) for b in biases]
        for w, b in zip(self.weights, self.biases):
            if w.ndim != 2 or w.shape[1] != b.shape[0]:
                raise InvalidInputError("weight/bias shape mismatch")
            w.setflags(write=False)
            b.setflags(write=False)
        for a, b in zip(self.weights[:-1], self.weights[1:]):
            if a.shape[1] != b.shape[0]:
                raise InvalidInputError("consecutive layer widths disagree")
        if self.weights[-1].shape[1] != 1:
            raise InvalidInputError("output layer must have width 1")
        self.output = output

    @property
    def widths(self) -> tuple[int, ...]:
        return (self.weights[0].shape[0],) + tuple(w.shape[1] for w in self.weights)

    @property
    def d(self) -> int:
        return self.widths[0]

    @property
    def n_params(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    def _forward(self, X):
        acts = [X]
        h = X
        last = len(self.weights) - 1
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = h @ w + b
            h = z if k == last else np.maximum(z, 0.0)
            acts.append(h)
        return acts

    def logits(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.d:
            raise InvalidInputError(f"net expects {self.d} inputs, got {X.shape[1]}")
        return self._forward(X)[-1][:, 0]

    def __call__(self, X) -> np.ndarray:
        z = self.logits(X)
        return _sigmoid(z) if self.output == "sigmoid" else z

    def loss_and_grad(self, X, y, loss: str = "mse", sample_weight=None):
        """Weighted mean loss and its gradient ``(dW list, db list)`` by backpropagation.

        For ``bce`` the loss is computed from logits (requires sigmoid output).
        """
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float).reshape(-1)
        w = np.ones_like(y) if sample_weight is None else np.asarray(sample_weight, dtype=float)
        wsum = w.sum()
        acts = self._forward(X)
        z = acts[-1][:, 0]
        if loss == "bce":
            if self.output != "sigmoid":
                raise InvalidInputError("bce loss needs a sigmoid output")
            # softplus(z) - y z, stable form
            per = np.maximum(z, 0) - y * z + np.log1p(np.exp(-np.abs(z)))
            dz = w * (_sigmoid(z) - y) / wsum
        else:
            pred = _sigmoid(z) if self.output == "sigmoid" else z
            r = pred - y
            per = r * r
            dpred = 2.0 * w * r / wsum
            dz = dpred * pred * (1 - pred) if self.output == "sigmoid" else dpred
        value = float(np.dot(w, per) / wsum)
        grads_w: list[np.ndarray] = [None] * len(self.weights)  # type: ignore[list-item]
        grads_b: list[np.ndarray] = [None] * len(self.weights)  # type: ignore[list-item]
        delta = dz[:, None]
        for k in range(len(self.weights) - 1, -1, -1):
            grads_w[k] = acts[k].T @ delta
            grads_b[k] = delta.sum(axis=0)
            if k > 0:
                delta = (delta @ self.weights[k].T) * (acts[k] > 0)
        return value, grads_w, grads_b

    # parameter vector helpers (used by gradient checks)
    def flat_params(self) -> np.ndarray:
        return np.concatenate([np.concatenate([w.ravel(), b]) for w, b in zip(self.weights, self.biases)])

    def with_flat_params(self, theta) -> "FeedForwardNet":
        theta = np.asarray(theta, dtype=float)
        ws, bs, pos = [], [], 0
        for w, b in zip(self.weights, self.biases):
            ws.append(theta[pos:pos + w.size].reshape(w.shape))
            pos += w.size
            bs.append(theta[pos:pos + b.size])
            pos += b.size
        return FeedForwardNet(ws, bs, self.output)

    def to_dict(self) -> dict:
        return {
            "kind": "feedforward",
            "widths": list(self.widths),
            "output": self.output,
            "weights": [w.tolist() for w in self.weights],
            "biases": [b.tolist() for b in self.biases],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "FeedForwardNet":
        net = cls(doc["weights"], doc["biases"], doc.get("output", "identity"))
        if list(net.widths) != list(doc.get("widths", net.widths)):
            raise InvalidInputError("declared widths do not match weight shapes")
        return net

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def net_init(widths: Sequence[int], seed: int, output: str = "identity",
             scale: float = 1.0) -> FeedForwardNet:
    """He-style Gaussian initialisation, zero biases; deterministic per ``seed``."""
    widths = [int(w) for w in widths]
    if len(widths) < 2 or any(w < 1 for w in widths):
        raise InvalidInputError(f"need at least two positive widths, got {widths}")
    rng = np.random.default_rng(seed)
    ws, bs = [], []
    for fan_in, fan_out in zip(widths[:-1], widths[1:]):
        ws.append(rng.normal(0.0, scale * np.sqrt(2.0 / fan_in), size=(fan_in, fan_out)))
        bs.append(np.zeros(fan_out))
    return FeedForwardNet(ws, bs, output)


@dataclass(frozen=True)
class TrainerConfig:
    lr: float = 0.05
    batch_size: int = 32
    epochs: int = 100
    seed: int = 0
    loss: str = "mse"
    loss_weights: tuple[float, float] = (1.0, 1.0)

    def __post_init__(self):
        if not self.lr > 0:
            raise InvalidInputError("learning rate must be positive")
        if self.epochs < 1:
            raise InvalidInputError("epochs must be >= 1")
        if self.batch_size < 1:
            raise InvalidInputError("batch size must be >= 1")
        if self.loss not in LOSSES:
            raise InvalidInputError(f"loss must be one of {LOSSES}")
        if len(self.loss_weights) != 2 or any(w < 0 for w in self.loss_weights):
            raise InvalidInputError("loss_weights must be a non-negative pair")
        object.__setattr__(self, "loss_weights", tuple(float(w) for w in self.loss_weights))

    @classmethod
    def from_dict(cls, doc: dict) -> "TrainerConfig":
        doc = dict(doc)
        if "loss_weights" in doc:
            doc["loss_weights"] = tuple(doc["loss_weights"])
        return cls(**doc)


@dataclass
class FitResult:
    net: FeedForwardNet
    losses: list[float]
    components: dict = field(default_factory=dict)

    @property
    def final_loss(self) -> float:
        return self.losses[-1]


def composite_weights(groups: np.ndarray, loss_weights: tuple[float, float]) -> np.ndarray:
    """Per-sample weights so the weighted mean equals ``w0*mean_g0 + w1*mean_g1``."""
    groups = np.asarray(groups, dtype=int)
    n = groups.shape[0]
    out = np.zeros(n)
    for g in (0, 1):
        sel = groups == g
        if sel.any():
            out[sel] = loss_weights[g] * n / sel.sum()
    return out


def sgd_train(net: FeedForwardNet, X, y, cfg: TrainerConfig,
              groups=None, sample_weight=None) -> FitResult:
    """Plain mini-batch SGD with a fixed learning rate.

    ``groups`` (0/1 per row) is required for the ``composite`` loss, whose two
    squared-error terms are weighted by ``cfg.loss_weights``.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).reshape(-1)
    if X.ndim != 2 or X.shape[1] != net.d:
        raise InvalidInputError(f"inputs must be (n, {net.d})")
    if X.shape[0] != y.shape[0] or X.shape[0] == 0:
        raise InvalidInputError("need a non-empty set with one target per row")
    base_loss = "bce" if cfg.loss == "bce" else "mse"
    w = np.ones(X.shape[0]) if sample_weight is None else np.asarray(sample_weight, dtype=float)
    if cfg.loss == "composite":
        if groups is None:
            raise InvalidInputError("composite loss needs a group label per row")
        w = w * composite_weights(groups, cfg.loss_weights)
    rng = np.random.default_rng(cfg.seed)
    ws = [a.copy() for a in net.weights]
    bs = [b.copy() for b in net.biases]
    cur = FeedForwardNet(ws, bs, net.output)
    n = X.shape[0]
    losses = []
    step = 0
    for _epoch in range(cfg.epochs):
        order = rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            if not w[idx].any():
                continue
            value, gw, gb = cur.loss_and_grad(X[idx], y[idx], base_loss, w[idx])
            if not np.isfinite(value):
                raise TrainingFailure("loss became non-finite", step)
            ws = [a - cfg.lr * g for a, g in zip(cur.weights, gw)]
            bs = [b - cfg.lr * g for b, g in zip(cur.biases, gb)]
            cur = FeedForwardNet(ws, bs, net.output)
            step += 1
        epoch_loss, _, _ = cur.loss_and_grad(X, y, base_loss, w)
        if not np.isfinite(epoch_loss):
            raise TrainingFailure("loss became non-finite", step)
        losses.append(epoch_loss)
    components = {}
    if groups is not None:
        pred = cur(X)
        groups = np.asarray(groups, dtype=int)
        for g in (0, 1):
            sel = groups == g
            components[f"group{g}_mse"] = float(np.mean((pred[sel] - y[sel]) ** 2)) if sel.any() else 0.0
    return FitResult(cur, losses, components)


class NetField(ScalarField):
    """Expose a :class:`FeedForwardNet` as a model ``f``."""

    kind = "feedforward"

    def __init__(self, net: FeedForwardNet):
        super().__init__(net.d)
        self.net = net

    def _eval(self, X):
        return self.net(X)
