"""Density fields: empirical, smoothed empirical, categorical products and the
noise-contrastive (OOD classifier) ratio estimator."""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from typing import Optional, Sequence, Union

import numpy as np
from scipy.special import logsumexp

from .core import BaselineDistribution, Dataset, DensityField, as_point
from .errors import InvalidInputError
from .learners import FeedForwardNet, TrainerConfig, net_init, sgd_train

DEFAULT_CLIP = (0.01, 0.99)


class EmpiricalDensity(DensityField):
    """``p(x) = (#rows equal to x) / m`` with exact componentwise equality."""

    kind = "empirical"
    normalized = True

    def __init__(self, data: Dataset):
        data.require_nonempty()
        super().__init__(data.d)
        self.m = data.m
        self.counts: dict[tuple, int] = {}
        for row in data.rows:
            key = tuple(row.tolist())
            self.counts[key] = self.counts.get(key, 0) + 1

    def _eval(self, X):
        return np.array([self.counts.get(tuple(r.tolist()), 0) for r in X], dtype=float) / self.m


def empirical_density(data: Dataset) -> EmpiricalDensity:
    return EmpiricalDensity(data)


class SmoothedEmpiricalDensity(DensityField):
    """Equal-weight isotropic Gaussian mixture centred on the dataset rows."""

    kind = "smoothed_empirical"
    normalized = True

    def __init__(self, data: Dataset, sigma: float):
        data.require_nonempty()
        if not sigma > 0:
            raise InvalidInputError("sigma must be positive")
        super().__init__(data.d)
        self.centers = data.rows
        self.sigma = float(sigma)

    def _eval(self, X):
        sq = ((X[:, None, :] - self.centers[None, :, :]) ** 2).sum(axis=2)
        log_norm = -0.5 * self.d * np.log(2 * np.pi * self.sigma**2)
        log_p = logsumexp(-sq / (2 * self.sigma**2), axis=1) - np.log(self.centers.shape[0])
        return np.exp(log_p + log_norm)


def smoothed_empirical(data: Dataset, sigma: float) -> SmoothedEmpiricalDensity:
    return SmoothedEmpiricalDensity(data, sigma)


class CategoricalProductDensity(DensityField):
    """Independent categorical features: ``p(x) = prod_i table_i[x_i]``."""

    kind = "categorical_product"
    normalized = True

    def __init__(self, tables: Sequence[tuple[Sequence[float], Sequence[float]]]):
        if not tables:
            raise InvalidInputError("need at least one feature table")
        self.tables = []
        for k, table in enumerate(tables):
            if isinstance(table, dict):
                values, probs = list(table.keys()), list(table.values())
            else:
                values, probs = table
            values = np.asarray(values, dtype=float).reshape(-1)
            probs = np.asarray(probs, dtype=float).reshape(-1)
            if values.shape != probs.shape or values.size == 0:
                raise InvalidInputError(f"table {k}: values and probabilities must align")
            if len(np.unique(values)) != values.size:
                raise InvalidInputError(f"table {k}: duplicate support value")
            if np.any(probs < 0) or abs(probs.sum() - 1.0) > 1e-9:
                raise InvalidInputError(f"table {k}: probabilities must be >= 0 and sum to 1")
            self.tables.append((values, probs))
        super().__init__(len(self.tables))

    def _eval(self, X):
        out = np.ones(X.shape[0])
        for j, (values, probs) in enumerate(self.tables):
            hit = X[:, j][:, None] == values[None, :]
            out *= hit.astype(float) @ probs
        return out


def categorical_product(tables) -> CategoricalProductDensity:
    return CategoricalProductDensity(tables)


# ---------------------------------------------------------------------------
# noise-contrastive estimation


@dataclass(frozen=True)
class NoiseSpec:
    """Noise points ``splice(x, x', S)``: ``x`` a data row, ``S`` uniform over all
    ``2**d`` coalitions, ``x'`` from the baseline; ``ratio`` noise rows per data row."""

    baseline: Union[np.ndarray, BaselineDistribution]
    ratio: float = 1.0

    def __post_init__(self):
        if not self.ratio > 0:
            raise InvalidInputError("noise ratio must be positive")
        if not isinstance(self.baseline, BaselineDistribution):
            object.__setattr__(self, "baseline", as_point(self.baseline))

    def sample(self, rows: np.ndarray, n: int, rng: np.random.Generator) -> np.ndarray:
        rows = np.asarray(rows, dtype=float)
        x = rows[rng.integers(0, rows.shape[0], size=n)]
        masks = rng.random((n, rows.shape[1])) < 0.5
        if isinstance(self.baseline, BaselineDistribution):
            xb = self.baseline.sample(n, rng)
        else:
            xb = np.broadcast_to(self.baseline, x.shape)
        return np.where(masks, x, xb)

    def to_dict(self) -> dict:
        if isinstance(self.baseline, BaselineDistribution):
            b = {"points": self.baseline.points.tolist(), "weights": self.baseline.weights.tolist()}
        else:
            b = self.baseline.tolist()
        return {"baseline": b, "ratio": self.ratio}

    @classmethod
    def from_dict(cls, doc: dict) -> "NoiseSpec":
        b = doc["baseline"]
        if isinstance(b, dict):
            b = BaselineDistribution(b["points"], b["weights"])
        return cls(b, doc.get("ratio", 1.0))


class OodClassifier:
    """Binary in-distribution scorer with clipping to ``[lo, hi]``."""

    def __init__(self, net: FeedForwardNet, clip: tuple[float, float] = DEFAULT_CLIP,
                 noise: Optional[NoiseSpec] = None, seed: Optional[int] = None,
                 losses: Optional[list[float]] = None, initial_loss: Optional[float] = None):
        lo, hi = float(clip[0]), float(clip[1])
        if not (0 < lo < hi < 1):
            raise InvalidInputError("clip bounds must satisfy 0 < lo < hi < 1")
        if net.output != "sigmoid":
            raise InvalidInputError("OOD classifier needs a sigmoid output")
        self.net = net
        self.clip = (lo, hi)
        self.noise = noise
        self.seed = seed
        self.losses = list(losses or [])
        self.initial_loss = initial_loss

    @property
    def d(self) -> int:
        return self.net.d

    def raw_score(self, X) -> np.ndarray:
        return self.net(np.atleast_2d(np.asarray(X, dtype=float)))

    def score(self, X) -> np.ndarray:
        return np.clip(self.raw_score(X), *self.clip)

    def to_dict(self) -> dict:
        doc = self.net.to_dict()
        doc.update({
            "kind": "ood_classifier",
            "clip": list(self.clip),
            "seed": self.seed,
            "noise": self.noise.to_dict() if self.noise is not None else None,
        })
        return doc

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, doc: dict) -> "OodClassifier":
        noise = NoiseSpec.from_dict(doc["noise"]) if doc.get("noise") else None
        return cls(FeedForwardNet.from_dict(doc), tuple(doc.get("clip", DEFAULT_CLIP)),
                   noise, doc.get("seed"))


def nce_train(data: Dataset, noise: Union[NoiseSpec, np.ndarray], trainer: TrainerConfig,
              seed: int, hidden: Sequence[int] = (32, 32),
              clip: tuple[float, float] = DEFAULT_CLIP) -> OodClassifier:
    """Train the true-vs-noise classifier with binary cross-entropy.

    ``noise`` is a :class:`NoiseSpec` (noise drawn here, balanced against the
    data) or an explicit array of noise rows.
    """
    data.require_nonempty()
    ss = np.random.SeedSequence(seed)
    init_seed, noise_seed, shuffle_seed = (int(s.generate_state(1)[0]) for s in ss.spawn(3))
    if isinstance(noise, NoiseSpec):
        n_noise = max(1, int(round(noise.ratio * data.m)))
        noise_rows = noise.sample(data.rows, n_noise, np.random.default_rng(noise_seed))
        spec = noise
    else:
        noise_rows = np.asarray(noise, dtype=float)
        spec = None
        if noise_rows.ndim != 2 or noise_rows.shape[1] != data.d or noise_rows.shape[0] == 0:
            raise InvalidInputError("explicit noise rows must be a non-empty (n, d) array")
    X = np.vstack([data.rows, noise_rows])
    y = np.concatenate([np.ones(data.m), np.zeros(noise_rows.shape[0])])
    # balance classes when the counts differ
    w = np.where(y == 1, 0.5 / data.m, 0.5 / noise_rows.shape[0]) * X.shape[0]
    net = net_init((data.d, *hidden, 1), init_seed, output="sigmoid")
    cfg = replace(trainer, loss="bce", seed=shuffle_seed)
    initial, _, _ = net.loss_and_grad(X, y, "bce", w)
    fit = sgd_train(net, X, y, cfg, sample_weight=w)
    return OodClassifier(fit.net, clip, spec, seed, fit.losses, initial)


class NCEDensity(DensityField):
    """Unnormalised density ``OOD(x) / (1 - OOD(x))`` from the clipped score."""

    kind = "nce"

    def __init__(self, ood: OodClassifier):
        super().__init__(ood.d)
        self.ood = ood

    def _eval(self, X):
        c = self.ood.score(X)
        return c / (1.0 - c)


def nce_density(ood: OodClassifier) -> NCEDensity:
    return NCEDensity(ood)
