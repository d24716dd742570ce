"""Shapley attributions from a value function: exact enumeration, permutation
sampling, truncated permutation sampling, and global aggregation."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .core import Coalition, all_masks, masks_to_codes, shapley_weight
from .errors import CapacityError, DegenerateNormalizationError, InvalidInputError

MAX_EXACT_DIM = 20

GameLike = Union["ValueFunction", Callable[[Coalition], float]]  # noqa: F821


@dataclass
class AttributionVector:
    phi: np.ndarray
    estimator: str
    samples: Optional[int] = None
    seed: Optional[int] = None
    residual: float = 0.0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.phi = np.asarray(self.phi, dtype=float).reshape(-1)

    def __len__(self) -> int:
        return self.phi.shape[0]

    def to_dict(self) -> dict:
        doc = {"phi": self.phi.tolist(), "estimator": self.estimator, "seed": self.seed,
               "residual": float(self.residual)}
        if self.samples is not None:
            doc["samples"] = self.samples
        if self.meta:
            doc["meta"] = self.meta
        return doc

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, doc: dict) -> "AttributionVector":
        return cls(doc["phi"], doc["estimator"], doc.get("samples"), doc.get("seed"),
                   doc.get("residual", 0.0), doc.get("meta", {}))


def evaluate_game(v: GameLike, masks: np.ndarray) -> np.ndarray:
    """Evaluate ``v`` on every row of a boolean mask matrix."""
    masks = np.asarray(masks, dtype=bool)
    if hasattr(v, "evaluate"):
        return np.asarray(v.evaluate(masks), dtype=float)
    return np.array([float(v(Coalition.from_bool(m))) for m in masks])


def shapley_weights(d: int) -> np.ndarray:
    """``w[s] = s!(d-s-1)!/d!`` for ``s = 0..d-1``."""
    return np.array([shapley_weight(s, d) for s in range(d)])


def exact_shapley(v: GameLike, d: int) -> AttributionVector:
    """Exact Shapley values by enumerating all ``2**d`` coalitions once."""
    if d < 1:
        raise InvalidInputError("need at least one player")
    if d > MAX_EXACT_DIM:
        raise CapacityError(f"exact Shapley limited to d <= {MAX_EXACT_DIM}, got {d}")
    masks = all_masks(d)
    vals = evaluate_game(v, masks)
    codes = np.arange(2**d, dtype=np.int64)
    sizes = masks.sum(axis=1)
    w = shapley_weights(d)
    phi = np.empty(d)
    for i in range(d):
        bit = np.int64(1) << i
        without = codes[(codes & bit) == 0]
        phi[i] = np.dot(w[sizes[without]], vals[without | bit] - vals[without])
    residual = float(phi.sum() - (vals[-1] - vals[0]))
    meta = v.metadata() if hasattr(v, "metadata") else {}
    return AttributionVector(phi, "exact", 2**d, None, residual, meta)


def _min_coalition_size(frac: float, d: int) -> int:
    if not 0.0 <= frac <= 1.0:
        raise InvalidInputError("truncation fraction must lie in [0, 1]")
    # ceil of an exact rational so 0.8 * 10 stays 8
    return math.ceil(Fraction(frac).limit_denominator(10**9) * d)


def sample_permutations(d: int, count: int, seed: int) -> np.ndarray:
    """Permutation ``k`` comes from its own stream keyed by ``(seed, k)``, so any
    prefix of a longer run reproduces a shorter one."""
    return np.array([np.random.default_rng([seed, k]).permutation(d) for k in range(count)],
                    dtype=np.int64).reshape(count, d)


def _permutation_estimate(v: GameLike, d: int, permutations: int, seed: int,
                          min_size: int) -> tuple[np.ndarray, float]:
    if permutations < 1:
        raise InvalidInputError("need at least one permutation")
    if d < 1:
        raise InvalidInputError("need at least one player")
    perms = sample_permutations(d, permutations, seed)
    ranks = np.argsort(perms, axis=1)
    # prefix[p, k] = players at positions < k in permutation p
    prefix = ranks[:, None, :] < np.arange(d + 1)[None, :, None]
    flat = prefix.reshape(-1, d)
    if d <= 62:
        uniq_codes, inverse = np.unique(masks_to_codes(flat), return_inverse=True)
        uniq = ((uniq_codes[:, None] >> np.arange(d)) & 1).astype(bool)
    else:
        uniq, inverse = np.unique(flat, axis=0, return_inverse=True)
    uvals = evaluate_game(v, uniq)
    endpoints = evaluate_game(v, np.array([np.zeros(d, bool), np.ones(d, bool)]))
    if min_size > 0:
        uvals = np.where(uniq.sum(axis=1) < min_size, 0.0, uvals)
    vals = uvals[inverse.reshape(-1)].reshape(permutations, d + 1)
    contrib = np.diff(vals, axis=1)
    phi_sum = np.zeros((permutations, d))
    np.put_along_axis(phi_sum, perms, contrib, axis=1)
    phi = phi_sum.mean(axis=0)
    residual = float(phi.sum() - (endpoints[1] - endpoints[0]))
    return phi, residual


def permutation_shapley(v: GameLike, d: int, permutations: int, seed: int) -> AttributionVector:
    """Monte-Carlo Shapley: average marginal contributions along random orderings."""
    phi, residual = _permutation_estimate(v, d, permutations, seed, 0)
    return AttributionVector(phi, "permutation", permutations, seed, residual)


def truncated_permutation_jbshap(v: GameLike, d: int, permutations: int, frac: float,
                                 seed: int) -> AttributionVector:
    """Permutation sampler with ``v(S) := 0`` whenever ``|S| < ceil(frac * d)``.

    Uses the same permutation stream as :func:`permutation_shapley`. The
    substitution is literal; no correction for the zeroed mass is applied.
    """
    k = _min_coalition_size(frac, d)
    phi, residual = _permutation_estimate(v, d, permutations, seed, k)
    return AttributionVector(phi, "truncated", permutations, seed, residual, {"frac": frac, "min_size": k})


@dataclass
class GlobalAttribution:
    values: np.ndarray
    normalized: bool
    count: int

    def to_dict(self) -> dict:
        return {"values": self.values.tolist(), "normalized": self.normalized, "count": self.count}


def global_shapley(attrs: Sequence[AttributionVector], normalize: bool = True) -> GlobalAttribution:
    """Sum attributions over explicands; optionally scale so that ``sum |phi_i| = 1``."""
    if not attrs:
        raise InvalidInputError("need at least one attribution vector")
    d = len(attrs[0])
    if any(len(a) != d for a in attrs):
        raise InvalidInputError("attribution vectors differ in length")
    total = np.sum([a.phi for a in attrs], axis=0)
    if normalize:
        scale = np.abs(total).sum()
        if not scale > 0:
            raise DegenerateNormalizationError("cannot normalise an all-zero attribution")
        total = total / scale
    return GlobalAttribution(total, normalize, len(attrs))
