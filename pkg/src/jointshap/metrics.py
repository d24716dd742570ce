"""Attribution quality metrics: deletion curves, their AUC, and rank-correlation
sensitivity-n."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
from scipy.stats import rankdata

from .core import GameContext, splice_many
from .errors import InvalidInputError, UndefinedCorrelationError
from .shapley import AttributionVector, evaluate_game

TARGETS = ("f", "fp")


@dataclass(frozen=True)
class DeletionCurve:
    fractions: np.ndarray
    values: np.ndarray
    target: str
    removed: tuple = ()

    def __post_init__(self):
        q = np.asarray(self.fractions, dtype=float)
        if q.ndim != 1 or q.size == 0 or q[0] != 0.0 or np.any(np.diff(q) <= 0) or q[-1] > 1.0:
            raise InvalidInputError("fractions must start at 0 and increase strictly within [0, 1]")
        object.__setattr__(self, "fractions", q)
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["fraction", "value"])
        for q, v in zip(self.fractions, self.values):
            w.writerow([repr(float(q)), repr(float(v))])
        return buf.getvalue()


def removal_order(phi: np.ndarray, order: str = "signed") -> np.ndarray:
    """Feature indices from most to least important; ties go to the lower index."""
    phi = np.asarray(phi, dtype=float)
    key = phi if order == "signed" else np.abs(phi)
    if order not in ("signed", "abs"):
        raise InvalidInputError("order must be 'signed' or 'abs'")
    # lexsort: last key is primary
    return np.lexsort((np.arange(phi.size), -key))


def deletion_curve(attr: AttributionVector, ctx: GameContext, fractions: Sequence[float],
                   target: str = "f", order: str = "signed") -> DeletionCurve:
    """Replace the top ``floor(q*d)`` features with baseline values and evaluate the target."""
    if target not in TARGETS:
        raise InvalidInputError(f"target must be one of {TARGETS}")
    d = ctx.d
    if len(attr) != d:
        raise InvalidInputError("attribution length does not match the explicand")
    q = np.asarray(fractions, dtype=float)
    ranked = removal_order(attr.phi, order)
    counts = np.floor(q * d + 1e-12).astype(int)
    keep = np.ones((q.size, d), dtype=bool)
    for r, k in enumerate(counts):
        keep[r, ranked[:k]] = False
    Z = splice_many(ctx.x, ctx.fixed_baseline, keep)
    vals = ctx.f(Z)
    if target == "fp":
        vals = vals * ctx.density(Z)
    return DeletionCurve(q, vals, target, tuple(int(i) for i in ranked))


class AUC(NamedTuple):
    value: float
    normalized: bool


def auc(curve: DeletionCurve, normalize: bool = True) -> AUC:
    """Trapezoidal area under the curve, divided by the q=0 value when it is nonzero."""
    if curve.fractions.size < 2:
        raise InvalidInputError("need at least two points")
    vals = curve.values
    scaled = normalize and vals[0] != 0
    if scaled:
        vals = vals / vals[0]
    area = float(np.sum(np.diff(curve.fractions) * (vals[1:] + vals[:-1]) / 2.0))
    return AUC(area, bool(scaled))


def spearman(a, b) -> float:
    """Pearson correlation of average-tie ranks."""
    a = np.asarray(a, dtype=float).reshape(-1)
    b = np.asarray(b, dtype=float).reshape(-1)
    if a.shape != b.shape or a.size < 2:
        raise InvalidInputError("need two equal-length series of length >= 2")
    ra = rankdata(a) - (a.size + 1) / 2.0
    rb = rankdata(b) - (b.size + 1) / 2.0
    den = np.sqrt(np.dot(ra, ra) * np.dot(rb, rb))
    if den == 0:
        raise UndefinedCorrelationError("a series has constant ranks")
    return float(np.dot(ra, rb) / den)


def sensitivity_n(attr: AttributionVector, v, d: int, n_fracs: Sequence[float], trials: int,
                  seed: int) -> float:
    """Mean Spearman correlation between ``sum_{i in R} phi_i`` and ``v([d]) - v([d] minus R)``
    over random removal sets ``R`` of size ``floor(frac*d)``, one correlation per fraction."""
    if trials < 3:
        raise InvalidInputError("need at least three trials")
    if len(attr) != d:
        raise InvalidInputError("attribution length does not match d")
    rng = np.random.default_rng(seed)
    full = float(evaluate_game(v, np.ones((1, d), dtype=bool))[0])
    scores = []
    for frac in n_fracs:
        k = int(np.floor(frac * d + 1e-12))
        if not 1 <= k <= d:
            raise InvalidInputError(f"fraction {frac} removes {k} of {d} features")
        # sorted so a repeated set always sums its attributions in the same order
        removed = np.sort(np.array([rng.permutation(d)[:k] for _ in range(trials)]), axis=1)
        keep = np.ones((trials, d), dtype=bool)
        np.put_along_axis(keep, removed, False, axis=1)
        drops = full - evaluate_game(v, keep)
        sums = attr.phi[removed].sum(axis=1)
        scores.append(spearman(sums, drops))
    return float(np.mean(scores))
