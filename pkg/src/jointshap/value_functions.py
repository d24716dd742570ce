"""Set value functions ``v(S)`` derived from a :class:`GameContext`.

Every value function evaluates a boolean ``(n, d)`` matrix of coalition masks
in one call (``evaluate``) and a single coalition via ``__call__``. Seeded
estimators derive a private RNG stream from ``(seed, S)`` so results do not
depend on evaluation order.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, replace
from typing import Optional, Sequence, Union

import numpy as np

from .core import (
    Coalition,
    CoalitionLike,
    Dataset,
    GameContext,
    ScalarField,
    all_masks,
    as_point,
    masks_to_codes,
    splice_many,
    to_mask_array,
)
from .errors import ConfigError, DegenerateSupportError, InvalidInputError
from .learners import FeedForwardNet, TrainerConfig, net_init, sgd_train


def mask_rng(seed: int, mask: np.ndarray) -> np.random.Generator:
    key = int.from_bytes(np.packbits(np.asarray(mask, dtype=bool), bitorder="little").tobytes(), "little")
    return np.random.default_rng([int(seed), key, int(mask.shape[0])])


class ValueFunction:
    kind = "abstract"

    def __init__(self, ctx: Optional[GameContext], d: Optional[int] = None):
        self.ctx = ctx
        self.d = ctx.d if ctx is not None else int(d)

    def evaluate(self, masks: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def __call__(self, s: CoalitionLike) -> float:
        return float(self.evaluate(to_mask_array(s, self.d)[None, :])[0])

    def metadata(self) -> dict:
        return {}


class BaselineValue(ValueFunction):
    """Bshap (``f`` at the splice) or, with ``weighted``, JBshap (``f * p`` at the splice)."""

    def __init__(self, ctx: GameContext, weighted: bool):
        super().__init__(ctx)
        self.baseline = ctx.fixed_baseline
        self.weighted = weighted
        self.p = ctx.density if weighted else None
        self.kind = "jbshap" if weighted else "bshap"

    def evaluate(self, masks):
        Z = splice_many(self.ctx.x, self.baseline, np.asarray(masks, dtype=bool))
        out = self.ctx.f(Z)
        if self.weighted:
            out = out * self.p(Z)
        return out


class RandomBaselineValue(ValueFunction):
    """RBshap / RJBshap: the (weighted) splice value averaged over ``x' ~ p_b``.

    Finite baseline lists no longer than ``n`` are summed exactly.
    """

    def __init__(self, ctx: GameContext, weighted: bool, n: int = 100, seed: int = 0):
        super().__init__(ctx)
        if n <= 0:
            raise InvalidInputError("sample count n must be positive")
        self.dist = ctx.baseline_distribution
        self.weighted = weighted
        self.p = ctx.density if weighted else None
        self.n = int(n)
        self.seed = int(seed)
        self.exact = len(self.dist) <= self.n
        self.kind = "rjbshap" if weighted else "rbshap"

    def _splice_value(self, Z):
        out = self.ctx.f(Z)
        if self.weighted:
            out = out * self.p(Z)
        return out

    def evaluate(self, masks):
        masks = np.asarray(masks, dtype=bool)
        x = self.ctx.x
        if self.exact:
            pts, w = self.dist.points, self.dist.weights
            Z = np.where(masks[:, None, :], x[None, None, :], pts[None, :, :])
            vals = self._splice_value(Z.reshape(-1, self.d)).reshape(masks.shape[0], len(pts))
            return vals @ w
        out = np.empty(masks.shape[0])
        for r, m in enumerate(masks):
            xb = self.dist.sample(self.n, mask_rng(self.seed, m))
            out[r] = self._splice_value(np.where(m, x, xb)).mean()
        return out


class CESEmpirical(ValueFunction):
    """Mean of ``f`` over dataset rows with ``row_S == x_S``.

    ``weights`` are optional row multiplicities. With no matching row the
    unconditional dataset mean is used and the coalition is counted in
    ``metadata()['sparse_match']``.
    """

    kind = "ces_empirical"

    def __init__(self, ctx: GameContext, data: Dataset, weights=None):
        super().__init__(ctx)
        data.require_nonempty()
        if data.d != self.d:
            raise InvalidInputError("dataset dimension does not match the explicand")
        self.rows = data.rows
        self.w = np.ones(data.m) if weights is None else np.asarray(weights, dtype=float)
        if self.w.shape != (data.m,) or np.any(self.w < 0) or self.w.sum() <= 0:
            raise InvalidInputError("row weights must be non-negative with positive total")
        self.fvals = ctx.f(self.rows)
        self.mean = float(self.w @ self.fvals / self.w.sum())
        self.sparse: set[bytes] = set()

    def match_count(self, s: CoalitionLike) -> int:
        m = to_mask_array(s, self.d)
        return int(np.all(self.rows[:, m] == self.ctx.x[m], axis=1).sum())

    def evaluate(self, masks):
        masks = np.asarray(masks, dtype=bool)
        eq = self.rows[None, :, :] == self.ctx.x[None, None, :]
        match = np.all(eq | ~masks[:, None, :], axis=2)
        mass = match.astype(float) @ self.w
        out = np.full(masks.shape[0], self.mean)
        hit = mass > 0
        out[hit] = (match[hit].astype(float) @ (self.w * self.fvals)) / mass[hit]
        for m in masks[~hit]:
            self.sparse.add(np.packbits(m).tobytes())
        return out

    def metadata(self):
        return {"sparse_match": len(self.sparse)}


@dataclass(frozen=True)
class DiscreteSupport:
    values: tuple

    def __init__(self, values: Sequence[Sequence[float]]):
        object.__setattr__(self, "values", tuple(np.asarray(v, dtype=float).reshape(-1) for v in values))

    @property
    def d(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class BoxSupport:
    lo: np.ndarray
    hi: np.ndarray

    def __init__(self, lo, hi):
        lo, hi = as_point(lo), as_point(hi)
        if lo.shape != hi.shape or np.any(hi < lo):
            raise InvalidInputError("box bounds must satisfy lo <= hi")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def d(self) -> int:
        return self.lo.shape[0]


class CESSample(ValueFunction):
    """Self-normalised importance estimate of the conditional expectation.

    Free coordinates are drawn uniformly from ``support``;
    ``v(S) = sum_k f(z_k) p(z_k) / sum_k p(z_k)``. A discrete support whose
    free grid has at most ``n`` points is enumerated exactly, which is the exact
    conditional expectation under ``p``.
    """

    kind = "ces_sample"

    def __init__(self, ctx: GameContext, support: Union[DiscreteSupport, BoxSupport],
                 n: int = 100, seed: int = 0):
        super().__init__(ctx)
        if n <= 0:
            raise InvalidInputError("sample count n must be positive")
        if support.d != self.d:
            raise InvalidInputError("support dimension does not match the explicand")
        self.p = ctx.density
        self.support = support
        self.n = int(n)
        self.seed = int(seed)

    def _free_points(self, m: np.ndarray) -> np.ndarray:
        free = np.flatnonzero(~m)
        sup = self.support
        if isinstance(sup, DiscreteSupport):
            sizes = [len(sup.values[j]) for j in free]
            if math.prod(sizes) <= self.n:
                grid = np.array(list(itertools.product(*(sup.values[j] for j in free))), dtype=float)
                Z = np.tile(self.ctx.x, (grid.shape[0], 1))
                Z[:, free] = grid
                return Z
            rng = mask_rng(self.seed, m)
            Z = np.tile(self.ctx.x, (self.n, 1))
            for j in free:
                Z[:, j] = rng.choice(sup.values[j], size=self.n)
            return Z
        rng = mask_rng(self.seed, m)
        Z = np.tile(self.ctx.x, (self.n, 1))
        Z[:, free] = rng.uniform(sup.lo[free], sup.hi[free], size=(self.n, free.size))
        return Z

    def evaluate(self, masks):
        masks = np.asarray(masks, dtype=bool)
        out = np.empty(masks.shape[0])
        for r, m in enumerate(masks):
            if m.all():
                out[r] = self.ctx.f(self.ctx.x)
                continue
            Z = self._free_points(m)
            w = self.p(Z)
            total = w.sum()
            if not total > 0:
                raise DegenerateSupportError(f"all importance weights are zero for coalition {np.flatnonzero(m).tolist()}")
            out[r] = float(w @ self.ctx.f(Z) / total)
        return out


class TableGame(ValueFunction):
    """A game given directly as ``values[code]`` for every bitmask ``code``."""

    kind = "table"

    def __init__(self, values, d: int):
        super().__init__(None, d)
        self.values = np.asarray(values, dtype=float).reshape(-1)
        if self.values.shape[0] != 2**d:
            raise InvalidInputError(f"table game needs 2^{d} values")

    @classmethod
    def from_function(cls, fn, d: int) -> "TableGame":
        return cls([fn(Coalition.from_mask(c, d)) for c in range(2**d)], d)

    def evaluate(self, masks):
        return self.values[masks_to_codes(masks)]


class WeightedGame(ValueFunction):
    """Pointwise combination ``sum_k c_k v_k`` of value functions."""

    kind = "combination"

    def __init__(self, terms: Sequence[tuple[float, ValueFunction]]):
        super().__init__(None, terms[0][1].d)
        self.terms = [(float(c), v) for c, v in terms]

    def evaluate(self, masks):
        return sum(c * v.evaluate(masks) for c, v in self.terms)


# ---------------------------------------------------------------------------
# supervised surrogate


def shapley_mask_sample(d: int, n: int, rng: np.random.Generator) -> np.ndarray:
    """``n`` coalitions from the Shapley law: prefix of a uniform permutation at a uniform cut."""
    perms = rng.permuted(np.tile(np.arange(d), (n, 1)), axis=1)
    cuts = rng.integers(0, d + 1, size=n)
    masks = np.zeros((n, d), dtype=bool)
    ranks = np.argsort(perms, axis=1)
    masks[:] = ranks < cuts[:, None]
    return masks


def shapley_mask_probability(masks: np.ndarray) -> np.ndarray:
    masks = np.asarray(masks, dtype=bool)
    d = masks.shape[1]
    sizes = masks.sum(axis=1)
    return np.array([1.0 / ((d + 1) * math.comb(d, int(s))) for s in sizes])


class SurrogateValueFunction:
    """Trained network ``g(x_S, S)``.

    ``encoding='masked'``: input is ``[x with masked slots zeroed, mask bits]``.
    ``encoding='onehot'``: input is a one-hot code over the ``(S, x_S)`` keys
    seen in training (a lookup-table surrogate); unseen keys map to zeros.
    """

    def __init__(self, net: FeedForwardNet, d: int, encoding: str = "masked",
                 vocab: Optional[dict] = None):
        if encoding not in ("masked", "onehot"):
            raise InvalidInputError(f"unknown mask encoding {encoding!r}")
        self.net = net
        self.d = d
        self.encoding = encoding
        self.vocab = dict(vocab or {})
        width = 2 * d if encoding == "masked" else len(self.vocab)
        if net.d != width:
            raise InvalidInputError(f"surrogate input width {net.d} does not match encoding width {width}")

    @staticmethod
    def key(x_row: np.ndarray, mask: np.ndarray) -> tuple:
        return (tuple(np.flatnonzero(mask).tolist()), tuple(x_row[mask].tolist()))

    def encode(self, X: np.ndarray, masks: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        masks = np.atleast_2d(np.asarray(masks, dtype=bool))
        if X.shape[1] != self.d or masks.shape[1] != self.d:
            raise InvalidInputError(f"surrogate expects d={self.d}")
        if X.shape[0] == 1 and masks.shape[0] > 1:
            X = np.broadcast_to(X, masks.shape)
        if self.encoding == "masked":
            return np.hstack([np.where(masks, X, 0.0), masks.astype(float)])
        E = np.zeros((masks.shape[0], len(self.vocab)))
        for r, (xr, m) in enumerate(zip(X, masks)):
            k = self.vocab.get(self.key(xr, m))
            if k is not None:
                E[r, k] = 1.0
        return E

    def predict(self, X, masks) -> np.ndarray:
        return self.net(self.encode(X, masks))

    def to_dict(self) -> dict:
        return {
            "kind": "surrogate",
            "d": self.d,
            "encoding": self.encoding,
            "vocab": [[list(k[0]), list(k[1]), v] for k, v in sorted(self.vocab.items(), key=lambda kv: kv[1])],
            "net": self.net.to_dict(),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "SurrogateValueFunction":
        vocab = {(tuple(s), tuple(vals)): int(k) for s, vals, k in doc.get("vocab", [])}
        return cls(FeedForwardNet.from_dict(doc["net"]), int(doc["d"]), doc["encoding"], vocab)


@dataclass
class SurrogateFit:
    surrogate: SurrogateValueFunction
    losses: list


def ces_supervised_fit(f: ScalarField, data: Dataset, trainer: TrainerConfig, seed: int,
                       encoding: str = "masked", masks: str = "shapley", n_masks: int = 32,
                       hidden: Sequence[int] = (64, 64)) -> SurrogateValueFunction:
    """Fit ``g`` minimising ``E_x E_S (f(x) - g(x_S, S))^2`` over the dataset.

    ``masks='shapley'`` draws ``n_masks`` coalitions per row from the Shapley
    law; ``masks='enumerate'`` uses every coalition for every row, weighted by
    its Shapley-law probability, so the loss is the exact expectation.
    """
    return _fit_surrogate(f, data, trainer, seed, encoding, masks, n_masks, hidden).surrogate


def _fit_surrogate(f, data, trainer, seed, encoding, masks, n_masks, hidden) -> SurrogateFit:
    data.require_nonempty()
    d = data.d
    ss = np.random.SeedSequence(seed)
    mask_seed, init_seed, shuffle_seed = (int(s.generate_state(1)[0]) for s in ss.spawn(3))
    targets_row = f(data.rows)
    if masks == "enumerate":
        M = all_masks(d)
        rows = np.repeat(data.rows, M.shape[0], axis=0)
        y = np.repeat(targets_row, M.shape[0])
        M = np.tile(M, (data.m, 1))
        w = shapley_mask_probability(M)
    elif masks == "shapley":
        rng = np.random.default_rng(mask_seed)
        M = shapley_mask_sample(d, data.m * n_masks, rng)
        rows = np.repeat(data.rows, n_masks, axis=0)
        y = np.repeat(targets_row, n_masks)
        w = None
    else:
        raise InvalidInputError(f"unknown mask scheme {masks!r}")
    vocab = {}
    if encoding == "onehot":
        for xr, m in zip(rows, M):
            vocab.setdefault(SurrogateValueFunction.key(xr, m), len(vocab))
        widths = (len(vocab), 1)
    else:
        widths = (2 * d, *hidden, 1)
    net = net_init(widths, init_seed)
    proto = SurrogateValueFunction(net, d, encoding, vocab)
    X = proto.encode(rows, M)
    fit = sgd_train(net, X, y, replace(trainer, loss="mse", seed=shuffle_seed), sample_weight=w)
    return SurrogateFit(SurrogateValueFunction(fit.net, d, encoding, vocab), fit.losses)


class CESSupervised(ValueFunction):
    """``v(S) = g(x_S, S)``; never reads ``x`` outside ``S``."""

    kind = "ces_supervised"

    def __init__(self, ctx: GameContext, surrogate: SurrogateValueFunction):
        super().__init__(ctx)
        if surrogate.d != self.d:
            raise InvalidInputError("surrogate dimension does not match the explicand")
        self.surrogate = surrogate

    def evaluate(self, masks):
        masks = np.asarray(masks, dtype=bool)
        return self.surrogate.predict(self.ctx.x[None, :], masks)


# ---------------------------------------------------------------------------
# functional API


def bshap(ctx: GameContext, s: CoalitionLike) -> float:
    return BaselineValue(ctx, weighted=False)(s)


def jbshap(ctx: GameContext, s: CoalitionLike) -> float:
    return BaselineValue(ctx, weighted=True)(s)


def rbshap(ctx: GameContext, s: CoalitionLike, n: int = 100, seed: int = 0) -> float:
    return RandomBaselineValue(ctx, weighted=False, n=n, seed=seed)(s)


def rjbshap(ctx: GameContext, s: CoalitionLike, n: int = 100, seed: int = 0) -> float:
    return RandomBaselineValue(ctx, weighted=True, n=n, seed=seed)(s)


def ces_empirical(ctx: GameContext, data: Dataset, s: CoalitionLike) -> float:
    return CESEmpirical(ctx, data)(s)


def ces_sample(ctx: GameContext, s: CoalitionLike, n: int = 100, seed: int = 0,
               support: Union[DiscreteSupport, BoxSupport, None] = None) -> float:
    if support is None:
        raise ConfigError("ces_sample needs a declared support (discrete values or a box)")
    return CESSample(ctx, support, n, seed)(s)


def ces_supervised(surrogate: SurrogateValueFunction, ctx: GameContext, s: CoalitionLike) -> float:
    return CESSupervised(ctx, surrogate)(s)


VALUE_FUNCTIONS = ("bshap", "rbshap", "jbshap", "rjbshap", "ces_empirical", "ces_sample", "ces_supervised")


def make_value_function(kind: str, ctx: GameContext, **params) -> ValueFunction:
    """Factory keyed by the value-function tag."""
    if kind == "bshap":
        return BaselineValue(ctx, weighted=False)
    if kind == "jbshap":
        return BaselineValue(ctx, weighted=True)
    if kind in ("rbshap", "rjbshap"):
        return RandomBaselineValue(ctx, weighted=kind == "rjbshap",
                                   n=params.get("n", 100), seed=params.get("seed", 0))
    if kind == "ces_empirical":
        return CESEmpirical(ctx, params["data"], params.get("weights"))
    if kind == "ces_sample":
        return CESSample(ctx, params["support"], params.get("n", 100), params.get("seed", 0))
    if kind == "ces_supervised":
        return CESSupervised(ctx, params["surrogate"])
    raise ConfigError(f"unknown value function {kind!r}; choose from {VALUE_FUNCTIONS}")
