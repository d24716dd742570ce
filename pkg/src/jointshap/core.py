"""Domain types shared by every module.

Points are plain ``float64`` numpy arrays; :func:`as_point` validates and
freezes them. Models (:class:`ScalarField`) and densities
(:class:`DensityField`) are batched callables: they take an ``(n, d)`` array
and return ``(n,)`` values, and a single 1-d point is accepted as well.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Iterator, Optional, Sequence, Union

import numpy as np

from .errors import CapacityError, ConfigError, InvalidInputError

MAX_ENUMERATE_DIM = 25


def as_point(values, d: Optional[int] = None) -> np.ndarray:
    """Validate ``values`` as a finite 1-d feature vector and return a read-only copy."""
    arr = np.array(values, dtype=float).reshape(-1)
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"non-finite entry in data point {arr.tolist()}")
    if d is not None and arr.shape[0] != d:
        raise InvalidInputError(f"expected dimension {d}, got {arr.shape[0]}")
    arr.setflags(write=False)
    return arr


def as_batch(X) -> tuple[np.ndarray, bool]:
    """Return ``(X as 2-d array, was_single_point)``."""
    arr = np.asarray(X, dtype=float)
    if arr.ndim == 1:
        return arr[None, :], True
    if arr.ndim != 2:
        raise InvalidInputError(f"expected 1-d or 2-d input, got shape {arr.shape}")
    return arr, False


# ---------------------------------------------------------------------------
# coalitions


@dataclass(frozen=True)
class Coalition:
    """A subset of feature indices ``{0..dim-1}``, stored as a sorted tuple."""

    members: tuple[int, ...]
    dim: int

    def __post_init__(self):
        members = tuple(sorted(int(i) for i in self.members))
        if len(set(members)) != len(members):
            raise InvalidInputError(f"duplicate members in coalition {members}")
        if any(i < 0 or i >= self.dim for i in members):
            raise InvalidInputError(f"coalition {members} out of range for d={self.dim}")
        object.__setattr__(self, "members", members)

    @classmethod
    def of(cls, members: Sequence[int], dim: int) -> "Coalition":
        return cls(tuple(members), dim)

    @classmethod
    def empty(cls, dim: int) -> "Coalition":
        return cls((), dim)

    @classmethod
    def full(cls, dim: int) -> "Coalition":
        return cls(tuple(range(dim)), dim)

    @classmethod
    def from_mask(cls, mask: int, dim: int) -> "Coalition":
        return cls(tuple(i for i in range(dim) if (mask >> i) & 1), dim)

    @classmethod
    def from_bool(cls, flags) -> "Coalition":
        flags = np.asarray(flags, dtype=bool)
        return cls(tuple(np.flatnonzero(flags).tolist()), flags.shape[0])

    @property
    def mask(self) -> int:
        m = 0
        for i in self.members:
            m |= 1 << i
        return m

    def as_bool(self) -> np.ndarray:
        out = np.zeros(self.dim, dtype=bool)
        out[list(self.members)] = True
        return out

    def complement(self) -> "Coalition":
        return complement(self)

    def add(self, i: int) -> "Coalition":
        return Coalition(tuple(set(self.members) | {i}), self.dim)

    def __contains__(self, i) -> bool:
        return i in self.members

    def __len__(self) -> int:
        return len(self.members)

    def __iter__(self) -> Iterator[int]:
        return iter(self.members)

    def __repr__(self) -> str:
        return "{" + ",".join(map(str, self.members)) + "}"


CoalitionLike = Union[Coalition, Sequence[int], np.ndarray]


def complement(s: Coalition) -> Coalition:
    return Coalition(tuple(i for i in range(s.dim) if i not in s.members), s.dim)


def enumerate_coalitions(d: int) -> list[Coalition]:
    """All ``2**d`` subsets ordered by size, then lexicographically."""
    if d < 0:
        raise InvalidInputError("dimension must be non-negative")
    if d > MAX_ENUMERATE_DIM:
        raise CapacityError(f"refusing to enumerate 2^{d} coalitions (limit d={MAX_ENUMERATE_DIM})")
    return [
        Coalition(members, d)
        for k in range(d + 1)
        for members in itertools.combinations(range(d), k)
    ]


def all_masks(d: int) -> np.ndarray:
    """Boolean ``(2**d, d)`` matrix whose row ``m`` is the bitmask ``m``."""
    if d > MAX_ENUMERATE_DIM:
        raise CapacityError(f"refusing to enumerate 2^{d} coalitions (limit d={MAX_ENUMERATE_DIM})")
    codes = np.arange(2**d, dtype=np.int64)
    return ((codes[:, None] >> np.arange(d)) & 1).astype(bool)


def masks_to_codes(masks: np.ndarray) -> np.ndarray:
    masks = np.asarray(masks, dtype=bool)
    return masks.astype(np.int64) @ (np.int64(1) << np.arange(masks.shape[1], dtype=np.int64))


def to_mask_array(s: CoalitionLike, d: int) -> np.ndarray:
    """Coerce a coalition (object, index list or boolean vector) into a bool vector."""
    if isinstance(s, Coalition):
        if s.dim != d:
            raise InvalidInputError(f"coalition dimension {s.dim} does not match d={d}")
        return s.as_bool()
    arr = np.asarray(s)
    if arr.dtype == bool:
        if arr.shape != (d,):
            raise InvalidInputError(f"mask shape {arr.shape} does not match d={d}")
        return arr.copy()
    return Coalition(tuple(int(i) for i in arr.reshape(-1)), d).as_bool()


def splice(x, x_prime, s: CoalitionLike) -> np.ndarray:
    """Compose ``(x_S; x'_{S-bar})``: coordinates in ``s`` from ``x``, the rest from ``x_prime``."""
    x = np.asarray(x, dtype=float)
    x_prime = np.asarray(x_prime, dtype=float)
    if x.shape != x_prime.shape or x.ndim != 1:
        raise InvalidInputError(f"splice dimension mismatch: {x.shape} vs {x_prime.shape}")
    mask = to_mask_array(s, x.shape[0])
    return np.where(mask, x, x_prime)


def splice_many(x: np.ndarray, x_prime: np.ndarray, masks: np.ndarray) -> np.ndarray:
    """Row-wise splice for a ``(n, d)`` boolean mask matrix."""
    return np.where(masks, x[None, :], x_prime[None, :])


# ---------------------------------------------------------------------------
# datasets


@dataclass(frozen=True)
class Dataset:
    rows: np.ndarray
    names: Optional[tuple[str, ...]] = None

    def __post_init__(self):
        rows = np.array(self.rows, dtype=float)
        if rows.ndim == 1:
            rows = rows[:, None]
        if rows.ndim != 2:
            raise InvalidInputError(f"dataset rows must be 2-d, got shape {rows.shape}")
        if not np.all(np.isfinite(rows)):
            raise InvalidInputError("dataset contains non-finite values")
        if self.names is not None and len(self.names) != rows.shape[1]:
            raise InvalidInputError("feature names do not match column count")
        rows.setflags(write=False)
        object.__setattr__(self, "rows", rows)
        if self.names is not None:
            object.__setattr__(self, "names", tuple(self.names))

    @property
    def m(self) -> int:
        return self.rows.shape[0]

    @property
    def d(self) -> int:
        return self.rows.shape[1]

    def __len__(self) -> int:
        return self.m

    def require_nonempty(self) -> None:
        if self.m == 0:
            raise InvalidInputError("dataset is empty")


# ---------------------------------------------------------------------------
# scalar fields (models)


class ScalarField:
    """Deterministic model ``f: R^d -> R`` evaluated on batches."""

    kind = "abstract"

    def __init__(self, d: int):
        self.d = d

    def _eval(self, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def __call__(self, X):
        X, single = as_batch(X)
        if X.shape[1] != self.d:
            raise InvalidInputError(f"{self.kind} field expects d={self.d}, got {X.shape[1]}")
        out = np.asarray(self._eval(X), dtype=float).reshape(-1)
        return float(out[0]) if single else out

    def __add__(self, other: "ScalarField") -> "ScalarField":
        return ComposedField([(1.0, self), (1.0, other)])

    def __mul__(self, c: float) -> "ScalarField":
        return ComposedField([(float(c), self)])

    __rmul__ = __mul__


class LinearField(ScalarField):
    kind = "linear"

    def __init__(self, weights, bias: float = 0.0):
        self.weights = as_point(weights)
        self.bias = float(bias)
        super().__init__(self.weights.shape[0])

    def _eval(self, X):
        return X @ self.weights + self.bias


class FunctionField(ScalarField):
    """Wrap a vectorised callable ``g(X) -> (n,)``."""

    kind = "function"

    def __init__(self, d: int, fn: Callable[[np.ndarray], np.ndarray], name: str = "function"):
        super().__init__(d)
        self.fn = fn
        self.name = name

    def _eval(self, X):
        return self.fn(X)


class ConstantField(ScalarField):
    kind = "constant"

    def __init__(self, d: int, value: float):
        super().__init__(d)
        self.value = float(value)

    def _eval(self, X):
        return np.full(X.shape[0], self.value)


def _lookup_indices(supports: Sequence[np.ndarray], X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Map each coordinate of ``X`` to its position in the support; returns (indices, on_support)."""
    n, d = X.shape
    idx = np.zeros((n, d), dtype=np.int64)
    ok = np.ones(n, dtype=bool)
    for j, sup in enumerate(supports):
        order = np.argsort(sup)
        sorted_sup = sup[order]
        pos = np.searchsorted(sorted_sup, X[:, j])
        pos_c = np.clip(pos, 0, len(sup) - 1)
        hit = sorted_sup[pos_c] == X[:, j]
        ok &= hit
        idx[:, j] = order[pos_c]
    return idx, ok


def _check_supports(supports, shape) -> list[np.ndarray]:
    sups = [np.asarray(s, dtype=float).reshape(-1) for s in supports]
    if tuple(len(s) for s in sups) != tuple(shape):
        raise InvalidInputError(f"table shape {tuple(shape)} does not match supports")
    for s in sups:
        if len(np.unique(s)) != len(s):
            raise InvalidInputError("support values must be distinct")
    return sups


class TableField(ScalarField):
    """Lookup table on a finite product grid; ``values[i0, i1, ...]`` is ``f`` at
    ``(supports[0][i0], supports[1][i1], ...)``."""

    kind = "table"

    def __init__(self, supports, values):
        values = np.array(values, dtype=float)
        self.supports = _check_supports(supports, values.shape)
        self.values = values
        self.values.setflags(write=False)
        super().__init__(len(self.supports))

    def _eval(self, X):
        idx, ok = _lookup_indices(self.supports, X)
        if not np.all(ok):
            bad = X[~ok][0].tolist()
            raise InvalidInputError(f"point {bad} is off the table support")
        return self.values[tuple(idx.T)]


class ComposedField(ScalarField):
    """Linear combination ``sum_k c_k f_k``."""

    kind = "composed"

    def __init__(self, terms: Sequence[tuple[float, ScalarField]]):
        if not terms:
            raise InvalidInputError("composed field needs at least one term")
        d = terms[0][1].d
        if any(t.d != d for _, t in terms):
            raise InvalidInputError("composed field terms disagree on dimension")
        super().__init__(d)
        self.terms = [(float(c), t) for c, t in terms]

    def _eval(self, X):
        out = np.zeros(X.shape[0])
        for c, t in self.terms:
            out = out + c * t(X)
        return out


class ProductField(ScalarField):
    """Pointwise ``f(x) * p(x)``; lets a density act as a model term."""

    kind = "product"

    def __init__(self, f: ScalarField, p: "DensityField"):
        super().__init__(f.d)
        self.f = f
        self.p = p

    def _eval(self, X):
        return self.f(X) * self.p(X)


# ---------------------------------------------------------------------------
# densities


class DensityField:
    """Possibly unnormalised density ``p: R^d -> [0, inf)`` evaluated on batches."""

    kind = "abstract"
    normalized = False

    def __init__(self, d: int):
        self.d = d

    def _eval(self, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def __call__(self, X):
        X, single = as_batch(X)
        if X.shape[1] != self.d:
            raise InvalidInputError(f"{self.kind} density expects d={self.d}, got {X.shape[1]}")
        out = np.asarray(self._eval(X), dtype=float).reshape(-1)
        return float(out[0]) if single else out


class UniformDensity(DensityField):
    """``p == c`` everywhere (unnormalised)."""

    kind = "uniform"

    def __init__(self, d: int, value: float = 1.0):
        if value < 0:
            raise InvalidInputError("density value must be non-negative")
        super().__init__(d)
        self.value = float(value)

    def _eval(self, X):
        return np.full(X.shape[0], self.value)


class TableDensity(DensityField):
    """Non-negative table on a product grid; zero off the grid."""

    kind = "table"

    def __init__(self, supports, values):
        values = np.array(values, dtype=float)
        if np.any(values < 0) or not np.all(np.isfinite(values)):
            raise InvalidInputError("density table must be finite and non-negative")
        self.supports = _check_supports(supports, values.shape)
        self.values = values
        self.values.setflags(write=False)
        self.normalized = bool(abs(values.sum() - 1.0) < 1e-12)
        super().__init__(len(self.supports))

    def _eval(self, X):
        idx, ok = _lookup_indices(self.supports, X)
        out = np.zeros(X.shape[0])
        out[ok] = self.values[tuple(idx[ok].T)]
        return out


class MixtureDensity(DensityField):
    """Conic combination ``sum_k c_k p_k`` with ``c_k >= 0``."""

    kind = "mixture"

    def __init__(self, terms: Sequence[tuple[float, DensityField]]):
        if not terms or any(c < 0 for c, _ in terms):
            raise InvalidInputError("mixture weights must be non-negative")
        super().__init__(terms[0][1].d)
        self.terms = [(float(c), p) for c, p in terms]

    def _eval(self, X):
        out = np.zeros(X.shape[0])
        for c, p in self.terms:
            out = out + c * p(X)
        return out


class FunctionDensity(DensityField):
    kind = "function"

    def __init__(self, d: int, fn: Callable[[np.ndarray], np.ndarray], name: str = "function"):
        super().__init__(d)
        self.fn = fn
        self.name = name

    def _eval(self, X):
        out = np.asarray(self.fn(X), dtype=float)
        if np.any(out < 0):
            raise InvalidInputError(f"density {self.name} produced a negative value")
        return out


# ---------------------------------------------------------------------------
# game context


@dataclass(frozen=True)
class BaselineDistribution:
    """Finite baseline distribution ``p_b``: points with non-negative weights summing to one."""

    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        pts = np.array(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[0] == 0:
            raise InvalidInputError("baseline distribution needs a non-empty (k, d) array")
        if not np.all(np.isfinite(pts)):
            raise InvalidInputError("baseline points must be finite")
        w = np.array(self.weights, dtype=float).reshape(-1)
        if w.shape[0] != pts.shape[0]:
            raise InvalidInputError("one weight per baseline point is required")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
            raise InvalidInputError("baseline weights must be non-negative and sum to 1")
        pts.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)

    @classmethod
    def uniform(cls, points) -> "BaselineDistribution":
        pts = np.asarray(points, dtype=float)
        return cls(pts, np.full(pts.shape[0], 1.0 / pts.shape[0]))

    @classmethod
    def grid(cls, supports: Sequence[Sequence[float]]) -> "BaselineDistribution":
        """Uniform weight ``C0 = 1/prod(|support_i|)`` over a full product grid."""
        pts = np.array(list(itertools.product(*supports)), dtype=float)
        return cls.uniform(pts)

    @property
    def d(self) -> int:
        return self.points.shape[1]

    def __len__(self) -> int:
        return self.points.shape[0]

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        idx = rng.choice(len(self), size=n, p=self.weights)
        return self.points[idx]


@dataclass(frozen=True)
class GameContext:
    """Bundle ``(f, p, x, baseline)`` from which every value function is derived."""

    f: ScalarField
    x: np.ndarray
    baseline: Union[np.ndarray, BaselineDistribution, None] = None
    p: Optional[DensityField] = None
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        x = as_point(self.x)
        object.__setattr__(self, "x", x)
        d = x.shape[0]
        if self.f.d != d:
            raise InvalidInputError(f"model dimension {self.f.d} != explicand dimension {d}")
        if self.p is not None and self.p.d != d:
            raise InvalidInputError(f"density dimension {self.p.d} != explicand dimension {d}")
        b = self.baseline
        if isinstance(b, BaselineDistribution):
            if b.d != d:
                raise InvalidInputError("baseline distribution dimension mismatch")
        elif b is not None:
            object.__setattr__(self, "baseline", as_point(b, d))

    @property
    def d(self) -> int:
        return self.x.shape[0]

    @property
    def fixed_baseline(self) -> np.ndarray:
        if self.baseline is None or isinstance(self.baseline, BaselineDistribution):
            raise ConfigError("this value function needs a fixed baseline point")
        return self.baseline

    @property
    def baseline_distribution(self) -> BaselineDistribution:
        if self.baseline is None:
            raise ConfigError("this value function needs a baseline")
        if isinstance(self.baseline, BaselineDistribution):
            return self.baseline
        return BaselineDistribution(self.baseline[None, :], np.ones(1))

    @property
    def density(self) -> DensityField:
        if self.p is None:
            raise ConfigError("this value function needs a density p")
        return self.p

    def replace(self, **changes) -> "GameContext":
        kw = dict(f=self.f, x=self.x, baseline=self.baseline, p=self.p, meta=self.meta)
        kw.update(changes)
        return GameContext(**kw)


def shapley_weight(s: int, d: int) -> float:
    """``s!(d-s-1)!/d!`` as ``1 / (d * C(d-1, s))``; exact integer arithmetic, one rounding."""
    return 1.0 / (d * math.comb(d - 1, s))
