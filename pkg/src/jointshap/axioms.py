"""Executable axiom checks for value functions on random discrete games.

All instances live on finite product grids, so maxima, marginals and
conditional expectations are exact enumerations. A builder maps a
:class:`GameInstance` to a value function; each check perturbs the instance
as the axiom requires and reports the largest violation it saw together with
a witness that reproduces it.
"""

from __future__ import annotations

import itertools
import json
import zlib
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np

from .core import (
    BaselineDistribution,
    DensityField,
    GameContext,
    ScalarField,
    TableDensity,
    TableField,
    all_masks,
)
from .shapley import exact_shapley
from .value_functions import (
    BaselineValue,
    CESEmpirical,
    CESSample,
    DiscreteSupport,
    RandomBaselineValue,
    ValueFunction,
)
from .core import Dataset


# ---------------------------------------------------------------------------
# instances


@dataclass(frozen=True)
class GameInstance:
    """``(f, p, x, x')`` on the product grid ``supports``."""

    supports: tuple
    f: ScalarField
    p: DensityField
    x: np.ndarray
    x_prime: np.ndarray
    meta: dict = field(default_factory=dict, compare=False)

    @property
    def d(self) -> int:
        return len(self.supports)

    def grid(self) -> np.ndarray:
        return np.array(list(itertools.product(*self.supports)), dtype=float)

    def context(self, baseline=None) -> GameContext:
        return GameContext(self.f, self.x, self.x_prime if baseline is None else baseline, self.p)

    def with_f(self, f: ScalarField) -> "GameInstance":
        return replace(self, f=f)

    def with_p(self, p: DensityField) -> "GameInstance":
        return replace(self, p=p)

    def to_dict(self) -> dict:
        def table(obj):
            if hasattr(obj, "values") and isinstance(obj.values, np.ndarray):
                return obj.values.tolist()
            return {"kind": obj.kind}

        return {
            "supports": [np.asarray(s).tolist() for s in self.supports],
            "f": table(self.f),
            "p": table(self.p),
            "x": self.x.tolist(),
            "x_prime": self.x_prime.tolist(),
            "meta": self.meta,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "GameInstance":
        sups = tuple(np.asarray(s, dtype=float) for s in doc["supports"])
        return cls(sups, TableField(sups, doc["f"]), TableDensity(sups, doc["p"]),
                   np.asarray(doc["x"], float), np.asarray(doc["x_prime"], float), doc.get("meta", {}))


class GameInstanceGenerator:
    """Deterministic stream of random table games.

    ``instance(t, kind)`` depends only on ``(seed, t, kind)``. Kinds:
    ``plain``; ``symmetric`` (f, p, x, x' symmetric in a pair ``(i, j)``);
    ``dummy`` (f and p ignore coordinate ``i``); ``dummy_function`` (only f
    ignores ``i``; p couples it to the others); ``asymmetric`` (symmetric
    tables but ``x_i != x_j``, which breaks the symmetry precondition).
    """

    def __init__(self, dims: Sequence[int] = (2, 3, 4), support_sizes: Sequence[int] = (2, 3),
                 seed: int = 0, p_range: tuple[float, float] = (0.05, 1.0)):
        self.dims = tuple(dims)
        self.support_sizes = tuple(support_sizes)
        self.seed = int(seed)
        self.p_range = p_range

    def rng(self, t: int, salt: str = "") -> np.random.Generator:
        return np.random.default_rng([self.seed, int(t), zlib.crc32(salt.encode())])

    def random_f_table(self, shape, rng) -> np.ndarray:
        return rng.normal(size=shape)

    def random_p_table(self, shape, rng) -> np.ndarray:
        return rng.uniform(*self.p_range, size=shape)

    def instance(self, t: int, kind: str = "plain") -> GameInstance:
        rng = self.rng(t, kind)
        d = int(rng.choice(self.dims))
        if kind in ("symmetric", "asymmetric", "dummy", "dummy_function") and d < 2:
            d = 2
        k = int(rng.choice(self.support_sizes))
        sups = tuple(np.arange(k, dtype=float) for _ in range(d))
        shape = (k,) * d
        F = self.random_f_table(shape, rng)
        P = self.random_p_table(shape, rng)
        x = rng.integers(0, k, size=d).astype(float)
        xp = rng.integers(0, k, size=d).astype(float)
        meta: dict = {"trial": int(t), "kind": kind, "seed": self.seed}
        if kind in ("symmetric", "asymmetric"):
            i, j = sorted(rng.choice(d, size=2, replace=False).tolist())
            F = 0.5 * (F + np.swapaxes(F, i, j))
            P = 0.5 * (P + np.swapaxes(P, i, j))
            x[j] = x[i]
            xp[j] = xp[i]
            if kind == "asymmetric":
                x[j] = (x[i] + 1) % k
            meta["pair"] = [i, j]
        elif kind in ("dummy", "dummy_function"):
            i = int(rng.integers(0, d))
            F = np.repeat(np.take(F, [0], axis=i), k, axis=i)
            if kind == "dummy":
                P = np.repeat(np.take(P, [0], axis=i), k, axis=i)
            meta["dummy"] = i
        elif kind != "plain":
            raise ValueError(f"unknown instance kind {kind!r}")
        return GameInstance(sups, TableField(sups, F), TableDensity(sups, P), x, xp, meta)


# ---------------------------------------------------------------------------
# builders


@dataclass(frozen=True)
class Builder:
    """Named map from an instance to a value function.

    ``baseline`` returns the baseline distribution the value function averages
    over, or ``None`` when it uses the instance's fixed ``x'``.
    """

    name: str
    build: Callable[[GameInstance], ValueFunction]
    baseline: Optional[Callable[[GameInstance], BaselineDistribution]] = None

    def __call__(self, inst: GameInstance) -> ValueFunction:
        return self.build(inst)


def _grid_baseline(inst: GameInstance) -> BaselineDistribution:
    return BaselineDistribution.grid(inst.supports)


def _ces_exact(inst: GameInstance) -> ValueFunction:
    n = int(np.prod([len(s) for s in inst.supports]))
    return CESSample(inst.context(), DiscreteSupport(inst.supports), n=n)


def _ces_empirical(inst: GameInstance) -> ValueFunction:
    grid = inst.grid()
    return CESEmpirical(inst.context(), Dataset(grid), weights=inst.p(grid))


BUILDERS = {
    "jbshap": Builder("jbshap", lambda inst: BaselineValue(inst.context(), weighted=True)),
    "bshap": Builder("bshap", lambda inst: BaselineValue(inst.context(), weighted=False)),
    "rjbshap": Builder(
        "rjbshap",
        lambda inst: RandomBaselineValue(inst.context(_grid_baseline(inst)), weighted=True,
                                         n=len(_grid_baseline(inst))),
        _grid_baseline,
    ),
    "rbshap": Builder(
        "rbshap",
        lambda inst: RandomBaselineValue(inst.context(_grid_baseline(inst)), weighted=False,
                                         n=len(_grid_baseline(inst))),
        _grid_baseline,
    ),
    # exact conditional expectation under p
    "ces": Builder("ces", _ces_exact),
    # p read as row multiplicities of a dataset on the grid
    "ces_empirical": Builder("ces_empirical", _ces_empirical),
}


def get_builder(builder) -> Builder:
    if isinstance(builder, Builder):
        return builder
    if isinstance(builder, str):
        return BUILDERS[builder]
    return Builder(getattr(builder, "__name__", "custom"), builder)


# ---------------------------------------------------------------------------
# reports


@dataclass
class AxiomReport:
    axiom: str
    builder: str
    instances: int
    max_violation: float
    tolerance: float
    skipped: int = 0
    witness: Optional[dict] = None
    details: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.max_violation <= self.tolerance

    def to_dict(self) -> dict:
        return {
            "axiom": self.axiom,
            "builder": self.builder,
            "instances": self.instances,
            "skipped": self.skipped,
            "max_violation": self.max_violation,
            "tolerance": self.tolerance,
            "passed": self.passed,
            "witness": self.witness,
            "details": self.details,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


class _Tracker:
    def __init__(self):
        self.worst = 0.0
        self.witness = None

    def update(self, violation: float, witness: Callable[[], dict]):
        violation = float(violation)
        if not np.isfinite(violation):
            violation = float("inf")
        if violation > self.worst or self.witness is None and violation > 0:
            self.worst = violation
            self.witness = witness()


def _values(builder: Builder, inst: GameInstance, masks: np.ndarray) -> np.ndarray:
    return builder(inst).evaluate(masks)


def _members(mask) -> list[int]:
    return np.flatnonzero(mask).tolist()


def _baseline_term(builder: Builder, inst: GameInstance) -> float:
    """``E[f(x') p(x')]`` under the builder's baseline (a point mass at ``x'`` by default)."""
    if builder.baseline is None:
        return float(inst.f(inst.x_prime) * inst.p(inst.x_prime))
    dist = builder.baseline(inst)
    return float(dist.weights @ (inst.f(dist.points) * inst.p(dist.points)))


# ---------------------------------------------------------------------------
# checks


def check_linearity(builder, gen: GameInstanceGenerator, trials: int = 50,
                    tol: float = 1e-9) -> AxiomReport:
    """Linearity in ``f`` (any real coefficients) and conic linearity in ``p``."""
    b = get_builder(builder)
    tr = _Tracker()
    parts = {"function": 0.0, "distribution": 0.0}
    for t in range(trials):
        inst = gen.instance(t)
        rng = gen.rng(t, "linearity")
        masks = all_masks(inst.d)
        shape = inst.f.values.shape
        F1, P1 = inst.f.values, inst.p.values
        F2, P2 = gen.random_f_table(shape, rng), gen.random_p_table(shape, rng)
        a1, a2 = rng.normal(scale=2.0, size=2)
        c1, c2 = rng.uniform(0.0, 2.0, size=2)
        sup = inst.supports
        v1 = _values(b, inst, masks)
        v2 = _values(b, inst.with_f(TableField(sup, F2)), masks)
        v12 = _values(b, inst.with_f(TableField(sup, a1 * F1 + a2 * F2)), masks)
        gap = np.abs(v12 - (a1 * v1 + a2 * v2))
        k = int(np.argmax(gap))
        parts["function"] = max(parts["function"], float(gap[k]))
        tr.update(gap[k], lambda: {"part": "function", "trial": t, "coalition": _members(masks[k]),
                                   "lhs": float(v12[k]), "rhs": float(a1 * v1[k] + a2 * v2[k]),
                                   "alphas": [float(a1), float(a2)], "instance": inst.to_dict(),
                                   "f2": F2.tolist()})
        w2 = _values(b, inst.with_p(TableDensity(sup, P2)), masks)
        w12 = _values(b, inst.with_p(TableDensity(sup, c1 * P1 + c2 * P2)), masks)
        gap = np.abs(w12 - (c1 * v1 + c2 * w2))
        k = int(np.argmax(gap))
        parts["distribution"] = max(parts["distribution"], float(gap[k]))
        tr.update(gap[k], lambda: {"part": "distribution", "trial": t, "coalition": _members(masks[k]),
                                   "lhs": float(w12[k]), "rhs": float(c1 * v1[k] + c2 * w2[k]),
                                   "alphas": [float(c1), float(c2)], "instance": inst.to_dict(),
                                   "p2": P2.tolist()})
    return AxiomReport("linearity", b.name, trials, tr.worst, tol, witness=tr.witness, details=parts)


def _swap_symmetric(table: np.ndarray, i: int, j: int) -> bool:
    return bool(np.array_equal(table, np.swapaxes(table, i, j)))


def check_symmetry(builder, gen: GameInstanceGenerator, trials: int = 50, tol: float = 1e-9,
                   kind: str = "symmetric") -> AxiomReport:
    """``v(S+i) = v(S+j)`` whenever f, p, x, x' are symmetric in ``(i, j)``.

    Instances whose precondition does not hold are skipped, not failed.
    """
    b = get_builder(builder)
    tr = _Tracker()
    skipped = 0
    for t in range(trials):
        inst = gen.instance(t, kind)
        i, j = inst.meta["pair"]
        ok = (_swap_symmetric(inst.f.values, i, j) and _swap_symmetric(inst.p.values, i, j)
              and inst.x[i] == inst.x[j] and inst.x_prime[i] == inst.x_prime[j])
        if not ok:
            skipped += 1
            continue
        rest = [k for k in range(inst.d) if k not in (i, j)]
        sub = all_masks(len(rest))
        mi = np.zeros((sub.shape[0], inst.d), dtype=bool)
        mi[:, rest] = sub
        mj = mi.copy()
        mi[:, i] = True
        mj[:, j] = True
        vi, vj = _values(b, inst, mi), _values(b, inst, mj)
        gap = np.abs(vi - vj)
        k = int(np.argmax(gap))
        tr.update(gap[k], lambda: {"trial": t, "pair": [i, j], "coalition": _members(mi[k] & mj[k]),
                                   "v_si": float(vi[k]), "v_sj": float(vj[k]), "instance": inst.to_dict()})
    return AxiomReport("symmetry", b.name, trials - skipped, tr.worst, tol, skipped, tr.witness)


def check_dummy(builder, gen: GameInstanceGenerator, trials: int = 50, tol: float = 1e-9,
                invariance: str = "both") -> AxiomReport:
    """``v(S) = v(S+i)`` for a coordinate ``i`` that the inputs ignore.

    ``invariance='both'``: f and p both ignore ``i`` (the function-and-
    distribution axiom). ``invariance='function'``: only f ignores ``i``.
    """
    kind = {"both": "dummy", "function": "dummy_function"}[invariance]
    b = get_builder(builder)
    tr = _Tracker()
    for t in range(trials):
        inst = gen.instance(t, kind)
        i = inst.meta["dummy"]
        rest = [k for k in range(inst.d) if k != i]
        sub = all_masks(len(rest))
        m0 = np.zeros((sub.shape[0], inst.d), dtype=bool)
        m0[:, rest] = sub
        m1 = m0.copy()
        m1[:, i] = True
        v0, v1 = _values(b, inst, m0), _values(b, inst, m1)
        gap = np.abs(v1 - v0)
        k = int(np.argmax(gap))
        tr.update(gap[k], lambda: {"trial": t, "dummy": i, "coalition": _members(m0[k]),
                                   "v_s": float(v0[k]), "v_si": float(v1[k]), "instance": inst.to_dict()})
    return AxiomReport(f"dummy[{invariance}]", b.name, trials, tr.worst, tol, witness=tr.witness)


def check_null(builder, gen: GameInstanceGenerator, trials: int = 50, tol: float = 1e-9) -> AxiomReport:
    """``v(empty)`` is identical for any ``(f', p')`` agreeing with ``(f, p)`` at the baseline.

    Value functions that average over a baseline distribution require
    agreement on every baseline point.
    """
    b = get_builder(builder)
    tr = _Tracker()
    empty = np.zeros((1, 0), dtype=bool)
    for t in range(trials):
        inst = gen.instance(t)
        rng = gen.rng(t, "null")
        empty = np.zeros((1, inst.d), dtype=bool)
        shape = inst.f.values.shape
        F2, P2 = gen.random_f_table(shape, rng), gen.random_p_table(shape, rng)
        pts = inst.x_prime[None, :] if b.baseline is None else b.baseline(inst).points
        for pt in pts:
            idx = tuple(int(np.flatnonzero(s == c)[0]) for s, c in zip(inst.supports, pt))
            F2[idx] = inst.f.values[idx]
            P2[idx] = inst.p.values[idx]
        other = inst.with_f(TableField(inst.supports, F2)).with_p(TableDensity(inst.supports, P2))
        v1 = _values(b, inst, empty)[0]
        v2 = _values(b, other, empty)[0]
        tr.update(abs(v1 - v2), lambda: {"trial": t, "v_empty": float(v1), "v_empty_other": float(v2),
                                         "instance": inst.to_dict(), "other": other.to_dict()})
    return AxiomReport("null", b.name, trials, tr.worst, tol, witness=tr.witness)


def check_efficiency(builder, gen: GameInstanceGenerator, trials: int = 50,
                     tol: float = 1e-9) -> AxiomReport:
    """``v([d]) - v(empty) = f(x)p(x) - E[f(x')p(x')]`` (point-mass ``x'`` unless randomised)."""
    b = get_builder(builder)
    tr = _Tracker()
    for t in range(trials):
        inst = gen.instance(t)
        ends = np.array([np.zeros(inst.d, bool), np.ones(inst.d, bool)])
        v = _values(b, inst, ends)
        target = float(inst.f(inst.x) * inst.p(inst.x)) - _baseline_term(b, inst)
        got = float(v[1] - v[0])
        tr.update(abs(got - target), lambda: {"trial": t, "difference": got, "joint_density_target": target,
                                              "instance": inst.to_dict()})
    return AxiomReport("efficiency", b.name, trials, tr.worst, tol, witness=tr.witness)


def check_set_relevance(builder, gen: GameInstanceGenerator, trials: int = 50,
                        tol: float = 1e-9) -> AxiomReport:
    """``v(S)`` is unchanged when f and p change only where ``u_S != x_S``."""
    b = get_builder(builder)
    tr = _Tracker()
    for t in range(trials):
        inst = gen.instance(t)
        rng = gen.rng(t, "set_relevance")
        grid = inst.grid()
        shape = inst.f.values.shape
        for m in all_masks(inst.d):
            agree = np.all(grid[:, m] == inst.x[m], axis=1).reshape(shape)
            F2 = np.where(agree, inst.f.values, gen.random_f_table(shape, rng))
            P2 = np.where(agree, inst.p.values, gen.random_p_table(shape, rng))
            other = inst.with_f(TableField(inst.supports, F2)).with_p(TableDensity(inst.supports, P2))
            v1 = _values(b, inst, m[None, :])[0]
            v2 = _values(b, other, m[None, :])[0]
            tr.update(abs(v1 - v2), lambda: {"trial": t, "coalition": _members(m), "v1": float(v1),
                                             "v2": float(v2), "instance": inst.to_dict(),
                                             "other": other.to_dict()})
    return AxiomReport("set_relevance", b.name, trials, tr.worst, tol, witness=tr.witness)


def check_strong_t_robustness(builder, instance: GameInstance, f2: ScalarField, T: float = 1.0,
                              tol: float = 1e-12, domain: Optional[np.ndarray] = None) -> AxiomReport:
    """Compare ``max_S |v_f1(S) - v_f2(S)|`` against ``T * max_x |f1 - f2| p`` over ``domain``.

    ``f1`` is ``instance.f``; ``domain`` defaults to the full support grid.
    ``max_violation`` is the excess over ``T * eps``.
    """
    b = get_builder(builder)
    dom = instance.grid() if domain is None else np.asarray(domain, dtype=float)
    eps = float(np.max(np.abs(instance.f(dom) - f2(dom)) * instance.p(dom)))
    masks = all_masks(instance.d)
    v1 = _values(b, instance, masks)
    v2 = _values(b, instance.with_f(f2), masks)
    gap = np.abs(v1 - v2)
    k = int(np.argmax(gap))
    delta = float(gap[k])
    excess = max(0.0, delta - T * eps)
    ratio = delta / eps if eps > 0 else (0.0 if delta == 0 else float("inf"))
    witness = None
    if excess > tol:
        witness = {"coalition": _members(masks[k]), "delta_v": delta, "epsilon": eps, "T": T,
                   "instance": instance.to_dict()}
    return AxiomReport("strong_t_robustness", b.name, 1, excess, tol, witness=witness,
                       details={"epsilon": eps, "max_delta_v": delta, "ratio": ratio, "T": T})


def check_robustness(builder, gen: GameInstanceGenerator, trials: int = 50, tol: float = 1e-12,
                     T: float = 1.0) -> AxiomReport:
    """Strong T-robustness over random perturbations ``f2 = f1 + delta``."""
    b = get_builder(builder)
    tr = _Tracker()
    worst_ratio = 0.0
    for t in range(trials):
        inst = gen.instance(t)
        rng = gen.rng(t, "robustness")
        shape = inst.f.values.shape
        bump = rng.normal(scale=10.0 ** rng.uniform(-2, 1), size=shape) * (rng.random(shape) < 0.5)
        f2 = TableField(inst.supports, inst.f.values + bump)
        rep = check_strong_t_robustness(b, inst, f2, T, tol)
        worst_ratio = max(worst_ratio, rep.details["ratio"])
        tr.update(rep.max_violation, lambda: dict(rep.witness or {}, trial=t, f2=f2.values.tolist()))
    return AxiomReport("robustness", b.name, trials, tr.worst, tol, witness=tr.witness,
                       details={"T": T, "max_ratio": worst_ratio})


def check_ces_rjbshap_identity(gen: GameInstanceGenerator, trials: int = 100,
                               tol: float = 1e-9) -> AxiomReport:
    """``ces(S) = rjbshap(S) / (C0 * p(x_S))`` with a uniform grid baseline.

    ``C0`` is the baseline's (constant) marginal weight on the free
    coordinates and ``p(x_S)`` the exact marginal, summed from the table.
    """
    tr = _Tracker()
    for t in range(trials):
        inst = gen.instance(t)
        masks = all_masks(inst.d)
        ces = BUILDERS["ces"](inst).evaluate(masks)
        rj = BUILDERS["rjbshap"](inst).evaluate(masks)
        sizes = np.array([len(s) for s in inst.supports])
        for r, m in enumerate(masks):
            c0 = 1.0 / np.prod(sizes[~m])
            idx = tuple(int(inst.x[k]) if m[k] else slice(None) for k in range(inst.d))
            marginal = float(np.sum(inst.p.values[idx]))
            rhs = rj[r] / (c0 * marginal)
            tr.update(abs(ces[r] - rhs), lambda: {"trial": t, "coalition": _members(m), "ces": float(ces[r]),
                                                  "rjbshap": float(rj[r]), "c0": float(c0),
                                                  "marginal": marginal, "instance": inst.to_dict()})
    return AxiomReport("ces_rjbshap_identity", "ces/rjbshap", trials, tr.worst, tol, witness=tr.witness)


def check_transfer(builder, gen: GameInstanceGenerator, trials: int = 50, tol: float = 1e-9) -> AxiomReport:
    """Input-to-explanation properties of exact Shapley over the builder's game:
    linearity in f and in p, symmetry, dummy (``phi_i = 0``) and efficiency
    (``sum phi = f(x)p(x) - E f(x')p(x')``)."""
    b = get_builder(builder)
    worst = {"linearity_f": 0.0, "linearity_p": 0.0, "symmetry": 0.0, "dummy": 0.0, "efficiency": 0.0}
    tr = _Tracker()

    def phi(inst):
        return exact_shapley(b(inst), inst.d).phi

    for t in range(trials):
        rng = gen.rng(t, "transfer")
        inst = gen.instance(t)
        sup, shape = inst.supports, inst.f.values.shape
        F2, P2 = gen.random_f_table(shape, rng), gen.random_p_table(shape, rng)
        base = phi(inst)
        checks = {
            "linearity_f": np.max(np.abs(phi(inst.with_f(TableField(sup, inst.f.values + F2)))
                                         - base - phi(inst.with_f(TableField(sup, F2))))),
            "linearity_p": np.max(np.abs(phi(inst.with_p(TableDensity(sup, inst.p.values + P2)))
                                         - base - phi(inst.with_p(TableDensity(sup, P2))))),
            "efficiency": abs(base.sum() - (float(inst.f(inst.x) * inst.p(inst.x)) - _baseline_term(b, inst))),
        }
        sym = gen.instance(t, "symmetric")
        i, j = sym.meta["pair"]
        ps = phi(sym)
        checks["symmetry"] = abs(ps[i] - ps[j])
        dum = gen.instance(t, "dummy")
        checks["dummy"] = abs(phi(dum)[dum.meta["dummy"]])
        for name, val in checks.items():
            worst[name] = max(worst[name], float(val))
            tr.update(val, lambda: {"trial": t, "property": name, "violation": float(val),
                                    "instance": inst.to_dict()})
    return AxiomReport("transfer", b.name, trials, tr.worst, tol, witness=tr.witness,
                       details={k: float(v) for k, v in worst.items()})


VALUE_AXIOMS = ("linearity", "symmetry", "dummy", "null", "efficiency", "set_relevance", "robustness")


def run_battery(builder, gen: GameInstanceGenerator, trials: int = 200, tol: float = 1e-9,
                robustness_tol: float = 1e-12, T: float = 1.0) -> list[AxiomReport]:
    """The seven value-function axioms followed by the transfer check."""
    return [
        check_linearity(builder, gen, trials, tol),
        check_symmetry(builder, gen, trials, tol),
        check_dummy(builder, gen, trials, tol, "both"),
        check_null(builder, gen, trials, tol),
        check_efficiency(builder, gen, trials, tol),
        check_set_relevance(builder, gen, trials, tol),
        check_robustness(builder, gen, trials, robustness_tol, T),
        check_transfer(builder, gen, trials, tol),
    ]
