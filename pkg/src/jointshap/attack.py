"""Perturbations that move off-manifold attributions while leaving density-weighted
ones nearly fixed, and the synthetic hiding-unfairness experiment."""

from __future__ import annotations

import json
import zlib
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .axioms import GameInstance
from .core import (
    BaselineDistribution,
    Dataset,
    DensityField,
    GameContext,
    LinearField,
    ScalarField,
)
from .density import NoiseSpec, nce_density, nce_train, smoothed_empirical
from .errors import InvalidInputError, StageError
from .learners import FeedForwardNet, NetField, TrainerConfig, net_init, sgd_train
from .shapley import exact_shapley, global_shapley
from .value_functions import CESSupervised, _fit_surrogate, make_value_function

TRIGGER_ATOL = 1e-9


@dataclass(frozen=True)
class PerturbationSpec:
    """Add ``magnitude`` wherever ``|x[target] - trigger| <= atol``.

    Give either ``magnitude`` directly or ``epsilon`` together with the
    normaliser ``K`` (the largest density on the triggered slice), in which
    case the magnitude is ``epsilon / K``.
    """

    target: int
    trigger: float
    magnitude: Optional[float] = None
    epsilon: Optional[float] = None
    normalizer: Optional[float] = None
    atol: float = TRIGGER_ATOL

    def __post_init__(self):
        if self.magnitude is None:
            if self.epsilon is None or self.normalizer is None:
                raise InvalidInputError("give a magnitude or an (epsilon, normalizer) pair")
            if not self.normalizer > 0:
                raise InvalidInputError("normalizer must be positive")
        if not np.isfinite(self.C):
            raise InvalidInputError("perturbation magnitude must be finite")
        if self.atol < 0:
            raise InvalidInputError("atol must be non-negative")

    @property
    def C(self) -> float:
        if self.magnitude is not None:
            return float(self.magnitude)
        return float(self.epsilon) / float(self.normalizer)


class TriggerField(ScalarField):
    kind = "trigger"

    def __init__(self, f: ScalarField, spec: PerturbationSpec):
        if not 0 <= spec.target < f.d:
            raise InvalidInputError("trigger coordinate out of range")
        super().__init__(f.d)
        self.base = f
        self.spec = spec

    def hits(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return np.abs(X[:, self.spec.target] - self.spec.trigger) <= self.spec.atol

    def _eval(self, X):
        y = self.base(X)
        return np.where(self.hits(X), y + self.spec.C, y)


def analytic_perturbation(f: ScalarField, spec: PerturbationSpec) -> ScalarField:
    """``f(x) + C * 1[x[target] == trigger]``; values off the trigger are returned untouched."""
    return TriggerField(f, spec)


def tail_trigger_instance(t0: float = 5.0, magnitude: float = 1.0, sigma: float = 1.0,
                          grid: Optional[np.ndarray] = None) -> tuple[GameInstance, ScalarField]:
    """Standard-normal density on two coordinates, ``f1 = x1`` and
    ``f2 = x1 + C * 1[x2 = t0]``, explicand ``(0, t0)`` and baseline ``0``.

    The domain is a grid on each axis (default ``[-6, 6]`` in steps of 0.25, which
    contains ``t0 = 5`` exactly).
    """
    if grid is None:
        grid = np.arange(-24, 25) / 4.0
    grid = np.asarray(grid, dtype=float)
    if not np.any(grid == t0):
        grid = np.sort(np.append(grid, t0))
    p = smoothed_empirical(Dataset(np.zeros((1, 2))), sigma)
    f1 = LinearField([1.0, 0.0])
    f2 = analytic_perturbation(f1, PerturbationSpec(1, t0, magnitude))
    inst = GameInstance((grid, grid), f1, p, np.array([0.0, t0]), np.zeros(2), {"kind": "tail_trigger"})
    return inst, f2


class RowTriggerField(ScalarField):
    """``f + delta`` exactly on the listed rows whose ``feature`` equals ``value``."""

    kind = "row_trigger"

    def __init__(self, f: ScalarField, rows: np.ndarray, feature: int, value: float, delta: float):
        super().__init__(f.d)
        self.base = f
        self.delta = float(delta)
        self.keys = {tuple(r.tolist()) for r in np.asarray(rows, dtype=float) if r[feature] == value}

    def _eval(self, X):
        y = self.base(X)
        hit = np.array([tuple(r.tolist()) in self.keys for r in X], dtype=bool)
        return np.where(hit, y + self.delta, y)


def ces_empirical_attack(f: ScalarField, data: Dataset, x_t, delta: float, feature: int = 0) -> ScalarField:
    """Shift ``f`` by ``delta`` on every training row sharing ``x_t[feature]``.

    The empirical conditional mean given that feature moves by exactly ``delta``;
    the dataset mean moves by ``delta * matches / m``.
    """
    x_t = np.asarray(x_t, dtype=float)
    return RowTriggerField(f, data.rows, feature, float(x_t[feature]), delta)


# ---------------------------------------------------------------------------
# synthetic biased data


def synth_biased_dataset(n: int, d: int = 8, protected: int = 0, bias: float = 0.1,
                         seed: int = 0, label_noise: float = 0.5) -> tuple[Dataset, np.ndarray]:
    """Standardised tabular rows and labels ``base + bias * x[protected]``.

    The protected feature is an independent fair coin, standardised to ``+-1``.
    Half of the remaining features are binary, the rest Gaussian; ``base`` is a
    0/1 label from a linear score of the non-protected features plus
    ``label_noise`` Gaussian noise.
    """
    if n < 1:
        raise InvalidInputError("n must be >= 1")
    if d < 2 or not 0 <= protected < d:
        raise InvalidInputError("need d >= 2 and a valid protected index")
    rng = np.random.default_rng(seed)
    others = [k for k in range(d) if k != protected]
    n_bin = (d - 1 + 1) // 2
    X = np.empty((n, d))
    X[:, protected] = np.where(rng.random(n) < 0.5, 1.0, -1.0)
    probs = rng.uniform(0.25, 0.75, size=n_bin)
    for k, col in enumerate(others):
        X[:, col] = (rng.random(n) < probs[k]).astype(float) if k < n_bin else rng.normal(size=n)
    for col in others:
        sd = X[:, col].std()
        X[:, col] = (X[:, col] - X[:, col].mean()) / (sd if sd > 0 else 1.0)
    w = rng.normal(size=d - 1)
    score = X[:, others] @ w + label_noise * rng.normal(size=n)
    base = (score > 0).astype(float)
    y = base + bias * X[:, protected]
    names = tuple(["sex" if k == protected else f"x{k}" for k in range(d)])
    return Dataset(X, names), y


# ---------------------------------------------------------------------------
# fine-tuning attack


@dataclass
class AttackFit:
    model: NetField
    components: dict
    n_on: int
    n_off: int
    losses: list


def minmax_scale(values: np.ndarray) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    lo, hi = values.min(), values.max()
    if hi == lo:
        return np.zeros_like(values)
    return (values - lo) / (hi - lo)


def finetune_attack(f: NetField, p: DensityField, protected: int, trainer: TrainerConfig,
                    on_points: np.ndarray, candidates: np.ndarray,
                    low_density_threshold: float = 0.1, loss_weights: tuple = (1.0, 1.0),
                    kappa: float = 1.0) -> AttackFit:
    """Fine-tune ``f`` to match itself on ``on_points`` and to output
    ``-kappa * x[protected]`` on candidates whose min-max scaled density
    (over the pooled points) is below the threshold."""
    if not isinstance(f, NetField):
        raise InvalidInputError("the attack fine-tunes a network model")
    on_points = np.asarray(on_points, dtype=float)
    candidates = np.asarray(candidates, dtype=float)
    pool = np.vstack([on_points, candidates])
    scaled = minmax_scale(p(pool))[on_points.shape[0]:]
    off = candidates[scaled < low_density_threshold]
    X = np.vstack([on_points, off])
    y = np.concatenate([f(on_points), -kappa * off[:, protected]])
    groups = np.concatenate([np.zeros(on_points.shape[0], int), np.ones(off.shape[0], int)])
    cfg = replace(trainer, loss="composite", loss_weights=tuple(loss_weights))
    fit = sgd_train(f.net, X, y, cfg, groups=groups)
    comps = {"on_manifold_mse": fit.components.get("group0_mse", 0.0),
             "off_manifold_mse": fit.components.get("group1_mse", 0.0)}
    return AttackFit(NetField(fit.net), comps, int(on_points.shape[0]), int(off.shape[0]), fit.losses)


# ---------------------------------------------------------------------------
# experiment


@dataclass(frozen=True)
class AttackConfig:
    n: int = 2000
    d: int = 8
    protected: int = 0
    bias: float = 0.1
    label_noise: float = 0.1
    seed: int = 0
    test_fraction: float = 0.2
    hidden: tuple = (32, 32, 32)
    model_trainer: TrainerConfig = TrainerConfig(lr=0.01, batch_size=64, epochs=100)
    density_hidden: tuple = (32, 32)
    density_trainer: TrainerConfig = TrainerConfig(lr=0.05, batch_size=64, epochs=200)
    attack_trainer: TrainerConfig = TrainerConfig(lr=0.02, batch_size=16, epochs=300)
    attack_candidates: int = 4000
    low_density_threshold: float = 0.1
    # plain SGD cannot balance a 1:100 split (see README); equal weights do
    loss_weights: tuple = (1.0, 1.0)
    kappa: float = 1.0
    attack: bool = True
    n_explicands: int = 100
    value_functions: tuple = ("bshap", "jbshap")
    surrogate_trainer: TrainerConfig = TrainerConfig(lr=0.01, batch_size=256, epochs=10)
    surrogate_masks: int = 16

    @classmethod
    def from_dict(cls, doc: dict) -> "AttackConfig":
        doc = dict(doc)
        for key in ("model_trainer", "density_trainer", "attack_trainer", "surrogate_trainer"):
            if key in doc:
                doc[key] = TrainerConfig.from_dict(doc[key])
        for key in ("hidden", "density_hidden", "loss_weights", "value_functions"):
            if key in doc:
                doc[key] = tuple(doc[key])
        return cls(**doc)

    def to_dict(self) -> dict:
        return json.loads(json.dumps(asdict(self)))


@dataclass
class AttackReport:
    agreement: float
    before: dict
    after: dict
    drop_ratio: dict
    relative_change: dict
    protected: int
    names: tuple
    details: dict = field(default_factory=dict)

    def __post_init__(self):
        if not 0.0 <= self.agreement <= 1.0:
            raise InvalidInputError("agreement rate must lie in [0, 1]")

    def to_dict(self) -> dict:
        return {
            "agreement": self.agreement,
            "before": self.before,
            "after": self.after,
            "drop_ratio": self.drop_ratio,
            "relative_change": self.relative_change,
            "protected": self.protected,
            "names": list(self.names),
            "details": self.details,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    def bar_rows(self) -> list[tuple]:
        """``(value_function, feature, before, after)`` for plotting."""
        return [(vf, self.names[k], self.before[vf][k], self.after[vf][k])
                for vf in self.before for k in range(len(self.names))]


def stage_seed(seed: int, stage: str) -> int:
    ss = np.random.SeedSequence([int(seed), zlib.crc32(stage.encode())])
    return int(ss.generate_state(1)[0])


@contextmanager
def stage(name: str):
    try:
        yield
    except StageError:
        raise
    except Exception as exc:
        raise StageError(name, exc) from exc


def _global(model: ScalarField, p: DensityField, vf: str, explicands: np.ndarray, baseline: np.ndarray,
            surrogate=None) -> np.ndarray:
    attrs = []
    for x in explicands:
        ctx = GameContext(model, x, baseline, p)
        if vf == "ces_supervised":
            v = CESSupervised(ctx, surrogate)
        else:
            v = make_value_function(vf, ctx)
        attrs.append(exact_shapley(v, len(x)))
    return global_shapley(attrs).values


def hiding_unfairness_experiment(cfg: AttackConfig) -> AttackReport:
    """Biased model, NCE density, fine-tuning attack, and global attributions
    before and after for each configured value function."""
    with stage("data"):
        data, y = synth_biased_dataset(cfg.n, cfg.d, cfg.protected, cfg.bias, stage_seed(cfg.seed, "data"),
                                       cfg.label_noise)
        rng = np.random.default_rng(stage_seed(cfg.seed, "split"))
        order = rng.permutation(cfg.n)
        n_test = int(round(cfg.test_fraction * cfg.n))
        test, train = order[:n_test], order[n_test:]
        X_tr, y_tr, X_te = data.rows[train], y[train], data.rows[test]
        baseline = np.zeros(cfg.d)
    with stage("model"):
        net = net_init((cfg.d, *cfg.hidden, 1), stage_seed(cfg.seed, "model-init"))
        fit = sgd_train(net, X_tr, y_tr, replace(cfg.model_trainer, seed=stage_seed(cfg.seed, "model")))
        model = NetField(fit.net)
    with stage("density"):
        ood = nce_train(Dataset(X_tr), NoiseSpec(baseline), cfg.density_trainer,
                        stage_seed(cfg.seed, "density"), cfg.density_hidden)
        p = nce_density(ood)
    with stage("attack"):
        if cfg.attack:
            noise_rng = np.random.default_rng(stage_seed(cfg.seed, "attack-noise"))
            candidates = NoiseSpec(baseline).sample(X_tr, cfg.attack_candidates, noise_rng)
            trainer = replace(cfg.attack_trainer, seed=stage_seed(cfg.seed, "attack"))
            att = finetune_attack(model, p, cfg.protected, trainer, X_tr, candidates,
                                  cfg.low_density_threshold, cfg.loss_weights, cfg.kappa)
            attacked, comps, n_off = att.model, att.components, att.n_off
        else:
            attacked, comps, n_off = model, {}, 0
        agreement = float(np.mean((model(X_te) > 0.5) == (attacked(X_te) > 0.5)))
    surrogates = {}
    with stage("surrogate"):
        if "ces_supervised" in cfg.value_functions:
            for tag, m in (("before", model), ("after", attacked)):
                sf = _fit_surrogate(m, Dataset(X_tr), cfg.surrogate_trainer, stage_seed(cfg.seed, "surrogate"),
                                    "masked", "shapley", cfg.surrogate_masks, (64, 64))
                surrogates[tag] = sf.surrogate
    with stage("explain"):
        pos = X_te[X_te[:, cfg.protected] > 0][: cfg.n_explicands]
        before, after, drop, rel = {}, {}, {}, {}
        for vf in cfg.value_functions:
            b = _global(model, p, vf, pos, baseline, surrogates.get("before"))
            a = _global(attacked, p, vf, pos, baseline, surrogates.get("after"))
            before[vf], after[vf] = b.tolist(), a.tolist()
            k = cfg.protected
            rel[vf] = float(abs(a[k] - b[k]) / abs(b[k])) if b[k] != 0 else float("inf")
            drop[vf] = float((b[k] - a[k]) / abs(b[k])) if b[k] != 0 else float("inf")
    details = {"n_explicands": int(pos.shape[0]), "n_off_manifold": n_off, "attack_losses": comps,
               "model_final_loss": fit.final_loss, "density_final_loss": ood.losses[-1] if ood.losses else None}
    if surrogates:
        details["surrogate_mse"] = {
            tag: float(np.mean((s.predict(X_te, np.ones_like(X_te, bool)) - m(X_te)) ** 2))
            for (tag, s), m in zip(surrogates.items(), (model, attacked))
        }
    return AttackReport(agreement, before, after, drop, rel, cfg.protected, data.names, details)
