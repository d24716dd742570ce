"""Command-line entry point.

``jointshap <command> --config cfg.json --seed N --out DIR`` where command is
one of explain, attack, axioms, metrics, train-density, train-surrogate.
Configs are validated before any work starts; reports are sorted-key JSON and
curves/datasets are CSV. Exit codes: 0 success, 1 stage failure, 2 invalid
config or arguments.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path
from typing import Optional, Sequence

import jsonschema
import numpy as np

from . import axioms as ax
from .attack import AttackConfig, hiding_unfairness_experiment, stage_seed
from .core import (
    BaselineDistribution,
    Dataset,
    GameContext,
    LinearField,
    TableDensity,
    TableField,
    UniformDensity,
)
from .density import (
    NoiseSpec,
    OodClassifier,
    categorical_product,
    empirical_density,
    nce_density,
    nce_train,
    smoothed_empirical,
)
from .errors import InvalidInputError, JointShapError, StageError
from .learners import FeedForwardNet, NetField, TrainerConfig
from .metrics import auc, deletion_curve, sensitivity_n
from .shapley import exact_shapley, permutation_shapley, truncated_permutation_jbshap
from .value_functions import (
    BoxSupport,
    CESSupervised,
    DiscreteSupport,
    SurrogateValueFunction,
    _fit_surrogate,
    make_value_function,
)


class DatasetError(InvalidInputError):
    def __init__(self, message: str, line: Optional[int] = None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


def load_dataset_csv(path) -> Dataset:
    """Header row of feature names, then numeric rows; row order is preserved."""
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DatasetError("empty file", 1) from None
        names = tuple(h.strip() for h in header)
        if not names or any(not n for n in names):
            raise DatasetError("header must name every column", 1)
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(names):
                raise DatasetError(f"expected {len(names)} cells, found {len(row)}", lineno)
            try:
                rows.append([float(c) for c in row])
            except ValueError as exc:
                raise DatasetError(f"non-numeric cell ({exc})", lineno) from None
    if not rows:
        raise DatasetError("no data rows")
    return Dataset(np.array(rows), names)


def write_dataset_csv(data: Dataset, path) -> None:
    names = data.names or tuple(f"x{k}" for k in range(data.d))
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(names)
        for row in data.rows:
            w.writerow([repr(float(v)) for v in row])


# ---------------------------------------------------------------------------
# config schemas

_NUM_LIST = {"type": "array", "items": {"type": "number"}, "minItems": 1}
_NESTED = {"type": "array"}

_MODEL = {
    "type": "object",
    "required": ["kind"],
    "oneOf": [
        {"properties": {"kind": {"const": "linear"}, "weights": _NUM_LIST, "bias": {"type": "number"}},
         "required": ["kind", "weights"], "additionalProperties": False},
        {"properties": {"kind": {"const": "table"}, "supports": {"type": "array", "items": _NUM_LIST},
                        "values": _NESTED},
         "required": ["kind", "supports", "values"], "additionalProperties": False},
        {"properties": {"kind": {"const": "net"}, "path": {"type": "string"}},
         "required": ["kind", "path"], "additionalProperties": False},
    ],
}

_DENSITY = {
    "type": "object",
    "required": ["kind"],
    "oneOf": [
        {"properties": {"kind": {"const": "table"}, "supports": {"type": "array", "items": _NUM_LIST},
                        "values": _NESTED},
         "required": ["kind", "supports", "values"], "additionalProperties": False},
        {"properties": {"kind": {"const": "categorical"},
                        "tables": {"type": "array", "minItems": 1, "items": {
                            "type": "object", "required": ["values", "probs"],
                            "properties": {"values": _NUM_LIST, "probs": _NUM_LIST}}}},
         "required": ["kind", "tables"], "additionalProperties": False},
        {"properties": {"kind": {"const": "empirical"}}, "required": ["kind"], "additionalProperties": False},
        {"properties": {"kind": {"const": "smoothed"}, "sigma": {"type": "number", "exclusiveMinimum": 0}},
         "required": ["kind", "sigma"], "additionalProperties": False},
        {"properties": {"kind": {"const": "nce"}, "path": {"type": "string"}},
         "required": ["kind", "path"], "additionalProperties": False},
        {"properties": {"kind": {"const": "uniform"}, "value": {"type": "number", "minimum": 0}},
         "required": ["kind"], "additionalProperties": False},
    ],
}

_BASELINE = {
    "oneOf": [
        _NUM_LIST,
        {"type": "object", "required": ["points", "weights"],
         "properties": {"points": {"type": "array", "items": _NUM_LIST}, "weights": _NUM_LIST},
         "additionalProperties": False},
    ]
}

_VALUE_FUNCTION = {
    "type": "object",
    "required": ["kind"],
    "properties": {
        "kind": {"enum": ["bshap", "rbshap", "jbshap", "rjbshap", "ces_empirical", "ces_sample",
                          "ces_supervised"]},
        "n": {"type": "integer", "minimum": 1},
        "support": {"type": "object", "properties": {
            "discrete": {"type": "array", "items": _NUM_LIST},
            "box": {"type": "object", "required": ["lo", "hi"],
                    "properties": {"lo": _NUM_LIST, "hi": _NUM_LIST}}}},
        "surrogate": {"type": "string"},
    },
    "additionalProperties": False,
}

_ESTIMATOR = {
    "type": "object",
    "required": ["kind"],
    "properties": {
        "kind": {"enum": ["exact", "permutation", "truncated"]},
        "permutations": {"type": "integer", "minimum": 1},
        "frac": {"type": "number", "minimum": 0, "maximum": 1},
    },
    "additionalProperties": False,
}

_TRAINER = {
    "type": "object",
    "properties": {
        "lr": {"type": "number", "exclusiveMinimum": 0},
        "batch_size": {"type": "integer", "minimum": 1},
        "epochs": {"type": "integer", "minimum": 1},
        "seed": {"type": "integer"},
        "loss": {"enum": ["mse", "bce", "composite"]},
        "loss_weights": {"type": "array", "items": {"type": "number", "minimum": 0}, "minItems": 2, "maxItems": 2},
    },
    "additionalProperties": False,
}

_GAME = {
    "model": _MODEL,
    "density": _DENSITY,
    "dataset": {"type": "string"},
    "explicand": _NUM_LIST,
    "explicands": {"type": "array", "items": _NUM_LIST, "minItems": 1},
    "baseline": _BASELINE,
    "value_function": _VALUE_FUNCTION,
    "estimator": _ESTIMATOR,
}

SCHEMAS = {
    "explain": {
        "type": "object",
        "required": ["model", "value_function"],
        "anyOf": [{"required": ["explicand"]}, {"required": ["explicands"]}],
        "properties": dict(_GAME),
        "additionalProperties": False,
    },
    "metrics": {
        "type": "object",
        "required": ["model", "explicand", "baseline", "value_function", "fractions"],
        "properties": dict(_GAME, fractions={"type": "array", "items": {"type": "number"}, "minItems": 2},
                           target={"enum": ["f", "fp"]}, order={"enum": ["signed", "abs"]},
                           normalize={"type": "boolean"},
                           sensitivity={"type": "object", "required": ["fracs", "trials"],
                                        "properties": {"fracs": _NUM_LIST,
                                                       "trials": {"type": "integer", "minimum": 3}},
                                        "additionalProperties": False}),
        "additionalProperties": False,
    },
    "axioms": {
        "type": "object",
        "required": ["builder"],
        "properties": {
            "builder": {"enum": sorted(ax.BUILDERS)},
            "trials": {"type": "integer", "minimum": 1},
            "tol": {"type": "number", "minimum": 0},
            "robustness_tol": {"type": "number", "minimum": 0},
            "T": {"type": "number", "exclusiveMinimum": 0},
            "dims": {"type": "array", "items": {"type": "integer", "minimum": 1, "maximum": 6}, "minItems": 1},
            "support_sizes": {"type": "array", "items": {"type": "integer", "minimum": 1, "maximum": 4},
                              "minItems": 1},
            "checks": {"type": "array", "items": {"enum": list(ax.VALUE_AXIOMS) + [
                "transfer", "dummy_function", "ces_rjbshap_identity"]}},
        },
        "additionalProperties": False,
    },
    "attack": {
        "type": "object",
        "properties": {
            "n": {"type": "integer", "minimum": 10},
            "d": {"type": "integer", "minimum": 2, "maximum": 12},
            "protected": {"type": "integer", "minimum": 0},
            "bias": {"type": "number"},
            "label_noise": {"type": "number", "minimum": 0},
            "test_fraction": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
            "hidden": {"type": "array", "items": {"type": "integer", "minimum": 1}},
            "density_hidden": {"type": "array", "items": {"type": "integer", "minimum": 1}},
            "model_trainer": _TRAINER,
            "density_trainer": _TRAINER,
            "attack_trainer": _TRAINER,
            "surrogate_trainer": _TRAINER,
            "attack_candidates": {"type": "integer", "minimum": 1},
            "low_density_threshold": {"type": "number", "minimum": 0, "maximum": 1},
            "loss_weights": {"type": "array", "items": {"type": "number", "minimum": 0}, "minItems": 2, "maxItems": 2},
            "kappa": {"type": "number"},
            "attack": {"type": "boolean"},
            "n_explicands": {"type": "integer", "minimum": 1},
            "value_functions": {"type": "array", "minItems": 1,
                                "items": {"enum": ["bshap", "jbshap", "ces_supervised"]}},
            "surrogate_masks": {"type": "integer", "minimum": 1},
        },
        "additionalProperties": False,
    },
    "train-density": {
        "type": "object",
        "required": ["dataset", "noise"],
        "properties": {
            "dataset": {"type": "string"},
            "noise": {"type": "object", "required": ["baseline"],
                      "properties": {"baseline": _BASELINE, "ratio": {"type": "number", "exclusiveMinimum": 0}},
                      "additionalProperties": False},
            "trainer": _TRAINER,
            "hidden": {"type": "array", "items": {"type": "integer", "minimum": 1}},
            "clip": {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2},
        },
        "additionalProperties": False,
    },
    "train-surrogate": {
        "type": "object",
        "required": ["dataset", "model"],
        "properties": {
            "dataset": {"type": "string"},
            "model": _MODEL,
            "trainer": _TRAINER,
            "encoding": {"enum": ["masked", "onehot"]},
            "masks": {"enum": ["shapley", "enumerate"]},
            "n_masks": {"type": "integer", "minimum": 1},
            "hidden": {"type": "array", "items": {"type": "integer", "minimum": 1}},
        },
        "additionalProperties": False,
    },
}

COMMANDS = tuple(SCHEMAS)


class ConfigInvalid(Exception):
    pass


def validate_config(command: str, cfg) -> None:
    try:
        jsonschema.validate(cfg, SCHEMAS[command])
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigInvalid(f"{where}: {exc.message}") from None


# ---------------------------------------------------------------------------
# builders from config


class _Run:
    def __init__(self, command: str, cfg: dict, seed: int, base_dir: Path):
        self.command = command
        self.cfg = cfg
        self.seed = int(seed)
        self.base = base_dir
        self._dataset = None

    def path(self, rel: str) -> Path:
        p = Path(rel)
        return p if p.is_absolute() else self.base / p

    def seed_for(self, stage: str) -> int:
        return stage_seed(self.seed, stage)

    def dataset(self) -> Dataset:
        if self._dataset is None:
            if "dataset" not in self.cfg:
                raise InvalidInputError("this configuration needs a dataset path")
            self._dataset = load_dataset_csv(self.path(self.cfg["dataset"]))
        return self._dataset

    def model(self, spec: dict):
        kind = spec["kind"]
        if kind == "linear":
            return LinearField(spec["weights"], spec.get("bias", 0.0))
        if kind == "table":
            return TableField(spec["supports"], spec["values"])
        doc = json.loads(self.path(spec["path"]).read_text())
        return NetField(FeedForwardNet.from_dict(doc))

    def density(self, spec: Optional[dict], d: int):
        if spec is None:
            return None
        kind = spec["kind"]
        if kind == "table":
            return TableDensity(spec["supports"], spec["values"])
        if kind == "categorical":
            return categorical_product([(t["values"], t["probs"]) for t in spec["tables"]])
        if kind == "empirical":
            return empirical_density(self.dataset())
        if kind == "smoothed":
            return smoothed_empirical(self.dataset(), spec["sigma"])
        if kind == "uniform":
            return UniformDensity(d, spec.get("value", 1.0))
        doc = json.loads(self.path(spec["path"]).read_text())
        return nce_density(OodClassifier.from_dict(doc))

    @staticmethod
    def baseline(spec):
        if spec is None:
            return None
        if isinstance(spec, dict):
            return BaselineDistribution(spec["points"], spec["weights"])
        return np.asarray(spec, dtype=float)

    def value_function(self, ctx: GameContext):
        spec = self.cfg["value_function"]
        kind = spec["kind"]
        params = {}
        if kind in ("rbshap", "rjbshap", "ces_sample"):
            params["n"] = spec.get("n", 100)
            params["seed"] = self.seed_for("value_function")
        if kind == "ces_empirical":
            params["data"] = self.dataset()
        if kind == "ces_sample":
            sup = spec.get("support")
            if not sup:
                raise InvalidInputError("ces_sample needs a support (discrete or box)")
            params["support"] = (DiscreteSupport(sup["discrete"]) if "discrete" in sup
                                 else BoxSupport(sup["box"]["lo"], sup["box"]["hi"]))
        if kind == "ces_supervised":
            if "surrogate" not in spec:
                raise InvalidInputError("ces_supervised needs a trained surrogate path")
            doc = json.loads(self.path(spec["surrogate"]).read_text())
            return CESSupervised(ctx, SurrogateValueFunction.from_dict(doc))
        return make_value_function(kind, ctx, **params)

    def estimate(self, v, d: int):
        est = self.cfg.get("estimator", {"kind": "exact"})
        kind = est["kind"]
        if kind == "exact":
            return exact_shapley(v, d)
        perms = est.get("permutations", 1000)
        seed = self.seed_for("estimator")
        if kind == "permutation":
            return permutation_shapley(v, d, perms, seed)
        return truncated_permutation_jbshap(v, d, perms, est.get("frac", 0.0), seed)


def _trainer(doc: Optional[dict], default: TrainerConfig) -> TrainerConfig:
    if not doc:
        return default
    merged = dict(default.__dict__)
    merged.update(doc)
    return TrainerConfig.from_dict(merged)


# ---------------------------------------------------------------------------
# commands; each returns ({filename: text}, summary lines)


def _stage(name, fn, *args):
    try:
        return fn(*args)
    except StageError:
        raise
    except Exception as exc:
        raise StageError(name, exc) from exc


def _cmd_explain(run: _Run):
    cfg = run.cfg
    f = _stage("model", run.model, cfg["model"])
    xs = cfg.get("explicands") or [cfg["explicand"]]
    d = len(xs[0])
    p = _stage("density", run.density, cfg.get("density"), d)
    baseline = run.baseline(cfg.get("baseline"))
    results = []

    def explain():
        for x in xs:
            ctx = GameContext(f, x, baseline, p)
            results.append(run.estimate(run.value_function(ctx), d).to_dict())

    _stage("explain", explain)
    report = {"command": "explain", "seed": run.seed, "value_function": cfg["value_function"]["kind"],
              "estimator": cfg.get("estimator", {"kind": "exact"})["kind"], "results": results}
    lines = [f"{'explicand':>9}  phi"]
    lines += [f"{k:>9}  " + " ".join(f"{v:.6g}" for v in r["phi"]) for k, r in enumerate(results)]
    return {"explain.json": _dumps(report)}, lines


def _cmd_metrics(run: _Run):
    cfg = run.cfg
    f = _stage("model", run.model, cfg["model"])
    d = len(cfg["explicand"])
    p = _stage("density", run.density, cfg.get("density"), d)
    ctx = GameContext(f, cfg["explicand"], run.baseline(cfg["baseline"]), p)

    def compute():
        v = run.value_function(ctx)
        attr = run.estimate(v, d)
        curve = deletion_curve(attr, ctx, cfg["fractions"], cfg.get("target", "f"), cfg.get("order", "signed"))
        area = auc(curve, cfg.get("normalize", True))
        out = {"attribution": attr.to_dict(), "curve": {"fractions": curve.fractions.tolist(),
                                                        "values": curve.values.tolist(), "target": curve.target},
               "auc": area.value, "auc_normalized": area.normalized}
        if "sensitivity" in cfg:
            s = cfg["sensitivity"]
            out["sensitivity_n"] = sensitivity_n(attr, v, d, s["fracs"], s["trials"], run.seed_for("sensitivity"))
        return out, curve

    out, curve = _stage("metrics", compute)
    out.update({"command": "metrics", "seed": run.seed})
    lines = [f"auc {out['auc']:.6g} (normalized={out['auc_normalized']})"]
    if "sensitivity_n" in out:
        lines.append(f"sensitivity-n {out['sensitivity_n']:.6g}")
    return {"metrics.json": _dumps(out), "deletion_curve.csv": curve.to_csv()}, lines


def _cmd_axioms(run: _Run):
    cfg = run.cfg
    gen = ax.GameInstanceGenerator(cfg.get("dims", (2, 3, 4)), cfg.get("support_sizes", (2, 3)),
                                   run.seed_for("axioms"))
    trials, tol = cfg.get("trials", 200), cfg.get("tol", 1e-9)
    rtol, T = cfg.get("robustness_tol", 1e-12), cfg.get("T", 1.0)
    b = cfg["builder"]
    checks = cfg.get("checks", list(ax.VALUE_AXIOMS))
    table = {
        "linearity": lambda: ax.check_linearity(b, gen, trials, tol),
        "symmetry": lambda: ax.check_symmetry(b, gen, trials, tol),
        "dummy": lambda: ax.check_dummy(b, gen, trials, tol, "both"),
        "dummy_function": lambda: ax.check_dummy(b, gen, trials, tol, "function"),
        "null": lambda: ax.check_null(b, gen, trials, tol),
        "efficiency": lambda: ax.check_efficiency(b, gen, trials, tol),
        "set_relevance": lambda: ax.check_set_relevance(b, gen, trials, tol),
        "robustness": lambda: ax.check_robustness(b, gen, trials, rtol, T),
        "transfer": lambda: ax.check_transfer(b, gen, trials, tol),
        "ces_rjbshap_identity": lambda: ax.check_ces_rjbshap_identity(gen, trials, tol),
    }
    reports = [_stage(f"axioms:{c}", table[c]) for c in checks]
    doc = {"command": "axioms", "seed": run.seed, "builder": b, "reports": [r.to_dict() for r in reports]}
    lines = [f"{'axiom':<22}{'passed':<8}{'max_violation':>14}"]
    lines += [f"{r.axiom:<22}{str(r.passed):<8}{r.max_violation:>14.3g}" for r in reports]
    return {"axioms.json": _dumps(doc)}, lines


def _cmd_attack(run: _Run):
    doc = dict(run.cfg)
    doc["seed"] = run.seed
    cfg = AttackConfig.from_dict(doc)
    report = hiding_unfairness_experiment(cfg)
    out = report.to_dict()
    out.update({"command": "attack", "config": cfg.to_dict()})
    rows = ["value_function,feature,before,after"]
    rows += [f"{vf},{name},{repr(float(b))},{repr(float(a))}" for vf, name, b, a in report.bar_rows()]
    k = report.protected
    lines = [f"agreement {report.agreement:.4f}"]
    lines += [f"{vf:<16} protected before {report.before[vf][k]:+.4f} after {report.after[vf][k]:+.4f}"
              for vf in report.before]
    return {"attack.json": _dumps(out), "attack_bars.csv": "\n".join(rows) + "\n"}, lines


def _cmd_train_density(run: _Run):
    cfg = run.cfg
    data = _stage("load", run.dataset)
    noise = NoiseSpec(run.baseline(cfg["noise"]["baseline"]), cfg["noise"].get("ratio", 1.0))
    trainer = _trainer(cfg.get("trainer"), TrainerConfig(lr=0.05, batch_size=64, epochs=100))
    ood = _stage("train-density", nce_train, data, noise, trainer, run.seed_for("train-density"),
                 tuple(cfg.get("hidden", (32, 32))), tuple(cfg.get("clip", (0.01, 0.99))))
    lines = [f"final bce {ood.losses[-1]:.6g} (initial {ood.initial_loss:.6g})"]
    return {"density.json": _dumps(ood.to_dict())}, lines


def _cmd_train_surrogate(run: _Run):
    cfg = run.cfg
    data = _stage("load", run.dataset)
    f = _stage("model", run.model, cfg["model"])
    trainer = _trainer(cfg.get("trainer"), TrainerConfig(lr=0.01, batch_size=64, epochs=50))
    fit = _stage("train-surrogate", _fit_surrogate, f, data, trainer, run.seed_for("train-surrogate"),
                 cfg.get("encoding", "masked"), cfg.get("masks", "shapley"), cfg.get("n_masks", 32),
                 tuple(cfg.get("hidden", (64, 64))))
    lines = [f"final mse {fit.losses[-1]:.6g}"]
    return {"surrogate.json": _dumps(fit.surrogate.to_dict())}, lines


HANDLERS = {
    "explain": _cmd_explain,
    "metrics": _cmd_metrics,
    "axioms": _cmd_axioms,
    "attack": _cmd_attack,
    "train-density": _cmd_train_density,
    "train-surrogate": _cmd_train_surrogate,
}


def _dumps(doc) -> str:
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def run_experiment(command: str, cfg: dict, seed: int, out_dir, base_dir=".") -> int:
    """Validate, run, write artifacts. Returns the process exit status."""
    try:
        validate_config(command, cfg)
    except ConfigInvalid as exc:
        print(f"error [config]: {exc}", file=sys.stderr)
        return 2
    run = _Run(command, cfg, seed, Path(base_dir))
    try:
        files, lines = HANDLERS[command](run)
    except StageError as exc:
        print(f"error {exc}", file=sys.stderr)
        return 1
    except (JointShapError, ValueError, OSError) as exc:
        print(f"error [{command}] {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for name, text in files.items():
        with (out / name).open("w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    for line in lines:
        print(line)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="jointshap", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="JSON configuration file")
        p.add_argument("--seed", type=int, default=0, help="top-level seed (default 0)")
        p.add_argument("--out", required=True, help="output directory")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = json.loads(Path(args.config).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error [config]: {exc}", file=sys.stderr)
        return 2
    base = os.path.dirname(os.path.abspath(args.config))
    return run_experiment(args.command, cfg, args.seed, args.out, base)


if __name__ == "__main__":
    sys.exit(main())
