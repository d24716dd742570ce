import json
from dataclasses import replace

import numpy as np
import pytest

from jointshap.attack import (
    AttackConfig,
    AttackReport,
    PerturbationSpec,
    analytic_perturbation,
    ces_empirical_attack,
    finetune_attack,
    hiding_unfairness_experiment,
    minmax_scale,
    stage,
    stage_seed,
    synth_biased_dataset,
    tail_trigger_instance,
)
from jointshap.core import Dataset, GameContext, LinearField, UniformDensity
from jointshap.density import smoothed_empirical
from jointshap.errors import InvalidInputError, StageError
from jointshap.learners import NetField, TrainerConfig, net_init
from jointshap.value_functions import CESEmpirical


def test_perturbation_spec():
    assert PerturbationSpec(0, 1.0, epsilon=0.2, normalizer=0.4).C == pytest.approx(0.5)
    with pytest.raises(InvalidInputError):
        PerturbationSpec(0, 1.0)
    with pytest.raises(InvalidInputError):
        PerturbationSpec(0, 1.0, epsilon=1.0, normalizer=0.0)


def test_trigger_leaves_other_points_bit_identical():
    f = LinearField([0.3, -1.7, 2.0])
    g = analytic_perturbation(f, PerturbationSpec(1, 2.0, magnitude=5.0))
    X = np.random.default_rng(0).normal(size=(50, 3))
    np.testing.assert_array_equal(g(X), f(X))
    assert g([0, 2.0, 0]) == f([0, 2.0, 0]) + 5.0
    with pytest.raises(InvalidInputError):
        analytic_perturbation(f, PerturbationSpec(3, 0.0, magnitude=1.0))


def test_tail_trigger_instance_shape():
    inst, f2 = tail_trigger_instance()
    assert 5.0 in inst.supports[1]
    np.testing.assert_array_equal(inst.x, [0.0, 5.0])
    # the perturbation fires only where x2 = 5
    assert f2(inst.x) - inst.f(inst.x) == 1.0
    assert f2(inst.x_prime) == inst.f(inst.x_prime)


def test_ces_empirical_attack_shifts_conditional_mean():
    rows = np.array([[0, 1], [0, 2], [1, 1], [1, 3]], dtype=float)
    data = Dataset(rows)
    f = LinearField([1.0, 1.0])
    g = ces_empirical_attack(f, data, [1, 3], delta=4.0)
    before = CESEmpirical(GameContext(f, [1, 3]), data)
    after = CESEmpirical(GameContext(g, [1, 3]), data)
    assert after([0]) - before([0]) == pytest.approx(4.0)
    assert after([]) - before([]) == pytest.approx(4.0 * 2 / 4)


def test_synth_dataset():
    data, y = synth_biased_dataset(500, d=8, protected=0, seed=1)
    assert data.names[0] == "sex" and data.rows.shape == (500, 8)
    assert set(np.unique(data.rows[:, 0])) == {-1.0, 1.0}
    np.testing.assert_allclose(data.rows[:, 1:].mean(axis=0), 0, atol=1e-12)
    base = y - 0.1 * data.rows[:, 0]
    assert set(np.round(np.unique(base), 12)) <= {0.0, 1.0}
    again, y2 = synth_biased_dataset(500, d=8, protected=0, seed=1)
    np.testing.assert_array_equal(data.rows, again.rows)
    with pytest.raises(InvalidInputError):
        synth_biased_dataset(0)


def test_minmax_scale():
    np.testing.assert_array_equal(minmax_scale([2, 4, 3]), [0, 1, 0.5])
    np.testing.assert_array_equal(minmax_scale([1, 1]), [0, 0])


def test_finetune_targets_only_low_density_candidates():
    rng = np.random.default_rng(0)
    model = NetField(net_init((2, 8, 1), 0))
    on = rng.normal(size=(40, 2))
    cand = np.vstack([rng.normal(size=(20, 2)), 6 + rng.normal(size=(20, 2))])

    class Bump:
        d = 2

        def __call__(self, X):
            X = np.atleast_2d(X)
            return np.exp(-0.5 * np.sum(X**2, axis=1))

    far = cand[20:]
    start_off = np.mean((model(far) + far[:, 0]) ** 2)
    fit = finetune_attack(model, Bump(), 0, TrainerConfig(lr=0.02, batch_size=8, epochs=200, seed=1), on, cand)
    assert fit.n_on == 40 and 20 <= fit.n_off < 40
    # off-manifold targets are learnt while the on-manifold error stays below the output spread
    assert fit.components["off_manifold_mse"] < 0.05 * start_off
    assert fit.components["on_manifold_mse"] < np.var(model(on))
    with pytest.raises(InvalidInputError):
        finetune_attack(LinearField([1.0, 1.0]), UniformDensity(2), 0, TrainerConfig(), on, cand)


def test_stage_wrapping_and_seeds():
    assert stage_seed(0, "data") == stage_seed(0, "data") != stage_seed(0, "model")
    with pytest.raises(StageError) as info:
        with stage("density"):
            raise ValueError("boom")
    assert info.value.stage == "density"
    assert str(info.value).startswith("[density]")


def test_report_validation_and_bars():
    with pytest.raises(InvalidInputError):
        AttackReport(1.5, {}, {}, {}, {}, 0, ())
    r = AttackReport(1.0, {"bshap": [0.5, 0.5]}, {"bshap": [-0.5, 0.5]}, {}, {}, 0, ("sex", "x1"))
    assert r.bar_rows()[0] == ("bshap", "sex", 0.5, -0.5)
    assert json.loads(r.to_json())["names"] == ["sex", "x1"]


def test_config_round_trip():
    cfg = AttackConfig(n=300, value_functions=("bshap",))
    assert AttackConfig.from_dict(cfg.to_dict()) == cfg


def _small():
    return AttackConfig(n=300, hidden=(16,), model_trainer=TrainerConfig(lr=0.01, batch_size=32, epochs=20),
                        density_hidden=(8,), density_trainer=TrainerConfig(lr=0.05, batch_size=32, epochs=10),
                        attack_trainer=TrainerConfig(lr=0.02, batch_size=16, epochs=10), attack_candidates=300,
                        n_explicands=10)


def test_small_experiment_is_reproducible():
    a = hiding_unfairness_experiment(_small())
    b = hiding_unfairness_experiment(_small())
    assert a.to_json() == b.to_json()
    assert set(a.before) == {"bshap", "jbshap"}
    assert np.abs(a.before["bshap"]).sum() == pytest.approx(1.0)


def test_no_attack_means_no_change():
    r = hiding_unfairness_experiment(replace(_small(), attack=False))
    assert r.agreement == 1.0
    assert r.before == r.after


def test_surrogate_value_function_runs():
    cfg = replace(_small(), value_functions=("ces_supervised",), n_explicands=3,
                  surrogate_trainer=TrainerConfig(lr=0.01, batch_size=64, epochs=2), surrogate_masks=2)
    r = hiding_unfairness_experiment(cfg)
    assert "surrogate_mse" in r.details and len(r.before["ces_supervised"]) == 8


def test_stage_error_names_stage():
    with pytest.raises(StageError) as info:
        hiding_unfairness_experiment(replace(_small(), value_functions=("lime",)))
    assert info.value.stage == "explain"
    assert "lime" in str(info.value)


def _finetune_setup():
    rng = np.random.default_rng(3)
    model = NetField(net_init((2, 6, 1), 1))
    on = rng.normal(size=(30, 2))
    cand = np.vstack([rng.normal(size=(10, 2)), 5 + rng.normal(size=(10, 2))])
    return model, on, cand


def test_zero_off_weight_keeps_the_model():
    model, on, cand = _finetune_setup()
    p = smoothed_empirical(Dataset(on), 1.0)
    fit = finetune_attack(model, p, 0, TrainerConfig(lr=0.05, batch_size=8, epochs=20, seed=0), on, cand,
                          loss_weights=(1.0, 0.0))
    probe = np.vstack([on, cand])
    assert np.max(np.abs(fit.model(probe) - model(probe))) < 1e-3


def test_zero_threshold_equals_zero_off_weight():
    model, on, cand = _finetune_setup()
    p = smoothed_empirical(Dataset(on), 1.0)
    cfg = TrainerConfig(lr=0.05, batch_size=8, epochs=20, seed=0)
    a = finetune_attack(model, p, 0, cfg, on, cand, low_density_threshold=0.0)
    b = finetune_attack(model, p, 0, cfg, on, cand, loss_weights=(1.0, 0.0))
    assert a.n_off == 0
    probe = np.vstack([on, cand])
    np.testing.assert_allclose(a.model(probe), b.model(probe), atol=1e-3)


def test_zero_bias_labels_ignore_protected_feature():
    data, y = synth_biased_dataset(4000, bias=0.0, seed=2)
    assert abs(np.corrcoef(data.rows[:, 0], y)[0, 1]) < 0.05
