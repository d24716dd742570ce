import numpy as np
import pytest

from jointshap.core import (
    BaselineDistribution,
    ConstantField,
    Coalition,
    Dataset,
    GameContext,
    LinearField,
    TableDensity,
    TableField,
    UniformDensity,
    all_masks,
)
from jointshap.errors import ConfigError, DegenerateSupportError, InvalidInputError
from jointshap.learners import TrainerConfig
from jointshap.value_functions import (
    BaselineValue,
    BoxSupport,
    CESEmpirical,
    CESSample,
    CESSupervised,
    DiscreteSupport,
    RandomBaselineValue,
    _fit_surrogate,
    bshap,
    ces_empirical,
    ces_sample,
    ces_supervised_fit,
    jbshap,
    make_value_function,
    rbshap,
    rjbshap,
    shapley_mask_probability,
    shapley_mask_sample,
)

SUP2 = [[0, 1], [0, 1]]
# F(A, B) = B with P(0,0) = P(0,1) = P(1,1) = 1/3
TWO_F = TableField(SUP2, [[0, 1], [0, 1]])
TWO_P = TableDensity(SUP2, [[1 / 3, 1 / 3], [0, 1 / 3]])
ORDER = [Coalition.empty(2), Coalition.of([0], 2), Coalition.of([1], 2), Coalition.full(2)]


def _ctx(**kw):
    base = dict(f=TWO_F, x=[1, 1], baseline=[0, 0], p=TWO_P)
    base.update(kw)
    return GameContext(**base)


def test_bshap_examples():
    ctx = GameContext(LinearField([1.0, 1.0]), [1, 1], baseline=[0, 0])
    assert bshap(ctx, [0]) == 1.0
    assert bshap(ctx, Coalition.full(2)) == 2.0
    assert bshap(ctx, Coalition.empty(2)) == 0.0
    assert bshap(_ctx(), [1]) == 1.0
    with pytest.raises(ConfigError):
        bshap(GameContext(LinearField([1.0, 1.0]), [1, 1]), [0])


def test_jbshap_two_feature_values():
    vals = [jbshap(_ctx(), s) for s in ORDER]
    np.testing.assert_allclose(vals, [0, 0, 1 / 3, 1 / 3], atol=1e-12)


def test_jbshap_reduces_to_bshap_under_flat_density():
    ctx = _ctx(p=UniformDensity(2, 1.0))
    for s in ORDER:
        assert jbshap(ctx, s) == bshap(ctx, s)
    zero = _ctx(f=ConstantField(2, 0.0))
    assert all(jbshap(zero, s) == 0.0 for s in ORDER)
    with pytest.raises(ConfigError):
        jbshap(_ctx(p=None), [0])


def test_jbshap_endpoints():
    rng = np.random.default_rng(0)
    sup = [[0, 1, 2]] * 3
    f = TableField(sup, rng.normal(size=(3, 3, 3)))
    p = TableDensity(sup, rng.random((3, 3, 3)))
    x, xp = np.array([2.0, 0.0, 1.0]), np.array([1.0, 1.0, 0.0])
    v = BaselineValue(GameContext(f, x, xp, p), weighted=True)
    assert v(Coalition.full(3)) == f(x) * p(x)
    assert v(Coalition.empty(3)) == f(xp) * p(xp)


def test_rbshap_exact_two_point_baseline():
    dist = BaselineDistribution.uniform([[0, 0], [2, 2]])
    ctx = GameContext(LinearField([1.0, 1.0]), [1, 1], baseline=dist)
    assert rbshap(ctx, [0]) == pytest.approx(2.0, abs=1e-15)
    with pytest.raises(InvalidInputError):
        rbshap(ctx, [0], n=0)


def test_random_baseline_degenerate_and_constant():
    rng = np.random.default_rng(1)
    sup = [[0, 1, 2]] * 2
    f = TableField(sup, rng.normal(size=(3, 3)))
    p = TableDensity(sup, rng.random((3, 3)))
    one = GameContext(f, [2, 1], BaselineDistribution.uniform([[0, 2]]), p)
    fixed = GameContext(f, [2, 1], [0, 2], p)
    for m in all_masks(2):
        s = Coalition.from_bool(m)
        assert rbshap(one, s) == pytest.approx(bshap(fixed, s), abs=1e-15)
        assert rjbshap(one, s) == pytest.approx(jbshap(fixed, s), abs=1e-15)
    flat = GameContext(ConstantField(2, 1.0), [2, 1], BaselineDistribution.grid(sup), UniformDensity(2, 1.0))
    assert all(rjbshap(flat, Coalition.from_bool(m)) == pytest.approx(1.0) for m in all_masks(2))


def test_rjbshap_two_feature_values():
    ctx = _ctx(baseline=BaselineDistribution.grid(SUP2))
    vals = [rjbshap(ctx, s) for s in ORDER]
    np.testing.assert_allclose(vals, [1 / 6, 1 / 6, 1 / 3, 1 / 3], atol=1e-12)


def test_random_baseline_sampled_is_seeded():
    dist = BaselineDistribution.grid([np.arange(10.0), np.arange(10.0)])
    ctx = GameContext(LinearField([1.0, 2.0]), [3, 3], baseline=dist)
    a = RandomBaselineValue(ctx, weighted=False, n=50, seed=3)
    b = RandomBaselineValue(ctx, weighted=False, n=50, seed=3)
    assert not a.exact
    np.testing.assert_array_equal(a.evaluate(all_masks(2)), b.evaluate(all_masks(2)))
    # full coalition never reads the baseline
    assert a(Coalition.full(2)) == 9.0


def test_ces_empirical_examples():
    data = Dataset([[1, 2], [1, 5], [4, 5]])
    f = LinearField([1.0, 1.0])
    ctx = GameContext(f, [1, 9])
    assert ces_empirical(ctx, data, [0]) == pytest.approx(4.5)
    assert ces_empirical(ctx, data, Coalition.empty(2)) == pytest.approx(6.0)
    v = CESEmpirical(ctx, data)
    assert v([1]) == pytest.approx(6.0)
    assert v.metadata()["sparse_match"] == 1
    assert v.match_count([0]) == 2


def test_ces_sample_two_feature_full_enumeration():
    v = CESSample(_ctx(baseline=None), DiscreteSupport(SUP2), n=100, seed=0)
    np.testing.assert_allclose([v(s) for s in ORDER], [2 / 3, 1, 1, 1], atol=1e-12)


def test_ces_sample_uniform_density_is_plain_mean():
    f = LinearField([1.0, 3.0])
    ctx = GameContext(f, [0.5, 0.5], p=UniformDensity(2, 0.25))
    v = CESSample(ctx, BoxSupport([0, 0], [1, 1]), n=4000, seed=2)
    # E[x2] over the box is 0.5 so v({0}) is near 0.5 + 1.5
    assert v([0]) == pytest.approx(2.0, abs=0.05)
    assert v(Coalition.full(2)) == 2.0
    with pytest.raises(ConfigError):
        ces_sample(ctx, [0])


def test_ces_sample_degenerate_support():
    p = TableDensity(SUP2, [[0, 0], [0, 1]])
    v = CESSample(GameContext(TWO_F, [0, 0], p=p), DiscreteSupport(SUP2))
    with pytest.raises(DegenerateSupportError):
        v([0])


def test_shapley_mask_law():
    rng = np.random.default_rng(0)
    M = shapley_mask_sample(3, 40000, rng)
    sizes = np.bincount(M.sum(axis=1), minlength=4) / M.shape[0]
    np.testing.assert_allclose(sizes, 0.25, atol=0.01)
    assert shapley_mask_probability(all_masks(3)).sum() == pytest.approx(1.0)


def test_surrogate_constant_function():
    data = Dataset(np.random.default_rng(0).normal(size=(20, 2)))
    g = ces_supervised_fit(ConstantField(2, 0.7), data, TrainerConfig(lr=0.05, batch_size=32, epochs=300),
                           seed=0, n_masks=8, hidden=())
    pts = np.random.default_rng(1).normal(size=(10, 2))
    M = shapley_mask_sample(2, 10, np.random.default_rng(2))
    np.testing.assert_allclose(g.predict(pts, M), 0.7, atol=1e-3)


def test_surrogate_ignores_off_coalition_values():
    data = Dataset(np.random.default_rng(0).normal(size=(10, 3)))
    g = ces_supervised_fit(LinearField([1.0, 2.0, 3.0]), data, TrainerConfig(epochs=2), seed=0, hidden=(4,))
    a = CESSupervised(GameContext(LinearField([1.0, 2.0, 3.0]), [1.0, 2.0, 3.0]), g)
    b = CESSupervised(GameContext(LinearField([1.0, 2.0, 3.0]), [1.0, -7.0, 99.0]), g)
    assert a([0]) == b([0])
    with pytest.raises(InvalidInputError):
        CESSupervised(GameContext(LinearField([1.0, 1.0]), [0, 0]), g)


def test_surrogate_singleton_dataset_full_coalition():
    f = LinearField([1.0, -2.0])
    x = np.array([0.5, 0.25])
    fit = _fit_surrogate(f, Dataset([x]), TrainerConfig(lr=0.4, batch_size=64, epochs=500), 0,
                         "onehot", "enumerate", 0, ())
    assert CESSupervised(GameContext(f, x), fit.surrogate)(Coalition.full(2)) == pytest.approx(f(x), abs=1e-3)


def test_table_surrogate_matches_ces_empirical():
    rng = np.random.default_rng(0)
    sup = [[0, 1]] * 3
    f = TableField(sup, rng.uniform(0, 1, (2, 2, 2)))
    data = Dataset(rng.integers(0, 2, (12, 3)).astype(float))
    fit = _fit_surrogate(f, data, TrainerConfig(lr=0.4, batch_size=10**6, epochs=2000), 0,
                         "onehot", "enumerate", 0, ())
    M = all_masks(3)
    for x in data.rows:
        ctx = GameContext(f, x)
        np.testing.assert_allclose(CESSupervised(ctx, fit.surrogate).evaluate(M),
                                   CESEmpirical(ctx, data).evaluate(M), atol=1e-3)


def test_factory():
    ctx = _ctx()
    assert make_value_function("jbshap", ctx)([1]) == pytest.approx(1 / 3)
    assert make_value_function("bshap", ctx).kind == "bshap"
    with pytest.raises(ConfigError):
        make_value_function("lime", ctx)
