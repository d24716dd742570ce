import itertools

import numpy as np
import pytest

from jointshap.core import Coalition, all_masks
from jointshap.errors import CapacityError, DegenerateNormalizationError, InvalidInputError
from jointshap.shapley import (
    AttributionVector,
    exact_shapley,
    global_shapley,
    permutation_shapley,
    sample_permutations,
    truncated_permutation_jbshap,
)
from jointshap.value_functions import TableGame


def brute_shapley(v, d):
    """Average of marginal contributions over all d! orderings."""
    phi = np.zeros(d)
    perms = list(itertools.permutations(range(d)))
    for perm in perms:
        members = []
        for i in perm:
            before = v(Coalition.of(members, d))
            members.append(i)
            phi[i] += v(Coalition.of(members, d)) - before
    return phi / len(perms)


def table(values, d):
    return TableGame(np.asarray(values, dtype=float), d)


def test_two_feature_games():
    # coalition codes: 0 = {}, 1 = {A}, 2 = {B}, 3 = {A, B}
    jb = exact_shapley(table([0, 0, 1 / 3, 1 / 3], 2), 2)
    np.testing.assert_allclose(jb.phi, [0, 1 / 3], atol=1e-12)
    ces = exact_shapley(table([2 / 3, 1, 1, 1], 2), 2)
    np.testing.assert_allclose(ces.phi, [1 / 6, 1 / 6], atol=1e-12)


def test_glove_game():
    def v(s):
        pair = 2 in s and (0 in s or 1 in s)
        p = 0.5 if (0 in s) != (1 in s) else 1.0
        return float(pair) * p
    np.testing.assert_allclose(exact_shapley(v, 3).phi, [0.25, 0.25, 0.5], atol=1e-12)


@pytest.mark.parametrize("d", [1, 2, 3, 4, 5])
def test_exact_matches_brute_force_and_efficiency(d):
    vals = np.random.default_rng(d).normal(size=2**d)
    g = table(vals, d)
    res = exact_shapley(g, d)
    np.testing.assert_allclose(res.phi, brute_shapley(g, d), atol=1e-12)
    assert res.phi.sum() == pytest.approx(vals[-1] - vals[0], abs=1e-12)
    assert abs(res.residual) < 1e-12


def test_exact_symmetry_and_dummy():
    d = 4
    rng = np.random.default_rng(5)
    base = {}
    vals = np.empty(2**d)
    for code, m in enumerate(all_masks(d)):
        # players 0 and 1 interchangeable, player 3 dummy
        key = (int(m[0]) + int(m[1]), bool(m[2]))
        vals[code] = base.setdefault(key, rng.normal())
    phi = exact_shapley(table(vals, d), d).phi
    assert phi[0] == pytest.approx(phi[1], abs=1e-12)
    assert phi[3] == pytest.approx(0.0, abs=1e-12)


def test_exact_capacity():
    with pytest.raises(CapacityError):
        exact_shapley(lambda s: 0.0, 21)
    with pytest.raises(InvalidInputError):
        exact_shapley(lambda s: 0.0, 0)


def test_permutation_additive_game_one_permutation():
    c = np.array([0.3, -1.0, 2.5, 0.0, 4.0])
    v = lambda s: float(c[list(s.members)].sum())  # noqa: E731
    np.testing.assert_allclose(permutation_shapley(v, 5, 1, seed=9).phi, c, atol=1e-12)


def test_permutation_convergence_and_determinism():
    d = 8
    g = table(np.random.default_rng(0).random(2**d), d)
    exact = exact_shapley(g, d).phi
    est = permutation_shapley(g, d, 10_000, seed=1)
    assert np.max(np.abs(est.phi - exact)) < 0.02
    again = permutation_shapley(g, d, 10_000, seed=1)
    np.testing.assert_array_equal(est.phi, again.phi)
    with pytest.raises(InvalidInputError):
        permutation_shapley(g, d, 0, seed=1)


def test_permutation_is_unbiased():
    d = 4
    g = table(np.random.default_rng(3).normal(size=2**d), d)
    exact = exact_shapley(g, d).phi
    means = np.mean([permutation_shapley(g, d, 1, seed=s).phi for s in range(6000)], axis=0)
    assert np.max(np.abs(means - exact)) < 0.05


def test_truncated_frac_zero_is_untruncated():
    d = 6
    g = table(np.random.default_rng(2).normal(size=2**d), d)
    a = truncated_permutation_jbshap(g, d, 200, 0.0, seed=4)
    b = permutation_shapley(g, d, 200, seed=4)
    np.testing.assert_array_equal(a.phi, b.phi)


def test_truncated_noop_on_already_zero_game():
    d = 5
    vals = np.random.default_rng(7).normal(size=2**d)
    sizes = all_masks(d).sum(axis=1)
    vals[sizes < 4] = 0.0
    g = table(vals, d)
    np.testing.assert_array_equal(truncated_permutation_jbshap(g, d, 300, 0.8, seed=1).phi,
                                  permutation_shapley(g, d, 300, seed=1).phi)


def test_truncated_unanimity_game():
    d = 3
    v = lambda s: float(len(s.members) == d)  # noqa: E731
    est = truncated_permutation_jbshap(v, d, 30_000, 1.0, seed=0)
    np.testing.assert_allclose(est.phi, 1 / 3, atol=0.02)
    assert est.meta["min_size"] == 3
    with pytest.raises(InvalidInputError):
        truncated_permutation_jbshap(v, d, 10, 1.5, seed=0)


def test_global_shapley():
    g = global_shapley([AttributionVector([2.0, -2.0], "exact")])
    np.testing.assert_allclose(g.values, [0.5, -0.5])
    g2 = global_shapley([AttributionVector([1.0, 0.0], "exact"), AttributionVector([0.0, 1.0], "exact")],
                        normalize=False)
    np.testing.assert_array_equal(g2.values, [1.0, 1.0])
    with pytest.raises(DegenerateNormalizationError):
        global_shapley([AttributionVector([0.0, 0.0], "exact")])
    with pytest.raises(InvalidInputError):
        global_shapley([])
    with pytest.raises(InvalidInputError):
        global_shapley([AttributionVector([1.0], "exact"), AttributionVector([1.0, 2.0], "exact")])


def test_normalized_global_sums_to_one():
    rng = np.random.default_rng(11)
    attrs = [AttributionVector(rng.normal(size=7), "exact") for _ in range(100)]
    assert np.abs(global_shapley(attrs).values).sum() == pytest.approx(1.0, abs=1e-12)


def test_attribution_round_trip():
    a = AttributionVector([0.1, 0.2], "permutation", samples=10, seed=3)
    b = AttributionVector.from_dict(a.to_dict())
    np.testing.assert_array_equal(a.phi, b.phi)
    assert b.samples == 10 and b.seed == 3


def test_permutation_streams_are_prefix_stable():
    d = 5
    np.testing.assert_array_equal(sample_permutations(d, 20, 2)[:10], sample_permutations(d, 10, 2))
    assert sorted(sample_permutations(d, 1, 2)[0]) == list(range(d))
