import json

import numpy as np
import pytest

from jointshap.attack import tail_trigger_instance
from jointshap.axioms import (
    BUILDERS,
    GameInstance,
    GameInstanceGenerator,
    check_ces_rjbshap_identity,
    check_dummy,
    check_efficiency,
    check_linearity,
    check_null,
    check_robustness,
    check_set_relevance,
    check_strong_t_robustness,
    check_symmetry,
    check_transfer,
    get_builder,
    run_battery,
)
from jointshap.core import TableField, all_masks

GEN = GameInstanceGenerator(seed=0)
N = 30


def test_generator_is_deterministic():
    a, b = GEN.instance(3, "symmetric"), GEN.instance(3, "symmetric")
    np.testing.assert_array_equal(a.f.values, b.f.values)
    np.testing.assert_array_equal(a.x, b.x)
    i, j = a.meta["pair"]
    np.testing.assert_allclose(a.f.values, np.swapaxes(a.f.values, i, j))
    assert a.x[i] == a.x[j]


def test_dummy_kinds():
    dum = GEN.instance(2, "dummy")
    i = dum.meta["dummy"]
    for tab in (dum.f.values, dum.p.values):
        np.testing.assert_array_equal(tab, np.repeat(np.take(tab, [0], axis=i), tab.shape[i], axis=i))
    only_f = GEN.instance(2, "dummy_function")
    i = only_f.meta["dummy"]
    tab = only_f.f.values
    np.testing.assert_array_equal(tab, np.repeat(np.take(tab, [0], axis=i), tab.shape[i], axis=i))


def test_instance_round_trip():
    inst = GEN.instance(5)
    back = GameInstance.from_dict(json.loads(json.dumps(inst.to_dict())))
    np.testing.assert_array_equal(back.p.values, inst.p.values)
    np.testing.assert_array_equal(back.x_prime, inst.x_prime)


def test_unknown_builder():
    with pytest.raises(KeyError):
        get_builder("lime")


def test_jbshap_passes_all_checks():
    for rep in run_battery("jbshap", GEN, trials=N):
        assert rep.passed, rep.to_dict()
        assert rep.witness is None or rep.max_violation <= rep.tolerance


def test_rjbshap_passes_all_checks():
    assert all(r.passed for r in run_battery("rjbshap", GEN, trials=N))


def test_bshap_failures_are_over_distributions():
    assert not check_efficiency("bshap", GEN, N).passed
    assert not check_robustness("bshap", GEN, N).passed
    lin = check_linearity("bshap", GEN, N)
    assert not lin.passed
    assert lin.details["function"] <= 1e-9
    assert check_dummy("bshap", GEN, N, invariance="function").passed


def test_ces_fails_dummy_and_robustness_with_witnesses():
    rep = check_dummy("ces", GEN, N, invariance="function")
    assert not rep.passed and rep.witness is not None
    rob = check_robustness("ces", GEN, N)
    assert not rob.passed and "coalition" in rob.witness
    # the function-and-density dummy and symmetry still hold
    assert check_dummy("ces", GEN, N, invariance="both").passed
    assert check_symmetry("ces", GEN, N).passed


def test_dummy_witness_reproduces_standalone():
    rep = check_dummy("ces", GEN, N, invariance="function")
    w = json.loads(json.dumps(rep.witness))
    inst = GameInstance.from_dict(w["instance"])
    m0 = np.zeros((1, inst.d), dtype=bool)
    m0[0, w["coalition"]] = True
    m1 = m0.copy()
    m1[0, w["dummy"]] = True
    vf = get_builder("ces")(inst)
    v0, v1 = vf.evaluate(m0)[0], vf.evaluate(m1)[0]
    assert v0 == pytest.approx(w["v_s"], abs=1e-12) and v1 == pytest.approx(w["v_si"], abs=1e-12)
    assert abs(v1 - v0) == pytest.approx(rep.max_violation, abs=1e-12)


def test_ces_empirical_matches_exact_ces_on_weighted_grid():
    inst = GEN.instance(1)
    m = all_masks(inst.d)
    np.testing.assert_allclose(BUILDERS["ces_empirical"](inst).evaluate(m), BUILDERS["ces"](inst).evaluate(m),
                               atol=1e-12)


def test_symmetry_precondition_skips():
    rep = check_symmetry("jbshap", GEN, 10, kind="asymmetric")
    assert rep.skipped == 10 and rep.passed


def test_null_and_set_relevance_for_ces():
    assert check_set_relevance("ces", GEN, N).passed
    assert check_null("jbshap", GEN, N).passed


def test_transfer_details():
    rep = check_transfer("jbshap", GEN, 10)
    assert set(rep.details) == {"linearity_f", "linearity_p", "symmetry", "dummy", "efficiency"}
    assert rep.passed
    assert not check_transfer("bshap", GEN, 10).passed


def test_ces_rjbshap_identity():
    rep = check_ces_rjbshap_identity(GEN, 40)
    assert rep.passed, rep.witness


def test_strong_robustness_hand_case():
    inst = GEN.instance(0)
    f2 = TableField(inst.supports, inst.f.values + 0.3)
    rep = check_strong_t_robustness("jbshap", inst, f2)
    assert rep.passed
    assert rep.details["max_delta_v"] <= rep.details["epsilon"] + 1e-12


def test_tail_trigger_blows_up_bshap_only():
    inst, f2 = tail_trigger_instance()
    bs = check_strong_t_robustness("bshap", inst, f2)
    jb = check_strong_t_robustness("jbshap", inst, f2)
    assert bs.details["ratio"] > 1e3 and not bs.passed
    assert jb.passed


def test_report_json():
    doc = json.loads(check_null("jbshap", GEN, 3).to_json())
    assert doc["axiom"] == "null" and doc["passed"] is True
