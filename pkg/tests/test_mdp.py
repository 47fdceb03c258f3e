import numpy as np
import pytest

from cptdp.generators import corridor, geometric_chain, random_mdp
from cptdp.mdp import (
    Discounted,
    MarkovModel,
    Outcome,
    RandomizedPolicy,
    Transient,
    ValueFunction,
    pliska_check,
    return_distribution,
    uniform_transience_certificate,
    validate_model,
)
from conftest import recurrent_escape_model, transient_branch_model, two_disturbance_model


def test_validate_clean_model():
    assert validate_model(two_disturbance_model()).ok
    assert validate_model(transient_branch_model()).ok


def test_validate_absorbing_cost_violation():
    m = MarkovModel(
        states=("s0", "sink"),
        feasible_actions={"s0": ("a",), "sink": ("stay",)},
        outcomes={
            ("s0", "a"): (Outcome("d0", 1.0, "sink", 0.5),),
            ("sink", "stay"): (Outcome("d0", 1.0, "sink", 0.1),),
        },
        cost_bound=1.0,
        mode=Transient("sink"),
    )
    report = validate_model(m)
    assert not report.ok
    assert any(v.code == "absorbing-cost" and "sink" in v.location for v in report.violations)


def test_validate_normalization_violation():
    m = MarkovModel(
        states=("s0",),
        feasible_actions={"s0": ("a",)},
        outcomes={("s0", "a"): (Outcome("d0", 0.38, "s0", 0.0), Outcome("d1", 0.6, "s0", 0.0))},
        cost_bound=1.0,
        mode=Discounted(0.9),
    )
    report = validate_model(m)
    assert any(v.code == "law-normalization" and "(s0, a)" in v.location for v in report.violations)


def test_validate_more_violations():
    m = MarkovModel(
        states=("s0", "s1"),
        feasible_actions={"s0": ("a",), "s1": ()},
        outcomes={("s0", "a"): (Outcome("d0", 1.0, "ghost", 99.0),)},
        cost_bound=1.0,
        mode=Discounted(1.5),
    )
    codes = {v.code for v in validate_model(m).violations}
    assert {"no-actions", "unknown-successor", "cost-bound-exceeded", "discount-range"} <= codes


def test_validate_absorbing_leak():
    m = MarkovModel(
        states=("s0", "sink"),
        feasible_actions={"s0": ("a",), "sink": ("stay",)},
        outcomes={
            ("s0", "a"): (Outcome("d0", 1.0, "sink", 0.5),),
            ("sink", "stay"): (Outcome("d0", 1.0, "s0", 0.0),),
        },
        cost_bound=1.0,
        mode=Transient("sink"),
    )
    assert any(v.code == "absorbing-leak" for v in validate_model(m).violations)


# ---------------------------------------------------------------------------
# value functions and policies
# ---------------------------------------------------------------------------


def test_value_function_basics():
    m = two_disturbance_model()
    J = ValueFunction.from_dict(m, {"s1": 2.0, "s2": -4.0})
    assert J["s1"] == 2.0 and J["s0"] == 0.0
    assert J.sup_norm() == 4.0
    assert J.sup_dist(ValueFunction.zeros(m)) == 4.0
    with pytest.raises(ValueError):
        ValueFunction(m.states, np.array([1.0, np.inf, 0.0]))
    with pytest.raises(ValueError):
        ValueFunction(m.states, np.zeros(2))


def test_policy_validation():
    m = two_disturbance_model()
    pol = RandomizedPolicy.uniform(m)
    pol.validate_against(m)
    pol.per_state["s0"] = np.array([0.4, 0.4])
    with pytest.raises(ValueError):
        pol.validate_against(m)
    det = RandomizedPolicy.deterministic(m, {"s0": "a"})
    assert det.mix("s0").tolist() == [1.0]


# ---------------------------------------------------------------------------
# return distributions
# ---------------------------------------------------------------------------


def test_return_distribution_deterministic_example():
    m = MarkovModel(
        states=("s0",),
        feasible_actions={"s0": ("a",)},
        outcomes={("s0", "a"): (Outcome("d0", 1.0, "s0", 1.0),)},
        cost_bound=1.0,
        mode=Discounted(0.9),
    )
    dist = return_distribution(m, "s0", [1.0], ValueFunction.zeros(m))
    assert dist.atoms == ((1.0, 1.0),)
    assert not dist.subnormalized


def test_return_distribution_two_disturbances():
    m = two_disturbance_model(alpha=0.5)
    J = ValueFunction.from_dict(m, {"s1": 2.0, "s2": 4.0})
    dist = return_distribution(m, "s0", [1.0], J)
    assert sorted(dist.atoms) == [(2.0, 0.3), (4.0, 0.7)]


def test_return_distribution_all_absorbing_is_empty():
    m = transient_branch_model()
    dist = return_distribution(m, "s1", [1.0], ValueFunction.zeros(m))
    assert dist.atoms == ()
    assert dist.subnormalized and dist.total_mass == 0.0


def test_return_distribution_subnormalized_mass_is_non_absorption():
    m = transient_branch_model()
    dist = return_distribution(m, "s0", [1.0], ValueFunction.zeros(m))
    assert dist.subnormalized
    assert dist.total_mass == pytest.approx(0.6, abs=1e-15)


def test_return_distribution_affine_in_mix():
    m = random_mdp(4, 3, 3, (-1.0, 1.0), Discounted(0.7), seed=3)
    rng = np.random.default_rng(0)
    J = ValueFunction(m.states, rng.normal(0, 2, m.n_states))
    mix1 = np.array([1.0, 0.0, 0.0])
    mix2 = np.array([0.0, 0.25, 0.75])
    theta = 0.4
    blended = return_distribution(m, "s0", theta * mix1 + (1 - theta) * mix2, J)
    d1 = return_distribution(m, "s0", mix1, J)
    d2 = return_distribution(m, "s0", mix2, J)
    expect = {}
    for v, mass in d1.atoms:
        expect[v] = expect.get(v, 0.0) + theta * mass
    for v, mass in d2.atoms:
        expect[v] = expect.get(v, 0.0) + (1 - theta) * mass
    got = {}
    for v, mass in blended.atoms:
        got[v] = got.get(v, 0.0) + mass
    assert set(got) == set(expect)
    for v in got:
        assert got[v] == pytest.approx(expect[v], abs=1e-14)


def test_return_distribution_rejects_bad_mix():
    m = two_disturbance_model()
    with pytest.raises(ValueError):
        return_distribution(m, "s0", [0.5, 0.5], ValueFunction.zeros(m))  # wrong length
    m2 = random_mdp(3, 2, 2, (-1.0, 1.0), Discounted(0.5), seed=0)
    with pytest.raises(ValueError):
        return_distribution(m2, "s0", [0.7, 0.7], ValueFunction.zeros(m2))
    with pytest.raises(ValueError):
        return_distribution(m2, "s0", [-0.2, 1.2], ValueFunction.zeros(m2))


def test_return_distribution_absorbing_state_rejected():
    m = transient_branch_model()
    with pytest.raises(ValueError):
        return_distribution(m, "sink", [1.0], ValueFunction.zeros(m))


# ---------------------------------------------------------------------------
# transience diagnostics
# ---------------------------------------------------------------------------


def test_pliska_all_absorbing_in_one_step():
    m = corridor(1)  # s0 -> sink surely
    bound, converged = pliska_check(m, RandomizedPolicy.uniform(m), horizon=10, tol=1e-12)
    assert converged
    assert bound == 0.0


def test_pliska_geometric_closed_form():
    m = geometric_chain(0.5)
    bound, converged = pliska_check(m, RandomizedPolicy.uniform(m), horizon=200, tol=1e-12)
    assert converged
    assert abs(bound - 1.0) <= 1e-12


def test_pliska_recurrent_not_converged():
    m = recurrent_escape_model()
    pol = RandomizedPolicy.deterministic(m, {"s0": "loop", "s1": "loop", "sink": "stay"})
    bound, converged = pliska_check(m, pol, horizon=500, tol=1e-10)
    assert not converged
    assert bound == pytest.approx(500.0)


def test_pliska_monotone_in_horizon():
    m = geometric_chain(0.7)
    pol = RandomizedPolicy.uniform(m)
    bounds = [pliska_check(m, pol, horizon=h, tol=1e-300)[0] for h in (1, 2, 5, 10, 50)]
    assert all(b2 >= b1 for b1, b2 in zip(bounds, bounds[1:]))


def test_pliska_requires_transient_mode():
    m = two_disturbance_model()
    with pytest.raises(ValueError):
        pliska_check(m, RandomizedPolicy.uniform(m), horizon=10, tol=1e-6)
    with pytest.raises(ValueError):
        uniform_transience_certificate(m)


def test_uniform_transience_certificates():
    bound, ok = uniform_transience_certificate(geometric_chain(0.5))
    assert ok and abs(bound - 1.0) <= 1e-9
    # corridor of length L: x_1 .. x_{L-1} are live, x_L is absorbed
    bound, ok = uniform_transience_certificate(corridor(3))
    assert ok and bound == pytest.approx(2.0)
    _, ok = uniform_transience_certificate(recurrent_escape_model(), horizon=400)
    assert not ok
    # forced absorption mass 0.2 bounds the series by 0.8 / 0.2 = 4
    m = random_mdp(6, 3, 3, (-1.0, 1.0), Transient("sink"), seed=2)
    bound, ok = uniform_transience_certificate(m)
    assert ok and bound <= 4.0 + 1e-9
