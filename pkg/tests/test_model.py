from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pmdp_gp.benchmarks import knuth_yao_die, random_pmc, random_pmdp
from pmdp_gp.expressions import MissingVariableError, Signomial
from pmdp_gp.model import (PMDP, LiftGroup, ModelError, Scheduler, Specification, induce, instantiate,
                           normalize_solution, prob01_analysis)
import oracles

C = Signomial.constant
P = Signomial.var("p")


def two_action_model():
    trans = {
        (0, "a"): {0: C(1.0)},
        (0, "b"): {1: C(1.0)},
        (1, "s"): {1: C(1.0)},
    }
    return PMDP(2, 0, trans)


# -- structure -------------------------------------------------------------------

def test_deadlock_rejected():
    with pytest.raises(ModelError, match="deadlock"):
        PMDP(2, 0, {(0, "a"): {1: C(1.0)}})


def test_undeclared_parameter_rejected():
    with pytest.raises(ModelError, match="undeclared"):
        PMDP(1, 0, {(0, "a"): {0: P}})


def test_negative_cost_rejected():
    with pytest.raises(ModelError):
        PMDP(1, 0, {(0, "a"): {0: C(1.0)}}, costs={(0, "a"): -1.0})


def test_specification_invariants():
    with pytest.raises(ModelError):
        Specification("reach", 1.5, frozenset({1}))
    with pytest.raises(ModelError):
        Specification("expcost", -1.0, frozenset({1}))
    with pytest.raises(ModelError):
        Specification("reach", 0.5, frozenset())
    assert str(Specification("reach", 0.125, frozenset({8}), "die2")) == "P<=0.125(die2)"


# -- instantiate --------------------------------------------------------------------

def test_instantiate_knuth_yao_edges(ky):
    mdp = instantiate(ky, {"p": 0.4, "q": 0.7})
    assert mdp.well_defined
    assert mdp.probability(0, "flip", 1) == pytest.approx(0.4, abs=1e-15)
    assert mdp.probability(0, "flip", 2) == pytest.approx(0.6, abs=1e-15)
    assert mdp.probability(1, "flip", 3) == pytest.approx(0.7, abs=1e-15)
    assert mdp.probability(1, "flip", 4) == pytest.approx(0.3, abs=1e-15)


def test_instantiate_fair_rows_sum_to_one(ky):
    mdp = instantiate(ky, {"p": 0.5, "q": 0.5})
    assert mdp.well_defined
    assert np.allclose(mdp.row_sums, 1.0, atol=1e-15)


def test_instantiate_flags_overfull_row():
    m = PMDP(2, 0, {(0, "a"): {0: P, 1: P}, (1, "s"): {1: C(1.0)}}, ("p",))
    mdp = instantiate(m, {"p": 0.9})
    assert not mdp.well_defined
    assert mdp.row_sums[0] == pytest.approx(1.8)


def test_instantiate_missing_parameter(ky):
    with pytest.raises(MissingVariableError):
        instantiate(ky, {"p": 0.5})


# -- induce --------------------------------------------------------------------------

def test_induce_single_action_is_identity(ky):
    mdp = instantiate(ky, {"p": 0.3, "q": 0.8})
    mc = induce(mdp, Scheduler.uniform(ky))
    assert (mc.matrix != mdp.matrix).nnz == 0


def test_induce_mixture():
    m = PMDP(2, 0, {(0, "a"): {0: C(1.0)}, (0, "b"): {1: C(1.0)}, (1, "s"): {1: C(1.0)}})
    mc = induce(instantiate(m, {}), Scheduler({(0, "a"): 0.5, (0, "b"): 0.5, (1, "s"): 1.0}))
    assert mc.probability(0, 0) == 0.5 and mc.probability(0, 1) == 0.5


def test_induce_rejects_disabled_action():
    m = two_action_model()
    with pytest.raises(ModelError, match="disabled"):
        induce(instantiate(m, {}), Scheduler({(0, "a"): 0.5, (0, "b"): 0.5, (1, "z"): 1.0}))


def test_induce_requires_scheduler_for_choices():
    with pytest.raises(ModelError):
        induce(instantiate(two_action_model(), {}))


def _random_scheduler(m, rng):
    w = {}
    for s in range(m.n_states):
        acts = m.enabled(s)
        for a, v in zip(acts, rng.dirichlet(np.ones(len(acts)))):
            w[(s, a)] = float(v)
    return Scheduler(w)


@pytest.mark.parametrize("seed", range(5))
def test_induce_matches_direct_summation(seed):
    rng = np.random.default_rng(seed)
    m = random_pmdp(5, 2, seed, n_actions=3)
    u = {x: float(rng.uniform(0.1, 0.9)) for x in m.parameters}
    sched = _random_scheduler(m, rng)
    mc = induce(instantiate(m, u), sched)
    ref = np.zeros((5, 5))
    for (s, a), row in m.transitions.items():
        for t, e in row.items():
            ref[s, t] += sched[(s, a)] * e.evaluate(u)
    assert np.allclose(mc.matrix.toarray(), ref, atol=1e-15)


@settings(max_examples=40)
@given(st.integers(4, 15), st.integers(0, 2), st.integers(1, 3), st.integers(0, 10_000))
def test_induced_chain_is_row_stochastic(n, k, acts, seed):
    rng = np.random.default_rng(seed)
    m = random_pmc(n, k, seed, n_actions=acts)
    u = {x: float(rng.uniform(0.01, 0.99)) for x in m.parameters}
    mdp = instantiate(m, u)
    assert mdp.well_defined
    mc = induce(mdp, _random_scheduler(m, rng))
    sums = np.asarray(mc.matrix.sum(axis=1)).ravel()
    assert np.all(np.abs(sums - 1.0) <= 1e-9)


# -- prob0 / prob1 -------------------------------------------------------------------------

def test_prob01_knuth_yao_outcome_one(ky):
    zero, one = prob01_analysis(ky, ky.labels["die1"])
    assert {8, 9, 10, 11, 12} <= zero
    # coin states s2 and s4..s6 only lead to the upper outcomes
    assert zero == {2, 4, 5, 6, 8, 9, 10, 11, 12}
    assert one == {7}


def test_target_in_prob1_and_isolated_state_in_prob0():
    m = PMDP(3, 0, {(0, "a"): {1: C(0.5), 0: C(0.5)}, (1, "s"): {1: C(1.0)}, (2, "s"): {2: C(1.0)}})
    zero, one = prob01_analysis(m, {1})
    assert 1 in one and 2 in zero and 0 in one


@settings(max_examples=40)
@given(st.integers(4, 14), st.integers(0, 2), st.integers(1, 2), st.integers(0, 10_000))
def test_prob01_against_graph_and_value_iteration(n, k, acts, seed):
    m = random_pmc(n, k, seed, n_actions=acts)
    target = m.labels["goal"]
    zero, one = prob01_analysis(m, target)
    assert set(target) <= one
    assert not zero & one
    assert zero == set(range(n)) - oracles.can_reach(m, target)
    rng = np.random.default_rng(seed)
    u = {x: float(rng.uniform(0.1, 0.9)) for x in m.parameters}
    rows = {sa: {t: e.evaluate(u) for t, e in row.items()} for sa, row in m.transitions.items()}
    worst = oracles.mdp_value_iteration(rows, n, target, maximize=False)
    assert one == {s for s in range(n) if worst[s] > 1 - 1e-9}


# -- normalization --------------------------------------------------------------------------

def test_normalize_symmetric_scheduler():
    m = two_action_model()
    u, sched = normalize_solution({"_a": 0.3, "_b": 0.3}, m, {(0, "a"): "_a", (0, "b"): "_b"})
    assert sched[(0, "a")] == 0.5 and sched[(0, "b")] == 0.5


def test_normalize_lifted_pair():
    m = PMDP(3, 0, {(0, "f"): {1: P, 2: 1 - P}, (1, "s"): {1: C(1.0)}, (2, "s"): {2: C(1.0)}}, ("p",))
    u, _ = normalize_solution({"p": 0.38, "pbar": 0.57}, m, lifting=[LiftGroup("pbar", P)])
    assert u["p"] == pytest.approx(0.4, rel=1e-12)
    assert 1 - u["p"] == pytest.approx(0.6, rel=1e-12)


def test_normalize_fixpoint(ky):
    u, sched = normalize_solution({"p": 0.3, "pbar": 0.7, "q": 0.6, "qbar": 0.4}, ky,
                                  lifting=[LiftGroup("pbar", P), LiftGroup("qbar", Signomial.var("q"))])
    assert u == {"p": 0.3, "q": 0.6}
    sched.validate(ky)


def test_normalize_posynomial_row_without_lifting():
    m = PMDP(3, 0, {(0, "f"): {1: P, 2: Signomial.var("r")}, (1, "s"): {1: C(1.0)}, (2, "s"): {2: C(1.0)}},
             ("p", "r"))
    u, _ = normalize_solution({"p": 0.2, "r": 0.6}, m)
    assert u["p"] + u["r"] == pytest.approx(1.0, abs=1e-12)
    assert u["p"] / u["r"] == pytest.approx(1 / 3)


def test_normalize_rejects_inexpressible_row():
    r = Signomial.var("r")
    m = PMDP(3, 0, {(0, "f"): {1: P * r, 2: P}, (1, "s"): {1: C(1.0)}, (2, "s"): {2: C(1.0)}}, ("p", "r"))
    with pytest.raises(ModelError):
        normalize_solution({"p": 0.5, "r": 0.5}, m)


@settings(max_examples=50)
@given(st.integers(4, 14), st.integers(1, 2), st.integers(1, 3), st.integers(0, 10_000))
def test_normalized_output_is_well_defined(n, k, acts, seed):
    rng = np.random.default_rng(seed)
    m = random_pmc(n, k, seed, n_actions=acts)
    raw = {x: float(rng.uniform(0.05, 2.0)) for x in m.parameters}
    groups = []
    for x in m.parameters:
        raw[f"{x}_bar"] = float(rng.uniform(0.05, 2.0))
        groups.append(LiftGroup(f"{x}_bar", Signomial.var(x)))
    sched_vars = {}
    for s in range(n):
        if len(m.enabled(s)) > 1:
            for a in m.enabled(s):
                sched_vars[(s, a)] = f"sig_{s}_{a}"
                raw[f"sig_{s}_{a}"] = float(rng.uniform(0.01, 3.0))
    u, sched = normalize_solution(raw, m, sched_vars, groups)
    assert instantiate(m, u, tol=1e-9).well_defined
    sched.validate(m, tol=1e-9)
