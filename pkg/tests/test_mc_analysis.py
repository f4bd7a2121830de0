from __future__ import annotations

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

from pmdp_gp import mc_analysis
from pmdp_gp.benchmarks import brp_like, knuth_yao_die, multi_dice, random_pmc
from pmdp_gp.expressions import Signomial
from pmdp_gp.mc_analysis import (CostDivergenceError, check, expected_cost, gauss_seidel, reachability,
                                 reachability_system)
from pmdp_gp.model import PMDP, MarkovChain, Scheduler, Specification, induce, instantiate
import oracles

C = Signomial.constant


def chain(m: PMDP, u=None) -> MarkovChain:
    return induce(instantiate(m, u or {}), Scheduler.uniform(m))


def dense_chain(P, costs=None) -> MarkovChain:
    P = np.asarray(P, dtype=float)
    n = len(P)
    return MarkovChain(n, 0, sp.csr_matrix(P), np.zeros(n) if costs is None else np.asarray(costs, float))


# -- reachability ------------------------------------------------------------------

def test_fair_die_outcomes_are_one_sixth(ky):
    mc = chain(ky, {"p": 0.5, "q": 0.5})
    for k in range(1, 7):
        assert reachability(mc, ky.labels[f"die{k}"])[0] == pytest.approx(1 / 6, abs=1e-10)


def test_target_state_has_probability_one(ky):
    mc = chain(ky, {"p": 0.3, "q": 0.6})
    assert reachability(mc, {9})[9] == 1.0


def test_knuth_yao_outcome_one_closed_form(ky):
    mc = chain(ky, {"p": 0.4, "q": 0.7})
    assert reachability(mc, ky.labels["die1"])[0] == pytest.approx(7 / 30, abs=1e-12)


def test_knuth_yao_outcome_two_closed_form(ky):
    rng = np.random.default_rng(3)
    for _ in range(20):
        pv, qv = rng.uniform(0.01, 0.99, 2)
        mc = chain(ky, {"p": pv, "q": qv})
        closed = pv * (1 - qv) * (1 - pv) / (1 - pv * qv)
        assert reachability(mc, ky.labels["die2"])[0] == pytest.approx(closed, rel=1e-12)


@settings(max_examples=30)
@given(st.floats(0.01, 0.99), st.floats(0.01, 0.99))
def test_outcomes_form_a_distribution(pv, qv):
    ky = knuth_yao_die()
    mc = chain(ky, {"p": pv, "q": qv})
    total = sum(reachability(mc, ky.labels[f"die{k}"])[0] for k in range(1, 7))
    assert total == pytest.approx(1.0, abs=1e-9)


@settings(max_examples=40)
@given(st.integers(4, 25), st.integers(0, 2), st.integers(0, 10_000))
def test_reachability_matches_dense_oracle(n, k, seed):
    m = random_pmc(n, k, seed)
    rng = np.random.default_rng(seed)
    u = {x: float(rng.uniform(0.05, 0.95)) for x in m.parameters}
    ours = reachability(chain(m, u), m.labels["goal"])[0]
    ref = oracles.reach_batch(m, m.labels["goal"], {x: np.array([v]) for x, v in u.items()} or {"_": np.ones(1)})[0]
    assert ours == pytest.approx(ref, abs=1e-12)


@pytest.mark.parametrize("weight", [0.1, 0.3, 0.5, 0.7, 0.9])
def test_reachability_monotone_in_edge_toward_target(weight):
    # state 0 goes to target 2 with weight w, otherwise to state 1 which may fall into sink 3
    def value(w):
        P = [[0.0, 1 - w, w, 0.0], [0.25, 0.0, 0.25, 0.5], [0, 0, 1, 0], [0, 0, 0, 1]]
        return reachability(dense_chain(P), {2})[0]
    assert value(weight) < value(weight + 0.05)


def test_linear_solve_residuals_on_benchmarks():
    models = [(knuth_yao_die(), {"p": 0.3, "q": 0.8}), (multi_dice(8), None), (brp_like(), None)]
    for m, u in models:
        u = u or {x: 0.37 for x in m.parameters}
        mc = chain(m, u)
        for name, target in m.labels.items():
            system, _, _ = reachability_system(mc, target)
            if system.dimension:
                x = mc_analysis._solve(system)
                assert system.residual(x) <= 1e-9, name


def test_gauss_seidel_matches_dense_solve():
    rng = np.random.default_rng(0)
    n = 30
    P = rng.random((n, n)) * (rng.random((n, n)) < 0.2)
    P = 0.9 * P / np.maximum(P.sum(axis=1, keepdims=True), 1e-12)
    A = np.eye(n) - P
    b = rng.random(n)
    x = gauss_seidel(sp.csr_matrix(A), b)
    assert np.allclose(x, np.linalg.solve(A, b), atol=1e-9)


def test_iterative_route_used_beyond_direct_limit(monkeypatch):
    ky = knuth_yao_die()
    mc = chain(ky, {"p": 0.3, "q": 0.8})
    direct = reachability(mc, ky.labels["die2"])
    monkeypatch.setattr(mc_analysis, "DIRECT_LIMIT", 1)
    iterative = reachability(mc, ky.labels["die2"])
    assert np.allclose(direct, iterative, atol=1e-9)


@pytest.mark.parametrize("seed", range(3))
def test_monte_carlo_agreement(seed):
    m = random_pmc(20, 2, seed)
    rng = np.random.default_rng(100 + seed)
    u = {x: float(rng.uniform(0.1, 0.9)) for x in m.parameters}
    mc = chain(m, u)
    exact = reachability(mc, m.labels["goal"])[0]
    P = mc.matrix.toarray()
    cum = np.cumsum(P, axis=1)
    n_paths = 1_000_000
    state = np.zeros(n_paths, dtype=np.int64)
    goal, sink = 19, 18
    for _ in range(2000):
        live = (state != goal) & (state != sink)
        if not live.any():
            break
        r = rng.random(int(live.sum()))
        state[live] = np.minimum((cum[state[live]] < r[:, None]).sum(axis=1), 19)
    est = float(np.mean(state == goal))
    se = max(np.sqrt(est * (1 - est) / n_paths), 1e-12)
    assert abs(est - exact) <= 3 * se + 1e-6


# -- expected cost ------------------------------------------------------------------

def test_zero_costs_give_zero():
    mc = dense_chain([[0.5, 0.5], [0.0, 1.0]])
    assert np.all(expected_cost(mc, {1}) == 0.0)


def test_single_step_cost():
    mc = dense_chain([[0.0, 1.0], [0.0, 1.0]], costs=[3.0, 0.0])
    assert expected_cost(mc, {1})[0] == 3.0


def test_fair_die_expected_flips(ky):
    mc = chain(ky, {"p": 0.5, "q": 0.5})
    assert expected_cost(mc, ky.labels["done"])[0] == pytest.approx(11 / 3, abs=1e-10)


def test_expected_cost_divergence_reported():
    mc = dense_chain([[0.0, 0.5, 0.5], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]], costs=[1.0, 1.0, 0.0])
    with pytest.raises(CostDivergenceError) as exc:
        expected_cost(mc, {2})
    assert 0 in exc.value.states


@settings(max_examples=30)
@given(st.integers(4, 20), st.integers(0, 2), st.integers(0, 10_000))
def test_expected_cost_matches_value_iteration(n, k, seed):
    # goal and sink together are reached almost surely
    m = random_pmc(n, k, seed)
    rng = np.random.default_rng(seed)
    u = {x: float(rng.uniform(0.1, 0.9)) for x in m.parameters}
    goal = m.labels["goal"] | m.labels["sink"]
    ours = expected_cost(chain(m, u), goal)
    rows = {sa: {t: e.evaluate(u) for t, e in row.items()} for sa, row in m.transitions.items()}
    ref = oracles.expected_cost_vi(rows, m.costs, n, goal)
    assert ours[0] == pytest.approx(ref[0], rel=1e-9, abs=1e-9)


# -- check ------------------------------------------------------------------------------

def test_check_threshold_one_always_holds(ky):
    mc = chain(ky, {"p": 0.9, "q": 0.1})
    assert check(mc, [Specification("reach", 1.0, ky.labels["die2"])])[0].satisfied


def test_check_fair_die_violates_one_eighth(ky):
    res = check(chain(ky, {"p": 0.5, "q": 0.5}), [Specification("reach", 0.125, ky.labels["die2"])])[0]
    assert not res.satisfied
    assert res.value == pytest.approx(1 / 6, abs=1e-12)


def test_check_boundary_is_inclusive():
    mc = dense_chain([[0.0, 0.5, 0.5], [0, 1, 0], [0, 0, 1]])
    res = check(mc, [Specification("reach", 0.5, frozenset({1}))])[0]
    assert res.value == 0.5 and res.satisfied


def test_check_expected_cost_spec(ky):
    res = check(chain(ky, {"p": 0.5, "q": 0.5}), [Specification("expcost", 3.5, ky.labels["done"])])[0]
    assert res.value == pytest.approx(11 / 3) and not res.satisfied
