import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qcommit.envs import (
    ScenarioGenerator,
    rollout_day_ahead,
    rt_evaluate,
    rt_reset,
    rt_step,
    sample_scenario,
    forecast_scenario,
)
from qcommit.errors import SizeError, SizeGuardError
from qcommit.grid import load_case, merit_order_dispatch, stage_costs
from qcommit.oracle import (
    Mlp,
    MlpCritic,
    brute_force_uc,
    export_lp,
    grid_search_vpp,
    mlp_forward,
    mlp_grads,
    priority_list,
    priority_order,
)

from test_envs import rt_plan, vpp_case
from test_grid import fixture_case


def single_unit(load, c_g=10, c_su=100, p_min=10, p_max=100, c_ls=1000, on=0, periods=1):
    return load_case({
        "meta": {"name": "one", "periods": periods, "base_mva": 100, "reward_scale": 1},
        "buses": [{"id": 0, "voltage_min": 0.9, "voltage_max": 1.1}],
        "branches": [],
        "units": [{"bus": 0, "c_g": c_g, "c_su": c_su, "p_min": p_min, "p_max": p_max,
                   "r_u": p_max, "r_d": -p_max, "initial_status": on}],
        "vpps": [],
        "renewables": [],
        "loads": [{"bus": 0, "forecast_profile": [load] * periods, "power_factor": 1.0}],
        "costs": {"c_ls": c_ls, "lambda_v": 1, "lambda_b": 1},
    })


# --- exhaustive commitment ----------------------------------------------------


def test_zero_load_keeps_unit_off():
    res = brute_force_uc(single_unit(0.0))
    assert res.best_actions == [[0]] and res.best_value == 0.0
    assert res.evaluated_count == 2


def test_commit_beats_shedding():
    res = brute_force_uc(single_unit(50.0))
    assert res.best_actions == [[1]]
    assert res.best_value == pytest.approx(-(100 + 500))


def dp_optimum(case, day=0, quantum=1e-6):
    """Forward dynamic program over (e_prev, prev_p rounded to ``quantum``)."""
    load = case.load_forecast(day)
    ren = case.renewable_forecast(day)
    e0 = case.initial_status.copy()
    p0 = np.where(e0 == 1, case.p_min, 0.0)
    layer = {(tuple(e0), tuple(np.round(p0 / quantum).astype(int))): (0.0, e0, p0)}
    commitments = [np.array(c) for c in itertools.product([0, 1], repeat=case.n_units)]
    for t in range(case.periods):
        nxt = {}
        bus_load = case.to_bus(load[t], case.load_bus)
        for value, e_prev, p_prev in layer.values():
            for e in commitments:
                d = merit_order_dispatch(case, e, p_prev, bus_load, ren[t], prev_e=e_prev)
                c = stage_costs(case, d, e_prev, e)
                v = value - (c["startup"] + c["fuel"] + c["shed"]) / case.reward_scale
                key = (tuple(e), tuple(np.round(d.p_gen / quantum).astype(int)))
                if key not in nxt or v > nxt[key][0]:
                    nxt[key] = (v, e, d.p_gen.copy())
        layer = nxt
    return max(v for v, _, _ in layer.values())


def test_toy3_matches_dynamic_program():
    case = fixture_case("toy3")
    res = brute_force_uc(case)
    assert res.evaluated_count == 2 ** 12
    assert res.best_value == pytest.approx(dp_optimum(case), abs=1e-12)
    plan, _ = rollout_day_ahead(case, res.best_actions)
    assert plan.total_reward == res.best_value


def test_size_guard():
    with pytest.raises(SizeGuardError):
        brute_force_uc(fixture_case("rts24"))
    with pytest.raises(SizeGuardError):
        brute_force_uc(single_unit(10.0, periods=17))


# --- VPP grid search ----------------------------------------------------------


def test_zero_deviation_best_is_zero():
    case = vpp_case(load=100.0)
    state = rt_reset(case, rt_plan(case), forecast_scenario(case))
    res = grid_search_vpp(state, 1.0)
    assert np.abs(res.best_actions[0]).max() <= 1.0
    assert res.evaluated_count == 201


def test_grid_dominates_random_actions():
    case = fixture_case("toy3rt")
    plan = rt_plan(case, np.array([1, 1, 0]))
    gen = ScenarioGenerator(seed=77)
    rng = np.random.default_rng(0)
    for k in range(3):
        state = rt_reset(case, plan, sample_scenario(gen, case, 0, k))
        for _ in range(int(rng.integers(case.periods))):
            state, _, _ = rt_step(state, np.zeros(case.n_vpps))
        best = grid_search_vpp(state, 1.0)
        probes = rng.uniform(-case.vpp_max, case.vpp_max, (10_000, case.n_vpps))
        assert best.best_value >= rt_evaluate(state, probes)["reward"].max() - 1e-12
        assert rt_evaluate(state, best.best_actions[0])["reward"][0] == pytest.approx(best.best_value)


def test_grid_size_guard():
    case = fixture_case("toy3rt")
    state = rt_reset(case, rt_plan(case), forecast_scenario(case))
    with pytest.raises(SizeGuardError):
        grid_search_vpp(state, 0.1)
    rts = fixture_case("rts24")
    with pytest.raises(SizeGuardError):
        grid_search_vpp(rt_reset(rts, rt_plan(rts), forecast_scenario(rts)), 10.0)


# --- priority list ------------------------------------------------------------


def test_priority_list_never_beats_optimum():
    case = fixture_case("toy3")
    assert priority_list(case).best_value <= brute_force_uc(case).best_value


def test_small_load_commits_one_unit():
    case = fixture_case("toy3")
    cheapest = priority_order(case)[0]
    doc_case = single_unit(5.0)
    res = priority_list(doc_case)
    assert res.best_actions == [[1]]
    res = priority_list(case)
    for e, load in zip(res.best_actions, case.load_forecast(0).sum(axis=1)):
        if load * 1.05 <= case.p_max[cheapest]:
            assert sum(e) == 1 and e[cheapest] == 1


def test_rts24_nominal_days_without_shedding():
    case = fixture_case("rts24")
    for day in range(case.days):
        res = priority_list(case, day)
        plan, _ = rollout_day_ahead(case, res.best_actions, day)
        assert plan.costs["shed"] == 0


def test_priority_order_uses_average_cost():
    case = fixture_case("toy3")
    avg = (case.c_g * case.p_max + case.c_su) / case.p_max
    assert list(np.argsort(avg, kind="stable")) == priority_order(case)


# --- MLP ----------------------------------------------------------------------


def test_zero_weights_return_final_bias():
    m = Mlp.create([3, 5, 2], np.random.default_rng(0))
    for k in m.params:
        if k.startswith("W"):
            m.params[k][:] = 0
    m.params["b1"][:] = [0.5, -2.0]
    out, _ = mlp_forward(m, np.ones((4, 3)))
    np.testing.assert_array_equal(out, np.tile([0.5, -2.0], (4, 1)))


def test_single_layer_is_affine():
    rng = np.random.default_rng(1)
    m = Mlp.create([4, 3], rng)
    m.params["b0"] = rng.normal(size=3)
    x = rng.normal(size=(5, 4))
    out, _ = mlp_forward(m, x)
    np.testing.assert_allclose(out, x @ m.params["W0"] + m.params["b0"], atol=1e-14)


def test_shape_error():
    m = Mlp.create([4, 3], np.random.default_rng(0))
    with pytest.raises(SizeError):
        mlp_forward(m, np.ones(5))


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 10_000))
def test_mlp_gradients_match_finite_differences(seed):
    rng = np.random.default_rng(seed)
    m = Mlp.create([3, 4, 2], rng)
    for k in m.params:
        m.params[k] += rng.normal(0, 0.3, m.params[k].shape)
    x = rng.normal(size=(6, 3))
    w = rng.normal(size=(6, 2))

    def loss():
        return float(np.sum(mlp_forward(m, x)[0] * w))

    out, cache = mlp_forward(m, x)
    grads, d_x = mlp_grads(m, cache, w, with_input=True)
    h = 1e-6
    for k, p in m.params.items():
        for idx in np.ndindex(p.shape):
            old = p[idx]
            p[idx] = old + h
            up = loss()
            p[idx] = old - h
            down = loss()
            p[idx] = old
            assert grads[k][idx] == pytest.approx((up - down) / (2 * h), abs=1e-6)
    for i, j in np.ndindex(x.shape):
        xp, xm = x.copy(), x.copy()
        xp[i, j] += h
        xm[i, j] -= h
        fd = (np.sum(mlp_forward(m, xp)[0] * w) - np.sum(mlp_forward(m, xm)[0] * w)) / (2 * h)
        assert d_x[i, j] == pytest.approx(fd, abs=1e-6)


def test_critic_action_gradient():
    rng = np.random.default_rng(3)
    c = MlpCritic.create(4, 2, rng, hidden=(8,))
    s, a = rng.normal(size=(5, 4)), rng.uniform(-1, 1, (5, 2))
    q, cache = c.forward(s, a)
    _, d_a = c.backward(cache, np.ones(5), with_action=True)
    h = 1e-6
    for j in range(2):
        ap, am = a.copy(), a.copy()
        ap[:, j] += h
        am[:, j] -= h
        fd = (c.forward(s, ap)[0] - c.forward(s, am)[0]) / (2 * h)
        np.testing.assert_allclose(d_a[:, j], fd, atol=1e-6)


# --- LP export ----------------------------------------------------------------


def test_lp_export_structure():
    case = fixture_case("toy3")
    text = export_lp(case)
    sections = ["Minimize", "Subject To", "Bounds", "Binaries", "End"]
    positions = [text.index(f"\n{s}") for s in sections]
    assert positions == sorted(positions)
    binaries = text.split("Binaries\n")[1].split("\nEnd")[0].split()
    assert len(binaries) == case.n_units * case.periods
    assert text.count(" balance_") == case.periods
    load = case.load_forecast(0).sum(axis=1) - case.renewable_forecast(0).sum(axis=1)
    assert f"= {load[2]:.12g}" in text
