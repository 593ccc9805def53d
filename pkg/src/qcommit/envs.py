"""Day-ahead commitment and real-time VPP correction environments.

Both environments are immutable-state machines: ``*_step`` returns a new
state and never mutates its input. Rewards are negative costs divided by
the case ``reward_scale``.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ContractError
from .grid import (
    DispatchResult,
    GridCase,
    evaluate_network,
    merit_order_dispatch,
    stage_costs,
)


def _one_hot(t: int, T: int) -> np.ndarray:
    out = np.zeros(T)
    if t < T:
        out[t] = 1.0
    return out


# ---------------------------------------------------------------------------
# day-ahead


@dataclass(frozen=True)
class DaStepInfo:
    e_prev: np.ndarray
    e: np.ndarray
    dispatch: DispatchResult
    costs: dict
    reward: float


@dataclass(frozen=True)
class DayAheadState:
    case: GridCase = field(repr=False)
    day: int
    t: int
    e_prev: np.ndarray
    p_prev: np.ndarray
    load: np.ndarray = field(repr=False)  # (T, n_loads) forecast
    renewables: np.ndarray = field(repr=False)  # (T, n_renewables) forecast
    last: DaStepInfo | None = field(default=None, repr=False)

    @property
    def terminal(self) -> bool:
        return self.t >= self.case.periods

    def vector(self) -> np.ndarray:
        """Normalized features: forecast P/Q per bus and renewable, e_prev, prev_p, one-hot t."""
        c = self.case
        scale = max(c.peak_load, 1.0)
        t = min(self.t, c.periods - 1)
        load = c.to_bus(self.load[t], c.load_bus) / scale
        qload = c.to_bus(self.load[t] * c.load_q_ratio, c.load_bus) / scale
        ren = self.renewables[t] / scale
        qren = ren * c.renewable_q_ratio
        p_rel = self.p_prev / np.maximum(c.p_max, 1e-9)
        return np.concatenate([load, qload, ren, qren, self.e_prev, p_rel, _one_hot(self.t, c.periods)])


def da_state_dim(case: GridCase) -> int:
    return 2 * case.n_bus + 2 * case.n_renewables + 2 * case.n_units + case.periods


def da_reset(case: GridCase, day: int = 0, seed: int | None = None) -> DayAheadState:
    """Start of day ``day``: t=0, initially-on units sitting at P_min.

    ``seed`` is accepted for interface symmetry; forecasts are deterministic.
    """
    load = case.load_forecast(day)
    ren = case.renewable_forecast(day)
    e0 = case.initial_status.copy()
    p0 = np.where(e0 == 1, case.p_min, 0.0)
    return DayAheadState(case, day, 0, e0, p0, load, ren)


def da_step(state: DayAheadState, e) -> tuple[DayAheadState, float, bool]:
    if state.terminal:
        raise ContractError("day-ahead episode already finished")
    case = state.case
    e = np.asarray(e, dtype=int).reshape(-1)
    if e.shape != (case.n_units,):
        raise ContractError(f"commitment must have {case.n_units} entries")
    t = state.t
    load = case.to_bus(state.load[t], case.load_bus)
    d = merit_order_dispatch(case, e, state.p_prev, load, state.renewables[t], prev_e=state.e_prev)
    costs = stage_costs(case, d, state.e_prev, e)
    reward = -(costs["startup"] + costs["fuel"] + costs["shed"]) / case.reward_scale
    info = DaStepInfo(state.e_prev.copy(), e.copy(), d, costs, reward)
    nxt = replace(state, t=t + 1, e_prev=e.copy(), p_prev=d.p_gen.copy(), last=info)
    return nxt, reward, nxt.terminal


def action_to_commitment(index: int, n_units: int) -> np.ndarray:
    """Bit g of ``index`` is unit g's on/off flag."""
    return np.array([(index >> g) & 1 for g in range(n_units)], dtype=int)


def commitment_to_action(e) -> int:
    return int(sum(int(b) << g for g, b in enumerate(e)))


@dataclass(frozen=True)
class DayAheadPlan:
    """A frozen day-ahead solution: commitment and dispatch per period."""

    day: int
    e: np.ndarray  # (T, G)
    p_gen: np.ndarray  # (T, G)
    e_initial: np.ndarray
    total_reward: float
    costs: dict

    @property
    def periods(self) -> int:
        return self.e.shape[0]


def rollout_day_ahead(case: GridCase, schedule, day: int = 0) -> tuple[DayAheadPlan, list[DaStepInfo]]:
    """Roll ``schedule`` (per-period commitments, or a state -> e callable) through the environment."""
    state = da_reset(case, day)
    steps = []
    for t in range(case.periods):
        e = schedule(state) if callable(schedule) else schedule[t]
        state, _, _ = da_step(state, e)
        steps.append(state.last)
    totals = {k: sum(s.costs[k] for s in steps) for k in ("fuel", "startup", "shed")}
    plan = DayAheadPlan(
        day,
        np.array([s.e for s in steps]),
        np.array([s.dispatch.p_gen for s in steps]),
        case.initial_status.copy(),
        float(sum(s.reward for s in steps)),
        totals,
    )
    return plan, steps


# ---------------------------------------------------------------------------
# scenarios


@dataclass(frozen=True)
class ScenarioGenerator:
    sigma_load: float = 0.1
    sigma_pv: float = 0.1
    sigma_wind: float = 0.1
    seed: int = 0
    truncation: float = 3.0
    renewable_cap: float = 1.2


@dataclass(frozen=True)
class Scenario:
    day: int
    index: int
    load: np.ndarray  # (T, n_loads)
    renewables: np.ndarray  # (T, n_renewables)


def _truncated_normal(rng, sigma: float, shape, bound: float) -> np.ndarray:
    if sigma == 0:
        return np.zeros(shape)
    out = rng.normal(0.0, sigma, shape)
    bad = np.abs(out) > bound * sigma
    while bad.any():
        out[bad] = rng.normal(0.0, sigma, int(bad.sum()))
        bad = np.abs(out) > bound * sigma
    return out


def sample_scenario(gen: ScenarioGenerator, case: GridCase, day: int, k: int = 0) -> Scenario:
    """Realization ``k`` of ``day``; seeded by (seed, day, k) so draw order does not matter."""
    load_f = case.load_forecast(day)
    ren_f = case.renewable_forecast(day)
    rng = np.random.default_rng(np.random.SeedSequence([gen.seed, day, k]))
    eps_load = _truncated_normal(rng, gen.sigma_load, load_f.shape, gen.truncation)
    sig = np.array([gen.sigma_pv if kind == "pv" else gen.sigma_wind for kind in case.renewable_kind])
    eps_ren = np.zeros_like(ren_f)
    for j, s in enumerate(sig):
        eps_ren[:, j] = _truncated_normal(rng, s, ren_f.shape[0], gen.truncation)
    load = np.maximum(load_f * (1 + eps_load), 0.0)
    ren = np.clip(ren_f * (1 + eps_ren), 0.0, gen.renewable_cap * ren_f)
    return Scenario(day, k, load, ren)


def forecast_scenario(case: GridCase, day: int = 0) -> Scenario:
    return Scenario(day, -1, case.load_forecast(day), case.renewable_forecast(day))


# ---------------------------------------------------------------------------
# real-time


@dataclass(frozen=True)
class RtStepInfo:
    action: np.ndarray  # clipped
    voltage_violation: float
    branch_violation: float
    shed: float
    curtail: float
    vpp_cost: float
    cost: float
    reward: float


@dataclass(frozen=True)
class RealTimeState:
    case: GridCase = field(repr=False)
    plan: DayAheadPlan = field(repr=False)
    scenario: Scenario = field(repr=False)
    t: int
    last: RtStepInfo | None = field(default=None, repr=False)

    @property
    def terminal(self) -> bool:
        return self.t >= self.case.periods

    @property
    def e(self) -> np.ndarray:
        return self.plan.e[min(self.t, self.plan.periods - 1)]

    def vector(self) -> np.ndarray:
        """Realized P/Q per bus and renewable, planned commitment and output, one-hot t."""
        c = self.case
        scale = max(c.peak_load, 1.0)
        t = min(self.t, c.periods - 1)
        load = self.scenario.load[t]
        ren = self.scenario.renewables[t] / scale
        p_rel = self.plan.p_gen[t] / np.maximum(c.p_max, 1e-9)
        return np.concatenate([
            c.to_bus(load, c.load_bus) / scale,
            c.to_bus(load * c.load_q_ratio, c.load_bus) / scale,
            ren,
            ren * c.renewable_q_ratio,
            self.plan.e[t].astype(float),
            p_rel,
            _one_hot(self.t, c.periods),
        ])


def rt_state_dim(case: GridCase) -> int:
    return da_state_dim(case)


def rt_reset(case: GridCase, plan: DayAheadPlan, scenario: Scenario) -> RealTimeState:
    if plan.e.shape != (case.periods, case.n_units):
        raise ContractError("day-ahead plan does not match the case")
    return RealTimeState(case, plan, scenario, 0)


def rt_evaluate(state: RealTimeState, actions) -> dict:
    """Score a batch of VPP actions (k, n_vpps) at the current period.

    Returns arrays keyed like RtStepInfo fields. Actions are clipped to
    the VPP bounds first.
    """
    case = state.case
    if state.terminal:
        raise ContractError("real-time episode already finished")
    t = state.t
    a = np.atleast_2d(np.asarray(actions, dtype=float))
    a = a.reshape(-1, case.n_vpps) if case.n_vpps else np.zeros((max(a.shape[0], 1), 0))
    a = np.clip(a, -case.vpp_max, case.vpp_max)
    p_gen = state.plan.p_gen[t]
    load = state.scenario.load[t]
    ren = state.scenario.renewables[t]
    base_p = (
        case.to_bus(p_gen, case.unit_bus)
        + case.to_bus(ren, case.renewable_bus)
        - case.to_bus(load, case.load_bus)
    )
    base_q = (
        case.to_bus(p_gen * case.unit_q_ratio, case.unit_bus)
        + case.to_bus(ren * case.renewable_q_ratio, case.renewable_bus)
        - case.to_bus(load * case.load_q_ratio, case.load_bus)
    )
    p = base_p[None, :] + case.to_bus(a, case.vpp_bus)
    q = base_q[None, :] + case.to_bus(a * case.vpp_q_ratio, case.vpp_bus)
    imbalance = p.sum(axis=1)
    shed = np.maximum(-imbalance, 0.0)
    curtail = np.maximum(imbalance, 0.0)
    p[:, 0] -= imbalance  # slack closes the balance
    ev = evaluate_network(case, case.matrices, p, q)
    vpp_cost = np.abs(a) @ case.c_vpp
    cost = (
        case.lambda_v * ev.voltage_violation
        + case.lambda_b * ev.branch_violation
        + case.c_ls * shed
        + case.c_curt * curtail
        + vpp_cost
    )
    return {
        "action": a,
        "voltage_violation": ev.voltage_violation,
        "branch_violation": ev.branch_violation,
        "shed": shed,
        "curtail": curtail,
        "vpp_cost": vpp_cost,
        "cost": cost,
        "reward": -cost / case.reward_scale,
    }


def rt_step(state: RealTimeState, action) -> tuple[RealTimeState, float, bool]:
    out = rt_evaluate(state, action)
    info = RtStepInfo(**{k: (v[0].copy() if k == "action" else float(v[0])) for k, v in out.items()})
    nxt = replace(state, t=state.t + 1, last=info)
    return nxt, info.reward, nxt.terminal


def violation_degree(info: RtStepInfo, case: GridCase) -> float:
    """V^D (p.u.) plus B^D expressed in p.u. of base_mva."""
    return info.voltage_violation + info.branch_violation / case.base_mva
