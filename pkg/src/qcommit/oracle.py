"""Reference solutions and classical baselines.

* ``brute_force_uc``: exhaustive commitment search through the day-ahead
  environment.
* ``grid_search_vpp``: exhaustive single-step VPP search.
* ``priority_list``: average-cost commitment heuristic.
* ``Mlp`` and the classical Q-network, actor and critic built on it.
* ``export_lp``: the day-ahead problem as an LP-format MILP file.
"""
from __future__ import annotations

import copy
import itertools
from dataclasses import dataclass

import numpy as np

from .envs import (
    DayAheadState,
    RealTimeState,
    da_reset,
    da_step,
    rollout_day_ahead,
    rt_evaluate,
)
from .errors import SizeError, SizeGuardError
from .grid import GridCase
from .qmodels import squashed_gaussian, squashed_gaussian_backward, squashed_log_prob

MAX_SEQUENCES = 65536
MAX_GRID_POINTS = 1_000_000


@dataclass
class OracleResult:
    best_value: float
    best_actions: list
    evaluated_count: int


# ---------------------------------------------------------------------------
# exhaustive commitment search


def brute_force_uc(case: GridCase, day: int = 0) -> OracleResult:
    """Best cumulative day-ahead reward over every commitment sequence.

    Walks the sequence tree depth first in ascending commitment order, so
    ties resolve to the lexicographically smallest sequence.
    """
    G, T = case.n_units, case.periods
    if G * T > 16 or 2 ** (G * T) > MAX_SEQUENCES:
        raise SizeGuardError(f"2^({G}*{T}) commitment sequences exceed the {MAX_SEQUENCES} limit")
    choices = [np.array(e, dtype=int) for e in itertools.product([0, 1], repeat=G)]
    choices.sort(key=lambda e: tuple(e))
    best = [-np.inf, None]
    count = [0]

    def walk(state: DayAheadState, total: float, path: list):
        if state.terminal:
            count[0] += 1
            if total > best[0]:
                best[0], best[1] = total, list(path)
            return
        for e in choices:
            nxt, r, _ = da_step(state, e)
            path.append(e)
            walk(nxt, total + r, path)
            path.pop()

    walk(da_reset(case, day), 0.0, [])
    return OracleResult(float(best[0]), [e.tolist() for e in best[1]], count[0])


# ---------------------------------------------------------------------------
# VPP grid search


def vpp_grid(case: GridCase, resolution: float) -> list[np.ndarray]:
    axes = []
    for cap in case.vpp_max:
        steps = int(np.floor(cap / resolution + 1e-9))
        axes.append(np.arange(-steps, steps + 1) * resolution)
    return axes


def grid_search_vpp(state: RealTimeState, resolution: float = 1.0, chunk: int = 65536) -> OracleResult:
    """Best single-step real-time reward over a uniform grid of VPP actions."""
    case = state.case
    if case.n_vpps > 3:
        raise SizeGuardError("grid search supports at most 3 VPPs")
    axes = vpp_grid(case, resolution)
    total = int(np.prod([len(a) for a in axes]))
    if total > MAX_GRID_POINTS:
        raise SizeGuardError(f"{total} grid points exceed the {MAX_GRID_POINTS} limit")
    mesh = np.stack([m.reshape(-1) for m in np.meshgrid(*axes, indexing="ij")], axis=1)
    best_val, best_a = -np.inf, None
    for start in range(0, total, chunk):
        block = mesh[start : start + chunk]
        rewards = rt_evaluate(state, block)["reward"]
        i = int(np.argmax(rewards))
        if rewards[i] > best_val:
            best_val, best_a = float(rewards[i]), block[i].copy()
    return OracleResult(best_val, [best_a.tolist()], total)


# ---------------------------------------------------------------------------
# priority list


def priority_order(case: GridCase) -> list[int]:
    """Units by full-load average cost (C_g P_max + C_su) / P_max, ties by index."""
    avg = (case.c_g * case.p_max + case.c_su) / np.maximum(case.p_max, 1e-9)
    return sorted(range(case.n_units), key=lambda g: (avg[g], g))


def priority_list(case: GridCase, day: int = 0, reserve: float = 0.05) -> OracleResult:
    """Commit cheapest-average units until capacity covers load plus reserve."""
    order = priority_order(case)
    load = case.load_forecast(day).sum(axis=1)
    schedule = []
    for t in range(case.periods):
        e = np.zeros(case.n_units, dtype=int)
        cap = 0.0
        need = load[t] * (1 + reserve)
        for g in order:
            if cap >= need:
                break
            e[g] = 1
            cap += case.p_max[g]
        schedule.append(e)
    plan, _ = rollout_day_ahead(case, schedule, day)
    return OracleResult(plan.total_reward, [e.tolist() for e in schedule], 1)


# ---------------------------------------------------------------------------
# multilayer perceptron


class Mlp:
    """tanh hidden layers, linear output. Parameters live in ``params``."""

    def __init__(self, params: dict):
        self.params = {k: np.array(v, dtype=float) for k, v in params.items()}

    @classmethod
    def view(cls, params: dict) -> "Mlp":
        """An Mlp over the given arrays without copying them."""
        m = cls.__new__(cls)
        m.params = params
        return m

    @classmethod
    def create(cls, dims, rng, out_scale=1.0):
        params = {}
        for i, (a, b) in enumerate(zip(dims[:-1], dims[1:])):
            scale = (out_scale if i == len(dims) - 2 else 1.0) / np.sqrt(a)
            params[f"W{i}"] = rng.normal(0, scale, (a, b))
            params[f"b{i}"] = np.zeros(b)
        return cls(params)

    @property
    def num_layers(self) -> int:
        return sum(1 for k in self.params if k.startswith("W"))

    @property
    def dims(self) -> list[int]:
        n = self.num_layers
        return [self.params["W0"].shape[0]] + [self.params[f"W{i}"].shape[1] for i in range(n)]

    def copy(self):
        return copy.deepcopy(self)


def mlp_forward(m: Mlp, x):
    """Returns (outputs, cache); ``x`` is one input or a (B, in) batch."""
    h = np.atleast_2d(np.asarray(x, dtype=float))
    if h.shape[1] != m.dims[0]:
        raise SizeError(f"MLP expects {m.dims[0]} inputs, got {h.shape[1]}")
    acts = [h]
    n = m.num_layers
    for i in range(n):
        h = h @ m.params[f"W{i}"] + m.params[f"b{i}"]
        if i < n - 1:
            h = np.tanh(h)
        acts.append(h)
    return h, acts


def mlp_grads(m: Mlp, cache, d_out, with_input: bool = False):
    """Backprop ``d_out`` (B, out). Returns a parameter-gradient dict,
    plus the input gradient when ``with_input`` is set."""
    acts = cache
    d = np.atleast_2d(np.asarray(d_out, dtype=float))
    grads = {}
    for i in reversed(range(m.num_layers)):
        grads[f"W{i}"] = acts[i].T @ d
        grads[f"b{i}"] = d.sum(axis=0)
        d = d @ m.params[f"W{i}"].T
        if i > 0:
            d = d * (1 - acts[i] ** 2)
    return (grads, d) if with_input else grads


class MlpQNetwork:
    """Classical Q(s, .) with the QNetwork interface."""

    kind = "classical"

    def __init__(self, params: dict):
        self.mlp = Mlp(params)

    @property
    def params(self) -> dict:
        return self.mlp.params

    @classmethod
    def create(cls, in_dim, num_actions, rng, hidden=(32, 32)):
        return cls(Mlp.create([in_dim, *hidden, num_actions], rng, out_scale=0.1).params)

    @property
    def num_actions(self) -> int:
        return self.mlp.dims[-1]

    def forward(self, states):
        return mlp_forward(self.mlp, states)

    def backward(self, cache, d_q) -> dict:
        return mlp_grads(self.mlp, cache, d_q)

    def copy(self):
        return copy.deepcopy(self)


class MlpActor:
    """Classical squashed-Gaussian policy with the QuantumActor interface."""

    kind = "classical"

    def __init__(self, params: dict, action_low, action_high):
        self.params = {k: np.array(v, dtype=float) for k, v in params.items()}
        self.action_low = np.asarray(action_low, dtype=float)
        self.action_high = np.asarray(action_high, dtype=float)

    @classmethod
    def create(cls, in_dim, action_low, action_high, rng, hidden=(32, 32), log_std=-0.5):
        dim = len(action_low)
        params = Mlp.create([in_dim, *hidden, dim], rng, out_scale=0.1).params
        params["log_std"] = np.full(dim, float(log_std))
        return cls(params, action_low, action_high)

    @property
    def mlp(self) -> Mlp:
        return Mlp.view({k: v for k, v in self.params.items() if k != "log_std"})

    @property
    def action_dim(self) -> int:
        return self.params["log_std"].shape[0]

    def mean(self, states):
        return mlp_forward(self.mlp, states)

    def forward(self, states, noise=None):
        mu, mcache = self.mean(states)
        action, squashed, log_prob, hcache = squashed_gaussian(
            mu, self.params["log_std"], noise, self.action_low, self.action_high
        )
        return action, squashed, log_prob, (mcache, hcache)

    def backward(self, cache, d_squashed, d_log_prob) -> dict:
        mcache, hcache = cache
        d_mu, d_log_std = squashed_gaussian_backward(hcache, d_squashed, np.asarray(d_log_prob))
        grads = mlp_grads(self.mlp, mcache, d_mu)
        grads["log_std"] = d_log_std
        return grads

    def log_prob_of(self, state, actions):
        mu, _ = self.mean(state)
        return squashed_log_prob(mu[0], self.params["log_std"], actions, self.action_low, self.action_high)

    def copy(self):
        return copy.deepcopy(self)


class MlpCritic:
    """Q(s, a) on the concatenation of the state and the squashed action."""

    kind = "classical"

    def __init__(self, params: dict, state_dim: int):
        self.mlp = Mlp(params)
        self.state_dim = state_dim

    @property
    def params(self) -> dict:
        return self.mlp.params

    @classmethod
    def create(cls, state_dim, action_dim, rng, hidden=(64, 64)):
        return cls(Mlp.create([state_dim + action_dim, *hidden, 1], rng, out_scale=0.1).params, state_dim)

    def forward(self, states, squashed):
        x = np.concatenate([np.atleast_2d(states), np.atleast_2d(squashed)], axis=1)
        q, cache = mlp_forward(self.mlp, x)
        return q[:, 0], cache

    def backward(self, cache, d_q, with_action: bool = False):
        grads, d_x = mlp_grads(self.mlp, cache, np.asarray(d_q)[:, None], with_input=True)
        if with_action:
            return grads, d_x[:, self.state_dim :]
        return grads

    def copy(self):
        return copy.deepcopy(self)


# ---------------------------------------------------------------------------
# LP export


def export_lp(case: GridCase, day: int = 0) -> str:
    """Day-ahead commitment as a CPLEX LP-format MILP.

    Variables per unit g and period t: e_g_t (binary status), su_g_t
    (start-up, in [0,1]), p_g_t (MW); per period: shed_t, curt_t (MW).
    Single-bus balance, ramp limits between consecutive on-periods (relaxed
    by big-M when either end is off) and start-up logic su >= e_t - e_{t-1}.
    Objective is raw cost in $.
    """
    G, T = case.n_units, case.periods
    load = case.load_forecast(day).sum(axis=1)
    ren = case.renewable_forecast(day).sum(axis=1)
    lines = [f"\\ qcommit day-ahead instance {case.name}, day {day}", "Minimize", " cost:"]
    terms = []
    for t in range(T):
        for g in range(G):
            terms.append(f"{case.c_g[g]:.12g} p_{g}_{t}")
            terms.append(f"{case.c_su[g]:.12g} su_{g}_{t}")
        terms.append(f"{case.c_ls:.12g} shed_{t}")
    lines += [f"   + {term}" for term in terms]
    lines.append("Subject To")
    for t in range(T):
        gen = " + ".join(f"p_{g}_{t}" for g in range(G)) or "0 shed_0"
        lines.append(f" balance_{t}: {gen} + shed_{t} - curt_{t} = {load[t] - ren[t]:.12g}")
        lines.append(f" curtcap_{t}: curt_{t} <= {ren[t]:.12g}")
        for g in range(G):
            lines.append(f" pmin_{g}_{t}: p_{g}_{t} - {case.p_min[g]:.12g} e_{g}_{t} >= 0")
            lines.append(f" pmax_{g}_{t}: p_{g}_{t} - {case.p_max[g]:.12g} e_{g}_{t} <= 0")
            if t == 0:
                e0 = int(case.initial_status[g])
                lines.append(f" start_{g}_{t}: su_{g}_{t} - e_{g}_{t} >= {-e0}")
                if e0:
                    p0 = case.p_min[g]
                    big = case.p_max[g]
                    lines.append(f" rampup_{g}_{t}: p_{g}_{t} + {big:.12g} e_{g}_{t} <= {p0 + case.r_u[g] + big:.12g}")
                    lines.append(f" rampdn_{g}_{t}: p_{g}_{t} - {big:.12g} e_{g}_{t} >= {p0 + case.r_d[g] - big:.12g}")
                continue
            lines.append(f" start_{g}_{t}: su_{g}_{t} - e_{g}_{t} + e_{g}_{t - 1} >= 0")
            big = case.p_max[g]
            lines.append(
                f" rampup_{g}_{t}: p_{g}_{t} - p_{g}_{t - 1} + {big:.12g} e_{g}_{t} + {big:.12g} e_{g}_{t - 1}"
                f" <= {case.r_u[g] + 2 * big:.12g}"
            )
            lines.append(
                f" rampdn_{g}_{t}: p_{g}_{t} - p_{g}_{t - 1} - {big:.12g} e_{g}_{t} - {big:.12g} e_{g}_{t - 1}"
                f" >= {case.r_d[g] - 2 * big:.12g}"
            )
    lines.append("Bounds")
    for t in range(T):
        lines.append(f" 0 <= shed_{t} <= {load[t]:.12g}")
        lines.append(f" curt_{t} >= 0")
        for g in range(G):
            lines.append(f" 0 <= su_{g}_{t} <= 1")
            lines.append(f" p_{g}_{t} >= 0")
    lines.append("Binaries")
    lines.append(" " + " ".join(f"e_{g}_{t}" for t in range(T) for g in range(G)))
    lines.append("End")
    return "\n".join(lines) + "\n"
