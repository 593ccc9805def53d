"""DQN for day-ahead commitment, SAC for real-time VPP correction.

Both agents take either the quantum models from ``qmodels`` or the
classical MLPs from ``oracle``; they only rely on ``forward``/``backward``
and a ``params`` dict of arrays.
"""
from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .envs import (
    DayAheadPlan,
    ScenarioGenerator,
    action_to_commitment,
    commitment_to_action,
    da_reset,
    da_state_dim,
    da_step,
    rollout_day_ahead,
    rt_reset,
    rt_state_dim,
    rt_step,
    sample_scenario,
    violation_degree,
)
from .errors import ContractError, SizeError
from .grid import GridCase
from .oracle import MlpActor, MlpCritic, MlpQNetwork
from .qmodels import AnsatzSpec, QNetwork, QuantumActor

LOG_STD_RANGE = (-5.0, 1.0)
ENUMERATE_MAX_UNITS = 6


@dataclass
class TrainConfig:
    episodes: int = 500
    batch_size: int = 32
    buffer_capacity: int = 10000
    lr_theta: float = 0.05
    lr_readout: float = 0.02
    lr_encoder: float = 0.01
    lr_log_std: float = 0.003
    lr_classical: float = 0.003
    lr_critic: float = 0.003
    adam_theta: bool = False
    gamma: float = 0.99
    eps_start: float = 1.0
    eps_end: float = 0.0
    eps_decay_steps: int = 1200
    tau: float = 0.005
    alpha: float = 0.05
    target_sync: int = 50
    warmup_batches: int = 10
    updates_per_step: int = 1
    seed: int = 0
    eval_interval: int = 50
    num_qubits: int = 4
    layers: int = 2
    encoder_dim: int | None = None
    per_qubit_angles: bool = False
    agent: str = "quantum"
    action_mode: str = "auto"
    hidden: tuple = (32, 32)
    critic_hidden: tuple = (64, 64)
    critic_form: str = "clipped"
    log_std_init: float = -0.5
    sigma_load: float = 0.1
    sigma_pv: float = 0.1
    sigma_wind: float = 0.1
    days: tuple | None = None

    def __post_init__(self):
        self.hidden = tuple(self.hidden)
        self.critic_hidden = tuple(self.critic_hidden)
        if self.days is not None:
            self.days = tuple(self.days)
        for name in ("batch_size", "buffer_capacity", "num_qubits", "layers", "target_sync", "updates_per_step"):
            if getattr(self, name) <= 0:
                raise ContractError(f"{name} must be positive")
        if self.episodes < 0:
            raise ContractError("episodes must be non-negative")
        if not 0 < self.gamma <= 1:
            raise ContractError("gamma must lie in (0, 1]")
        if not 0 < self.tau <= 1:
            raise ContractError("tau must lie in (0, 1]")
        if self.encoder_dim not in (None, self.num_qubits):
            raise ContractError("encoder_dim must equal num_qubits (one data angle per qubit)")
        if self.agent not in ("quantum", "classical"):
            raise ContractError(f"unknown agent kind {self.agent!r}")
        if self.action_mode not in ("auto", "enumerate", "factorized"):
            raise ContractError(f"unknown action_mode {self.action_mode!r}")
        if self.critic_form not in ("clipped", "per_critic"):
            raise ContractError(f"unknown critic_form {self.critic_form!r}")

    @classmethod
    def from_dict(cls, doc: dict) -> "TrainConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ContractError(f"unknown config keys {sorted(unknown)}")
        return cls(**doc)

    def to_dict(self) -> dict:
        out = asdict(self)
        for k, v in out.items():
            if isinstance(v, tuple):
                out[k] = list(v)
        return out

    @property
    def ansatz(self) -> AnsatzSpec:
        return AnsatzSpec(self.num_qubits, self.layers, self.per_qubit_angles)


# Command-level presets layered under user config files. Real-time actions do
# not change the next state, so a short horizon only trims critic noise.
DA_DEFAULTS: dict = {}
RT_DEFAULTS: dict = {
    "episodes": 300, "gamma": 0.1, "alpha": 0.01, "updates_per_step": 8, "adam_theta": True, "lr_theta": 0.01,
}


# ---------------------------------------------------------------------------
# replay and optimizer


class ReplayBuffer:
    """Fixed-capacity FIFO ring of (s, a, r, s', done)."""

    def __init__(self, capacity: int, state_dim: int, action_dim: int = 1, discrete: bool = True):
        self.capacity = capacity
        self.states = np.zeros((capacity, state_dim))
        self.next_states = np.zeros((capacity, state_dim))
        self.actions = np.zeros((capacity, action_dim), dtype=np.int64 if discrete else float)
        self.rewards = np.zeros(capacity)
        self.dones = np.zeros(capacity)
        self.size = 0
        self._next = 0

    def __len__(self):
        return self.size

    def add(self, s, a, r, s2, done):
        i = self._next
        self.states[i] = s
        self.actions[i] = a
        self.rewards[i] = r
        self.next_states[i] = s2
        self.dones[i] = float(done)
        self._next = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, batch_size: int, rng) -> dict:
        if self.size == 0:
            raise ContractError("cannot sample from an empty buffer")
        idx = rng.choice(self.size, size=min(batch_size, self.size), replace=False)
        return self.batch(idx)

    def batch(self, idx) -> dict:
        return {
            "s": self.states[idx],
            "a": self.actions[idx],
            "r": self.rewards[idx],
            "s2": self.next_states[idx],
            "done": self.dones[idx],
        }


class Optimizer:
    """Per-parameter learning rates; Adam or plain gradient descent per key.

    A gradient that is identically zero is skipped entirely, so neither the
    parameter nor its moments move.
    """

    def __init__(self, lrs: dict, adam_keys, betas=(0.9, 0.999), eps=1e-8):
        self.lrs = dict(lrs)
        self.adam_keys = set(adam_keys)
        self.b1, self.b2 = betas
        self.eps = eps
        self.m: dict = {}
        self.v: dict = {}
        self.t: dict = {}

    def step(self, params: dict, grads: dict) -> None:
        for key, g in grads.items():
            lr = self.lrs.get(key, 0.0)
            if lr == 0 or not np.any(g):
                continue
            p = params[key]
            if key in self.adam_keys:
                m = self.m.setdefault(key, np.zeros_like(p))
                v = self.v.setdefault(key, np.zeros_like(p))
                t = self.t[key] = self.t.get(key, 0) + 1
                m *= self.b1
                m += (1 - self.b1) * g
                v *= self.b2
                v += (1 - self.b2) * g * g
                m_hat = m / (1 - self.b1**t)
                v_hat = v / (1 - self.b2**t)
                p -= lr * m_hat / (np.sqrt(v_hat) + self.eps)
            else:
                p -= lr * g

    def state_dict(self) -> dict:
        return {
            "m": {k: v.tolist() for k, v in self.m.items()},
            "v": {k: v.tolist() for k, v in self.v.items()},
            "t": dict(self.t),
        }

    def load_state_dict(self, doc: dict) -> None:
        self.m = {k: np.array(v, dtype=float) for k, v in doc.get("m", {}).items()}
        self.v = {k: np.array(v, dtype=float) for k, v in doc.get("v", {}).items()}
        self.t = {k: int(v) for k, v in doc.get("t", {}).items()}


def make_optimizer(model, config: TrainConfig, critic: bool = False) -> Optimizer:
    lrs, adam = {}, set()
    for key in model.params:
        if critic:
            lr = config.lr_critic
        elif key == "theta":
            lr = config.lr_theta
        elif key.startswith("readout"):
            lr = config.lr_readout
        elif key.startswith("enc"):
            lr = config.lr_encoder
        elif key == "log_std":
            lr = config.lr_log_std
        else:
            lr = config.lr_classical
        lrs[key] = lr
        if key != "theta" or config.adam_theta:
            adam.add(key)
    return Optimizer(lrs, adam)


def _streams(seed: int, n: int):
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(n)]


# ---------------------------------------------------------------------------
# DQN


class DqnAgent:
    """Double DQN over commitment vectors.

    ``enumerate`` mode has one output per commitment (bit g = unit g).
    ``factorized`` mode has two outputs per unit; the joint value of a
    commitment is the mean of the chosen per-unit values.
    """

    def __init__(self, qnet, n_units: int, config: TrainConfig, mode: str, rng):
        self.qnet = qnet
        self.target = qnet.copy()
        self.n_units = n_units
        self.mode = mode
        self.config = config
        self.rng = rng
        self.optimizer = make_optimizer(qnet, config)
        self.updates = 0
        expected = 2**n_units if mode == "enumerate" else 2 * n_units
        if qnet.num_actions != expected:
            raise SizeError(f"{mode} mode needs {expected} outputs, network has {qnet.num_actions}")

    def epsilon(self, step: int) -> float:
        c = self.config
        if c.eps_decay_steps <= 0 or step >= c.eps_decay_steps:
            return c.eps_end
        return c.eps_start + (c.eps_end - c.eps_start) * step / c.eps_decay_steps

    def greedy(self, states, net=None) -> np.ndarray:
        """Greedy commitment indices for a (B, d) batch, lowest index on ties."""
        q, _ = (net or self.qnet).forward(states)
        if self.mode == "enumerate":
            return np.argmax(q, axis=1)
        bits = np.argmax(q.reshape(len(q), self.n_units, 2), axis=2)
        return bits @ (1 << np.arange(self.n_units))

    def select_action(self, state, step: int) -> int:
        eps = self.epsilon(step)
        if eps > 0 and self.rng.random() < eps:
            return int(self.rng.integers(2**self.n_units))
        return int(self.greedy(np.asarray(state, dtype=float)[None, :])[0])

    def _joint(self, q, actions):
        """Q(s, a) for a batch of commitment indices; also returns the output mask."""
        B = len(q)
        mask = np.zeros_like(q)
        if self.mode == "enumerate":
            mask[np.arange(B), actions] = 1.0
        else:
            bits = (actions[:, None] >> np.arange(self.n_units)) & 1
            cols = 2 * np.arange(self.n_units)[None, :] + bits
            mask[np.arange(B)[:, None], cols] = 1.0 / self.n_units
        return np.sum(q * mask, axis=1), mask

    def targets(self, batch) -> np.ndarray:
        a_next = self.greedy(batch["s2"])
        q_next, _ = self.target.forward(batch["s2"])
        v_next, _ = self._joint(q_next, a_next)
        return batch["r"] + self.config.gamma * (1 - batch["done"]) * v_next

    def loss_and_grads(self, batch):
        if len(batch["r"]) == 0:
            raise ContractError("empty batch")
        y = self.targets(batch)
        q, cache = self.qnet.forward(batch["s"])
        actions = np.asarray(batch["a"]).reshape(-1).astype(int)
        qa, mask = self._joint(q, actions)
        err = y - qa
        loss = float(np.mean(err**2))
        d_q = mask * (-2 * err / len(err))[:, None]
        return loss, self.qnet.backward(cache, d_q)

    def update(self, batch) -> float:
        loss, grads = self.loss_and_grads(batch)
        self.optimizer.step(self.qnet.params, grads)
        self.updates += 1
        return loss

    def sync_target(self) -> None:
        self.target = self.qnet.copy()


def dqn_mode(case: GridCase, config: TrainConfig) -> str:
    if config.action_mode != "auto":
        return config.action_mode
    return "enumerate" if case.n_units <= ENUMERATE_MAX_UNITS else "factorized"


def make_qnet(case: GridCase, config: TrainConfig, rng):
    mode = dqn_mode(case, config)
    outputs = 2**case.n_units if mode == "enumerate" else 2 * case.n_units
    dim = da_state_dim(case)
    if config.agent == "quantum":
        return QNetwork.create(dim, outputs, config.ansatz, rng)
    return MlpQNetwork.create(dim, outputs, rng, config.hidden)


def make_dqn_agent(case: GridCase, config: TrainConfig) -> DqnAgent:
    init_rng, act_rng = _streams(config.seed, 2)
    qnet = make_qnet(case, config, init_rng)
    return DqnAgent(qnet, case.n_units, config, dqn_mode(case, config), act_rng)


@dataclass
class CurveRow:
    episode: int
    ret: float
    violation: float | None
    epsilon: float | None
    loss: float | None


@dataclass
class TrainResult:
    curve: list
    agent: object
    trajectories: list = field(default_factory=list)
    evals: list = field(default_factory=list)
    wall_time_s: float = 0.0
    extra: dict = field(default_factory=dict)


def _days(case: GridCase, config: TrainConfig):
    return list(config.days) if config.days else list(range(case.days))


def train_day_ahead(case: GridCase, config: TrainConfig, agent: DqnAgent | None = None) -> TrainResult:
    """DQN over forecast days; updates every step once the buffer is warm."""
    start = time.perf_counter()
    agent = agent or make_dqn_agent(case, config)
    (replay_rng,) = _streams(config.seed + 1_000_003, 1)
    buffer = ReplayBuffer(config.buffer_capacity, da_state_dim(case))
    warm = config.warmup_batches * config.batch_size
    days = _days(case, config)
    curve, trajectories, evals = [], [], []
    step = 0
    for ep in range(config.episodes):
        state = da_reset(case, days[ep % len(days)])
        total, losses, eps = 0.0, [], agent.epsilon(step)
        while not state.terminal:
            s = state.vector()
            eps = agent.epsilon(step)
            a = agent.select_action(s, step)
            nxt, r, done = da_step(state, action_to_commitment(a, case.n_units))
            info = nxt.last
            trajectories.append({
                "episode": ep, "t": state.t, "e_prev": info.e_prev.tolist(), "e": info.e.tolist(),
                "startup": info.dispatch.startup.astype(int).tolist(),
                "shutdown": info.dispatch.shutdown.astype(int).tolist(),
            })
            buffer.add(s, a, r, nxt.vector(), done)
            total += r
            step += 1
            if len(buffer) >= warm:
                for _ in range(config.updates_per_step):
                    losses.append(agent.update(buffer.sample(config.batch_size, replay_rng)))
            if step % config.target_sync == 0:
                agent.sync_target()
            state = nxt
        curve.append(CurveRow(ep, total, None, eps, float(np.mean(losses)) if losses else None))
        if config.eval_interval and (ep + 1) % config.eval_interval == 0:
            evals.append({"episode": ep, "return": greedy_return(case, agent, days)})
    return TrainResult(curve, agent, trajectories, evals, time.perf_counter() - start)


def greedy_schedule(agent: DqnAgent, case: GridCase):
    def policy(state):
        return action_to_commitment(int(agent.greedy(state.vector()[None, :])[0]), case.n_units)

    return policy


def greedy_return(case: GridCase, agent: DqnAgent, days) -> float:
    return float(np.mean([rollout_day_ahead(case, greedy_schedule(agent, case), d)[0].total_reward for d in days]))


def greedy_plan(case: GridCase, agent: DqnAgent, day: int = 0) -> DayAheadPlan:
    return rollout_day_ahead(case, greedy_schedule(agent, case), day)[0]


# ---------------------------------------------------------------------------
# SAC


class SacAgent:
    """Soft actor-critic with twin classical critics on (state, squashed action)."""

    def __init__(self, actor, critics, config: TrainConfig, rng):
        if len(critics) != 2:
            raise ContractError("SAC needs exactly two critics")
        self.actor = actor
        self.critics = list(critics)
        self.targets = [c.copy() for c in critics]
        self.config = config
        self.alpha = config.alpha
        self.gamma = config.gamma
        self.tau = config.tau
        self.rng = rng
        self.actor_opt = make_optimizer(actor, config)
        self.critic_opts = [make_optimizer(c, config, critic=True) for c in critics]

    @property
    def action_dim(self) -> int:
        return self.actor.action_dim

    def to_squashed(self, action):
        half = (self.actor.action_high - self.actor.action_low) / 2
        return (np.asarray(action) - self.actor.action_low) / half - 1

    def act(self, state, deterministic: bool = False):
        """(MW action, squashed action) for a single state."""
        noise = np.zeros(self.action_dim) if deterministic else self.rng.normal(size=self.action_dim)
        action, squashed, _, _ = self.actor.forward(np.asarray(state, dtype=float)[None, :], noise[None, :])
        return action[0], squashed[0]

    def critic_targets(self, batch, noise=None) -> list[np.ndarray]:
        s2 = batch["s2"]
        if noise is None:
            noise = self.rng.normal(size=(len(s2), self.action_dim))
        _, a2, logp2, _ = self.actor.forward(s2, noise)
        q_next = [t.forward(s2, a2)[0] for t in self.targets]
        cont = self.gamma * (1 - batch["done"])
        if self.config.critic_form == "clipped":
            v = np.minimum(q_next[0], q_next[1]) - self.alpha * logp2
            return [batch["r"] + cont * v] * 2
        return [batch["r"] + cont * (q - self.alpha * logp2) for q in q_next]

    def critic_update(self, batch, noise=None) -> tuple[float, float]:
        if len(batch["r"]) == 0:
            raise ContractError("empty batch")
        ys = self.critic_targets(batch, noise)
        losses = []
        for critic, opt, y in zip(self.critics, self.critic_opts, ys):
            q, cache = critic.forward(batch["s"], batch["a"])
            err = q - y
            losses.append(float(np.mean(0.5 * err**2)))
            opt.step(critic.params, critic.backward(cache, err / len(err)))
        return losses[0], losses[1]

    def actor_loss_and_grads(self, batch, noise=None):
        s = batch["s"]
        if len(s) == 0:
            raise ContractError("empty batch")
        if noise is None:
            noise = self.rng.normal(size=(len(s), self.action_dim))
        _, a, logp, cache = self.actor.forward(s, noise)
        outs = [c.forward(s, a) for c in self.critics]
        q = np.minimum(outs[0][0], outs[1][0])
        B = len(s)
        loss = float(np.mean(self.alpha * logp - q))
        # d(-min Q)/da through whichever critic attains the minimum (first on ties)
        d_a = np.zeros_like(a)
        for i, (c, (qi, ci)) in enumerate(zip(self.critics, outs)):
            pick = (qi <= outs[1 - i][0]) if i == 0 else (qi < outs[0][0])
            if pick.any():
                _, da = c.backward(ci, np.where(pick, -1.0 / B, 0.0), with_action=True)
                d_a += da
        grads = self.actor.backward(cache, d_a, np.full(B, self.alpha / B))
        return loss, grads

    def actor_update(self, batch, noise=None) -> float:
        loss, grads = self.actor_loss_and_grads(batch, noise)
        self.actor_opt.step(self.actor.params, grads)
        lo, hi = LOG_STD_RANGE
        np.clip(self.actor.params["log_std"], lo, hi, out=self.actor.params["log_std"])
        return loss

    def polyak(self, tau: float | None = None) -> None:
        tau = self.tau if tau is None else tau
        for c, t in zip(self.critics, self.targets):
            for k, p in c.params.items():
                t.params[k] *= 1 - tau
                t.params[k] += tau * p


def make_sac_agent(case: GridCase, config: TrainConfig) -> SacAgent:
    init_rng, act_rng = _streams(config.seed, 2)
    dim = rt_state_dim(case)
    low, high = -case.vpp_max, case.vpp_max
    if case.n_vpps == 0:
        raise ContractError("real-time training needs at least one VPP")
    if config.agent == "quantum":
        if case.n_vpps > config.num_qubits:
            raise ContractError("quantum actor needs at least one qubit per VPP")
        actor = QuantumActor.create(dim, low, high, config.ansatz, init_rng, config.log_std_init)
    else:
        actor = MlpActor.create(dim, low, high, init_rng, config.hidden, config.log_std_init)
    critics = [MlpCritic.create(dim, case.n_vpps, init_rng, config.critic_hidden) for _ in range(2)]
    return SacAgent(actor, critics, config, act_rng)


def train_real_time(case: GridCase, plan: DayAheadPlan, config: TrainConfig, agent: SacAgent | None = None) -> TrainResult:
    """SAC over sampled scenarios of the plan's day with the day-ahead solution frozen."""
    if plan.e.shape != (case.periods, case.n_units):
        raise ContractError("day-ahead plan does not match the case")
    start = time.perf_counter()
    agent = agent or make_sac_agent(case, config)
    (replay_rng,) = _streams(config.seed + 1_000_003, 1)
    gen = ScenarioGenerator(config.sigma_load, config.sigma_pv, config.sigma_wind, seed=config.seed)
    buffer = ReplayBuffer(config.buffer_capacity, rt_state_dim(case), case.n_vpps, discrete=False)
    warm = config.warmup_batches * config.batch_size
    curve = []
    adjustments = []
    for ep in range(config.episodes):
        state = rt_reset(case, plan, sample_scenario(gen, case, plan.day, ep))
        total, viol, losses = 0.0, 0.0, []
        while not state.terminal:
            s = state.vector()
            action, _ = agent.act(s)
            nxt, r, done = rt_step(state, action)
            info = nxt.last
            buffer.add(s, agent.to_squashed(info.action), r, nxt.vector(), done)
            adjustments.append(info.action.copy())
            total += r
            viol += violation_degree(info, case)
            if len(buffer) >= warm:
                for _ in range(config.updates_per_step):
                    batch = buffer.sample(config.batch_size, replay_rng)
                    l1, l2 = agent.critic_update(batch)
                    la = agent.actor_update(batch)
                    agent.polyak()
                    losses.append(0.5 * (l1 + l2))
            state = nxt
        curve.append(CurveRow(ep, total, viol, None, float(np.mean(losses)) if losses else None))
    return TrainResult(curve, agent, [], [], time.perf_counter() - start,
                       {"adjustments": np.array(adjustments).reshape(-1, case.n_vpps)})


def rollout_real_time(case: GridCase, plan: DayAheadPlan, scenario, policy) -> dict:
    """Run one scenario with ``policy(state) -> MW action``; return per-step infos and totals."""
    state = rt_reset(case, plan, scenario)
    infos = []
    while not state.terminal:
        state, _, _ = rt_step(state, policy(state))
        infos.append(state.last)
    return {
        "infos": infos,
        "return": float(sum(i.reward for i in infos)),
        "violation": float(sum(violation_degree(i, case) for i in infos)),
        "adjustment": float(sum(np.abs(i.action).sum() for i in infos)),
        "cost": float(sum(i.cost for i in infos)),
    }


def deterministic_policy(agent: SacAgent):
    return lambda state: agent.act(state.vector(), deterministic=True)[0]


def zero_policy(case: GridCase):
    return lambda state: np.zeros(case.n_vpps)


# ---------------------------------------------------------------------------
# checkpoints


def _arrays(params: dict) -> dict:
    return {k: np.asarray(v).tolist() for k, v in params.items()}


def model_to_dict(model) -> dict:
    doc = {"kind": model.kind, "class": type(model).__name__, "params": _arrays(model.params)}
    if hasattr(model, "ansatz"):
        a = model.ansatz
        doc["ansatz"] = {"num_qubits": a.num_qubits, "num_layers": a.num_layers,
                         "per_qubit_angles": a.per_qubit_angles, "prepare": a.prepare}
    if hasattr(model, "action_low"):
        doc["action_low"] = model.action_low.tolist()
        doc["action_high"] = model.action_high.tolist()
    if hasattr(model, "state_dim"):
        doc["state_dim"] = model.state_dim
    if "enc_w" in model.params:
        N, M = model.params["enc_w"].shape
        doc["dims"] = {"N": N, "M": M, "G": model.ansatz.num_layers, "num_qubits": model.ansatz.num_qubits}
    return doc


def model_from_dict(doc: dict):
    cls = doc["class"]
    params = {k: np.array(v, dtype=float) for k, v in doc["params"].items()}
    if cls == "QNetwork":
        return QNetwork(AnsatzSpec(**doc["ansatz"]), params)
    if cls == "QuantumActor":
        return QuantumActor(AnsatzSpec(**doc["ansatz"]), params, doc["action_low"], doc["action_high"])
    if cls == "MlpQNetwork":
        return MlpQNetwork(params)
    if cls == "MlpActor":
        return MlpActor(params, doc["action_low"], doc["action_high"])
    if cls == "MlpCritic":
        return MlpCritic(params, doc["state_dim"])
    raise ContractError(f"unknown model class {cls!r}")


def dqn_checkpoint(agent: DqnAgent, case: GridCase) -> dict:
    return {
        "type": "dqn",
        "case": case.name,
        "n_units": case.n_units,
        "state_dim": da_state_dim(case),
        "mode": agent.mode,
        "model": model_to_dict(agent.qnet),
        "target": model_to_dict(agent.target),
        "optimizer": agent.optimizer.state_dict(),
        "config": agent.config.to_dict(),
    }


def dqn_from_checkpoint(doc: dict, case: GridCase) -> DqnAgent:
    if doc.get("type") != "dqn":
        raise ContractError("not a day-ahead checkpoint")
    if doc["n_units"] != case.n_units or doc["state_dim"] != da_state_dim(case):
        raise ContractError("day-ahead checkpoint does not match the case")
    config = TrainConfig.from_dict(doc["config"])
    agent = DqnAgent(model_from_dict(doc["model"]), case.n_units, config, doc["mode"], np.random.default_rng(0))
    agent.target = model_from_dict(doc["target"])
    agent.optimizer.load_state_dict(doc["optimizer"])
    return agent


def sac_checkpoint(agent: SacAgent, case: GridCase) -> dict:
    return {
        "type": "sac",
        "case": case.name,
        "state_dim": rt_state_dim(case),
        "actor": model_to_dict(agent.actor),
        "critics": [model_to_dict(c) for c in agent.critics],
        "targets": [model_to_dict(c) for c in agent.targets],
        "optimizer": {
            "actor": agent.actor_opt.state_dict(),
            "critics": [o.state_dict() for o in agent.critic_opts],
        },
        "config": agent.config.to_dict(),
    }


def sac_from_checkpoint(doc: dict, case: GridCase) -> SacAgent:
    if doc.get("type") != "sac" or doc["state_dim"] != rt_state_dim(case):
        raise ContractError("real-time checkpoint does not match the case")
    config = TrainConfig.from_dict(doc["config"])
    agent = SacAgent(model_from_dict(doc["actor"]), [model_from_dict(c) for c in doc["critics"]],
                     config, np.random.default_rng(0))
    agent.targets = [model_from_dict(c) for c in doc["targets"]]
    return agent


def eq9_violations(trajectories) -> int:
    """Steps where e_t - e_{t-1} != su - sd, or su and sd are both set."""
    bad = 0
    for row in trajectories:
        e, ep = np.array(row["e"]), np.array(row["e_prev"])
        su, sd = np.array(row["startup"]), np.array(row["shutdown"])
        ok = np.array_equal(e - ep, su - sd) and not np.any(su * sd) and set(su.tolist() + sd.tolist()) <= {0, 1}
        bad += not ok
    return bad


def commitment_index(e) -> int:
    return commitment_to_action(e)


def finite(x) -> bool:
    return x is not None and math.isfinite(x)
