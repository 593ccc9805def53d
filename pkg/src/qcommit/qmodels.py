"""Hybrid classical/quantum function approximators.

A raw state vector passes through a linear layer (N -> M), is scaled to
unit L2 norm, and each component y_n is loaded as an RX(tanh(y_n)) angle on
qubit n. The ansatz then repeats {CZ chain, RY(tanh(theta_g)) on every
qubit} for G layers and the per-qubit <Z> values are read out.

Models keep their trainable arrays in a ``params`` dict; ``backward``
returns a dict with the same keys, summed over the batch. Circuit
gradients use the parameter-shift rule, classical layers the chain rule.
"""
from __future__ import annotations

import copy
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import DegenerateInputError, SizeError
from .qsim import Circuit, Gate, Statevector, gate_angles, simulate, slot_grads, z_expectations

NORM_FLOOR = 1e-12
SQUASH_EPS = 1e-6
_LOG_2PI = np.log(2 * np.pi)


def amplitude_encode(values) -> Statevector:
    values = np.asarray(values, dtype=float)
    n = values.size.bit_length() - 1
    if values.ndim != 1 or values.size < 2 or values.size != 1 << n:
        raise SizeError(f"amplitude encoding needs 2**n values, got {values.size}")
    norm = np.linalg.norm(values)
    if norm == 0:
        raise DegenerateInputError("cannot amplitude-encode an all-zero vector")
    return Statevector(n, values / norm)


@dataclass
class LinearEncoder:
    weights: np.ndarray  # (in_dim, out_dim)
    bias: np.ndarray

    @property
    def in_dim(self) -> int:
        return self.weights.shape[0]

    @property
    def out_dim(self) -> int:
        return self.weights.shape[1]


def _unit_rows(z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    norms = np.linalg.norm(z, axis=1)
    y = np.empty_like(z)
    ok = norms >= NORM_FLOOR
    y[ok] = z[ok] / norms[ok, None]
    y[~ok] = 1 / np.sqrt(z.shape[1])
    return y, norms


def encode_reduce(enc: LinearEncoder, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (enc.in_dim,):
        raise SizeError(f"encoder expects {enc.in_dim} inputs, got {x.shape}")
    y, _ = _unit_rows((x @ enc.weights + enc.bias)[None, :])
    return y[0]


@dataclass(frozen=True)
class AnsatzSpec:
    num_qubits: int
    num_layers: int
    per_qubit_angles: bool = False
    # "plus_i": H then a fixed RZ(pi/2) before the RX data gates.
    # "plus": bare H then RX. |+> is an RX eigenstate, so the data only
    # adds a global phase and the output ignores the input.
    prepare: str = "plus_i"

    def __post_init__(self):
        if self.num_qubits < 1 or self.num_layers < 1:
            raise SizeError("ansatz needs at least one qubit and one layer")
        if self.prepare not in ("plus_i", "plus"):
            raise ValueError(f"unknown prepare mode {self.prepare!r}")

    @property
    def num_trainable(self) -> int:
        return self.num_layers * (self.num_qubits if self.per_qubit_angles else 1)


@lru_cache(maxsize=None)
def build_vqc(ansatz: AnsatzSpec) -> Circuit:
    """H on all qubits, RX data encoding, then G x {CZ chain, RY layer}."""
    n = ansatz.num_qubits
    gates = [Gate("H", q) for q in range(n)]
    if ansatz.prepare == "plus_i":
        gates += [Gate("RZ", q, angle=np.pi / 2) for q in range(n)]
    gates += [Gate("RX", q, param_slot=q, slot_kind="data") for q in range(n)]
    for g in range(ansatz.num_layers):
        gates += [Gate("CZ", q + 1, control=q) for q in range(n - 1)]
        for q in range(n):
            slot = g * n + q if ansatz.per_qubit_angles else g
            gates.append(Gate("RY", q, param_slot=slot))
    return Circuit(n, tuple(gates), n, ansatz.num_trainable)


class _PqcTrunk:
    """Shared encoder + circuit path; subclasses add their heads."""

    ansatz: AnsatzSpec
    params: dict

    @property
    def encoder(self) -> LinearEncoder:
        return LinearEncoder(self.params["enc_w"], self.params["enc_b"])

    @property
    def theta(self) -> np.ndarray:
        return self.params["theta"]

    @property
    def in_dim(self) -> int:
        return self.params["enc_w"].shape[0]

    def _features(self, states: np.ndarray):
        states = np.atleast_2d(np.asarray(states, dtype=float))
        if states.shape[1] != self.in_dim:
            raise SizeError(f"model expects {self.in_dim} state entries, got {states.shape[1]}")
        z = states @ self.params["enc_w"] + self.params["enc_b"]
        y, norms = _unit_rows(z)
        circuit = build_vqc(self.ansatz)
        angles = gate_angles(circuit, np.tanh(y), np.tanh(self.params["theta"]))
        expz = z_expectations(simulate(circuit, angles), self.ansatz.num_qubits)
        return expz, (states, y, norms, angles)

    def _features_backward(self, cache, d_expz: np.ndarray) -> dict:
        states, y, norms, angles = cache
        circuit = build_vqc(self.ansatz)
        d_data = slot_grads(circuit, angles, d_expz, "data") * (1 - np.tanh(y) ** 2)
        d_theta = slot_grads(circuit, angles, d_expz, "trainable").sum(axis=0)
        d_theta *= 1 - np.tanh(self.params["theta"]) ** 2
        # back through y = z / |z|; the uniform fallback has zero gradient
        ok = norms >= NORM_FLOOR
        d_z = np.zeros_like(y)
        proj = np.sum(y * d_data, axis=1, keepdims=True)
        d_z[ok] = (d_data[ok] - y[ok] * proj[ok]) / norms[ok, None]
        return {"enc_w": states.T @ d_z, "enc_b": d_z.sum(axis=0), "theta": d_theta}

    def copy(self):
        return copy.deepcopy(self)


def _init_trunk(in_dim, ansatz, rng, theta_scale=0.1):
    n = ansatz.num_qubits
    return {
        "enc_w": rng.normal(0, 1 / np.sqrt(in_dim), (in_dim, n)),
        "enc_b": rng.normal(0, 0.1, n),
        "theta": rng.normal(0, theta_scale, ansatz.num_trainable),
    }


class QNetwork(_PqcTrunk):
    """Q(s, .) = readout_w^T <Z>(s) + readout_b."""

    kind = "quantum"

    def __init__(self, ansatz: AnsatzSpec, params: dict):
        self.ansatz = ansatz
        self.params = {k: np.array(v, dtype=float) for k, v in params.items()}
        if self.params["readout_w"].shape[0] != ansatz.num_qubits:
            raise SizeError("readout rows must equal the qubit count")

    @classmethod
    def create(cls, in_dim, num_actions, ansatz, rng, readout_scale=0.5):
        params = _init_trunk(in_dim, ansatz, rng)
        params["readout_w"] = rng.normal(0, readout_scale, (ansatz.num_qubits, num_actions))
        params["readout_b"] = np.zeros(num_actions)
        return cls(ansatz, params)

    @property
    def num_actions(self) -> int:
        return self.params["readout_w"].shape[1]

    def forward(self, states):
        expz, cache = self._features(states)
        q = expz @ self.params["readout_w"] + self.params["readout_b"]
        return q, (expz, cache)

    def backward(self, cache, d_q: np.ndarray) -> dict:
        expz, trunk_cache = cache
        grads = self._features_backward(trunk_cache, d_q @ self.params["readout_w"].T)
        grads["readout_w"] = expz.T @ d_q
        grads["readout_b"] = d_q.sum(axis=0)
        return grads

    def expectations(self, state) -> np.ndarray:
        return self._features(state)[0][0]


def squashed_gaussian(mu, log_std, noise, low, high):
    """Sample a tanh-squashed Gaussian and rescale it onto [low, high].

    Returns (action, squashed, log_prob, cache). ``log_prob`` is the density
    of the rescaled action, so it integrates to one over the action box.
    """
    std = np.exp(log_std)
    eps = np.zeros_like(mu) if noise is None else np.broadcast_to(noise, mu.shape)
    u = mu + std * eps
    a = np.tanh(u)
    half = (np.asarray(high) - np.asarray(low)) / 2
    log_prob = (
        np.sum(-0.5 * eps**2 - log_std - 0.5 * _LOG_2PI, axis=1)
        - np.sum(np.log(1 - a**2 + SQUASH_EPS), axis=1)
        - np.sum(np.log(half))
    )
    action = np.asarray(low) + (a + 1) * half
    return action, a, log_prob, (a, eps, std)


def squashed_gaussian_backward(cache, d_squashed, d_log_prob):
    """Gradients with respect to (mu, log_std) given upstream signals."""
    a, eps, std = cache
    one_minus = 1 - a**2
    d_u = d_squashed * one_minus + d_log_prob[:, None] * 2 * a * one_minus / (one_minus + SQUASH_EPS)
    d_log_std = np.sum(d_u * std * eps, axis=0) - d_log_prob.sum() * np.ones(a.shape[1])
    return d_u, d_log_std


def squashed_log_prob(mu, log_std, action, low, high):
    """Log-density of given actions (used for normalization checks)."""
    half = (np.asarray(high) - np.asarray(low)) / 2
    a = (np.asarray(action) - low) / half - 1
    u = np.arctanh(np.clip(a, -1 + 1e-15, 1 - 1e-15))
    std = np.exp(log_std)
    return (
        np.sum(-0.5 * ((u - mu) / std) ** 2 - log_std - 0.5 * _LOG_2PI, axis=-1)
        - np.sum(np.log(1 - a**2 + SQUASH_EPS), axis=-1)
        - np.sum(np.log(half))
    )


class QuantumActor(_PqcTrunk):
    """Gaussian policy whose mean on dimension d is <Z_d> of the circuit."""

    kind = "quantum"

    def __init__(self, ansatz: AnsatzSpec, params: dict, action_low, action_high):
        self.ansatz = ansatz
        self.params = {k: np.array(v, dtype=float) for k, v in params.items()}
        self.action_low = np.asarray(action_low, dtype=float)
        self.action_high = np.asarray(action_high, dtype=float)
        if self.action_dim > ansatz.num_qubits:
            raise SizeError("action_dim cannot exceed the qubit count")
        if self.action_low.shape != (self.action_dim,) or np.any(self.action_high <= self.action_low):
            raise SizeError("action bounds must be increasing vectors of length action_dim")

    @classmethod
    def create(cls, in_dim, action_low, action_high, ansatz, rng, log_std=-0.5):
        params = _init_trunk(in_dim, ansatz, rng)
        params["log_std"] = np.full(len(action_low), float(log_std))
        return cls(ansatz, params, action_low, action_high)

    @property
    def action_dim(self) -> int:
        return self.params["log_std"].shape[0]

    def mean(self, states):
        expz, cache = self._features(states)
        return expz[:, : self.action_dim], (expz, cache)

    def forward(self, states, noise=None):
        mu, mcache = self.mean(states)
        action, squashed, log_prob, hcache = squashed_gaussian(
            mu, self.params["log_std"], noise, self.action_low, self.action_high
        )
        return action, squashed, log_prob, (mcache, hcache)

    def backward(self, cache, d_squashed, d_log_prob) -> dict:
        (expz, trunk_cache), hcache = cache
        d_mu, d_log_std = squashed_gaussian_backward(hcache, d_squashed, np.asarray(d_log_prob))
        d_expz = np.zeros_like(expz)
        d_expz[:, : self.action_dim] = d_mu
        grads = self._features_backward(trunk_cache, d_expz)
        grads["log_std"] = d_log_std
        return grads

    def log_prob_of(self, state, actions):
        mu, _ = self.mean(state)
        return squashed_log_prob(mu[0], self.params["log_std"], actions, self.action_low, self.action_high)


def q_values(net, s) -> np.ndarray:
    return net.forward(np.asarray(s, dtype=float)[None, :])[0][0]


def actor_forward(actor, s, noise=None) -> tuple[np.ndarray, float]:
    noise = None if noise is None else np.asarray(noise, dtype=float)[None, :]
    action, _, log_prob, _ = actor.forward(np.asarray(s, dtype=float)[None, :], noise)
    return action[0], float(log_prob[0])


def model_grads(model, s, downstream, noise=None) -> dict:
    """Vector-Jacobian product for a single state.

    For a Q-network ``downstream`` is d(loss)/dQ over actions. For an actor
    it is a pair (d_action, d_log_prob) with d_action in MW.
    """
    s = np.asarray(s, dtype=float)[None, :]
    if hasattr(model, "num_actions"):
        _, cache = model.forward(s)
        return model.backward(cache, np.asarray(downstream, dtype=float)[None, :])
    d_action, d_log_prob = downstream
    noise = None if noise is None else np.asarray(noise, dtype=float)[None, :]
    _, _, _, cache = model.forward(s, noise)
    half = (model.action_high - model.action_low) / 2
    d_squashed = np.asarray(d_action, dtype=float)[None, :] * half
    return model.backward(cache, d_squashed, np.array([float(d_log_prob)]))
