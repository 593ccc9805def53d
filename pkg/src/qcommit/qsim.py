"""Dense statevector simulation for small parameterized circuits.

Qubit 0 is the least-significant bit of the basis-state index, so the
amplitude of |q_{n-1} ... q_1 q_0> lives at index sum(q_k << k).

Gate set: H, RX, RY, RZ, CZ. Rotations follow R_P(t) = exp(-i t P / 2).
Expectations are exact (no shot sampling).

Everything here is a pure function of its inputs. Internally circuits are
evaluated over a batch of angle assignments at once, which is what the
parameter-shift machinery and the batched model code rely on.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import BindingError, SizeError, UnsupportedGateError

MAX_QUBITS = 16
ROTATIONS = ("RX", "RY", "RZ")
GATE_KINDS = ("H", "CZ") + ROTATIONS
SLOT_KINDS = ("data", "trainable")

_HALF_PI = np.pi / 2
_INV_SQRT2 = 1 / np.sqrt(2)


@dataclass(frozen=True)
class Gate:
    kind: str
    target: int
    control: int | None = None
    angle: float | None = None
    param_slot: int | None = None
    slot_kind: str = "trainable"

    def __post_init__(self):
        if self.kind not in GATE_KINDS:
            raise UnsupportedGateError(f"unknown gate kind {self.kind!r}")
        if self.target < 0:
            raise SizeError("negative qubit index")
        if self.kind == "CZ":
            if self.control is None or self.control == self.target or self.control < 0:
                raise SizeError("CZ needs a control distinct from its target")
        elif self.control is not None:
            raise SizeError(f"{self.kind} takes no control qubit")
        if self.kind in ROTATIONS:
            if (self.angle is None) == (self.param_slot is None):
                raise BindingError(f"{self.kind} needs exactly one of angle / param_slot")
        elif self.angle is not None or self.param_slot is not None:
            raise UnsupportedGateError(f"{self.kind} carries no parameter")
        if self.slot_kind not in SLOT_KINDS:
            raise BindingError(f"slot_kind must be one of {SLOT_KINDS}")

    @property
    def is_rotation(self) -> bool:
        return self.kind in ROTATIONS

    def qubits(self) -> tuple[int, ...]:
        return (self.target,) if self.control is None else (self.control, self.target)


@dataclass(frozen=True)
class Circuit:
    num_qubits: int
    gates: tuple[Gate, ...] = ()
    num_data_slots: int = 0
    num_trainable_slots: int = 0

    def __post_init__(self):
        _check_qubits(self.num_qubits)
        object.__setattr__(self, "gates", tuple(self.gates))
        for g in self.gates:
            if max(g.qubits()) >= self.num_qubits:
                raise SizeError(f"gate {g} acts outside a {self.num_qubits}-qubit register")
            if g.param_slot is not None:
                limit = self.num_data_slots if g.slot_kind == "data" else self.num_trainable_slots
                if not 0 <= g.param_slot < limit:
                    raise BindingError(
                        f"{g.slot_kind} slot {g.param_slot} out of range (have {limit})"
                    )

    def slot_gates(self, slot: int, slot_kind: str = "trainable") -> list[int]:
        """Indices of the gates reading ``slot``."""
        return [
            i for i, g in enumerate(self.gates)
            if g.param_slot == slot and g.slot_kind == slot_kind
        ]


@dataclass
class Statevector:
    num_qubits: int
    amplitudes: np.ndarray = field(repr=False)

    def __post_init__(self):
        _check_qubits(self.num_qubits)
        self.amplitudes = np.asarray(self.amplitudes, dtype=np.complex128)
        if self.amplitudes.shape != (1 << self.num_qubits,):
            raise SizeError(
                f"expected {1 << self.num_qubits} amplitudes, got {self.amplitudes.shape}"
            )

    def norm_squared(self) -> float:
        return float(np.sum(np.abs(self.amplitudes) ** 2))

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2


@dataclass(frozen=True)
class Observable:
    """Weighted sum of single-qubit Pauli-Z terms plus a constant."""

    terms: tuple[tuple[int, float], ...] = ()
    constant: float = 0.0

    @classmethod
    def z(cls, qubit: int, weight: float = 1.0) -> "Observable":
        return cls(((qubit, weight),))

    @classmethod
    def from_weights(cls, weights: Sequence[float], constant: float = 0.0) -> "Observable":
        return cls(tuple((q, float(w)) for q, w in enumerate(weights)), constant)

    def weight_vector(self, num_qubits: int) -> np.ndarray:
        w = np.zeros(num_qubits)
        for q, weight in self.terms:
            if not 0 <= q < num_qubits:
                raise SizeError(f"observable qubit {q} outside {num_qubits}-qubit register")
            w[q] += weight
        return w


def _check_qubits(n: int) -> None:
    if not isinstance(n, (int, np.integer)) or not 1 <= n <= MAX_QUBITS:
        raise SizeError(f"qubit count must be in [1, {MAX_QUBITS}], got {n!r}")


def zero_state(n: int) -> Statevector:
    _check_qubits(n)
    amps = np.zeros(1 << n, dtype=np.complex128)
    amps[0] = 1.0
    return Statevector(n, amps)


# ---------------------------------------------------------------------------
# batched kernels; ``amps`` has shape (batch, 2**n)


def _rotation_matrices(kind: str, angles: np.ndarray) -> np.ndarray:
    c = np.cos(angles / 2)
    s = np.sin(angles / 2)
    m = np.zeros(angles.shape + (2, 2), dtype=np.complex128)
    if kind == "RX":
        m[..., 0, 0] = c
        m[..., 1, 1] = c
        m[..., 0, 1] = -1j * s
        m[..., 1, 0] = -1j * s
    elif kind == "RY":
        m[..., 0, 0] = c
        m[..., 1, 1] = c
        m[..., 0, 1] = -s
        m[..., 1, 0] = s
    else:
        m[..., 0, 0] = c - 1j * s
        m[..., 1, 1] = c + 1j * s
    return m


def _apply_1q(amps: np.ndarray, n: int, q: int, mats: np.ndarray) -> np.ndarray:
    # mats: (2, 2) shared or (batch, 2, 2) per row
    b = amps.shape[0]
    view = amps.reshape(b, 1 << (n - q - 1), 2, 1 << q)
    a0 = view[:, :, 0, :]
    a1 = view[:, :, 1, :]
    out = np.empty_like(view)
    if mats.ndim == 2:
        out[:, :, 0, :] = mats[0, 0] * a0 + mats[0, 1] * a1
        out[:, :, 1, :] = mats[1, 0] * a0 + mats[1, 1] * a1
    else:
        m = mats[:, None, None, :, :]
        out[:, :, 0, :] = m[..., 0, 0] * a0 + m[..., 0, 1] * a1
        out[:, :, 1, :] = m[..., 1, 0] * a0 + m[..., 1, 1] * a1
    return out.reshape(b, 1 << n)


_CZ_SIGNS: dict[tuple[int, int, int], np.ndarray] = {}
_Z_SIGNS: dict[int, np.ndarray] = {}


def _cz_signs(n: int, a: int, b: int) -> np.ndarray:
    key = (n, min(a, b), max(a, b))
    if key not in _CZ_SIGNS:
        idx = np.arange(1 << n)
        both = ((idx >> a) & 1) & ((idx >> b) & 1)
        _CZ_SIGNS[key] = 1.0 - 2.0 * both
    return _CZ_SIGNS[key]


def _z_signs(n: int) -> np.ndarray:
    """(n, 2**n) table of Z eigenvalues: +1 where bit q is 0, -1 where it is 1."""
    if n not in _Z_SIGNS:
        idx = np.arange(1 << n)
        _Z_SIGNS[n] = 1.0 - 2.0 * ((idx[None, :] >> np.arange(n)[:, None]) & 1)
    return _Z_SIGNS[n]


_H = np.array([[1, 1], [1, -1]], dtype=np.complex128) * _INV_SQRT2


def _apply_batch(amps: np.ndarray, n: int, gate: Gate, angles: np.ndarray | None) -> np.ndarray:
    if gate.kind == "H":
        return _apply_1q(amps, n, gate.target, _H)
    if gate.kind == "CZ":
        return amps * _cz_signs(n, gate.control, gate.target)
    return _apply_1q(amps, n, gate.target, _rotation_matrices(gate.kind, angles))


def gate_angles(circuit: Circuit, data, trainable, batch: int | None = None) -> np.ndarray:
    """Resolve every gate's angle into a (batch, n_gates) array.

    ``data`` and ``trainable`` may be 1-D (shared) or 2-D (one row per batch
    element). Non-rotation gates get 0 (unused).
    """
    data = np.asarray(data, dtype=float)
    trainable = np.asarray(trainable, dtype=float)
    if data.shape[-1:] != (circuit.num_data_slots,) and not (
        circuit.num_data_slots == 0 and data.size == 0
    ):
        raise BindingError(
            f"expected {circuit.num_data_slots} data values, got shape {data.shape}"
        )
    if trainable.shape[-1:] != (circuit.num_trainable_slots,) and not (
        circuit.num_trainable_slots == 0 and trainable.size == 0
    ):
        raise BindingError(
            f"expected {circuit.num_trainable_slots} trainable values, got shape {trainable.shape}"
        )
    if batch is None:
        batch = max(
            data.shape[0] if data.ndim == 2 else 1,
            trainable.shape[0] if trainable.ndim == 2 else 1,
        )
    data = _rows(data, batch, circuit.num_data_slots)
    trainable = _rows(trainable, batch, circuit.num_trainable_slots)
    out = np.zeros((batch, len(circuit.gates)))
    for i, g in enumerate(circuit.gates):
        if not g.is_rotation:
            continue
        if g.param_slot is None:
            out[:, i] = g.angle
        elif g.slot_kind == "data":
            out[:, i] = data[:, g.param_slot]
        else:
            out[:, i] = trainable[:, g.param_slot]
    return out


def _rows(values: np.ndarray, batch: int, width: int) -> np.ndarray:
    if width == 0:
        return np.zeros((batch, 0))
    values = values.reshape(-1, width)
    if values.shape[0] not in (1, batch):
        raise BindingError(f"batch mismatch: {values.shape[0]} rows for batch {batch}")
    return np.broadcast_to(values, (batch, width))


def simulate(circuit: Circuit, angles: np.ndarray) -> np.ndarray:
    """Run ``circuit`` from |0...0> for each row of ``angles`` -> (batch, 2**n)."""
    angles = np.atleast_2d(angles)
    n = circuit.num_qubits
    amps = np.zeros((angles.shape[0], 1 << n), dtype=np.complex128)
    amps[:, 0] = 1.0
    for i, g in enumerate(circuit.gates):
        amps = _apply_batch(amps, n, g, angles[:, i] if g.is_rotation else None)
    return amps


def z_expectations(amps: np.ndarray, n: int) -> np.ndarray:
    """Per-qubit <Z_q> for a batch of states -> (batch, n)."""
    probs = np.abs(amps) ** 2
    return probs @ _z_signs(n).T


def apply_gate(state: Statevector, gate: Gate, angle: float | None = None) -> Statevector:
    n = state.num_qubits
    if max(gate.qubits()) >= n:
        raise SizeError(f"gate {gate} acts outside a {n}-qubit register")
    theta = None
    if gate.is_rotation:
        if angle is None:
            if gate.angle is None:
                raise BindingError(f"unresolved {gate.slot_kind} slot {gate.param_slot}")
            angle = gate.angle
        theta = np.array([float(angle)])
    amps = _apply_batch(state.amplitudes[None, :], n, gate, theta)
    return Statevector(n, amps[0])


def run_circuit(circuit: Circuit, data=(), trainable=()) -> Statevector:
    data = np.asarray(data, dtype=float)
    trainable = np.asarray(trainable, dtype=float)
    if data.ndim != 1 or trainable.ndim != 1:
        raise BindingError("run_circuit takes 1-D data and trainable vectors")
    amps = simulate(circuit, gate_angles(circuit, data, trainable, batch=1))
    return Statevector(circuit.num_qubits, amps[0])


def expect_z(state: Statevector, obs: Observable) -> float:
    w = obs.weight_vector(state.num_qubits)
    z = z_expectations(state.amplitudes[None, :], state.num_qubits)[0]
    return float(z @ w + obs.constant)


def per_gate_shift_grads(
    circuit: Circuit, angles: np.ndarray, weights: np.ndarray, gate_idx: Sequence[int]
) -> np.ndarray:
    """d f / d(angle of gate j) for each j in ``gate_idx`` via the +-pi/2 shift.

    f is sum_q weights[b, q] <Z_q> for batch row b. ``angles`` is (B, n_gates),
    ``weights`` is (B, n) or (n,). Returns (B, len(gate_idx)).
    """
    angles = np.atleast_2d(angles)
    b, n_gates = angles.shape
    gate_idx = list(gate_idx)
    if not gate_idx:
        return np.zeros((b, 0))
    for j in gate_idx:
        if not circuit.gates[j].is_rotation:
            raise UnsupportedGateError(f"parameter shift undefined for {circuit.gates[j].kind}")
    k = len(gate_idx)
    # layout: (shift sign, gate, batch row)
    shifted = np.broadcast_to(angles, (2, k, b, n_gates)).copy()
    cols = np.array(gate_idx)
    shifted[0, np.arange(k), :, cols] += _HALF_PI
    shifted[1, np.arange(k), :, cols] -= _HALF_PI
    z = z_expectations(simulate(circuit, shifted.reshape(-1, n_gates)), circuit.num_qubits)
    z = z.reshape(2, k, b, circuit.num_qubits)
    w = np.broadcast_to(weights, (b, circuit.num_qubits))
    f = np.einsum("skbq,bq->skb", z, w)
    return (0.5 * (f[0] - f[1])).T


def slot_grads(
    circuit: Circuit, angles: np.ndarray, weights: np.ndarray, slot_kind: str
) -> np.ndarray:
    """Gradient with respect to every slot of ``slot_kind`` -> (B, n_slots).

    A slot read by several gates accumulates the per-occurrence shifts.
    """
    n_slots = circuit.num_data_slots if slot_kind == "data" else circuit.num_trainable_slots
    angles = np.atleast_2d(angles)
    out = np.zeros((angles.shape[0], n_slots))
    idx = [i for i, g in enumerate(circuit.gates) if g.param_slot is not None and g.slot_kind == slot_kind]
    if not idx:
        return out
    per_gate = per_gate_shift_grads(circuit, angles, weights, idx)
    for col, i in enumerate(idx):
        out[:, circuit.gates[i].param_slot] += per_gate[:, col]
    return out


def param_shift_grad(
    circuit: Circuit, data, trainable, obs: Observable, k: int, slot_kind: str = "trainable"
) -> float:
    """Exact derivative of <obs> with respect to slot ``k``.

    Each gate reading the slot is shifted by +-pi/2 on its own and the
    halves of the differences are summed. An unused slot gives 0.
    """
    n_slots = circuit.num_data_slots if slot_kind == "data" else circuit.num_trainable_slots
    if not 0 <= k < n_slots:
        raise BindingError(f"{slot_kind} slot {k} out of range (have {n_slots})")
    idx = circuit.slot_gates(k, slot_kind)
    if not idx:
        return 0.0
    angles = gate_angles(circuit, data, trainable, batch=1)
    w = obs.weight_vector(circuit.num_qubits)
    return float(per_gate_shift_grads(circuit, angles, w, idx).sum())


def grad_vector(circuit: Circuit, data, trainable, obs: Observable, slot_kind: str = "trainable") -> np.ndarray:
    angles = gate_angles(circuit, data, trainable, batch=1)
    w = obs.weight_vector(circuit.num_qubits)
    return slot_grads(circuit, angles, w, slot_kind)[0]
