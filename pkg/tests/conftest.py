import numpy as np
import pytest

from qcommit.qsim import Circuit, Gate


def random_circuit(rng, num_qubits, layers, n_data=0, n_train=None, p_shared=0.3):
    """Layered random circuit mixing all gate kinds; some trainable slots shared."""
    n_train = n_train if n_train is not None else 2 * num_qubits * layers
    gates = [Gate("H", q) for q in range(num_qubits)]
    for d in range(n_data):
        gates.append(Gate("RX", d % num_qubits, param_slot=d, slot_kind="data"))
    slot = 0
    for _ in range(layers):
        for q in range(num_qubits):
            kind = ["RX", "RY", "RZ"][rng.integers(3)]
            if slot and rng.random() < p_shared:
                s = int(rng.integers(slot))
            else:
                s = slot % n_train
                slot += 1
            gates.append(Gate(kind, q, param_slot=s))
        for q in range(num_qubits - 1):
            gates.append(Gate("CZ", q + 1, control=q))
        q = int(rng.integers(num_qubits))
        gates.append(Gate("RY", q, angle=float(rng.uniform(-np.pi, np.pi))))
    return Circuit(num_qubits, tuple(gates), n_data, max(slot, 1) if n_train else 0)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
