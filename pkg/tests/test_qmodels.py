import numpy as np
import pytest

from qcommit.errors import DegenerateInputError, SizeError
from qcommit.qmodels import (
    AnsatzSpec,
    LinearEncoder,
    QNetwork,
    QuantumActor,
    actor_forward,
    amplitude_encode,
    build_vqc,
    encode_reduce,
    model_grads,
    q_values,
)
from qcommit.qsim import Gate


def param_fd(model, scalar, h=1e-4):
    """Central finite differences of ``scalar()`` over every model parameter."""
    out = {}
    for key, arr in model.params.items():
        g = np.zeros_like(arr)
        flat = arr.reshape(-1)
        for i in range(flat.size):
            old = flat[i]
            flat[i] = old + h
            up = scalar()
            flat[i] = old - h
            down = scalar()
            flat[i] = old
            g.reshape(-1)[i] = (up - down) / (2 * h)
        out[key] = g
    return out


def assert_grads_match(analytic, numeric, atol):
    assert analytic.keys() == numeric.keys()
    for k in analytic:
        np.testing.assert_allclose(analytic[k], numeric[k], atol=atol, err_msg=k)


def test_amplitude_encode():
    np.testing.assert_allclose(amplitude_encode([3, 4]).amplitudes, [0.6, 0.8])
    np.testing.assert_allclose(amplitude_encode([1, 0, 0, 0]).amplitudes, [1, 0, 0, 0])
    with pytest.raises(DegenerateInputError):
        amplitude_encode([0, 0])
    with pytest.raises(SizeError):
        amplitude_encode([1, 2, 3])


def test_encode_reduce_examples(rng):
    enc = LinearEncoder(np.eye(2), np.zeros(2))
    np.testing.assert_allclose(encode_reduce(enc, [3, 4]), [0.6, 0.8])
    zero = LinearEncoder(np.zeros((5, 3)), np.zeros(3))
    np.testing.assert_allclose(encode_reduce(zero, rng.normal(size=5)), np.full(3, 1 / np.sqrt(3)))
    enc = LinearEncoder(rng.normal(size=(6, 3)), rng.normal(size=3))
    assert abs(np.linalg.norm(encode_reduce(enc, rng.normal(size=6))) - 1) < 1e-10
    with pytest.raises(SizeError):
        encode_reduce(enc, np.ones(5))


def _slots(c):
    out = []
    for g in c.gates:
        if g.kind == "CZ":
            out.append(("CZ", g.control, g.target))
        elif g.param_slot is not None:
            out.append((g.kind, g.target, g.slot_kind[0], g.param_slot))
        else:
            out.append((g.kind, g.target))
    return out


def test_build_vqc_structure():
    plus = lambda n, g: AnsatzSpec(n, g, prepare="plus")
    assert _slots(build_vqc(plus(1, 1))) == [("H", 0), ("RX", 0, "d", 0), ("RY", 0, "t", 0)]
    assert _slots(build_vqc(plus(2, 1))) == [
        ("H", 0), ("H", 1), ("RX", 0, "d", 0), ("RX", 1, "d", 1),
        ("CZ", 0, 1), ("RY", 0, "t", 0), ("RY", 1, "t", 0),
    ]
    assert _slots(build_vqc(AnsatzSpec(1, 1))) == [("H", 0), ("RZ", 0), ("RX", 0, "d", 0), ("RY", 0, "t", 0)]
    c = build_vqc(plus(3, 2))
    layer = [("CZ", 0, 1), ("CZ", 1, 2)]
    assert _slots(c)[6:] == layer + [("RY", q, "t", 0) for q in range(3)] + layer + [
        ("RY", q, "t", 1) for q in range(3)
    ]
    assert c.num_trainable_slots == 2
    assert build_vqc(AnsatzSpec(3, 2, per_qubit_angles=True)).num_trainable_slots == 6


def _qnet(rng, n, layers, in_dim, actions, per_qubit=False):
    net = QNetwork.create(in_dim, actions, AnsatzSpec(n, layers, per_qubit), rng)
    net.params["theta"][:] = rng.normal(0, 1, net.theta.shape)
    net.params["readout_b"][:] = rng.normal(size=actions)
    return net


def test_q_values_examples(rng):
    net = _qnet(rng, 2, 1, 3, 2)
    net.params["theta"][:] = 0
    net.params["readout_w"][:] = 0
    net.params["readout_b"][:] = [0.5, -0.5]
    np.testing.assert_allclose(q_values(net, rng.normal(size=3)), [0.5, -0.5])

    # bare H then RX: |+> is an RX eigenstate, so <Z> = 0 whatever the input
    net = QNetwork(AnsatzSpec(1, 1, prepare="plus"), {
        "enc_w": np.ones((1, 1)), "enc_b": np.zeros(1), "theta": np.zeros(1),
        "readout_w": np.ones((1, 1)), "readout_b": np.zeros(1)})
    for x in (0.0, 0.3, -2.0):
        np.testing.assert_allclose(q_values(net, [x]), [0.0], atol=1e-15)


def test_default_encoding_depends_on_input(rng):
    # from |+i>, RX(phi) gives <Z> = sin(phi)
    net = QNetwork(AnsatzSpec(1, 1), {
        "enc_w": np.ones((1, 1)), "enc_b": np.zeros(1), "theta": np.zeros(1),
        "readout_w": np.ones((1, 1)), "readout_b": np.zeros(1)})
    np.testing.assert_allclose(q_values(net, [2.0]), [np.sin(np.tanh(1.0))], atol=1e-12)
    np.testing.assert_allclose(q_values(net, [-2.0]), [-np.sin(np.tanh(1.0))], atol=1e-12)
    net = _qnet(rng, 3, 2, 5, 4)
    z = [net.expectations(rng.normal(size=5)) for _ in range(5)]
    assert np.ptp(np.array(z), axis=0).max() > 1e-3


def test_q_values_bounded(rng):
    for _ in range(100):
        net = _qnet(rng, 3, 2, 5, 4)
        z = net.expectations(rng.normal(size=5) * 10)
        assert np.all(np.abs(z) <= 1 + 1e-12)
        q = q_values(net, rng.normal(size=5))
        bound = np.abs(net.params["readout_w"]).sum(axis=0) + np.abs(net.params["readout_b"])
        assert np.all(np.abs(q) <= bound + 1e-12)


def test_tanh_saturation():
    assert abs(np.tanh(10.5) - 1) < 1e-8
    c = build_vqc(AnsatzSpec(1, 1))
    from qcommit.qsim import run_circuit
    a = run_circuit(c, [np.tanh(11.0)], [0.0]).amplitudes
    b = run_circuit(c, [1.0], [0.0]).amplitudes
    np.testing.assert_allclose(a, b, atol=1e-8)


def test_zero_downstream_gives_zero_grads(rng):
    net = _qnet(rng, 2, 2, 4, 3)
    grads = model_grads(net, rng.normal(size=4), np.zeros(3))
    for g in grads.values():
        assert np.all(g == 0)


@pytest.mark.parametrize("n,layers,per_qubit", [(1, 1, False), (3, 2, False), (2, 2, True)])
def test_qnetwork_grads_match_fd(rng, n, layers, per_qubit):
    net = _qnet(rng, n, layers, 4, 3, per_qubit)
    s = rng.normal(size=4)
    w = rng.normal(size=3)
    numeric = param_fd(net, lambda: float(q_values(net, s) @ w))
    assert_grads_match(model_grads(net, s, w), numeric, 1e-4)


def _actor(rng, n=3, layers=2, in_dim=4, dim=2):
    actor = QuantumActor.create(in_dim, [-20.0] * dim, [30.0] * dim, AnsatzSpec(n, layers), rng)
    actor.params["theta"][:] = rng.normal(size=layers)
    actor.params["log_std"][:] = rng.normal(-0.5, 0.3, dim)
    return actor


def test_actor_examples(rng):
    actor = QuantumActor(AnsatzSpec(1, 1, prepare="plus"), {
        "enc_w": np.ones((1, 1)), "enc_b": np.zeros(1), "theta": np.zeros(1),
        "log_std": np.zeros(1)}, [0.0], [10.0])
    # H, RX, RY(0): <Z> stays 0 for any RX angle, so the mean is 0
    action, _ = actor_forward(actor, [0.7])
    assert action[0] == pytest.approx(5.0, abs=1e-12)

    actor = _actor(rng)
    s = rng.normal(size=4)
    det, lp_det = actor_forward(actor, s)
    zero, lp_zero = actor_forward(actor, s, np.zeros(2))
    np.testing.assert_array_equal(det, zero)
    assert lp_det == lp_zero


def test_actor_actions_within_bounds(rng):
    actor = _actor(rng)
    for _ in range(200):
        a, _ = actor_forward(actor, rng.normal(size=4), rng.normal(size=2) * 5)
        assert np.all(a >= actor.action_low) and np.all(a <= actor.action_high)


def test_actor_density_normalizes(rng):
    # Monte-Carlo integral of exp(log_prob) over the 1-D action box
    actor = _actor(rng, dim=1)
    actor.params["log_std"][:] = 0.0
    s = rng.normal(size=4)
    lo, hi = actor.action_low[0], actor.action_high[0]
    draws = rng.uniform(lo, hi, size=(1000, 1))
    integral = (hi - lo) * np.mean(np.exp(actor.log_prob_of(s[None, :], draws)))
    assert integral == pytest.approx(1.0, rel=0.05)


def test_actor_sampled_log_prob_consistent(rng):
    actor = _actor(rng)
    s = rng.normal(size=4)
    eps = rng.normal(size=2)
    a, lp = actor_forward(actor, s, eps)
    assert actor.log_prob_of(s[None, :], a[None, :])[0] == pytest.approx(lp, abs=1e-6)


def test_actor_log_prob_grads_match_fd(rng):
    actor = _actor(rng, n=3, layers=2)
    s = rng.normal(size=4)
    eps = rng.normal(size=2)
    numeric = param_fd(actor, lambda: actor_forward(actor, s, eps)[1])
    assert_grads_match(model_grads(actor, s, (np.zeros(2), 1.0), eps), numeric, 1e-4)


def test_actor_action_grads_match_fd(rng):
    actor = _actor(rng, n=2, layers=1)
    s = rng.normal(size=4)
    eps = rng.normal(size=2)
    w = rng.normal(size=2)
    numeric = param_fd(actor, lambda: float(actor_forward(actor, s, eps)[0] @ w + 0.3 * actor_forward(actor, s, eps)[1]))
    assert_grads_match(model_grads(actor, s, (w, 0.3), eps), numeric, 1e-4)


def test_norm_of_many_encodings():
    rng = np.random.default_rng(5)
    for _ in range(2000):
        n = int(rng.integers(1, 6))
        v = rng.normal(size=1 << n) * rng.uniform(1e-3, 1e3)
        assert abs(amplitude_encode(v).norm_squared() - 1) < 1e-10
        enc = LinearEncoder(rng.normal(size=(7, 3)), rng.normal(size=3))
        assert abs(np.sum(encode_reduce(enc, rng.normal(size=7) * 100) ** 2) - 1) < 1e-10


def test_rx_data_gate_in_vqc():
    c = build_vqc(AnsatzSpec(2, 1))
    assert c.gates[2] == Gate("RZ", 0, angle=np.pi / 2)
    assert c.gates[4] == Gate("RX", 0, param_slot=0, slot_kind="data")
