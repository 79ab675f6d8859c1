"""
Test Neural - forward/backward of the recurrent networks, finite-difference
gradient checks on every deployed shape, Adam and checkpoint persistence.
"""

import json

import numpy as np
import pytest

from spectrum.config import Algorithm, DaccMode
from spectrum.exceptions import CheckpointError, ContractViolation, NonFiniteLossError
from spectrum.neural.checkpoint import Checkpoint, NetworkState, load_checkpoint, save_checkpoint
from spectrum.neural.network import HeadKind, NetSpec, Network, check_gradients, gradients, softmax
from spectrum.neural.optimizer import Adam, clip_by_global_norm
from spectrum.rl.agents import network_specs


def squared_error(target: np.ndarray):
    def loss_fn(result):
        diff = result.raw - target
        return 0.5 * float(np.sum(diff * diff)), diff

    return loss_fn


def deployed_specs():
    for algorithm in Algorithm:
        for mode in DaccMode:
            for name, spec in network_specs(algorithm, 4, 3, mode, hidden_dims=(8, 6), recurrent_width=5).items():
                yield pytest.param(spec, id=f"{algorithm.value}-{mode.value}-{name}")


class TestForward:
    def test_zero_params_give_uniform_policy(self):
        net = Network(NetSpec(5, (4,), 3, HeadKind.SOFTMAX, 8))
        out = net.forward(np.zeros(net.size), np.ones((2, 3, 5))).outputs
        assert np.allclose(out, 1.0 / 8.0)

    def test_probabilities_normalized(self, rng):
        net = Network(NetSpec(5, (6,), 4))
        params = net.init_params(rng) * 20.0
        out = net.forward(params, rng.normal(size=(7, 3, 5))).outputs
        assert np.all(out >= 0.0)
        assert np.allclose(out.sum(axis=-1), 1.0)

    def test_softmax_survives_large_logits(self):
        probs = softmax(np.array([[1000.0, 0.0, -1000.0]]))
        assert np.all(np.isfinite(probs))
        assert probs[0, 0] == pytest.approx(1.0)

    def test_deterministic(self, rng):
        net = Network(NetSpec(4, (6,), 3, HeadKind.QVECTOR))
        params = net.init_params(rng)
        x = rng.normal(size=(5, 2, 4))
        assert np.array_equal(net.forward(params, x).raw, net.forward(params, x).raw)

    def test_feed_forward_has_no_memory(self, rng):
        net = Network(NetSpec(4, (6,), 0, HeadKind.SCALAR))
        params = net.init_params(rng)
        x = rng.normal(size=(6, 2, 4))
        full = net.forward(params, x).values
        for t in range(6):
            assert np.allclose(net.forward(params, x[t: t + 1]).values[0], full[t])

    def test_chained_steps_match_sequence(self, rng):
        net = Network(NetSpec(4, (6,), 5, HeadKind.SOFTMAX))
        params = net.init_params(rng)
        x = rng.normal(size=(8, 3, 4))
        full = net.forward(params, x)
        hidden = net.initial_hidden(3)
        for t in range(8):
            step = net.forward(params, x[t: t + 1], hidden)
            np.testing.assert_allclose(step.raw[0], full.raw[t], rtol=1e-13, atol=1e-15)
            hidden = step.hidden
        np.testing.assert_allclose(hidden, full.hidden, rtol=1e-13, atol=1e-15)

    def test_hidden_state_matters(self, rng):
        net = Network(NetSpec(4, (6,), 5, HeadKind.SCALAR))
        params = net.init_params(rng)
        x = rng.normal(size=(1, 2, 4))
        warm = np.full((2, 5), 0.5)
        assert not np.allclose(net.forward(params, x).values, net.forward(params, x, warm).values)

    def test_shape_violations(self, rng):
        net = Network(NetSpec(4, (6,), 5))
        params = net.init_params(rng)
        with pytest.raises(ContractViolation):
            net.forward(params, np.zeros((2, 3, 5)))
        with pytest.raises(ContractViolation):
            net.forward(params, np.zeros((2, 4)))
        with pytest.raises(ContractViolation):
            net.forward(params, np.zeros((2, 3, 4)), hidden=np.zeros((3, 4)))
        with pytest.raises(ContractViolation):
            net.forward(params[:-1], np.zeros((2, 3, 4)))

    def test_invalid_spec(self):
        with pytest.raises(ContractViolation):
            NetSpec(0)
        with pytest.raises(ContractViolation):
            NetSpec(3, (4, 0))
        with pytest.raises(ContractViolation):
            NetSpec(3, recurrent_width=-1)


class TestGradients:
    @pytest.mark.parametrize("spec", deployed_specs())
    def test_finite_differences(self, spec):
        rng = np.random.default_rng(7)
        net = Network(spec)
        params = net.init_params(rng)
        x = rng.normal(size=(6, 3, spec.input_dim))
        target = rng.normal(size=(6, 3, spec.output_dim))
        check = check_gradients(net, params, x, squared_error(target), rng, n_coords=200)
        assert check.pass_fraction >= 0.99, np.column_stack([check.analytic, check.numeric])[~check.passed]

    def test_finite_differences_from_warm_hidden(self):
        rng = np.random.default_rng(8)
        net = Network(NetSpec(5, (7,), 4, HeadKind.QVECTOR))
        params = net.init_params(rng)
        x = rng.normal(size=(5, 2, 5))
        hidden = rng.uniform(-0.5, 0.5, size=(2, 4))
        check = check_gradients(net, params, x, squared_error(rng.normal(size=(5, 2, 8))), rng, hidden=hidden)
        assert check.pass_fraction >= 0.99

    def test_l2_term(self, rng):
        net = Network(NetSpec(3, (4,), 0, HeadKind.SCALAR))
        params = net.init_params(rng)

        def no_loss(result):
            return 0.0, np.zeros_like(result.raw)

        loss, grad = gradients(net, params, np.zeros((1, 1, 3)), no_loss, l2=0.1)
        assert loss == pytest.approx(0.05 * float(params @ params))
        assert np.allclose(grad, 0.1 * params)

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_non_finite_loss(self, rng):
        net = Network(NetSpec(3, (4,), 2, HeadKind.SCALAR))
        params = net.init_params(rng)

        def nan_loss(result):
            return float("nan"), np.zeros_like(result.raw)

        with pytest.raises(NonFiniteLossError) as info:
            gradients(net, params, np.zeros((2, 1, 3)), nan_loss)
        assert info.value.diagnostics["network"] == net.name

    def test_backward_needs_cache(self, rng):
        net = Network(NetSpec(3, (4,), 2))
        with pytest.raises(ContractViolation):
            net.backward(net.init_params(rng), None, np.zeros((1, 1, 8)))


class TestAdam:
    def test_first_step_moves_by_learning_rate(self):
        opt = Adam(3)
        new = opt.step(np.zeros(3), np.array([2.0, -0.5, 1e-3]), 0.01)
        assert np.allclose(new, [-0.01, 0.01, -0.01], rtol=1e-4)

    def test_decreases_a_quadratic(self):
        rng = np.random.default_rng(3)
        x = rng.uniform(2.0, 3.0, size=10) * rng.choice([-1.0, 1.0], size=10)
        opt = Adam(10)
        losses = []
        for _ in range(100):
            losses.append(0.5 * float(x @ x))
            x = opt.step(x, x, 0.01)
        assert np.all(np.diff(losses) < 0.0)

    def test_state_round_trip(self, rng):
        opt = Adam(4)
        params = rng.normal(size=4)
        for _ in range(3):
            params = opt.step(params, rng.normal(size=4), 0.1)
        clone = Adam.from_dict(json.loads(json.dumps(opt.to_dict())))
        grad = rng.normal(size=4)
        assert np.array_equal(opt.step(params, grad, 0.1), clone.step(params, grad, 0.1))

    def test_shape_mismatch(self):
        with pytest.raises(ContractViolation):
            Adam(3).step(np.zeros(4), np.zeros(4), 0.1)

    def test_global_norm_clipping(self):
        clipped, norm = clip_by_global_norm(np.array([3.0, 4.0]), 1.0)
        assert norm == pytest.approx(5.0)
        assert np.linalg.norm(clipped) == pytest.approx(1.0)
        same, _ = clip_by_global_norm(np.array([3.0, 4.0]), None)
        assert np.array_equal(same, [3.0, 4.0])


class TestCheckpoint:
    @pytest.fixture
    def checkpoint(self, rng):
        spec = NetSpec(5, (4,), 3, HeadKind.SOFTMAX)
        net = Network(spec)
        opt = Adam(net.size)
        params = opt.step(net.init_params(rng), rng.normal(size=net.size), 1e-3)
        return Checkpoint(
            networks={"agent0.pi_con": NetworkState(spec, params, opt)},
            config_hash="abc123",
            iteration=7,
            metadata={"note": "test"},
        )

    def test_round_trip_is_exact(self, checkpoint, tmp_path):
        path = save_checkpoint(tmp_path / "ckpt.json", checkpoint)
        loaded = load_checkpoint(path, expected_hash="abc123")
        state = loaded.networks["agent0.pi_con"]
        original = checkpoint.networks["agent0.pi_con"]
        assert state.spec == original.spec
        assert np.array_equal(state.params, original.params)
        assert np.array_equal(state.optimizer.v, original.optimizer.v)
        assert loaded.iteration == 7 and loaded.metadata == {"note": "test"}

    def test_hash_mismatch(self, checkpoint, tmp_path):
        path = save_checkpoint(tmp_path / "ckpt.json", checkpoint)
        with pytest.raises(CheckpointError):
            load_checkpoint(path, expected_hash="other")

    def test_unreadable_and_wrong_schema(self, tmp_path):
        with pytest.raises(CheckpointError):
            load_checkpoint(tmp_path / "missing.json")
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({"schema": "report-v1"}))
        with pytest.raises(CheckpointError):
            load_checkpoint(bad)

    def test_malformed_network(self, checkpoint, tmp_path):
        path = save_checkpoint(tmp_path / "ckpt.json", checkpoint)
        data = json.loads(path.read_text())
        data["networks"]["agent0.pi_con"]["spec"]["input_dim"] = 0
        path.write_text(json.dumps(data))
        with pytest.raises(CheckpointError):
            load_checkpoint(path)
