"""Tests for subnetwork jets and parameter gradients."""

import numpy as np
import pytest
import torch

from tfpide.nets import (
    NumericError,
    SubnetParams,
    forward_jet,
    forward_jet_batch,
    init_params,
    jet_tensors,
    parameter_gradient,
)


def _zero_params(widths):
    arrays = []
    for fan_in, fan_out in zip(widths[:-1], widths[1:]):
        arrays.append(np.zeros((fan_out, fan_in)))
        arrays.append(np.zeros(fan_out))
    return SubnetParams.from_arrays(arrays)


class TestInitParams:
    def test_deterministic_given_seed(self):
        a = init_params(7, [1, 8, 8, 3])
        b = init_params(7, [1, 8, 8, 3])
        for ta, tb in zip(a.to_arrays(), b.to_arrays()):
            assert np.array_equal(ta, tb)

    def test_different_seeds_differ(self):
        a = init_params(7, [1, 8, 3])
        b = init_params(8, [1, 8, 3])
        assert any(not np.array_equal(x, y) for x, y in zip(a.to_arrays(), b.to_arrays()))

    def test_parameter_count_default_depth(self):
        # 1->50 plus two 50->50 hidden transitions plus 50->50 output
        params = init_params(0, [1, 50, 50, 50, 50])
        assert params.parameter_count() == (1 * 50 + 50) + 2 * (50 * 50 + 50) + (50 * 50 + 50)
        assert params.parameter_count() == 7750

    def test_biases_zero_weights_bounded(self):
        params = init_params(3, [1, 50, 20])
        arrays = params.to_arrays()
        assert np.all(arrays[1] == 0.0) and np.all(arrays[3] == 0.0)
        limit0 = np.sqrt(6.0 / 51)
        assert np.max(np.abs(arrays[0])) <= limit0

    def test_invalid_widths_rejected(self):
        with pytest.raises(ValueError):
            init_params(0, [2, 5, 5])
        with pytest.raises(ValueError):
            init_params(0, [1])


class TestForwardJet:
    def test_zero_params_give_zero_jet(self):
        params = _zero_params([1, 5, 5, 4])
        jet = forward_jet(params, 0.37)
        assert np.all(jet.value == 0.0)
        assert np.all(jet.d1 == 0.0)
        assert np.all(jet.d2 == 0.0)

    def test_single_unit_identity_chain(self):
        # one hidden tanh unit with unit weights: at x=0 the jet is (0, 1, 0)
        params = SubnetParams.from_arrays(
            [np.array([[1.0]]), np.zeros(1), np.array([[1.0]]), np.zeros(1)]
        )
        jet = forward_jet(params, 0.0)
        assert jet.value == pytest.approx([0.0], abs=1e-15)
        assert jet.d1 == pytest.approx([1.0], rel=1e-15)
        assert jet.d2 == pytest.approx([0.0], abs=1e-15)

    @pytest.mark.parametrize("seed", [0, 1, 2, 3])
    def test_derivatives_match_finite_differences(self, seed):
        params = init_params(seed, [1, 20, 20, 6])
        rng = np.random.default_rng(seed)
        h = 1e-4
        for x in rng.uniform(-1.5, 1.5, size=25):
            jm, j0, jp = forward_jet_batch(params, [x - h, x, x + h])
            fd1 = (jp.value - jm.value) / (2 * h)
            fd2 = (jp.value - 2 * j0.value + jm.value) / h**2
            # the h^2 truncation and eps/h^2 roundoff of the oracle set the
            # floor, scaled by the size of the derivative vector itself
            scale1 = max(np.max(np.abs(fd1)), 1.0)
            scale2 = max(np.max(np.abs(fd2)), 1.0)
            assert np.max(np.abs(j0.d1 - fd1)) < 1e-6 * scale1
            assert np.max(np.abs(j0.d2 - fd2)) < 1e-5 * scale2

    def test_empty_batch(self):
        assert forward_jet_batch(init_params(0, [1, 4, 2]), []) == []

    def test_batch_matches_pointwise_loop_bitwise(self):
        params = init_params(11, [1, 50, 50, 50, 10])
        xs = np.random.default_rng(5).uniform(-2, 2, size=64)
        batch = forward_jet_batch(params, xs)
        for x, jet in zip(xs, batch):
            single = forward_jet(params, float(x))
            assert np.array_equal(single.value, jet.value)
            assert np.array_equal(single.d1, jet.d1)
            assert np.array_equal(single.d2, jet.d2)

    def test_first_order_jets_match_full(self):
        params = init_params(2, [1, 16, 4])
        x = torch.linspace(-1, 1, 9, dtype=torch.float64)
        v2, d12, d22 = jet_tensors(params, x, order=2)
        v1, d11, d21 = jet_tensors(params, x, order=1)
        assert d21 is None
        assert torch.equal(v1, v2) and torch.equal(d11, d12)


class TestParameterGradient:
    def test_constant_objective_zero_gradient(self):
        params = init_params(0, [1, 6, 3])
        grad = parameter_gradient(lambda: torch.tensor(3.5).sum(), [params])
        assert np.all(grad == 0.0)
        assert grad.size == params.parameter_count()

    def test_gradient_matches_finite_differences(self):
        params = init_params(4, [1, 12, 12, 5])
        x = torch.tensor([0.3], dtype=torch.float64)

        def objective():
            v, _, _ = jet_tensors(params, x)
            return (v[0, 0] ** 2).sum()

        grad = parameter_gradient(objective, [params])
        leaves = params.tensors()
        rng = np.random.default_rng(0)
        flat_sizes = np.cumsum([0] + [t.numel() for t in leaves])
        for _ in range(25):
            leaf_idx = int(rng.integers(len(leaves)))
            leaf = leaves[leaf_idx]
            pos = int(rng.integers(leaf.numel()))
            h = 1e-5
            with torch.no_grad():
                flat = leaf.view(-1)
                old = flat[pos].item()
                flat[pos] = old + h
                fp = objective().item()
                flat[pos] = old - h
                fm = objective().item()
                flat[pos] = old
            fd = (fp - fm) / (2 * h)
            got = grad[flat_sizes[leaf_idx] + pos]
            assert got == pytest.approx(fd, rel=1e-5, abs=1e-10)

    def test_nonfinite_objective_raises(self):
        params = init_params(0, [1, 4, 2])

        def objective():
            v, _, _ = jet_tensors(params, torch.tensor([0.1], dtype=torch.float64))
            return v.sum() / torch.tensor(0.0)

        with pytest.raises(NumericError):
            parameter_gradient(objective, [params])


class TestSubnetParamsValidation:
    def test_shape_chain_enforced(self):
        with pytest.raises(ValueError):
            SubnetParams.from_arrays(
                [np.zeros((4, 1)), np.zeros(4), np.zeros((3, 5)), np.zeros(3)]
            )

    def test_scalar_input_enforced(self):
        with pytest.raises(ValueError):
            SubnetParams.from_arrays([np.zeros((4, 2)), np.zeros(4)])

    def test_nonfinite_rejected(self):
        with pytest.raises(ValueError):
            SubnetParams.from_arrays([np.array([[np.inf]]), np.zeros(1)])

    def test_roundtrip_arrays(self):
        params = init_params(9, [1, 7, 7, 2])
        clone = SubnetParams.from_arrays(params.to_arrays(), seed=params.seed)
        assert clone.widths == params.widths
        for a, b in zip(params.to_arrays(), clone.to_arrays()):
            assert np.array_equal(a, b)
