import numpy as np
import pytest

from mambatab import tensor as T
from mambatab.tensor import NumericsError, Tensor

from helpers import check_gradients, finite_difference_grad, relative_error


def rand(rng, *shape):
    return Tensor(rng.uniform(-1.0, 1.0, size=shape), requires_grad=True)


class TestMatmul:
    def test_identity(self):
        out = T.matmul(Tensor(np.eye(2)), Tensor([[3.0], [4.0]]))
        assert np.array_equal(out.data, [[3.0], [4.0]])

    def test_hand_scalar(self):
        out = T.matmul(Tensor([[1.0, 2.0]]), Tensor([[3.0], [4.0]]))
        assert np.allclose(out.data, [[11.0]])

    def test_zero_annihilates(self):
        rng = np.random.default_rng(0)
        b = Tensor(rng.normal(size=(3, 4)))
        out = T.matmul(T.zeros((2, 3)), b)
        assert np.array_equal(out.data, np.zeros((2, 4)))

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            T.matmul(Tensor(np.ones((2, 3))), Tensor(np.ones((2, 3))))

    def test_backward_rule(self):
        a = Tensor([[1.0, 2.0], [3.0, 4.0]], requires_grad=True)
        b = Tensor([[5.0, 6.0], [7.0, 8.0]], requires_grad=True)
        T.matmul(a, b).sum().backward()
        g = np.ones((2, 2))
        assert np.allclose(a.grad, g @ b.data.T)
        assert np.allclose(b.grad, a.data.T @ g)


class TestSilu:
    def test_zero(self):
        assert T.silu(Tensor(0.0)).item() == 0.0

    def test_large_positive(self):
        assert T.silu(Tensor(10.0)).item() == pytest.approx(9.999546, abs=1e-6)

    def test_large_negative(self):
        assert T.silu(Tensor(-10.0)).item() == pytest.approx(-0.000454, abs=1e-6)


class TestCausalConv1d:
    def test_single_timestep_sees_only_itself(self):
        rng = np.random.default_rng(1)
        u = Tensor(rng.normal(size=(2, 1, 3)))
        kernel = Tensor(rng.normal(size=(3, 4)))
        bias = Tensor(rng.normal(size=3))
        out = T.causal_conv1d(u, kernel, bias)
        assert np.allclose(out.data, kernel.data[:, -1] * u.data + bias.data)

    def test_delta_kernel_is_identity(self):
        rng = np.random.default_rng(2)
        u = Tensor(rng.normal(size=(2, 5, 3)))
        kernel = Tensor(np.tile([0.0, 0.0, 0.0, 1.0], (3, 1)))
        out = T.causal_conv1d(u, kernel, T.zeros(3))
        assert np.allclose(out.data, u.data)

    def test_hand_unrolled(self):
        u = Tensor(np.array([1.0, 2.0, 3.0]).reshape(1, 3, 1))
        kernel = Tensor([[1.0, 1.0]])
        out = T.causal_conv1d(u, kernel, T.zeros(1))
        assert np.allclose(out.data.ravel(), [1.0, 3.0, 5.0])

    def test_causality(self):
        # Perturbing position t never changes outputs before t.
        rng = np.random.default_rng(3)
        u = rng.normal(size=(1, 6, 2))
        kernel = Tensor(rng.normal(size=(2, 4)))
        bias = Tensor(rng.normal(size=2))
        base = T.causal_conv1d(Tensor(u), kernel, bias).data
        for t in range(6):
            bumped = u.copy()
            bumped[0, t, :] += 1.0
            out = T.causal_conv1d(Tensor(bumped), kernel, bias).data
            assert np.array_equal(out[:, :t, :], base[:, :t, :])


class TestLayerNorm:
    def test_constant_input_maps_to_zero(self):
        x = Tensor(np.full((2, 4), 3.7))
        out = T.layer_norm(x, Tensor(np.ones(4)), T.zeros(4))
        assert np.allclose(out.data, 0.0)

    def test_two_point_vector(self):
        out = T.layer_norm(Tensor([[1.0, 3.0]]), Tensor(np.ones(2)), T.zeros(2))
        assert np.allclose(out.data, [[-1.0, 1.0]], atol=1e-4)

    def test_zero_gamma_collapses_to_beta(self):
        rng = np.random.default_rng(4)
        x = Tensor(rng.normal(size=(3, 5)))
        beta = Tensor(rng.normal(size=5))
        out = T.layer_norm(x, T.zeros(5), beta)
        assert np.allclose(out.data, np.broadcast_to(beta.data, (3, 5)))

    def test_output_statistics(self):
        rng = np.random.default_rng(5)
        x = Tensor(rng.normal(size=(8, 16)))
        out = T.layer_norm(x, Tensor(np.ones(16)), T.zeros(16)).data
        assert np.max(np.abs(out.mean(axis=-1))) < 1e-9
        assert np.allclose(out.var(axis=-1), 1.0, atol=1e-4)


class TestBackward:
    def test_sum_gives_ones(self):
        w = Tensor(np.arange(6.0).reshape(2, 3), requires_grad=True)
        w.sum().backward()
        assert np.array_equal(w.grad, np.ones((2, 3)))

    def test_quadratic(self):
        w = Tensor(5.0, requires_grad=True)
        ((w - 3.0) * (w - 3.0)).backward()
        assert w.grad == pytest.approx(4.0)

    def test_detached_subgraph_grad_stays_zero(self):
        w1 = Tensor(2.0, requires_grad=True)
        w2 = Tensor(3.0, requires_grad=True)
        (w1 * w1).backward()
        assert w2.grad is None

    def test_non_scalar_loss_rejected(self):
        w = Tensor(np.ones(3), requires_grad=True)
        with pytest.raises(ValueError):
            w.backward()

    def test_double_backward_accumulates(self):
        w = Tensor(4.0, requires_grad=True)
        (w * w).backward()
        (w * w).backward()
        assert w.grad == pytest.approx(16.0)

    def test_shared_node_counted_once(self):
        w = Tensor(3.0, requires_grad=True)
        y = w * 2.0
        (y + y * y).backward()
        assert w.grad == pytest.approx(2.0 + 8.0 * w.data)


class TestNumerics:
    def test_overflow_aborts(self):
        with pytest.raises(NumericsError):
            T.texp(Tensor(1e4))

    def test_nan_input_rejected(self):
        with pytest.raises(NumericsError):
            Tensor([1.0, np.nan])

    def test_determinism(self):
        def run():
            rng = np.random.default_rng(77)
            a = rand(rng, 4, 3)
            b = rand(rng, 3, 2)
            out = T.silu(T.matmul(a, b)).sum()
            out.backward()
            return out.item(), a.grad.copy(), b.grad.copy()

        v1, ga1, gb1 = run()
        v2, ga2, gb2 = run()
        assert v1 == v2
        assert np.array_equal(ga1, ga2) and np.array_equal(gb1, gb2)


N_GRADCHECK_TRIALS = 20


class TestGradients:
    """Central finite differences vs the analytic rules, op by op."""

    def test_elementwise_unary(self):
        ops = [T.texp, T.sigmoid, T.softplus, T.silu]
        for seed in range(N_GRADCHECK_TRIALS):
            rng = np.random.default_rng(seed)
            for op in ops:
                x = rand(rng, 3, 4)
                check_gradients(lambda op=op, x=x: op(x).sum(), [x])

    def test_relu_away_from_kink(self):
        for seed in range(N_GRADCHECK_TRIALS):
            rng = np.random.default_rng(100 + seed)
            data = rng.uniform(-1.0, 1.0, size=(3, 4))
            data[np.abs(data) < 1e-2] += 0.05
            x = Tensor(data, requires_grad=True)
            check_gradients(lambda x=x: T.relu(x).sum(), [x])

    def test_binary_ops_with_broadcasting(self):
        for seed in range(N_GRADCHECK_TRIALS):
            rng = np.random.default_rng(200 + seed)
            a = rand(rng, 2, 3, 4)
            b = rand(rng, 3, 1)
            denom = Tensor(rng.uniform(0.5, 1.5, size=(3, 1)), requires_grad=True)
            check_gradients(lambda: (a + b).sum(), [a, b])
            check_gradients(lambda: (a * b).sum(), [a, b])
            check_gradients(lambda: (a - b).sum(), [a, b])
            check_gradients(lambda: (a / denom).sum(), [a, denom])

    def test_matmul(self):
        for seed in range(N_GRADCHECK_TRIALS):
            rng = np.random.default_rng(300 + seed)
            a = rand(rng, 3, 4)
            b = rand(rng, 4, 2)
            w = Tensor(rng.uniform(-1, 1, size=(3, 2)))
            check_gradients(lambda: (T.matmul(a, b) * w).sum(), [a, b])

    def test_reductions_and_shape_ops(self):
        for seed in range(N_GRADCHECK_TRIALS):
            rng = np.random.default_rng(400 + seed)
            x = rand(rng, 2, 3, 4)
            check_gradients(lambda: x.sum(axis=1).mean(), [x])
            check_gradients(lambda: x.mean(axis=-1, keepdims=True).sum(), [x])
            check_gradients(lambda: x.reshape(6, 4).sum(axis=0).mean(), [x])
            check_gradients(lambda: x[:, 1:, :2].sum(), [x])
            y = rand(rng, 2, 2, 4)
            check_gradients(lambda: T.concat([x, y], axis=1).mean(), [x, y])

    def test_layer_norm(self):
        for seed in range(N_GRADCHECK_TRIALS):
            rng = np.random.default_rng(500 + seed)
            x = rand(rng, 3, 6)
            gamma = Tensor(rng.uniform(0.5, 1.5, size=6), requires_grad=True)
            beta = rand(rng, 6)
            check_gradients(lambda: T.layer_norm(x, gamma, beta).sum(), [x, gamma, beta])

    def test_causal_conv1d(self):
        for seed in range(N_GRADCHECK_TRIALS):
            rng = np.random.default_rng(600 + seed)
            u = rand(rng, 2, 5, 3)
            kernel = rand(rng, 3, 4)
            bias = rand(rng, 3)
            check_gradients(lambda: T.causal_conv1d(u, kernel, bias).sum(), [u, kernel, bias])

    def test_finite_difference_helper_self_check(self):
        w = Tensor(np.array([2.0, -1.0]), requires_grad=True)
        num = finite_difference_grad(lambda: float((w.data ** 2).sum()), w)
        assert relative_error(num, 2.0 * w.data) < 1e-8
