import numpy as np
import pytest

from muxfuse.errors import DimensionError, NumericError, OptimizerError, TapeError
from muxfuse.graph import normalize_adjacency
from muxfuse.ndauto import Adam, SparseMatrix, Tape, Tensor, backward, forward_op, grad_check, no_grad
from muxfuse.ndauto import ops


def test_spmm_identity_returns_input():
    m = Tensor(np.arange(6.0).reshape(3, 2))
    out = ops.spmm(SparseMatrix.identity(3), m)
    np.testing.assert_array_equal(out.values, m.values)


def test_spmm_matches_dense_product():
    rng = np.random.default_rng(11)
    for _ in range(50):
        rows, inner, cols = rng.integers(1, 9, size=3)
        dense = rng.normal(size=(rows, inner)) * (rng.random((rows, inner)) < 0.3)
        h = rng.normal(size=(inner, cols))
        out = ops.spmm(SparseMatrix.from_dense(dense), Tensor(h))
        np.testing.assert_allclose(out.values, dense @ h, atol=1e-12)


def test_sigmoid_of_zero_is_half():
    np.testing.assert_array_equal(ops.sigmoid(Tensor(np.zeros((2, 3)))).values, 0.5)


def test_colwise_standardize_uses_population_std():
    out = ops.colwise_standardize(Tensor([[1.0], [2.0], [3.0]]), eps=0.0)
    np.testing.assert_allclose(out.values[:, 0], [-1.2247449, 0.0, 1.2247449], atol=1e-6)


def test_forward_op_dispatches_by_kind():
    a = Tensor([[1.0, 2.0]])
    b = Tensor([[3.0], [4.0]])
    assert forward_op("matmul", [a, b]).item() == 11.0
    with pytest.raises(ValueError, match="Unknown op kind"):
        forward_op("conv2d", [a])


def test_shape_mismatch_raises_dimension_error():
    with pytest.raises(DimensionError):
        ops.matmul(Tensor(np.ones((2, 3))), Tensor(np.ones((2, 3))))
    with pytest.raises(DimensionError):
        ops.add(Tensor(np.ones((2, 3))), Tensor(np.ones((3, 2))))


def test_non_finite_values_are_rejected():
    with pytest.raises(NumericError):
        Tensor([[np.nan]])
    with pytest.raises(NumericError, match="log"):
        ops.log(Tensor([[0.0]]))


def test_square_sum_gradient():
    w = Tensor([[1.0, 2.0]], requires_grad=True)
    with Tape():
        loss = ops.sum_all(ops.hadamard(w, w))
        backward(loss)
    np.testing.assert_array_equal(w.grad, [[2.0, 4.0]])


def test_mean_sigmoid_gradient_at_zero():
    x = Tensor(np.zeros((1, 4)), requires_grad=True)
    with Tape() as tape:
        tape.backward(ops.mean_all(ops.sigmoid(x)))
    np.testing.assert_allclose(x.grad, 0.25 / 4)


def test_unused_parameter_gets_zero_gradient():
    used = Tensor([[1.0]], requires_grad=True)
    unused = Tensor([[5.0]], requires_grad=True)
    with Tape() as tape:
        ops.add(unused, Tensor([[0.0]]))
        tape.backward(ops.scale(used, 3.0))
    assert used.grad[0, 0] == 3.0
    assert unused.grad[0, 0] == 0.0


def test_tape_errors():
    x = Tensor(np.ones((2, 2)), requires_grad=True)
    with Tape() as tape:
        y = ops.scale(x, 2.0)
        with pytest.raises(TapeError, match="1x1"):
            tape.backward(y)
        loss = ops.sum_all(y)
        tape.backward(loss)
        with pytest.raises(TapeError, match="consumed"):
            tape.backward(loss)
    with pytest.raises(TapeError, match="No active tape"):
        backward(loss)


def test_no_grad_records_nothing():
    x = Tensor(np.ones((2, 2)), requires_grad=True)
    with Tape() as tape:
        with no_grad():
            ops.sum_all(x)
    assert len(tape) == 0


def test_broadcast_gradients_are_reduced():
    x = Tensor(np.arange(6.0).reshape(3, 2), requires_grad=True)
    bias = Tensor([[1.0, -1.0]], requires_grad=True)
    column = Tensor([[1.0], [2.0], [3.0]], requires_grad=True)
    with Tape() as tape:
        tape.backward(ops.sum_all(ops.hadamard(ops.add(x, bias), column)))
    np.testing.assert_array_equal(bias.grad, [[6.0, 6.0]])
    np.testing.assert_array_equal(column.grad, [[1.0], [5.0], [9.0]])


def test_slice_rows_scatter_adds_repeated_rows():
    x = Tensor(np.ones((3, 2)), requires_grad=True)
    with Tape() as tape:
        tape.backward(ops.sum_all(ops.slice_rows(x, [0, 0, 2])))
    np.testing.assert_array_equal(x.grad, [[2.0, 2.0], [0.0, 0.0], [1.0, 1.0]])


def test_clamp_blocks_gradient_outside_range():
    x = Tensor([[-2.0, 0.5, 3.0]], requires_grad=True)
    with Tape() as tape:
        tape.backward(ops.sum_all(ops.clamp(x, 0.0, 1.0)))
    np.testing.assert_array_equal(x.grad, [[0.0, 1.0, 0.0]])


class TestGradCheck:

    @pytest.fixture
    def rng(self):
        return np.random.default_rng(7)

    def test_random_five_parameter_model(self, rng):
        w = Tensor(rng.normal(size=(1, 5)), requires_grad=True)
        x = Tensor(rng.normal(size=(4, 5)))

        def closure():
            return ops.mean_all(ops.tanh(ops.matmul(x, ops.transpose(w))))

        assert grad_check(closure, [w]).passed

    def test_linear_regression_mse(self, rng):
        x = Tensor(rng.normal(size=(4, 2)))
        y = Tensor(rng.normal(size=(4, 1)))
        w = Tensor(rng.normal(size=(2, 1)), requires_grad=True)

        def closure():
            residual = ops.sub(ops.matmul(x, w), y)
            return ops.mean_all(ops.hadamard(residual, residual))

        closed_form = 2.0 * x.values.T @ (x.values @ w.values - y.values) / 4
        assert grad_check(closure, [w], tolerance=1e-5, analytic=[closed_form]).passed

    def test_one_layer_gcn(self, rng):
        edges = np.array([[0, 1], [1, 0], [1, 2], [2, 1], [3, 4], [4, 3]])
        adj = normalize_adjacency(edges, 5)
        h = Tensor(rng.normal(size=(5, 3)))
        w = Tensor(rng.normal(size=(3, 2)), requires_grad=True)
        slope = Tensor(np.full((1, 2), 0.25), requires_grad=True)
        target = Tensor(rng.normal(size=(5, 2)))

        def closure():
            out = ops.prelu(ops.spmm(adj, ops.matmul(h, w)), slope)
            diff = ops.sub(out, target)
            return ops.mean_all(ops.hadamard(diff, diff))

        assert grad_check(closure, [w, slope]).passed

    def test_sparse_values_gradient(self, rng):
        pattern = SparseMatrix.from_dense(np.array([[1.0, 1.0, 0.0], [0.0, 1.0, 1.0], [1.0, 0.0, 1.0]]))
        values = Tensor(rng.uniform(0.5, 1.5, size=(pattern.nnz, 1)), requires_grad=True)
        h = Tensor(rng.normal(size=(3, 2)), requires_grad=True)

        def closure():
            return ops.sum_all(ops.tanh(ops.spmm(pattern.with_values(values), h)))

        assert grad_check(closure, [values, h]).passed

    @pytest.mark.parametrize("kind", ["softplus", "log_softmax_rows", "softmax_rows", "colwise_standardize"])
    def test_unary_kinds(self, rng, kind):
        x = Tensor(rng.normal(size=(4, 3)), requires_grad=True)
        weights = Tensor(rng.normal(size=(4, 3)))

        def closure():
            return ops.sum_all(ops.hadamard(forward_op(kind, [x]), weights))

        assert grad_check(closure, [x]).passed

    def test_power_pick_and_slice_cols(self, rng):
        x = Tensor(rng.uniform(0.5, 2.0, size=(3, 4)), requires_grad=True)

        def closure():
            picked = ops.pick(ops.power(x, -0.5), [0, 3, 1])
            return ops.add(ops.sum_all(picked), ops.sum_all(ops.slice_cols(x, [1, 1, 2])))

        assert grad_check(closure, [x]).passed

    def test_corrupted_gradient_fails(self, rng):
        w = Tensor(rng.normal(size=(2, 2)), requires_grad=True)

        def closure():
            return ops.sum_all(ops.hadamard(w, w))

        assert not grad_check(closure, [w], analytic=[4.0 * w.values]).passed


class TestAdam:

    def test_zero_gradient_leaves_params_unchanged(self):
        p = Tensor([[1.0, -2.0]], requires_grad=True)
        opt = Adam([p], lr=0.1)
        p.grad = np.zeros(p.shape)
        opt.step()
        np.testing.assert_array_equal(p.values, [[1.0, -2.0]])

    def test_first_step_moves_by_learning_rate(self):
        p = Tensor([[0.0]], requires_grad=True)
        opt = Adam([p], lr=0.01)
        p.grad = np.ones((1, 1))
        opt.step()
        assert p.values[0, 0] == pytest.approx(-0.01, rel=1e-6)
        assert p.grad is None

    def test_quadratic_loss_decreases(self):
        x = Tensor([[3.0]], requires_grad=True)
        opt = Adam([x], lr=0.1)
        losses = []
        for _ in range(3):
            with Tape() as tape:
                loss = ops.sum_all(ops.hadamard(x, x))
                tape.backward(loss)
            losses.append(loss.item())
            opt.step()
        assert losses[0] > losses[1] > losses[2]

    def test_missing_gradient_raises(self):
        opt = Adam([Tensor([[1.0]], requires_grad=True, name="w")])
        with pytest.raises(OptimizerError, match="w"):
            opt.step()
