import itertools

import numpy as np
import pytest

from muxfuse.errors import DimensionError, InductivityError
from muxfuse.fusion import FusionOp, VoteConfig, fuse_concat_linear, fuse_lookup, fuse_reduce, vote
from muxfuse.ndauto import Adam, Tape, Tensor, grad_check
from muxfuse.ndauto import ops
from muxfuse.objective import mse_loss

Z1 = Tensor([[1.0, -2.0]])
Z2 = Tensor([[3.0, 0.0]])


class TestReduce:

    @pytest.mark.parametrize("kind, expected", [
        ("min", [[1.0, -2.0]]),
        ("max", [[3.0, 0.0]]),
        ("sum", [[4.0, -2.0]]),
        ("mean", [[2.0, -1.0]]),
        ("concat", [[1.0, -2.0, 3.0, 0.0]]),
    ])
    def test_hand_values(self, kind, expected):
        np.testing.assert_array_equal(fuse_reduce(kind, [Z1, Z2]).values, expected)

    def test_identical_inputs_mean(self):
        z = Tensor(np.random.default_rng(0).normal(size=(3, 2)))
        np.testing.assert_allclose(fuse_reduce("mean", [z, z, z]).values, z.values)

    @pytest.mark.parametrize("kind", ["mean", "min", "max", "sum", "concat"])
    def test_single_layer_is_identity(self, kind):
        np.testing.assert_array_equal(fuse_reduce(kind, [Z1]).values, Z1.values)

    def test_shape_mismatch(self):
        with pytest.raises(DimensionError):
            fuse_reduce("mean", [Z1, Tensor(np.ones((2, 2)))])

    def test_unknown_kind(self):
        with pytest.raises(ValueError, match="Unknown reduce kind"):
            fuse_reduce("median", [Z1])


class TestAttention:

    @pytest.fixture
    def op(self):
        return FusionOp("att", num_layers=2, dim=3, rng=np.random.default_rng(0), attention_dim=4)

    def test_identical_layers_get_uniform_weights(self, op):
        z = Tensor(np.random.default_rng(1).normal(size=(5, 3)))
        fused = op([z, z])
        np.testing.assert_allclose(op.last_alpha, [0.5, 0.5])
        np.testing.assert_allclose(fused.values, z.values)

    def test_zero_context_is_mean(self, op):
        rng = np.random.default_rng(2)
        zs = [Tensor(rng.normal(size=(5, 3))), Tensor(rng.normal(size=(5, 3)))]
        op.q_att.values = np.zeros_like(op.q_att.values)
        np.testing.assert_allclose(op(zs).values, fuse_reduce("mean", zs).values)

    def test_weights_form_a_distribution(self, op):
        rng = np.random.default_rng(3)
        op([Tensor(rng.normal(size=(5, 3))), Tensor(rng.normal(size=(5, 3)))])
        assert op.last_alpha.sum() == pytest.approx(1.0)
        assert (op.last_alpha > 0).all()
        assert set(op.alpha_dict(["a", "b"])) == {"a", "b"}

    def test_output_inside_convex_hull(self):
        rng = np.random.default_rng(8)
        op = FusionOp("att", num_layers=3, dim=3, rng=rng, attention_dim=4)
        zs = [Tensor(rng.normal(scale=2.0, size=(6, 3))) for _ in range(3)]
        fused = op(zs).values
        stacked = np.stack([z.values for z in zs])
        np.testing.assert_allclose(fused, np.tensordot(op.last_alpha, stacked, axes=1), atol=1e-12)
        assert (fused >= stacked.min(axis=0) - 1e-12).all()
        assert (fused <= stacked.max(axis=0) + 1e-12).all()

    def test_gradient_reaches_parameters(self, op):
        rng = np.random.default_rng(4)
        zs = [Tensor(rng.normal(size=(5, 3))), Tensor(rng.normal(size=(5, 3)))]
        target = Tensor(rng.normal(size=(5, 3)))
        report = grad_check(lambda: mse_loss(op(zs), target), op.parameters())
        assert report.passed
        with Tape() as tape:
            tape.backward(mse_loss(op(zs), target))
        assert np.abs(op.w_att.grad).sum() > 0
        assert np.abs(op.q_att.grad).sum() > 0


class TestConcatLinear:

    @pytest.fixture
    def layers(self):
        rng = np.random.default_rng(5)
        return [Tensor(rng.normal(size=(4, 2))) for _ in range(3)]

    def test_block_identity_selects_first_layer(self, layers):
        op = FusionOp("cl", num_layers=3, dim=2, rng=np.random.default_rng(0))
        op.w_cl.values = np.vstack([np.eye(2), np.zeros((2, 2)), np.zeros((2, 2))])
        np.testing.assert_allclose(op(layers).values, layers[0].values)

    def test_stacked_identities_average(self, layers):
        op = FusionOp("cl", num_layers=3, dim=2, rng=np.random.default_rng(0))
        op.w_cl.values = np.vstack([np.eye(2)] * 3) / 3
        np.testing.assert_allclose(op(layers).values, fuse_reduce("mean", layers).values)

    def test_matches_explicit_product(self, layers):
        op = FusionOp("cl", num_layers=3, dim=2, rng=np.random.default_rng(1))
        expected = np.hstack([z.values for z in layers]) @ op.w_cl.values
        np.testing.assert_allclose(op(layers).values, expected)

    def test_layer_count_mismatch(self, layers):
        op = FusionOp("cl", num_layers=2, dim=2, rng=np.random.default_rng(0))
        with pytest.raises(DimensionError):
            fuse_concat_linear(op, layers)


class TestLookup:

    def test_untrained_table_is_initialization(self):
        op = FusionOp("lookup", num_layers=2, dim=3, rng=np.random.default_rng(0), num_nodes=4)
        initial = op.table.values.copy()
        np.testing.assert_array_equal(op([]).values, initial)
        assert np.abs(initial).max() <= 0.05

    def test_converges_to_fixed_target(self):
        op = FusionOp("lookup", num_layers=1, dim=2, rng=np.random.default_rng(0), num_nodes=4)
        target = Tensor(np.random.default_rng(1).normal(scale=0.5, size=(4, 2)))
        opt = Adam(op.parameters(), lr=0.05)
        for _ in range(500):
            with Tape() as tape:
                loss = mse_loss(fuse_lookup(op), target)
                tape.backward(loss)
            opt.step()
        assert mse_loss(fuse_lookup(op), target).item() < 1e-4

    def test_unseen_node(self):
        op = FusionOp("lookup", num_layers=1, dim=2, rng=np.random.default_rng(0), num_nodes=4)
        np.testing.assert_array_equal(fuse_lookup(op, [3]).values, op.table.values[[3]])
        with pytest.raises(InductivityError, match="not inductive"):
            fuse_lookup(op, [4])


class TestVote:

    @pytest.mark.parametrize("mode", ["soft", "hard"])
    def test_layer_order_does_not_matter(self, mode):
        rng = np.random.default_rng(9)
        probs = [rng.dirichlet(np.ones(4), size=10) for _ in range(3)]
        expected = vote(VoteConfig(mode), probs)
        for order in itertools.permutations(range(3)):
            np.testing.assert_array_equal(vote(VoteConfig(mode), [probs[k] for k in order]), expected)

    def test_single_classifier(self):
        probs = np.array([[0.2, 0.8], [0.7, 0.3]])
        for mode in ("soft", "hard"):
            np.testing.assert_array_equal(vote(VoteConfig(mode), [probs]), [1, 0])

    def test_soft_and_hard_diverge(self):
        probs = [np.array([[0.6, 0.4]]), np.array([[0.1, 0.9]])]
        assert vote(VoteConfig("soft"), probs).tolist() == [1]
        assert vote(VoteConfig("hard"), probs).tolist() == [0]

    def test_majority(self):
        probs = [np.array([[0.9, 0.1]]), np.array([[0.2, 0.8]]), np.array([[0.4, 0.6]])]
        assert vote(VoteConfig("hard"), probs).tolist() == [1]

    def test_rows_must_be_distributions(self):
        with pytest.raises(ValueError, match="sum to 1"):
            vote(VoteConfig("soft"), [np.array([[0.5, 0.6]])])

    def test_shape_mismatch(self):
        with pytest.raises(DimensionError):
            vote(VoteConfig("soft"), [np.ones((2, 2)) / 2, np.ones((3, 2)) / 2])


def test_fused_gradient_flows_into_layers():
    z = Tensor(np.ones((2, 2)), requires_grad=True)
    with Tape() as tape:
        tape.backward(ops.sum_all(fuse_reduce("mean", [z, z])))
    np.testing.assert_allclose(z.grad, 1.0)
