import numpy as np
import pytest

from instantiation_net.autodiff import (
    NormMode,
    Padding,
    PoolMode,
    Tensor,
    absolute,
    backward,
    batch_norm,
    conv2d,
    fully_connected,
    matmul,
    pool2d,
    relu,
    weighted_sum,
)
from instantiation_net.autodiff.checkpoint import encode_checkpoint, load_checkpoint
from instantiation_net.autodiff.conv import BatchNormStats, output_size
from instantiation_net.autodiff.gradcheck import check_gradients
from instantiation_net.exceptions import DimensionError, GradientError, NumericalError, ParseError
from instantiation_net.schemes.config import ModelConfig


def leaf(data):
    return Tensor(data, requires_grad=True)


def projected(fn, shape, rng):
    """Scalar loss sum(fn() * w) for a fixed random w."""
    weights = rng.standard_normal(shape)
    return lambda: weighted_sum(fn(), weights)


class TestMatmul:
    def test_identity(self):
        out = matmul(Tensor(np.eye(2)), Tensor([[1.0], [2.0]]))
        np.testing.assert_array_equal(out.numpy(), [[1.0], [2.0]])

    def test_hand_arithmetic(self):
        out = matmul(Tensor([[1.0, 2.0], [3.0, 4.0]]), Tensor([[1.0], [1.0]]))
        np.testing.assert_array_equal(out.numpy(), [[3.0], [7.0]])

    def test_gradient_of_sum(self, rng):
        a = leaf(rng.standard_normal((5, 4)))
        b = Tensor(rng.standard_normal((4, 3)))
        report = check_gradients(lambda: matmul(a, b).sum(), {'a': a}, points=10, rng=rng)
        assert report.passed(1e-6)

    def test_inner_dimension_mismatch(self):
        with pytest.raises(DimensionError, match=r'\(2, 3\)'):
            matmul(Tensor(np.ones((2, 3))), Tensor(np.ones((2, 3))))


class TestConv2d:
    def test_same_padding_halves_full_scale_input(self):
        x = Tensor(np.zeros((1, 192, 256, 1)))
        kernel = Tensor(np.zeros((1, 7, 7, 2)))
        assert conv2d(x, kernel, stride=2, padding=Padding.SAME).shape == (1, 96, 128, 2)

    def test_ones_filter_is_identity(self, rng):
        x = Tensor(rng.standard_normal((1, 5, 4, 1)))
        out = conv2d(x, Tensor(np.ones((1, 1, 1, 1))), stride=1)
        np.testing.assert_array_equal(out.numpy(), x.numpy())

    @pytest.mark.parametrize('size,kernel,stride,expected', [(3, 2, 1, 2), (8, 2, 2, 4), (7, 3, 2, 3)])
    def test_valid_output_size(self, size, kernel, stride, expected):
        assert output_size(size, kernel, stride, Padding.VALID)[0] == expected

    def test_same_padding_split(self):
        assert output_size(5, 4, 1, Padding.SAME) == (5, 1, 2)

    def test_valid_gradient(self, rng):
        x = leaf(rng.standard_normal((1, 3, 3, 1)))
        k = leaf(rng.standard_normal((1, 2, 2, 1)))
        loss = projected(lambda: conv2d(x, k, stride=1, padding=Padding.VALID), (1, 2, 2, 1), rng)
        assert check_gradients(loss, {'x': x, 'k': k}, points=9, rng=rng).passed(1e-6)

    def test_strided_same_gradient(self, rng):
        x = leaf(rng.standard_normal((2, 7, 6, 2)))
        k = leaf(rng.standard_normal((2, 3, 3, 3)))
        loss = projected(lambda: conv2d(x, k, stride=2), (2, 4, 3, 3), rng)
        assert check_gradients(loss, {'x': x, 'k': k}, points=10, rng=rng).passed(1e-6)

    def test_channel_mismatch(self):
        with pytest.raises(DimensionError):
            conv2d(Tensor(np.zeros((1, 4, 4, 2))), Tensor(np.zeros((3, 3, 3, 1))))


class TestPool2d:
    @pytest.mark.parametrize('mode', [PoolMode.MAX, PoolMode.AVERAGE])
    def test_constant_field(self, mode):
        out = pool2d(Tensor(np.full((1, 4, 4, 1), 2.5)), 2, mode)
        np.testing.assert_array_equal(out.numpy(), np.full((1, 2, 2, 1), 2.5))

    def test_hand_arithmetic(self):
        x = Tensor(np.array([[1.0, 2.0], [3.0, 4.0]]).reshape(1, 2, 2, 1))
        assert pool2d(x, 2, PoolMode.MAX).numpy().item() == 4.0
        assert pool2d(x, 2, PoolMode.AVERAGE).numpy().item() == 2.5

    def test_average_preserves_mean(self, rng):
        x = rng.standard_normal((2, 6, 8, 3))
        out = pool2d(Tensor(x), 2, PoolMode.AVERAGE).numpy()
        np.testing.assert_allclose(out.mean(axis=(1, 2)), x.mean(axis=(1, 2)), rtol=0, atol=1e-12)


    def test_average_gradient(self, rng):
        x = leaf(rng.standard_normal((1, 6, 6, 2)))
        loss = projected(lambda: pool2d(x, 3, PoolMode.AVERAGE), (1, 2, 2, 2), rng)
        assert check_gradients(loss, {'x': x}, points=10, rng=rng).passed(1e-6)

    def test_max_gradient_routes_to_first_maximum(self):
        x = leaf(np.array([[5.0, 5.0], [1.0, 2.0]]).reshape(1, 2, 2, 1))
        backward(pool2d(x, 2, PoolMode.MAX).sum())
        np.testing.assert_array_equal(x.grad.reshape(2, 2), [[1.0, 0.0], [0.0, 0.0]])

    def test_max_same_padding_three_by_three(self):
        x = Tensor(np.arange(16.0).reshape(1, 4, 4, 1))
        out = pool2d(x, 3, PoolMode.MAX, stride=2, padding=Padding.SAME)
        np.testing.assert_array_equal(out.numpy()[0, :, :, 0], [[10.0, 11.0], [14.0, 15.0]])

    def test_kernel_larger_than_input(self):
        with pytest.raises(DimensionError):
            pool2d(Tensor(np.zeros((1, 2, 2, 1))), 3)


class TestBatchNorm:
    def test_constant_channel_gives_beta(self):
        x = Tensor(np.full((2, 3, 3, 2), 4.0))
        out = batch_norm(x, Tensor([2.0, 3.0]), Tensor([0.5, -1.0]))
        np.testing.assert_allclose(out.numpy()[..., 0], 0.5)
        np.testing.assert_allclose(out.numpy()[..., 1], -1.0)

    def test_already_normalised_input(self, rng):
        raw = rng.standard_normal((4, 5, 5, 2))
        raw = (raw - raw.mean(axis=(0, 1, 2))) / raw.std(axis=(0, 1, 2))
        out = batch_norm(Tensor(raw), Tensor(np.ones(2)), Tensor(np.zeros(2)), eps=1e-12)
        np.testing.assert_allclose(out.numpy(), raw, atol=1e-9)

    def test_train_mode_standardises_each_channel(self, rng):
        x = 3.0 + 5.0 * rng.standard_normal((2, 6, 6, 3))
        out = batch_norm(Tensor(x), Tensor(np.ones(3)), Tensor(np.zeros(3))).numpy()
        np.testing.assert_allclose(out.mean(axis=(0, 1, 2)), 0.0, atol=1e-12)
        np.testing.assert_allclose(out.var(axis=(0, 1, 2)), 1.0, rtol=1e-5)


    def test_train_gradient(self, rng):
        x = leaf(rng.standard_normal((1, 4, 4, 2)))
        gamma = leaf(rng.uniform(0.5, 1.5, 2))
        beta = leaf(rng.standard_normal(2))
        loss = projected(lambda: batch_norm(x, gamma, beta), (1, 4, 4, 2), rng)
        assert check_gradients(loss, {'x': x, 'gamma': gamma, 'beta': beta}, points=8, rng=rng).passed(1e-5)

    def test_running_statistics_update(self):
        stats = BatchNormStats.fresh(1)
        batch_norm(Tensor(np.full((1, 2, 2, 1), 10.0)), Tensor([1.0]), Tensor([0.0]), stats)
        assert stats.mean[0] == pytest.approx(1.0)
        assert stats.var[0] == pytest.approx(0.9)

    def test_infer_uses_running_statistics(self):
        stats = BatchNormStats(mean=np.array([1.0]), var=np.array([4.0]))
        out = batch_norm(Tensor(np.full((1, 1, 1, 1), 5.0)), Tensor([1.0]), Tensor([0.0]), stats,
                         mode=NormMode.INFER, eps=1e-12)
        assert out.item() == pytest.approx(2.0)

    def test_infer_without_statistics(self):
        with pytest.raises(DimensionError):
            batch_norm(Tensor(np.ones((1, 1, 1, 1))), Tensor([1.0]), Tensor([0.0]), mode=NormMode.INFER)

    def test_eps_must_be_positive(self):
        with pytest.raises(DimensionError):
            batch_norm(Tensor(np.ones((1, 1, 1, 1))), Tensor([1.0]), Tensor([0.0]), eps=0.0)


class TestRelu:
    def test_definition(self):
        np.testing.assert_array_equal(relu(Tensor([-1.0, 0.0, 2.0])).numpy(), [0.0, 0.0, 2.0])

    def test_all_negative(self):
        assert not relu(Tensor(-np.ones(4))).numpy().any()

    def test_subgradient(self):
        x = leaf([3.0, -3.0, 0.0])
        backward(relu(x).sum())
        np.testing.assert_array_equal(x.grad, [1.0, 0.0, 0.0])


class TestFullyConnected:
    def test_identity_weight(self, rng):
        x = rng.standard_normal((1, 4))
        out = fully_connected(Tensor(x), Tensor(np.eye(4)), Tensor(np.zeros(4)))
        np.testing.assert_array_equal(out.numpy(), x)

    def test_flattens_encoder_volume(self):
        out = fully_connected(Tensor(np.zeros((1, 6, 8, 1024))), Tensor(np.zeros((49152, 8))), Tensor(np.zeros(8)))
        assert out.shape == (1, 8)

    def test_gradient(self, rng):
        x = leaf(rng.standard_normal((1, 10)))
        w = leaf(rng.standard_normal((10, 4)))
        b = leaf(rng.standard_normal(4))
        loss = projected(lambda: fully_connected(x, w, b), (1, 4), rng)
        assert check_gradients(loss, {'x': x, 'w': w, 'b': b}, points=10, rng=rng).passed(1e-6)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionError):
            fully_connected(Tensor(np.zeros((1, 5))), Tensor(np.zeros((4, 2))), Tensor(np.zeros(2)))


class TestBackward:
    def test_sum_gives_ones(self):
        x = leaf(np.zeros((2, 3)))
        backward(x.sum())
        np.testing.assert_array_equal(x.grad, np.ones((2, 3)))

    def test_square(self):
        x = leaf([1.0, 2.0])
        backward((x ** 2).sum())
        np.testing.assert_array_equal(x.grad, [2.0, 4.0])

    def test_shared_input_accumulates(self):
        x = leaf([3.0])
        backward((x * x + x).sum())
        np.testing.assert_array_equal(x.grad, [7.0])

    def test_composite_chain(self, rng):
        x = Tensor(rng.standard_normal((2, 4, 4, 1)))
        k = leaf(rng.standard_normal((1, 3, 3, 2)))
        gamma = leaf(rng.uniform(0.5, 1.5, 2))
        beta = leaf(rng.standard_normal(2))
        w = leaf(rng.standard_normal((32, 3)))
        b = leaf(rng.standard_normal(3))
        target = Tensor(rng.standard_normal((2, 3)))

        def loss():
            h = relu(batch_norm(conv2d(x, k), gamma, beta))
            y = fully_connected(h, w, b)
            return absolute(y - target).mean()

        tensors = {'k': k, 'gamma': gamma, 'beta': beta, 'w': w, 'b': b}
        assert check_gradients(loss, tensors, points=3, rng=rng).passed(1e-4)

    def test_repeated_backward_is_bitwise_identical(self, rng):
        x = rng.standard_normal((2, 5, 5, 1))
        k = leaf(rng.standard_normal((1, 3, 3, 2)))
        gamma = leaf(rng.uniform(0.5, 1.5, 2))
        beta = leaf(rng.standard_normal(2))
        w = leaf(rng.standard_normal((50, 3)))
        grads = []
        for _ in range(2):
            for t in (k, gamma, beta, w):
                t.grad = None
            h = relu(batch_norm(conv2d(Tensor(x), k), gamma, beta))
            backward(absolute(fully_connected(h, w, Tensor(np.zeros(3)))).mean())
            grads.append([t.grad.copy() for t in (k, gamma, beta, w)])
        for first, second in zip(*grads):
            assert first.tobytes() == second.tobytes()


    def test_non_scalar_loss(self):
        with pytest.raises(GradientError, match='scalar'):
            backward(leaf([1.0, 2.0]) * 2.0)

    def test_detached_loss(self):
        with pytest.raises(GradientError, match='detached'):
            backward(Tensor([1.0]).sum())

    def test_replay_twice(self):
        loss = (leaf([1.0]) * 2.0).sum()
        backward(loss)
        with pytest.raises(GradientError, match='already'):
            backward(loss)

    def test_non_finite_result(self):
        with pytest.raises(NumericalError):
            Tensor([1e308]) * 1e308


class TestCheckpoint:
    def test_round_trip_keeps_kind_and_values(self, tmp_path, rng):
        weight = rng.standard_normal((3, 2))
        blob = encode_checkpoint({'w': ('trainable', weight), 'm': ('buffer', np.ones(4))},
                                 model=ModelConfig(), template_hash='abc', level_counts=[162, 54, 18, 6, 4])
        path = tmp_path / 'model.ckpt'
        path.write_bytes(blob)
        manifest, arrays = load_checkpoint(path)
        np.testing.assert_array_equal(arrays['w'], weight)
        assert [e.kind for e in manifest.entries] == ['trainable', 'buffer']
        assert manifest.reshape_order == 'vertex-major'

    def test_truncated_payload(self, tmp_path):
        blob = encode_checkpoint({'w': ('trainable', np.ones(8))}, model=ModelConfig(),
                                 template_hash='abc', level_counts=[4])
        path = tmp_path / 'model.ckpt'
        path.write_bytes(blob[:-8])
        with pytest.raises(ParseError, match='needs 64 bytes, found 56'):
            load_checkpoint(path)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / 'model.ckpt'
        path.write_bytes(b'NOTACKPT' + bytes(12))
        with pytest.raises(ParseError, match='bad magic'):
            load_checkpoint(path)
