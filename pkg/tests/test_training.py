import numpy as np
import pytest

from instantiation_net.autodiff import Tensor, backward, matmul
from instantiation_net.exceptions import (
    DimensionError,
    DivergenceError,
    GradientError,
    LeakageError,
    MeshError,
    ParseError,
)
from instantiation_net.schemes.config import TrainConfig
from instantiation_net.schemes.report import FoldStatus
from instantiation_net.schemes.shape import ShapeCycleSpec
from instantiation_net.training import (
    DatasetPair,
    SGDState,
    distance_error,
    l1_loss,
    learning_rate,
    leave_one_out,
    load_dataset,
    make_dataset,
    mean_shape_baseline,
    per_vertex_error,
    sgd_step,
    train_fold,
    write_dataset,
)
from instantiation_net.training import trainer
from instantiation_net.verification import desk_model_config


@pytest.fixture(scope='module')
def three_frames():
    return make_dataset(ShapeCycleSpec(frames=3), seed=0)


class TestLosses:
    def test_l1_of_identical_meshes(self, rng):
        truth = rng.standard_normal((10, 3))
        assert l1_loss(Tensor(truth), truth).item() == 0.0

    def test_l1_uniform_offset(self, rng):
        truth = rng.standard_normal((10, 3))
        assert l1_loss(Tensor(truth + 0.25), truth).item() == pytest.approx(0.25)

    def test_l1_x_offset_is_one_third(self, rng):
        truth = rng.standard_normal((10, 3))
        assert l1_loss(Tensor(truth + [1.0, 0.0, 0.0]), truth).item() == pytest.approx(1 / 3)

    def test_distance_three_four_five(self, rng):
        truth = rng.standard_normal((7, 3))
        assert distance_error(truth + [3.0, 4.0, 0.0], truth) == pytest.approx(5.0)

    def test_distance_matches_loop(self, rng):
        pred, truth = rng.standard_normal((5, 3)), rng.standard_normal((5, 3))
        total = 0.0
        for p, t in zip(pred, truth):
            total += np.sqrt(sum((a - b) ** 2 for a, b in zip(p, t)))
        assert distance_error(pred, truth) == pytest.approx(total / 5, abs=1e-12)

    def test_shape_mismatch(self):
        with pytest.raises(DimensionError):
            per_vertex_error(np.zeros((4, 3)), np.zeros((5, 3)))


class TestSchedule:
    @pytest.mark.parametrize('iteration,expected', [(0, 5e-3), (99, 5e-3), (100, 4.85e-3), (200, 4.7045e-3)])
    def test_step_decay(self, iteration, expected):
        assert learning_rate(TrainConfig(), iteration, n_frames=20) == pytest.approx(expected, abs=1e-12)


class TestSgd:
    def test_plain_step(self):
        p = Tensor([0.0], requires_grad=True)
        p.grad = np.array([1.0])
        sgd_step([('p', p)], SGDState(), TrainConfig(lr0=0.1, momentum=0.0), n_frames=1)
        assert p.data[0] == pytest.approx(-0.1)

    def test_momentum_displacement(self):
        p = Tensor([0.0], requires_grad=True)
        state = SGDState()
        config = TrainConfig(lr0=0.01, momentum=0.9)
        for _ in range(2):
            p.grad = np.array([2.0])
            sgd_step([('p', p)], state, config, n_frames=10)
        assert p.data[0] == pytest.approx(-0.01 * 2.0 * 2.9)
        assert state.iteration == 2

    def test_small_step_lowers_the_loss(self, rng):
        x = Tensor(rng.standard_normal((8, 4)))
        truth = rng.standard_normal((8, 3))
        w = Tensor(rng.standard_normal((4, 3)), requires_grad=True)
        before = l1_loss(matmul(x, w), truth)
        backward(before)
        sgd_step([('w', w)], SGDState(), TrainConfig(lr0=1e-4, momentum=0.9), n_frames=1)
        assert l1_loss(matmul(x, w), truth).item() < before.item()


    def test_missing_gradient(self):
        with pytest.raises(GradientError, match='weights'):
            sgd_step([('weights', Tensor([0.0], requires_grad=True))], SGDState(), TrainConfig(), n_frames=1)


class TestBaseline:
    def test_single_mesh(self, ico162):
        np.testing.assert_array_equal(mean_shape_baseline([ico162]), ico162.vertices)

    def test_midpoint(self, ico162):
        d = np.array([1.0, -2.0, 0.5])
        mean = mean_shape_baseline([ico162.vertices + d, ico162.vertices - d])
        np.testing.assert_allclose(mean, ico162.vertices, atol=1e-12)

    def test_matches_loop(self, rng):
        meshes = [rng.standard_normal((6, 3)) for _ in range(4)]
        expected = np.zeros((6, 3))
        for m in meshes:
            expected += m
        np.testing.assert_allclose(mean_shape_baseline(meshes), expected / 4, atol=1e-12)

    def test_empty(self):
        with pytest.raises(DimensionError):
            mean_shape_baseline([])


class TestDataset:
    def test_frames_share_connectivity(self, three_frames):
        assert [p.frame_index for p in three_frames] == [0, 1, 2]
        assert all(p.mesh.same_connectivity(three_frames[0].mesh) for p in three_frames)
        assert three_frames[0].image.shape == (64, 64, 1)

    def test_write_and_load(self, three_frames, tmp_path):
        write_dataset(tmp_path, ShapeCycleSpec(frames=3), 0, three_frames)
        pairs, manifest = load_dataset(tmp_path)
        assert manifest.frames == 3
        for loaded, original in zip(pairs, three_frames):
            np.testing.assert_array_equal(loaded.mesh.vertices, original.mesh.vertices)
            np.testing.assert_allclose(loaded.image, original.image, atol=0.5 / 65535)

    def test_tampered_file(self, three_frames, tmp_path):
        write_dataset(tmp_path, ShapeCycleSpec(frames=3), 0, three_frames)
        (tmp_path / 'frame_01.pgm').write_bytes(b'P2\n1 1\n255\n0\n')
        with pytest.raises(ParseError, match='checksum'):
            load_dataset(tmp_path)

    def test_missing_manifest(self, tmp_path):
        with pytest.raises(ParseError, match='manifest'):
            load_dataset(tmp_path)

    def test_connectivity_mismatch(self, three_frames, tmp_path):
        pairs = list(three_frames)
        flipped = pairs[1].mesh.faces[:, [0, 2, 1]]
        pairs[1] = type(pairs[1])(pairs[1].image, type(pairs[1].mesh).create(pairs[1].mesh.vertices, flipped), 1)
        write_dataset(tmp_path, ShapeCycleSpec(frames=3), 0, pairs)
        with pytest.raises(MeshError, match='frame_01'):
            load_dataset(tmp_path)


class TestLeaveOneOut:
    def config(self, **overrides):
        return TrainConfig(**{'max_epochs': 1, 'feature_channels': 16, 'stride': 3, **overrides})

    def test_three_frames_give_three_folds(self, three_frames, desk_hierarchy):
        report, outcomes = leave_one_out(three_frames, desk_model_config(), self.config(), desk_hierarchy,
                                         reproducible=True)
        assert [r.fold_index for r in report.folds] == [0, 1, 2]
        assert all(r.frames_trained == 2 for r in report.folds)
        assert all(r.wall_seconds == 0.0 for r in report.folds)
        assert all(o.prediction.same_connectivity(three_frames[0].mesh) for o in outcomes)

    def test_baseline_is_mean_of_training_meshes(self, three_frames, desk_hierarchy):
        report, _ = leave_one_out(three_frames, desk_model_config(), self.config(), desk_hierarchy, folds=[1])
        baseline = mean_shape_baseline([three_frames[0].mesh, three_frames[2].mesh])
        assert report.folds[0].baseline_error_mm == distance_error(baseline, three_frames[1].mesh.vertices)

    def test_repeatable(self, three_frames, desk_hierarchy):
        first, _ = leave_one_out(three_frames, desk_model_config(), self.config(seed=7), desk_hierarchy,
                                 reproducible=True)
        second, _ = leave_one_out(three_frames, desk_model_config(), self.config(seed=7), desk_hierarchy,
                                  reproducible=True)
        assert [r.distance_error_mm for r in first.folds] == [r.distance_error_mm for r in second.folds]
        assert first.model_dump() == second.model_dump()

    def test_duplicate_frame_under_new_index_is_leakage(self, three_frames, desk_hierarchy):
        duplicate = DatasetPair(three_frames[1].image.copy(), three_frames[1].mesh, 3)
        dataset = [*three_frames, duplicate]
        with pytest.raises(LeakageError, match=r'frame 1 of fold 1 .* frame\(s\) \[3\]'):
            leave_one_out(dataset, desk_model_config(), self.config(), desk_hierarchy, folds=[1])
        report, _ = leave_one_out(dataset, desk_model_config(), self.config(), desk_hierarchy, folds=[0])
        assert report.folds[0].frames_trained == 3

    def test_too_few_frames(self, three_frames, desk_hierarchy):
        with pytest.raises(DimensionError, match='at least 3'):
            leave_one_out(three_frames[:2], desk_model_config(), self.config(), desk_hierarchy)

    def test_diverged_fold_is_reported(self, three_frames, desk_hierarchy, monkeypatch):
        def explode(*args, **kwargs):
            raise DivergenceError('loss became NaN')

        monkeypatch.setattr(trainer, 'train_fold', explode)
        report, outcomes = leave_one_out(three_frames, desk_model_config(), self.config(), desk_hierarchy)
        assert all(r.status is FoldStatus.DIVERGED for r in report.folds)
        assert all(o.params is None for o in outcomes)
        assert report.summary.completed == 0

    def test_summary(self):
        results = [
            trainer.FoldResult(fold_index=i, frame_index=i, frames_trained=3, final_l1=0.1,
                               distance_error_mm=e, baseline_error_mm=b)
            for i, (e, b) in enumerate([(1.0, 2.0), (3.0, 2.0), (2.0, 4.0), (0.5, 1.0)])
        ]
        summary = trainer.summarize(results)
        assert summary.mean_error_mm == pytest.approx(1.625)
        assert summary.mean_baseline_error_mm == pytest.approx(2.25)
        assert summary.fraction_better == pytest.approx(0.75)
        assert summary.worst_frames == [1, 2]


@pytest.mark.slow
def test_single_pair_overfits(desk_hierarchy):
    # one pair drawn from a 20-frame subject; the decay period counts the subject's frames
    subject = make_dataset(ShapeCycleSpec(frames=20), seed=0)
    config = TrainConfig(max_epochs=500, feature_channels=16, stride=3, log_every=100)
    fit = train_fold(subject[:1], desk_model_config(), config, desk_hierarchy, n_frames=len(subject))
    assert fit.history[-1] < 0.01 * fit.history[0]
