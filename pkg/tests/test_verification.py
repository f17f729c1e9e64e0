import numpy as np
import pytest

from instantiation_net import verification
from instantiation_net.autodiff import Tensor
from instantiation_net.autodiff.gradcheck import check_gradients, relative_error
from instantiation_net.schemes.report import FoldResult, LeaveOneOutReport, LeaveOneOutSummary


class TestGradcheck:
    def test_relative_error_floor(self):
        assert relative_error(0.0, 1e-9) == pytest.approx(1e-9 / 1e-7)
        assert relative_error(2.0, 1.0) == pytest.approx(0.5)

    def test_square_sum(self, rng):
        x = Tensor(rng.standard_normal(4), requires_grad=True)
        report = check_gradients(lambda: (x * x).sum(), {'x': x}, 4, rng)
        assert report.checked == 4
        assert report.passed(1e-6)

    @pytest.mark.parametrize('name', sorted(verification.OPERATION_CHECKS))
    def test_operation(self, name, rng):
        result = verification.check_operation(name, rng, instances=2)
        assert result.passed, result.detail
        assert result.tolerance == verification.GRADIENT_TOLERANCE

    @pytest.mark.slow
    def test_end_to_end(self, rng):
        result = verification.check_end_to_end(rng, samples=4)
        assert result.passed, result.detail


class TestOracles:
    def test_triangle_laplacian(self):
        assert verification.check_triangle_laplacian().max_error == 0.0

    def test_random_laplacians(self, rng):
        results = verification.check_random_laplacians(rng, meshes=5)
        assert [r.name for r in results] == ['laplacian_row_sums', 'scaled_laplacian_constant']
        assert all(r.passed for r in results)

    def test_spectral_oracle(self, rng):
        result = verification.check_spectral_oracle(rng, meshes=3)
        assert result.passed, result.max_error

    def test_desk_hierarchy(self):
        result = verification.check_hierarchy(2, 3)
        assert result.name == 'hierarchy_ico162_s3'
        assert result.passed, result.detail

    def test_planted_vertex(self, rng):
        assert verification.check_planted_vertex(rng).passed

    def test_heap_and_rescan_agree(self, rng):
        result = verification.check_qem_strategies(rng)
        assert result.passed and result.max_error == 0.0

    def test_schedule(self):
        assert verification.check_schedule().passed

    @pytest.mark.slow
    def test_full_suite(self):
        results = verification.run_oracle_suite(seed=3)
        assert all(r.passed for r in results), [r.name for r in results if not r.passed]
        assert np.isin(['hierarchy_ico162_s3', 'hierarchy_ico642_s4'], [r.name for r in results]).all()


def fake_report(worst_frames, fraction_better=0.9, improvement=0.3, errors=(1.0, 2.0, 3.0)):
    folds = [FoldResult(fold_index=i, frame_index=i, frames_trained=2, final_l1=0.1, distance_error_mm=e,
                        baseline_error_mm=2 * e) for i, e in enumerate(errors)]
    summary = LeaveOneOutSummary(folds=len(folds), completed=len(folds), mean_error_mm=2.0,
                                 mean_baseline_error_mm=4.0, improvement=improvement,
                                 fraction_better=fraction_better, worst_frames=worst_frames)
    return LeaveOneOutReport(folds=folds, summary=summary), []


class TestTrainingChecks:
    @pytest.fixture(autouse=True)
    def no_dataset(self, monkeypatch):
        monkeypatch.setattr(verification, 'desk_subject', lambda frames, seed: ([], None))

    def test_boundary_counts_seeds_with_extremes_on_top(self, monkeypatch):
        def ranked(pairs, model_config, train_config, hierarchy, reproducible):
            return fake_report([15, 5] if train_config.seed % 2 == 0 else [5, 9])

        monkeypatch.setattr(verification, 'leave_one_out', ranked)
        result = verification.run_boundary_experiment(seeds=4, frames=20, required=2)
        assert result.extreme_frames == [5, 15]
        assert [r.extremes_on_top for r in result.runs] == [True, False, True, False]
        assert result.runs[1].worst_frames == [5, 9]
        assert result.check.passed
        assert result.check.detail == 'extremes on top in 2 of 4 seeds'

    def test_boundary_fails_below_required(self, monkeypatch):
        monkeypatch.setattr(verification, 'leave_one_out', lambda *args, **kwargs: fake_report([0, 1]))
        assert not verification.run_boundary_experiment(seeds=3, required=1).check.passed

    def test_leave_one_out_thresholds(self, monkeypatch):
        monkeypatch.setattr(verification, 'leave_one_out', lambda *args, **kwargs: fake_report([2, 1]))
        results = {r.name: r for r in verification.check_leave_one_out()}
        assert sorted(results) == ['loo_determinism', 'loo_fraction_better', 'loo_improvement']
        assert all(r.passed for r in results.values())
        assert results['loo_determinism'].max_error == 0.0

    def test_leave_one_out_below_baseline_threshold(self, monkeypatch):
        monkeypatch.setattr(verification, 'leave_one_out',
                            lambda *args, **kwargs: fake_report([2, 1], fraction_better=0.75, improvement=0.1))
        results = {r.name: r for r in verification.check_leave_one_out(repeat=False)}
        assert not results['loo_fraction_better'].passed
        assert not results['loo_improvement'].passed
        assert 'loo_determinism' not in results

    def test_repeat_that_drifts_is_caught(self, monkeypatch):
        runs = iter([fake_report([2, 1]), fake_report([2, 1], errors=(1.0, 2.0, 3.0 + 1e-9))])
        monkeypatch.setattr(verification, 'leave_one_out', lambda *args, **kwargs: next(runs))
        determinism = verification.check_leave_one_out()[-1]
        assert not determinism.passed
        assert determinism.max_error == pytest.approx(1e-9, rel=1e-3)


@pytest.mark.slow
def test_leave_one_out_beats_baseline_and_repeats():
    results = verification.check_leave_one_out(seed=0)
    assert all(r.passed for r in results), [(r.name, r.max_error, r.detail) for r in results]
