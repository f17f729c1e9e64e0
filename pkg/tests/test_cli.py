import csv
import dataclasses
import json

import pytest

from instantiation_net.__main__ import pin_threads
from instantiation_net.app import build_parser, main
from instantiation_net.fileio.mesh_io import read_mesh
from instantiation_net.sampling.hierarchy import load_hierarchy, save_hierarchy

DESK_CONFIG = 'encoder_preset = desk\ndecoder_preset = small\nmax_epochs = 1\n'


@pytest.fixture(scope='module')
def dataset(tmp_path_factory):
    directory = tmp_path_factory.mktemp('dataset')
    assert main(['generate-data', '--output', str(directory), '--frames', '3', '--seed', '4']) == 0
    return directory


@pytest.fixture(scope='module')
def trained(dataset, tmp_path_factory):
    root = tmp_path_factory.mktemp('run')
    config = root / 'desk.cfg'
    config.write_text(DESK_CONFIG)
    out = root / 'out'
    status = main(['train', '--config', str(config), '--dataset', str(dataset), '--output', str(out),
                   '--seed', '7', '--reproducible'])
    assert status == 0
    return config, out


def read_rows(path):
    with open(path, newline='') as f:
        return list(csv.DictReader(f))


class TestParser:
    @pytest.mark.parametrize('command', ['generate-data', 'train', 'eval', 'infer', 'gradcheck', 'oracle-check',
                                         'loo-check', 'boundary-check'])
    def test_subcommands_are_registered(self, command):
        with pytest.raises(SystemExit) as excinfo:
            build_parser().parse_args([command, '--help'])
        assert excinfo.value.code == 0

    def test_unknown_flag_is_a_usage_error(self):
        with pytest.raises(SystemExit) as excinfo:
            main(['gradcheck', '--no-such-flag'])
        assert excinfo.value.code == 2

    def test_train_requires_seed(self, tmp_path):
        with pytest.raises(SystemExit) as excinfo:
            main(['train', '--dataset', str(tmp_path), '--output', str(tmp_path)])
        assert excinfo.value.code == 2

    def test_thread_pinning(self):
        env = {'INET_THREADS': '3'}
        pin_threads(['train'], env)
        assert env['OMP_NUM_THREADS'] == '3'
        pin_threads(['train', '--reproducible'], env)
        assert env['OPENBLAS_NUM_THREADS'] == '1'


class TestGenerateData:
    def test_files_and_manifest(self, dataset):
        manifest = json.loads((dataset / 'manifest.json').read_text())
        assert manifest['frames'] == 3
        assert sorted(manifest['checksums']) == [f'frame_{t:02d}.{ext}' for t in range(3) for ext in ('off', 'pgm')]

    def test_existing_output_is_kept(self, dataset):
        stamp = (dataset / 'frame_00.off').stat().st_mtime_ns
        assert main(['generate-data', '--output', str(dataset), '--frames', '3', '--seed', '9']) == 0
        assert (dataset / 'frame_00.off').stat().st_mtime_ns == stamp

    def test_invalid_parameters(self, tmp_path):
        assert main(['generate-data', '--output', str(tmp_path), '--frames', '2']) == 2


class TestTrainEval:
    def test_fold_outputs(self, trained):
        _, out = trained
        rows = read_rows(out / 'folds.csv')
        assert list(rows[0]) == ['fold_index', 'frames_trained', 'final_l1', 'distance_error_mm', 'wall_seconds']
        assert [r['fold_index'] for r in rows] == ['0', '1', '2']
        assert all(r['wall_seconds'] == '0' for r in rows)
        for i in range(3):
            assert (out / f'fold_{i:02d}.ckpt').exists()
            assert read_mesh(out / f'fold_{i:02d}_pred.obj').vertex_count == 162
        summary = json.loads((out / 'summary.json').read_text())
        assert summary['summary']['folds'] == 3

    def test_same_seed_same_folds(self, dataset, trained, tmp_path):
        config, out = trained
        again = tmp_path / 'again'
        assert main(['train', '--config', str(config), '--dataset', str(dataset), '--output', str(again),
                     '--seed', '7', '--reproducible']) == 0
        assert (again / 'folds.csv').read_bytes() == (out / 'folds.csv').read_bytes()

    def test_eval(self, dataset, trained):
        config, out = trained
        assert main(['eval', '--config', str(config), '--dataset', str(dataset), '--output', str(out),
                     '--force']) == 0
        rows = read_rows(out / 'eval.csv')
        assert len(rows) == 3
        assert float(rows[0]['baseline_error_mm']) > 0
        assert len(read_rows(out / 'fold_00_vertex_error.csv')) == 162

    def test_bad_config_value(self, dataset, tmp_path):
        config = tmp_path / 'bad.cfg'
        config.write_text('momentum = 2\n')
        assert main(['train', '--config', str(config), '--dataset', str(dataset), '--output', str(tmp_path),
                     '--seed', '1']) == 2


class TestInfer:
    def test_predicts_template_mesh(self, dataset, trained, tmp_path):
        _, out = trained
        sidecar = next(out.glob('hierarchy_*.npz'))
        target = tmp_path / 'pred.off'
        assert main(['infer', '--checkpoint', str(out / 'fold_00.ckpt'), '--hierarchy', str(sidecar),
                     '--image', str(dataset / 'frame_00.pgm'), '--output', str(target)]) == 0
        assert read_mesh(target).same_connectivity(read_mesh(dataset / 'frame_00.off'))

    def test_mismatched_hierarchy(self, dataset, trained, tmp_path):
        _, out = trained
        hierarchy = load_hierarchy(next(out.glob('hierarchy_*.npz')))
        foreign = tmp_path / 'foreign.npz'
        save_hierarchy(foreign, dataclasses.replace(hierarchy, template_hash='0' * 64))
        assert main(['infer', '--checkpoint', str(out / 'fold_00.ckpt'), '--hierarchy', str(foreign),
                     '--image', str(dataset / 'frame_00.pgm'), '--output', str(tmp_path / 'pred.off')]) == 1


class TestChecks:
    def test_gradcheck_operations(self, capsys):
        assert main(['gradcheck', '--instances', '2', '--skip-end-to-end']) == 0
        results = json.loads(capsys.readouterr().out)
        assert {r['name'] for r in results} >= {'conv2d', 'cheb_conv', 'l1_loss'}
        assert all(r['passed'] for r in results)

    @pytest.mark.slow
    def test_oracle_check(self, capsys):
        assert main(['oracle-check']) == 0
        assert all(r['passed'] for r in json.loads(capsys.readouterr().out))

    def test_boundary_check_prints_ranking(self, capsys):
        assert main(['boundary-check', '--seeds', '1', '--frames', '4', '--max-epochs', '1', '--required', '0']) == 0
        result = json.loads(capsys.readouterr().out)
        assert result['extreme_frames'] == [1, 3]
        assert len(result['runs']) == 1
        assert len(result['runs'][0]['worst_frames']) == 2
        assert result['check']['name'] == 'boundary_effect'

    @pytest.mark.slow
    def test_boundary_check(self, capsys):
        assert main(['boundary-check']) == 0
        assert json.loads(capsys.readouterr().out)['check']['passed']
