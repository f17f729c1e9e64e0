import io
import logging
import sys
from pathlib import Path

import pytest

from instantiation_net.exceptions import InvalidConfigError
from instantiation_net.fileio.config_file import (
    OUTPUT_DIR_ENV,
    build_experiment_config,
    load_experiment_config,
    parse_key_values,
    section_of,
)
from instantiation_net.logging_setup import configure_logging
from instantiation_net.schemes.config import BatchNormEvalMode

BASE = {'dataset_dir': 'data', 'output_dir': 'runs'}


class TestKeyValues:
    def test_comments_and_blank_lines(self):
        values = parse_key_values('# experiment\n\nlr0 = 0.01  # faster\nblock_lengths = 2,2,2,2\n')
        assert values == {'lr0': '0.01', 'block_lengths': '2,2,2,2'}

    def test_duplicate_key(self):
        with pytest.raises(InvalidConfigError, match='exp.cfg:2'):
            parse_key_values('seed = 1\nseed = 2\n', 'exp.cfg')

    def test_missing_separator(self):
        with pytest.raises(InvalidConfigError, match="expected 'key = value'"):
            parse_key_values('seed 1\n')

    @pytest.mark.parametrize('key,section', [
        ('lr0', 'train'), ('growth_rate', 'encoder'), ('levels', 'hierarchy'), ('output_dir', None),
    ])
    def test_sections(self, key, section):
        assert section_of(key) == section

    def test_unknown_key(self):
        with pytest.raises(InvalidConfigError, match='learning_rate'):
            section_of('learning_rate')


class TestExperimentConfig:
    def test_default_schedule(self):
        config = build_experiment_config(BASE, env={})
        assert (config.train.lr0, config.train.decay, config.train.momentum) == (5e-3, 0.97, 0.9)
        assert config.train.max_epochs == 1200
        assert config.bn_eval_mode is BatchNormEvalMode.RUNNING

    def test_presets_expand_before_overrides(self):
        config = build_experiment_config(
            {**BASE, 'encoder_preset': 'desk', 'decoder_preset': 'small', 'growth_rate': '12'}, env={})
        assert config.encoder.growth_rate == 12
        assert config.encoder.input_height == 64
        assert (config.train.feature_channels, config.train.stride) == (16, 3)

    def test_full_preset(self):
        config = build_experiment_config({**BASE, 'encoder_preset': 'full', 'decoder_preset': 'large'}, env={})
        assert config.encoder.block_lengths == (6, 12, 24, 16)
        assert (config.encoder.input_height, config.encoder.input_width) == (192, 256)
        assert config.build_model_config().feature_channels == 64

    def test_unknown_preset(self):
        with pytest.raises(InvalidConfigError, match='encoder_preset'):
            build_experiment_config({**BASE, 'encoder_preset': 'huge'}, env={})

    def test_out_of_range_value(self):
        with pytest.raises(InvalidConfigError, match='momentum') as excinfo:
            build_experiment_config({**BASE, 'momentum': '1.5'}, env={})
        assert excinfo.value.exit_code == 2

    def test_output_dir_from_environment(self):
        config = build_experiment_config(BASE, env={OUTPUT_DIR_ENV: '/tmp/elsewhere'})
        assert config.output_dir == Path('/tmp/elsewhere')


class TestLoad:
    def test_file_then_overrides(self, tmp_path):
        path = tmp_path / 'exp.cfg'
        path.write_text('dataset_dir = data\noutput_dir = runs\nseed = 3\nmax_epochs = 10\n')
        config = load_experiment_config(path, {'seed': 7, 'workers': None}, env={})
        assert config.train.seed == 7
        assert config.train.max_epochs == 10
        assert config.train.workers == 1

    def test_missing_file(self, tmp_path):
        with pytest.raises(InvalidConfigError, match='cannot read config'):
            load_experiment_config(tmp_path / 'absent.cfg', env={})

    def test_no_file_needs_directories(self):
        with pytest.raises(InvalidConfigError):
            load_experiment_config(None, {'seed': 1}, env={})


class TestLogging:
    def test_handler_follows_replaced_stderr(self, monkeypatch):
        configure_logging('INFO')
        replacement = io.StringIO()
        monkeypatch.setattr(sys, 'stderr', replacement)
        logging.getLogger('instantiation_net.commands').info('after swap')
        assert 'level=INFO logger=instantiation_net.commands event=after swap' in replacement.getvalue()

    def test_reconfigure_keeps_one_handler(self):
        configure_logging('DEBUG')
        configure_logging('warning')
        root = logging.getLogger('instantiation_net')
        assert len(root.handlers) == 1
        assert root.level == logging.WARNING
