"""Flat `key = value` experiment configuration files.

Each key belongs to exactly one section model (train, encoder, hierarchy) or to the
experiment itself. Preset names expand first; explicit keys override them.
"""
import os
from pathlib import Path
from typing import Mapping

from pydantic import BaseModel, ValidationError

from instantiation_net.exceptions import InvalidConfigError
from instantiation_net.presets import DECODER_PRESETS, ENCODER_PRESETS
from instantiation_net.schemes.config import EncoderConfig, ExperimentConfig, HierarchyConfig, TrainConfig

OUTPUT_DIR_ENV = 'INET_OUTPUT_DIR'

SECTIONS: dict[str, type[BaseModel]] = {
    'train': TrainConfig,
    'encoder': EncoderConfig,
    'hierarchy': HierarchyConfig,
}


def parse_key_values(text: str, path='<string>') -> dict[str, str]:
    values = {}
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split('#', 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition('=')
        key = key.strip()
        if not sep or not key:
            raise InvalidConfigError(f"{path}:{number}: expected 'key = value', got {raw.strip()!r}")
        if key in values:
            raise InvalidConfigError(f'{path}:{number}: duplicate key {key!r}')
        values[key] = value.strip()
    return values


def section_of(key: str) -> str | None:
    """Name of the section model declaring `key`, or None for experiment-level keys."""
    top_level = set(ExperimentConfig.model_fields) - set(SECTIONS)
    if key in top_level:
        return None
    owners = [name for name, model in SECTIONS.items() if key in model.model_fields]
    if len(owners) != 1:
        raise InvalidConfigError(f'unknown configuration key {key!r}')
    return owners[0]


def build_experiment_config(values: Mapping[str, object], env: Mapping[str, str] | None = None) -> ExperimentConfig:
    env = os.environ if env is None else env
    top: dict[str, object] = {}
    sections: dict[str, dict[str, object]] = {name: {} for name in SECTIONS}
    for key, value in values.items():
        section = section_of(key)
        if section is None:
            top[key] = value
        else:
            sections[section][key] = value

    encoder_preset = top.get('encoder_preset')
    if encoder_preset:
        if encoder_preset not in ENCODER_PRESETS:
            raise InvalidConfigError(
                f'unknown encoder_preset {encoder_preset!r}; choose from {sorted(ENCODER_PRESETS)}'
            )
        sections['encoder'] = {**ENCODER_PRESETS[encoder_preset], **sections['encoder']}
    decoder_preset = top.get('decoder_preset')
    if decoder_preset:
        if decoder_preset not in DECODER_PRESETS:
            raise InvalidConfigError(
                f'unknown decoder_preset {decoder_preset!r}; choose from {sorted(DECODER_PRESETS)}'
            )
        sections['train'] = {**DECODER_PRESETS[decoder_preset], **sections['train']}

    if env.get(OUTPUT_DIR_ENV):
        top['output_dir'] = env[OUTPUT_DIR_ENV]

    try:
        return ExperimentConfig(**top, **sections)
    except ValidationError as e:
        raise InvalidConfigError(f'invalid configuration:\n{e}') from e


def load_experiment_config(path: Path | None, overrides: Mapping[str, object] | None = None,
                           env: Mapping[str, str] | None = None) -> ExperimentConfig:
    """Read `path` (optional), apply command-line `overrides`, validate everything."""
    values: dict[str, object] = {}
    if path is not None:
        path = Path(path)
        try:
            text = path.read_text(encoding='utf-8')
        except OSError as e:
            raise InvalidConfigError(f'cannot read config {path}: {e.strerror}') from e
        values.update(parse_key_values(text, path))
    values.update({k: v for k, v in (overrides or {}).items() if v is not None})
    return build_experiment_config(values, env)
