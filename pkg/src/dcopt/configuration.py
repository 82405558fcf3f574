from __future__ import annotations

import copy
import os
from typing import Optional

import jsonschema
import jsonschema.exceptions
import yaml
from deepdiff import DeepDiff
from dotenv import load_dotenv

from .dataclasses import ALConfig, AuxConfig, PenaltyConfig, RunConfig, VerifyConfig
from .enums import Command, Method
from .errors import ConfigurationError
from .utils import deep_merge

SCRIPT_DIR = os.path.dirname(os.path.realpath(__file__))


def _load_yaml(name: str) -> dict:
    with open(os.path.join(SCRIPT_DIR, 'yaml', name), 'r', encoding='utf-8') as fp:
        return yaml.safe_load(fp)


def env_overrides() -> dict:
    """Settings taken from the environment (and a .env file): DCOPT_THREADS, DCOPT_LOG_LEVEL."""
    load_dotenv()
    overrides = {}

    threads = os.getenv('DCOPT_THREADS')
    if threads:
        try:
            overrides['threads'] = int(threads)
        except ValueError:
            raise ConfigurationError(f'DCOPT_THREADS must be an integer, got {threads!r}', 'threads')

    log_level = os.getenv('DCOPT_LOG_LEVEL')
    if log_level:
        overrides['log_level'] = log_level.upper()

    return overrides


class Configuration:
    """Base defaults, then the environment, then a user file, then explicit overrides."""

    def __init__(self, *, source_dict: Optional[dict] = None, overrides: Optional[dict] = None, use_env: bool = True):
        config_dict = _load_yaml('configuration.base.yml')
        if use_env:
            config_dict = deep_merge(config_dict, env_overrides())

        if source_dict:
            config_dict = deep_merge(config_dict, copy.deepcopy(source_dict))

        if overrides:
            config_dict = deep_merge(config_dict, copy.deepcopy(overrides))

        self._config_dict = config_dict
        self._validate()
        self._post_process()

    @classmethod
    def from_file(cls, path: Optional[str], overrides: Optional[dict] = None, use_env: bool = True) -> Configuration:
        source_dict = None
        if path:
            try:
                with open(path, 'r', encoding='utf-8') as fp:
                    source_dict = yaml.safe_load(fp) or {}
            except OSError as e:
                raise ConfigurationError(f'cannot read configuration file: {e}', path)
            except yaml.YAMLError as e:
                raise ConfigurationError(f'invalid YAML: {e}', path)

            if not isinstance(source_dict, dict):
                raise ConfigurationError('configuration file must hold a mapping', path)

        return cls(source_dict=source_dict, overrides=overrides, use_env=use_env)

    def _validate(self):
        try:
            jsonschema.validate(instance=self._config_dict, schema=_load_yaml('configuration.schema.yml'))
        except jsonschema.exceptions.ValidationError as e:
            raise ConfigurationError(e.message, '.'.join(str(part) for part in e.path))

    def _post_process(self):
        self._config = RunConfig(**copy.deepcopy(self._config_dict))

    @property
    def run(self) -> RunConfig:
        return self._config

    @property
    def command(self) -> Command:
        return self._config.command

    @property
    def method(self) -> Method:
        return self._config.method

    @property
    def aux(self) -> AuxConfig:
        return self._config.aux

    @property
    def verify(self) -> VerifyConfig:
        return self._config.verify

    def solver_config(self, **overrides) -> PenaltyConfig | ALConfig:
        return self._config.solver_config(**overrides)

    def as_dict(self) -> dict:
        return copy.deepcopy(self._config_dict)

    def dump(self) -> str:
        return yaml.safe_dump(self._config_dict, sort_keys=False)

    def __eq__(self, other: Configuration):
        return not DeepDiff(self._config_dict, other._config_dict)
