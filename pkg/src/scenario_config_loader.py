#!/usr/bin/env python3
"""
Scenario file loader.

Scenario files are flat ``KEY=value`` files (comments with ``#``) whose keys
are ``ScenarioConfig`` field names, case-insensitive. Missing keys keep their
defaults; unknown keys are rejected. ``p_dyn_k_range`` is written as
``5-30`` or ``5,30``.
"""
import dataclasses
import logging
import os
import re
from pathlib import Path
from typing import Any, Dict, Optional

from dotenv import dotenv_values

from channel_scenario import ScenarioConfig

log = logging.getLogger(__name__)

_INT_FIELDS = {'num_users', 'links_per_user', 'seed'}
_RANGE_SPLIT = re.compile(r'\s*[,;]\s*|(?<=\d)\s*-\s*(?=[\d.])')


class ScenarioConfigLoader:
    """
    Loads a ``ScenarioConfig`` from a key=value scenario file.
    """

    def __init__(self, config_path: str):
        self.config_path = Path(config_path)
        self.raw = self._load_file()
        self.values = self._parse(self.raw)
        self.config = self._build()

    def _load_file(self) -> Dict[str, Optional[str]]:
        if not self.config_path.is_file():
            raise FileNotFoundError(f"Scenario file not found: {self.config_path}")
        try:
            return dict(dotenv_values(self.config_path))
        except UnicodeDecodeError as e:
            raise ValueError(f"Scenario file {self.config_path} is not valid text: {e}")

    def _parse(self, raw: Dict[str, Optional[str]]) -> Dict[str, Any]:
        known = {f.name for f in dataclasses.fields(ScenarioConfig)}
        values: Dict[str, Any] = {}
        for key, text in raw.items():
            name = key.strip().lower()
            if name not in known:
                raise ValueError(f"{self.config_path}: unknown key {key!r}")
            if text is None or not text.strip():
                raise ValueError(f"{self.config_path}: key {key!r} has no value")
            values[name] = self._parse_value(name, text.strip())
        return values

    def _parse_value(self, name: str, text: str) -> Any:
        try:
            if name == 'p_dyn_k_range':
                parts = [p for p in _RANGE_SPLIT.split(text) if p]
                if len(parts) != 2:
                    raise ValueError(f"expected 'low-high' or 'low,high', got {text!r}")
                return float(parts[0]), float(parts[1])
            if name in _INT_FIELDS:
                return int(text)
            return float(text)
        except ValueError as e:
            raise ValueError(f"{self.config_path}: bad value for {name}: {e}") from e

    def _build(self) -> ScenarioConfig:
        try:
            return ScenarioConfig(**self.values)
        except ValueError as e:
            raise ValueError(f"{self.config_path}: {e}") from e

    def get_config(self, **overrides) -> ScenarioConfig:
        """The loaded config with ``None``-valued overrides ignored."""
        changes = {key: value for key, value in overrides.items() if value is not None}
        return self.config.replace(**changes) if changes else self.config

    def get_statistics(self) -> Dict[str, Any]:
        defaults = ScenarioConfig()
        return {
            'path': str(self.config_path),
            'keys_set': sorted(self.values),
            'overridden_defaults': sorted(
                name for name, value in self.values.items() if getattr(defaults, name) != value),
            'total_links': self.config.num_users * self.config.links_per_user,
        }

    def print_summary(self):
        stats = self.get_statistics()
        print("=== Scenario Configuration ===")
        print(f"File: {stats['path']}")
        print(f"Users: {self.config.num_users} x {self.config.links_per_user} links "
              f"({stats['total_links']} links)")
        print(f"Seed: {self.config.seed}")
        print(f"Keys differing from defaults: {', '.join(stats['overridden_defaults']) or 'none'}")


def load_scenario_config(config_path: Optional[str]) -> ScenarioConfig:
    """
    Convenience function: the config in ``config_path``, or the defaults when it is None.
    """
    if config_path is None:
        log.debug("no scenario file given, using default configuration")
        return ScenarioConfig()
    loader = ScenarioConfigLoader(config_path)
    log.info("loaded scenario %s (%d keys)", config_path, len(loader.values))
    return loader.config


def env_int(name: str, default: int) -> int:
    """Positive integer from the environment, e.g. EE_SCHED_WORKERS."""
    text = os.environ.get(name)
    if text is None or not text.strip():
        return default
    try:
        value = int(text)
    except ValueError:
        raise ValueError(f"environment variable {name} must be an integer, got {text!r}")
    if value < 1:
        raise ValueError(f"environment variable {name} must be >= 1, got {value}")
    return value


if __name__ == "__main__":
    config_file = "configs/reference_scenario.cfg"

    if os.path.exists(config_file):
        ScenarioConfigLoader(config_file).print_summary()
    else:
        print(f"Scenario file '{config_file}' not found.")
        print("Run from the repository root or pass a path to load_scenario_config().")
