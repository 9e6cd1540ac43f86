"""
Settings loading: packaged defaults in ``settings.json``, optionally
overlaid by a user file, plus named simulation presets.
"""

import copy
import json
import logging
import os
from pathlib import Path

from dirrho.errors import ConfigError

logger = logging.getLogger(__name__)

DEFAULT_SETTINGS_PATH = Path(__file__).with_name("settings.json")
SEED_ENV_VAR = "DIRRHO_SEED"


def _read_json(path):
    try:
        with open(path, "r", encoding="utf-8") as f:
            return json.load(f)
    except FileNotFoundError:
        raise ConfigError(f"settings file {path} not found") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON in settings file {path}: {exc}") from None


def deep_merge(base, override):
    """Return a copy of ``base`` with ``override`` merged in, recursing into dicts."""
    merged = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = deep_merge(merged[key], value)
        else:
            merged[key] = copy.deepcopy(value)
    return merged


def load_settings(path=None):
    """
    Load the packaged settings, with an optional user file merged over them.

    Args:
        path (str or Path): User settings file, or None for the defaults alone

    Returns:
        dict: Settings with ``integration``, ``simulation``, ``output``, ``limits`` and ``presets`` sections
    """
    settings = _read_json(DEFAULT_SETTINGS_PATH)
    if path is not None:
        settings = deep_merge(settings, _read_json(path))
        logger.debug("merged settings from %s", path)
    return settings


def get_preset(name, settings=None):
    """Look up a simulation preset by name."""
    settings = settings if settings is not None else load_settings()
    presets = settings.get("presets", {})
    if name not in presets:
        raise ConfigError(f"unknown preset {name!r}; available: {', '.join(sorted(presets))}")
    return copy.deepcopy(presets[name])


def resolve_seed(flag_value, settings):
    """
    Seed precedence: explicit flag, then ``DIRRHO_SEED``, then the settings file.

    Returns:
        int: The seed to use
    """
    if flag_value is not None:
        return int(flag_value)
    env = os.environ.get(SEED_ENV_VAR)
    if env is not None and env.strip():
        try:
            return int(env)
        except ValueError:
            raise ConfigError(f"{SEED_ENV_VAR} must be an integer, got {env!r}") from None
    return int(settings["simulation"]["seed"])
