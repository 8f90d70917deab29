import ast
import logging
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Optional

from .datasets.synthetic import SynthConfig
from .discovery.config import EngineConfig
from .errors import ConfigError
from .eval.utils import EvalConfig
from .fusion import FusionConfig


@dataclass
class RunConfig:
    engine: EngineConfig = field(default_factory=EngineConfig)
    fusion: FusionConfig = field(default_factory=FusionConfig)
    synth: SynthConfig = field(default_factory=SynthConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)
    seed: Optional[int] = field(default=None)


SECTIONS = {f.name: f.default_factory for f in fields(RunConfig) if f.name != "seed"}


def _parse_value(raw):
    try:
        return ast.literal_eval(raw)
    except (ValueError, SyntaxError):
        return raw


def parse_config_text(text, source="<config>"):
    """`section.key=value` lines into `{section: {key: value}}`.

    Values are Python literals where they parse as such, raw strings otherwise.
    """
    values = dict()
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'section.key=value', got '{line}'.")

        key, raw = (s.strip() for s in line.split("=", 1))
        section, _, name = key.partition(".")
        if not name:
            raise ConfigError(f"{source}:{lineno}: key '{key}' has no section.")

        values.setdefault(section, dict())[name] = _parse_value(raw)
    return values


def _apply(cfg, values):
    for section, kv in values.items():
        if section not in SECTIONS:
            raise ConfigError(f"Unknown config section '{section}'.")

        current = getattr(cfg, section)
        known = {f.name for f in fields(current)}
        unknown = sorted(set(kv) - known)
        if unknown:
            raise ConfigError(f"Unknown keys for '{section}': {unknown}.")

        try:
            setattr(cfg, section, replace(current, **kv))
        except TypeError as e:
            raise ConfigError(f"Invalid value in section '{section}': {e}")
    return cfg


def load_config(path=None, overrides=None, seed=None):
    """Defaults, then the config file, then `overrides`, then `seed`.

    `overrides` maps dotted keys (`engine.k_clusters`) to values.
    """
    cfg = RunConfig()

    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"Config file '{path}' not found.")
        _apply(cfg, parse_config_text(path.read_text(), source=str(path)))
        logging.debug(f'Loaded config from "{path}".')

    if overrides:
        nested = dict()
        for key, value in overrides.items():
            section, _, name = key.partition(".")
            if not name:
                raise ConfigError(f"Override '{key}' has no section.")
            nested.setdefault(section, dict())[name] = value
        _apply(cfg, nested)

    if seed is not None:
        cfg.seed = int(seed)
        _apply(cfg, {"engine": {"rng_seed": cfg.seed}, "synth": {"rng_seed": cfg.seed}})

    return cfg


def config_to_dict(cfg):
    return asdict(cfg)
