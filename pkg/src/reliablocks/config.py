"""TOML configuration with four sections: scoring, avs, gen, paths.

Unknown sections or keys are rejected.  Values missing from the file fall
back to the library defaults; command-line flags override both.
"""
from __future__ import annotations

import dataclasses
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .avs import AvsParams
from .ingestion import GenParams
from .scoring import ScoringParams

ENV_VAR = "RELIABLOCKS_CONFIG"


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class Paths:
    log: str = "reliablocks.log"
    snapshot: Optional[str] = None  # None -> "<log>.snapshot.json"
    rounds: str = "rounds.jsonl"

    @property
    def snapshot_path(self) -> Path:
        return Path(self.snapshot) if self.snapshot else Path(self.log + ".snapshot.json")


@dataclass(frozen=True)
class Config:
    scoring: ScoringParams = field(default_factory=ScoringParams)
    avs: AvsParams = field(default_factory=AvsParams)
    gen: GenParams = field(default_factory=GenParams)
    paths: Paths = field(default_factory=Paths)


_SECTIONS = {"scoring": ScoringParams, "avs": AvsParams, "gen": GenParams, "paths": Paths}


def _build(cls, values: dict, section: str):
    known = {f.name: f for f in dataclasses.fields(cls)}
    unknown = sorted(set(values) - set(known))
    if unknown:
        raise ConfigError(f"[{section}] unknown keys: {', '.join(unknown)}")
    coerced = {}
    for k, v in values.items():
        # TOML ints are fine where floats are expected
        if known[k].type in ("float", "Optional[float]") and isinstance(v, int) and not isinstance(v, bool):
            v = float(v)
        coerced[k] = v
    try:
        return cls(**coerced)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[{section}] {exc}") from None


def load_config(path=None) -> Config:
    """Read ``path`` (or $RELIABLOCKS_CONFIG); built-in defaults if neither is set."""
    if path is None:
        path = os.environ.get(ENV_VAR) or None
    if path is None:
        return Config()
    try:
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    unknown = sorted(set(doc) - set(_SECTIONS))
    if unknown:
        raise ConfigError(f"unknown sections: {', '.join(unknown)}")
    parts = {}
    for name, cls in _SECTIONS.items():
        section = doc.get(name, {})
        if not isinstance(section, dict):
            raise ConfigError(f"{name} must be a table")
        parts[name] = _build(cls, section, name)
    return Config(**parts)


def override(obj, **changes):
    """dataclasses.replace that ignores None-valued flags."""
    changes = {k: v for k, v in changes.items() if v is not None}
    if not changes:
        return obj
    try:
        return dataclasses.replace(obj, **changes)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
