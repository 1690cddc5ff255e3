"""Application config: TOML file sections mapped onto dataclasses.

Precedence is command-line flag > config file > dataclass default. Unknown
sections or keys are rejected.
"""

from __future__ import annotations

import dataclasses
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .search import MctsConfig


class ConfigError(ValueError):
    pass


@dataclass
class ModelSection:
    endpoint: str = ""
    model_name: str = "glm-4-flash"
    timeout: float = 60.0
    connection_limit: int = 4


@dataclass
class EvalSection:
    datasets: list[str] = field(default_factory=list)
    strategy: str = "improved-mcts"
    parallelism: int = 1


@dataclass
class PathsSection:
    cache_dir: str = ".pmcts/cache"
    report_dir: str = "reports"
    template_dir: str = ""


@dataclass
class AppConfig:
    model: ModelSection = field(default_factory=ModelSection)
    search: MctsConfig = field(default_factory=MctsConfig)
    eval: EvalSection = field(default_factory=EvalSection)
    paths: PathsSection = field(default_factory=PathsSection)


def _build(cls, values: dict[str, Any], section: str):
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = set(values) - known
    if unknown:
        raise ConfigError(f"unknown key(s) in [{section}]: {', '.join(sorted(unknown))}")
    try:
        return cls(**values)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[{section}]: {exc}") from exc


def load_config(path: str | Path | None = None, overrides: dict[str, dict[str, Any]] | None = None) -> AppConfig:
    """Read ``path`` (if given) and apply ``overrides`` section by section."""
    data: dict[str, Any] = {}
    if path is not None:
        try:
            data = tomllib.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, tomllib.TOMLDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
    sections = {"model": ModelSection, "search": MctsConfig, "eval": EvalSection, "paths": PathsSection}
    unknown = set(data) - set(sections)
    if unknown:
        raise ConfigError(f"unknown config section(s): {', '.join(sorted(unknown))}")
    built = {}
    for name, cls in sections.items():
        raw = data.get(name, {})
        if not isinstance(raw, dict):
            raise ConfigError(f"[{name}] must be a table")
        values = dict(raw)
        for key, val in (overrides or {}).get(name, {}).items():
            if val is not None:
                values[key] = val
        built[name] = _build(cls, values, name)
    return AppConfig(**built)
