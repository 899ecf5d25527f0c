"""
Settings — defaults, RANK_* environment, optional config file, command-line flags.

Precedence: flags > config file > environment > defaults.

A config file may be JSON, TOML or YAML. Ranking settings live at its top
level; a `cohort` table, when present, configures `simulate`.
"""

from __future__ import annotations

import tomllib
from enum import Enum
from pathlib import Path
from typing import Any

import orjson
import structlog
import yaml
from pydantic import Field, ValidationError, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from models.core.src.errors import RecordValidationError
from models.core.src.types import AggregateMode, ScoreScale, TiePolicy
from models.hodgerank.src.solver import CG_TOLERANCE, SolverKind
from models.synthetic.src.generator import CohortConfig

logger = structlog.get_logger()


class LogLevel(str, Enum):
    ERROR = "error"
    WARN = "warn"
    INFO = "info"
    DEBUG = "debug"


class RankingSettings(BaseSettings):
    model_config = SettingsConfigDict(env_prefix="RANK_", extra="ignore")

    log: LogLevel = Field(LogLevel.WARN, description="Verbosity on standard error")
    scale_min: float = 0.0
    scale_max: float = 100.0
    tie_policy: TiePolicy = TiePolicy.INCLUDE
    aggregate: AggregateMode = AggregateMode.MEAN
    trim: int = Field(1, ge=0, description="Scores dropped per side by the truncated average")
    alpha: float = Field(0.5, ge=0.0, le=1.0)
    beta: float = Field(0.0, ge=0.0, le=1.0)
    peerrank_tol: float = Field(1e-9, gt=0.0)
    peerrank_max_iters: int = Field(1000, ge=1)
    peerrank_epsilon: float | None = Field(None, gt=0.0)
    solver: SolverKind = SolverKind.CG
    cg_tol: float = Field(CG_TOLERANCE, gt=0.0)
    seed: int = Field(42, ge=0)
    top: int = Field(10, ge=1)

    @field_validator("log", mode="before")
    @classmethod
    def _accept_warning(cls, value: Any) -> Any:
        if isinstance(value, str):
            value = value.strip().lower()
            return "warn" if value == "warning" else value
        return value

    @property
    def scale(self) -> ScoreScale:
        return ScoreScale(low=self.scale_min, high=self.scale_max)


def read_config_file(path: Path) -> dict[str, Any]:
    suffix = path.suffix.lower()
    try:
        raw = path.read_bytes()
        if suffix == ".json":
            data = orjson.loads(raw)
        elif suffix == ".toml":
            data = tomllib.loads(raw.decode("utf-8"))
        elif suffix in (".yaml", ".yml"):
            data = yaml.safe_load(raw)
        else:
            raise RecordValidationError(f"unsupported config format {suffix!r} (use .json, .toml, .yaml)")
    except (OSError, UnicodeDecodeError, orjson.JSONDecodeError, tomllib.TOMLDecodeError, yaml.YAMLError) as e:
        logger.error("config_file_unreadable", path=str(path), error=str(e))
        raise RecordValidationError(f"cannot read config file {path}: {e}") from e
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise RecordValidationError(f"config file {path} must hold a table/object at the top level")
    return data


def load_settings(config_path: Path | None = None, **overrides: Any) -> RankingSettings:
    values = read_config_file(config_path) if config_path is not None else {}
    values.pop("cohort", None)
    values.update({k: v for k, v in overrides.items() if v is not None})
    try:
        settings = RankingSettings(**values)
    except ValidationError as e:
        logger.error("settings_invalid", error=str(e))
        raise RecordValidationError(f"invalid settings: {e}") from e
    if settings.alpha + settings.beta > 1.0:
        raise RecordValidationError(f"alpha + beta must not exceed 1 (got {settings.alpha} + {settings.beta})")
    if settings.scale_max <= settings.scale_min:
        raise RecordValidationError("scale_max must exceed scale_min")
    return settings


def load_cohort_config(
    config_path: Path | None = None, *, defaults: dict[str, Any] | None = None, **overrides: Any
) -> CohortConfig:
    """Cohort parameters: overrides > config file (its `cohort` table if present) > `defaults`."""
    values: dict[str, Any] = dict(defaults or {})
    if config_path is not None:
        data = read_config_file(config_path)
        values.update(data.get("cohort", data))
    values.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return CohortConfig.model_validate(values)
    except ValidationError as e:
        logger.error("cohort_config_invalid", error=str(e))
        raise RecordValidationError(f"invalid cohort config: {e}") from e
