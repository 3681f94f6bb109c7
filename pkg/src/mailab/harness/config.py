"""JSON experiment configuration with strict (unknown keys rejected) parsing."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

from ..errors import ConfigError
from ..trainers import TrainConfig

SCHEMA_VERSION = 1


@dataclass
class ExperimentConfig:
    """Everything one run needs: the training config plus artifact paths."""

    schema: int = SCHEMA_VERSION
    preset: str | None = None
    seed: int = 0
    demos: str | None = None
    bc_checkpoint: str | None = None
    posterior_checkpoint: str | None = None
    out_dir: str | None = None
    train: TrainConfig = field(default_factory=TrainConfig)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        if not isinstance(data, dict):
            raise ConfigError("experiment config must be a JSON object")
        own_fields = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - own_fields
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        schema = data.get("schema", SCHEMA_VERSION)
        if schema != SCHEMA_VERSION:
            raise ConfigError(f"unsupported config schema {schema}")
        train_data = data.get("train", {})
        train_fields = {f.name for f in dataclasses.fields(TrainConfig)}
        bad = set(train_data) - train_fields
        if bad:
            raise ConfigError(f"unknown train config keys: {sorted(bad)}")
        kwargs = {k: v for k, v in data.items() if k != "train"}
        cfg = cls(**kwargs, train=TrainConfig(**train_data))
        cfg.train.seed = cfg.seed
        return cfg

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as err:
            raise ConfigError(f"config is not valid JSON: {err}") from None
        return cls.from_dict(data)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        return cls.from_json(Path(path).read_text())

    def save(self, path) -> None:
        Path(path).write_text(self.to_json())
