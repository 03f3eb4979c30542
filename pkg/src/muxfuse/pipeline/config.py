from __future__ import annotations

import logging
from pathlib import Path
from typing import Any, Literal

import pydantic
import yaml

from muxfuse.evaluation import EvalConfig
from muxfuse.tools import file_utils

logger = logging.getLogger(__name__)


class RunConfig(pydantic.BaseModel):
    """One taxonomy cell: a dataset, a method id and its hyperparameters."""
    model_config = pydantic.ConfigDict(extra="forbid", frozen=True)

    dataset: Path
    method: str
    seed: int = 0
    dim: int = pydantic.Field(default=64, ge=1)
    epochs: int = pydantic.Field(default=500, ge=1)
    patience: int = pydantic.Field(default=50, ge=1)
    lr: float = pydantic.Field(default=1e-3, gt=0)
    fusion_lr: float = pydantic.Field(default=5e-2, gt=0)
    fusion_epochs: int = pydantic.Field(default=500, ge=1)
    bt_lambda: float | None = pydantic.Field(default=None, ge=0)
    bt_eps: float = pydantic.Field(default=1e-5, ge=0)
    k_knn: int | None = pydantic.Field(default=None, ge=1)
    split_ratios: tuple[float, float, float] = (0.1, 0.1, 0.8)
    layer_model: Literal["dgi", "gcn"] = "dgi"
    gbt_mlp_term: bool = False
    attention_dim: int = pydantic.Field(default=128, ge=1)
    max_pos_edges: int | None = pydantic.Field(default=10000, ge=1)
    beta_positive: bool = True
    log_every: int = pydantic.Field(default=50, ge=1)
    classifier_seeds: int = pydantic.Field(default=5, ge=1)
    classifier_steps: int = pydantic.Field(default=300, ge=1)
    classifier_lr: float = pydantic.Field(default=0.01, gt=0)
    classifier_weight_decay: float = pydantic.Field(default=1e-4, ge=0)
    kmeans_seeds: int = pydantic.Field(default=10, ge=1)

    @pydantic.field_validator("method")
    @classmethod
    def _normalize_method(cls, value: str) -> str:
        return value.strip().lower()

    def config_hash(self) -> str:
        return file_utils.stable_hash(self.model_dump(mode="json"))

    def eval_config(self, tasks: tuple[str, ...] = ("clf", "clu", "sim")) -> EvalConfig:
        return EvalConfig(classifier_seeds=self.classifier_seeds,
                          classifier_steps=self.classifier_steps,
                          classifier_lr=self.classifier_lr,
                          classifier_weight_decay=self.classifier_weight_decay,
                          kmeans_seeds=self.kmeans_seeds,
                          tasks=tasks)


class GridSpec(pydantic.BaseModel):
    """Run templates crossed with seeds; cells keep declaration order (runs outer, seeds inner)."""
    model_config = pydantic.ConfigDict(extra="forbid")

    seeds: list[int] = pydantic.Field(default_factory=lambda: [0])
    runs: list[dict[str, Any]] = []
    defaults: dict[str, Any] = {}
    output_dir: Path | None = None

    @pydantic.field_validator("seeds")
    @classmethod
    def _distinct_seeds(cls, value: list[int]) -> list[int]:
        if len(set(value)) != len(value):
            raise ValueError(f"grid seeds must be distinct, got {value}")
        return value

    def cells(self, base: dict[str, Any] | None = None) -> list[RunConfig]:
        configs = []
        for run in self.runs:
            for seed in self.seeds:
                configs.append(RunConfig(**{**(base or {}), **self.defaults, **run, "seed": seed}))
        return configs


def read_yaml_mapping(file: Path) -> dict[str, Any]:
    if not file.exists():
        logger.error(f"File not found: {file}")
        raise FileNotFoundError(f"File not found: {file}")
    if not file_utils.formats.is_config(file):
        logger.error(f"Not a YAML file: {file}")
        raise ValueError(f"Expected a .yaml or .yml file, got '{file.name}'")
    with open(file, 'r', encoding='utf-8') as f:
        data = yaml.safe_load(f) or {}
    if not isinstance(data, dict):
        logger.error(f"{file} does not hold a key-value mapping")
        raise ValueError(f"{file} must hold a key-value mapping, got {type(data).__name__}")
    return data


def load_run_config(file: Path,
                    defaults: dict[str, Any] | None = None,
                    seed_override: int | None = None) -> RunConfig:
    """Reads a flat YAML run file on top of the configured run defaults.

    Args:
        file: The run file.
        defaults: `run_defaults` from the application config.
        seed_override: Seed taking precedence over the file and the defaults.
    """
    values = {**(defaults or {}), **read_yaml_mapping(file)}
    if seed_override is not None:
        values["seed"] = seed_override
    return RunConfig(**values)


def load_grid_spec(file: Path) -> GridSpec:
    return GridSpec(**read_yaml_mapping(file))
