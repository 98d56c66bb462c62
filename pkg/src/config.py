from __future__ import annotations

from pathlib import Path
from typing import Any, Literal

import yaml
from pydantic import BaseModel, Field, model_validator

from .envs.craft import CraftGenParams


class LearnerConfig(BaseModel):
    alpha: float = Field(0.5, gt=0, le=1)
    epsilon: float = Field(0.1, gt=0, le=1)
    gamma: float = Field(0.9, gt=0, le=1)
    q0: float = 1.0
    rplus: float = 1.0
    rminus: float = -1.0
    prune_self_loops: bool = True
    prune_bad: bool = True
    share_across_tasks: bool = True


class RunConfig(BaseModel):
    env: Literal["office", "craft"] = "office"
    map: str | None = None
    tasks: str = "all"
    algo: Literal["ql", "crm", "qrm", "hrm"] = "crm"
    rs: bool = False
    trials: int = Field(30, ge=1)
    steps: int = Field(200_000, ge=1)
    seed: int = 0
    eval_every: int = Field(100, ge=1)
    window: int = Field(1000, ge=1)
    max_episode_steps: int = Field(1000, ge=1)
    metric: Literal["window", "greedy"] = "window"
    maps: int = Field(1, ge=1)
    random_start: bool = False
    workers: int = Field(1, ge=1)
    out: str = "results/run.csv"
    raw_out: str | None = None
    gnuplot_stub: bool = False
    learner: LearnerConfig = LearnerConfig()
    craft: CraftGenParams = CraftGenParams()

    @model_validator(mode="after")
    def check_grid(self) -> RunConfig:
        if self.window > self.steps:
            raise ValueError(f"window ({self.window}) exceeds total steps ({self.steps})")
        if self.steps % self.eval_every:
            raise ValueError(f"eval_every ({self.eval_every}) must divide steps ({self.steps})")
        return self

    def header_items(self) -> list[tuple[str, str]]:
        """Every setting as a flat (key, value) pair, nested models prefixed by their section."""
        items: list[tuple[str, str]] = []
        for key, value in self.model_dump(mode="json").items():
            if isinstance(value, dict):
                for sub, v in value.items():
                    items.append((f"{key}.{sub}", _render(v)))
            else:
                items.append((key, _render(value)))
        return items


def _render(value: Any) -> str:
    if isinstance(value, dict):
        return ",".join(f"{k}:{v}" for k, v in value.items())
    if value is None:
        return ""
    if isinstance(value, bool):
        return str(value).lower()
    return str(value)


def _default_config_path() -> Path:
    return Path(__file__).parent.parent / "config.yaml"


def load_config(config_path: str | Path | None = None) -> RunConfig:
    """Load run settings from a YAML file; a missing default file yields the defaults."""
    if config_path is None:
        path = _default_config_path()
        if not path.exists():
            return RunConfig()
    else:
        path = Path(config_path)
    with open(path) as f:
        raw = yaml.safe_load(f) or {}
    return RunConfig(**raw)


def apply_overrides(config: RunConfig, overrides: dict[str, Any]) -> RunConfig:
    """Layer explicitly given settings over config; learner.* keys go to the nested section."""
    merged = config.model_dump()
    for key, val in overrides.items():
        if val is None:
            continue
        if key in LearnerConfig.model_fields:
            merged["learner"][key] = val
        else:
            merged[key] = val
    return RunConfig(**merged)
