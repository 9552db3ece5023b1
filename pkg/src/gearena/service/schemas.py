"""Request and response models for the arena service.

The config model mirrors the JSON wire shape used by config files, so a
file can be posted as-is. Game logs travel as plain documents produced by
the core serializers; the models keep them opaque to avoid duplicating
the schema in two places.
"""

from __future__ import annotations

from typing import Any, Literal

from pydantic import BaseModel, Field

from ..core import GameConfig


class GameConfigModel(BaseModel):
    game: Literal["bcz", "pgg"]
    n: int = Field(ge=3)
    rounds: int = Field(ge=1)
    sequence: Literal["GE", "GEE", "GGE"] = "GE"
    alpha: list[float] | None = None
    delta: float = 0.05
    cost: float = 0.2
    r: float = 1.5
    seed: int = 0
    link_rule: Literal["and", "accept"] = "and"
    early_stop: int = 5
    gee_payoff: Literal["last", "sum"] = "last"
    discount: float = 1.0

    def to_config(self) -> GameConfig:
        doc = self.model_dump()
        if doc["alpha"] is None:
            doc.pop("alpha")
        return GameConfig.from_wire(doc)

    @classmethod
    def from_config(cls, config: GameConfig) -> "GameConfigModel":
        return cls(**config.to_wire())


class SimulateRequest(BaseModel):
    config: GameConfigModel
    reps: int = Field(default=1, ge=1)
    agents: list[str] = ["oracle"]
    base_seed: int | None = None


class SimulateResponse(BaseModel):
    logs: list[dict[str, Any]]
    seeds: list[int]
    lineup: list[str]


class MetricsRequest(BaseModel):
    logs: list[dict[str, Any]]
    u3_mode: Literal["ratio", "per-round"] = "ratio"
    with_series: bool = True


class MetricsResponse(BaseModel):
    reports: list[dict[str, Any]]
    aggregate: dict[str, Any]


class NashRequest(BaseModel):
    graph: list[list[int]]
    alpha: list[float]
    delta: float


class NashResponse(BaseModel):
    efforts: list[float] | None
    spectral_gap: float
    converged: bool


class PggEffortRequest(BaseModel):
    group_size: int = Field(ge=1)
    r: float


class PggEffortResponse(BaseModel):
    effort: float


class BczOptimumRequest(BaseModel):
    config: GameConfigModel
    n_limit: int = 8


class BczOptimumResponse(BaseModel):
    graph: list[list[int]]
    efforts: list[float]
    total: float
    unbounded: bool
    exhaustive: bool


class PggOptimumRequest(BaseModel):
    n: int = Field(ge=1)
    r: float


class PggOptimumResponse(BaseModel):
    total: float


class TrainRequest(BaseModel):
    scenario_seed: int
    algo: Literal["tompo", "grpo"] = "tompo"
    steps: int = Field(ge=0)
    m: int = Field(default=8, ge=2)
    scenarios: int = Field(default=126, ge=1)
    rounds: int = Field(default=10, ge=1)
    n_agents: int | None = None
    train_seed: int | None = None
    snapshot_every: int = 0
    collect_rollouts: bool = True


class TrainResponse(BaseModel):
    algo: str
    params: dict[str, Any]
    steps: list[dict[str, Any]]
    rollouts: list[dict[str, Any]]
    memory: dict[str, float]
    snapshots: list[dict[str, Any]]


class CompareRequest(BaseModel):
    suite_seed: int
    count: int = Field(default=20, ge=1)
    n_agents: int = Field(default=6, ge=3)
    steps: int = Field(default=2000, ge=1)
    m: int = Field(default=8, ge=2)
    threshold: float = 0.9
    train_seed: int | None = None


class CompareResponse(BaseModel):
    comparison: dict[str, Any]


class PlotDataRequest(BaseModel):
    log: dict[str, Any]


class PlotDataResponse(BaseModel):
    csv: str


class HealthResponse(BaseModel):
    status: str
    version: str
