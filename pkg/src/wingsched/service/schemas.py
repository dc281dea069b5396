"""Request and response models of the scheduling service."""

from __future__ import annotations

from typing import Any, Literal

from pydantic import BaseModel, ConfigDict, Field, model_validator

from ..bench import VARIANTS

Method = Literal["proposed", "greedy"]
Granularity = Literal["city", "hole"]


class ConfigRef(BaseModel):
    """Either a named preset or an inline configuration document."""

    model_config = ConfigDict(extra="forbid")

    preset: str | None = "benchmark"
    config: dict[str, Any] | None = None

    @model_validator(mode="after")
    def _one_source(self):
        if self.config is not None:
            self.preset = None
        elif not self.preset:
            raise ValueError("give a preset name or an inline config")
        return self


class FailureModelIn(BaseModel):
    model_config = ConfigDict(extra="forbid")

    first_mean: float = Field(5073.0, gt=0)
    first_std: float = Field(1602.0, ge=0)
    recurrence_mean: float = Field(6942.0, gt=0)
    recurrence_std: float = Field(1068.0, ge=0)
    repair_mean: float = Field(480.0, gt=0)
    repair_std: float = Field(80.0, ge=0)
    floor: float = Field(1.0, gt=0)


class GreedyIn(BaseModel):
    model_config = ConfigDict(extra="forbid")

    distance_weight: float = Field(1.0, ge=0)
    wait_penalty: float = Field(0.0, ge=0)
    conflict_check: bool = True
    sharing_weight: float = Field(20.0, ge=0)
    start: Literal["base", "outer"] = "outer"


class WingRequest(BaseModel):
    source: ConfigRef = ConfigRef()


class WingResponse(BaseModel):
    config: dict[str, Any]
    task_count: int
    coas: dict[str, int]
    robots: int
    threshold: float


class CoaRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    source: ConfigRef = ConfigRef()
    coa: str | None = None
    overlap_fraction: float = Field(1.0, ge=0, le=1)


class PartitionResponse(BaseModel):
    coa: str
    imbalance: float
    partition: dict[str, Any]


class ScheduleRequest(CoaRequest):
    method: Method = "proposed"
    greedy: GreedyIn = GreedyIn()


class ScheduleResponse(BaseModel):
    threshold: float
    coa: str
    method: Method
    completion: float
    makespans: list[float]
    certified: bool | None
    min_distance: float | None
    constraints: dict[str, Any] | None
    schedule: dict[str, Any]


class SimulateRequest(ScheduleRequest):
    seed: int = 0
    failures: FailureModelIn = FailureModelIn()


class SimulateResponse(BaseModel):
    threshold: float
    coa: str
    method: Method
    seed: int
    completion: float
    min_distance: float | None
    first_violation: float | None
    executed: int
    skipped: list[int]
    leftover: list[int]
    log: dict[str, Any]


class OptimizeRequest(SimulateRequest):
    granularity: Granularity = "city"
    optimize: bool = True
    beta: float = Field(20.0, ge=0)


class OptimizeResponse(BaseModel):
    threshold: float
    coa: str
    method: Method
    seed: int
    efficiency: float
    t_min: float
    t_act: float
    cities: int
    sales: list[dict[str, Any]]
    capped: bool
    min_distance: float | None
    initial: dict[str, Any]
    final: dict[str, Any]


class BenchRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    source: ConfigRef = ConfigRef()
    coas: list[str] | None = None
    seeds: list[int] = Field(default_factory=lambda: list(range(100)), min_length=1)
    variants: list[str] = Field(default_factory=lambda: list(VARIANTS), min_length=1)
    failures: FailureModelIn = FailureModelIn()
    greedy: GreedyIn = GreedyIn()
    overlap_fraction: float = Field(1.0, ge=0, le=1)
    out_dir: str | None = None
    workers: int = Field(1, ge=1)
    record_timing: bool = True


class BenchResponse(BaseModel):
    rows: list[dict[str, Any]]
    csv: str
    summary: dict[str, Any]
    report: str


class ReportRequest(BaseModel):
    rows: list[dict[str, Any]] = Field(min_length=1)


class ReportResponse(BaseModel):
    summary: dict[str, Any]
    report: str
