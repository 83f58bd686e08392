"""Request and response schemas of the experiment service."""

from __future__ import annotations

from typing import Literal, Optional

from pydantic import BaseModel, Field


class EngineParams(BaseModel):
    """Mirrors GossipConfig minus reference ids (those are run-internal)."""

    scheme: str = "direct"
    metric: str = "ring_distance"
    ordering: str = "random"
    iterations: int = Field(default=100, ge=1)
    seed: int = 0
    smart_width: int = Field(default=5, ge=1)
    strength_mode: str = "common_neighbors"
    literal_abs: bool = False
    iteration_unit: Literal["sweep", "attempt"] = "sweep"


class RunCommon(BaseModel):
    k: Optional[int] = None
    replicates: int = Field(default=5, ge=1)
    seeds: Optional[list[int]] = None
    metrics_every: int = Field(default=10, ge=0)
    latency_sample_cap: Optional[int] = 200_000
    allow_fetch: bool = True
    allow_synthetic: bool = True
    save_checkpoints: bool = True


class EmbedRequest(RunCommon):
    dataset: str
    engine: EngineParams = Field(default_factory=EngineParams)


class OrderingsRequest(EmbedRequest):
    pass


class SchemesRequest(EmbedRequest):
    schemes: list[str] = ["random", "direct", "greedy", "smart"]


class RelabelRequest(BaseModel):
    n: int = Field(default=10000, ge=100)
    k: Optional[int] = None
    seeds: Optional[list[int]] = None
    iterations: int = Field(default=500, ge=1)
    scheme: str = "direct"
    metrics_every: int = Field(default=25, ge=0)
    latency_sample_cap: Optional[int] = 200_000
    strength_modes: list[str] = ["id_distance", "common_neighbors"]


class MetricsRequest(BaseModel):
    """Recompute metrics for a checkpoint file visible to the server."""

    checkpoint: str
    dataset: str
    allow_fetch: bool = True
    allow_synthetic: bool = True
    latency_sample_cap: Optional[int] = 200_000


class FetchRequest(BaseModel):
    name: str
    force: bool = False


class DatasetStatus(BaseModel):
    name: str
    url: str
    filename: str
    directed: bool
    nodes: int
    listed_edges: int
    present: bool
    synthetic_fallback: bool
    synthetic_cached: bool


class JobInfo(BaseModel):
    id: str
    kind: str
    status: Literal["queued", "running", "done", "failed", "cancelled"]
    progress: float = 0.0
    message: str = ""
    error: Optional[str] = None
    created: float
    started: Optional[float] = None
    finished: Optional[float] = None


class JobFileList(BaseModel):
    id: str
    files: list[str]
