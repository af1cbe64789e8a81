"""Request/response models for the HTTP service.

Batch endpoints operate on files the server can reach; the scoring
endpoint additionally accepts a raw feature vector so a player can keep
one model loaded and query it per segment.
"""

from __future__ import annotations

from pydantic import BaseModel, Field


class HealthResponse(BaseModel):
    status: str
    version: str


class ScoreRowModel(BaseModel):
    t: int
    qoe: float
    cumulative_time_ratio: float


class AssessRequest(BaseModel):
    manifest: str = Field(description="Path to a session manifest JSON")
    model: str = Field(description="Path to a trained model JSON")
    config: str | None = Field(default=None, description="Optional pipeline config JSON path")
    realtime: bool = False


class AssessResponse(BaseModel):
    rows: list[ScoreRowModel]
    seed_note: str | None = None
    config_digest: str


class ScoreWindowRequest(BaseModel):
    model: str = Field(description="Path to a trained model JSON")
    features: list[float] = Field(description="Feature vector in the model's layout")


class ScoreWindowResponse(BaseModel):
    qoe: float


class TrainRequest(BaseModel):
    dataset: str = Field(description="Path to a dataset index JSON")
    out: str = Field(description="Where to write the trained model")
    config: str | None = None
    c: float | None = None
    epsilon: float | None = None
    gamma: float | None = None


class TrainResponse(BaseModel):
    model: str
    n_sessions: int
    n_support_vectors: int
    config_digest: str


class EvalRequest(BaseModel):
    dataset: str
    repetitions: int = 100
    seed: int = 0
    config: str | None = None
    out: str | None = Field(default=None, description="Optional report JSON output path")


class EvalResponse(BaseModel):
    seed: int
    repetitions: int
    aggregate: dict[str, dict[str, float]]
    report_path: str | None
    config_digest: str


class SimulateRequest(BaseModel):
    contents: int = 8
    sessions_per_content: int = 6
    seed: int = 7
    out: str = Field(description="Directory to write the dataset into")


class SimulateResponse(BaseModel):
    index: str
    n_sessions: int


class CalibrateRequest(BaseModel):
    rows: list[tuple[float, float, float]] = Field(
        description="(q_start, q_end, mos) triples, one per session"
    )


class CalibrateResponse(BaseModel):
    w_s: float
    w_e: float
