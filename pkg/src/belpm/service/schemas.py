"""Pydantic request/response models for the HTTP service."""
from __future__ import annotations

from typing import Literal, Optional, Union

from pydantic import BaseModel, Field


class HealthResponse(BaseModel):
    status: str
    version: str


class ErrorDetail(BaseModel):
    kind: Literal["argument", "numeric", "internal"]
    message: str


class GenerateRequest(BaseModel):
    system: Literal["lorenz", "henon"]
    n: int = Field(ge=1)
    dt: float = Field(default=0.01, gt=0)
    noise_std: float = Field(default=0.0, ge=0)
    seed: int = 0
    discard: int = Field(default=0, ge=0)
    params: Optional[dict] = None


class SeriesResponse(BaseModel):
    values: list[float]
    dt: float
    origin_time: float


class DatasetPayload(BaseModel):
    """Embedded dataset on the wire: input rows (most recent sample first)
    and one scalar target per row."""

    inputs: list[list[float]]
    targets: list[float]
    lag: int = Field(default=1, ge=1)
    horizon: int = Field(default=1, ge=1)


class EmbedRequest(BaseModel):
    values: list[float]
    dt: float = Field(default=0.01, gt=0)
    origin_time: float = 0.0
    dim: int = Field(default=3, ge=1)
    lag: int = Field(default=1, ge=1)
    horizon: int = Field(default=1, ge=1)


class TrainRequest(BaseModel):
    data: DatasetPayload
    config: dict = Field(default_factory=dict)
    validation: Optional[DatasetPayload] = None


class TrainResponse(BaseModel):
    model: dict
    history: dict


class PredictRequest(BaseModel):
    model: dict
    inputs: list[list[float]]


class PredictResponse(BaseModel):
    predictions: list[float]


class WknnPredictRequest(BaseModel):
    train: DatasetPayload
    inputs: list[list[float]]
    k: int = Field(default=5, ge=1)
    kernel: Literal["gaussian", "inversion", "rank", "exponential", "rational"] = "rank"
    rational_z: float = Field(default=1.0, gt=0)
    b: Union[float, list[float]] = 1.0


class AdaptRequest(BaseModel):
    """Online adaptation over a stream; targets are for metrics only."""

    model: dict
    inputs: list[list[float]]
    targets: Optional[list[float]] = None
    config: dict = Field(default_factory=dict)


class AdaptResponse(BaseModel):
    model: dict
    predictions: list[float]
    nmse_per_epoch: list[Optional[float]]


class EvaluateRequest(BaseModel):
    predicted: list[float]
    target: list[float]


class EvaluateResponse(BaseModel):
    nmse: float
    mse: float


class BenchmarkRequest(BaseModel):
    spec: dict


class BenchmarkResponse(BaseModel):
    report: dict
    timings: dict


class StructureSweepRequest(BaseModel):
    spec: dict
    sweep: list[Union[int, list[int]]]


class StructureSweepResponse(BaseModel):
    rows: list[dict]
