"""Pydantic request/response models for the exploration service."""

from __future__ import annotations

from typing import Literal, Optional

from pydantic import BaseModel, Field


class SelectionRequest(BaseModel):
    ids: list[int]
    op: Literal["new", "union", "intersect", "difference"] = "new"


class SelectionResponse(BaseModel):
    selections: dict[str, list[int]]
    pruned: dict[str, list[int]]


class PlotConfigRequest(BaseModel):
    mode: Optional[str] = None
    x: Optional[str] = None
    y: Optional[str] = None
    x_range: Optional[list[float]] = Field(default=None, min_length=2, max_length=2)
    y_range: Optional[list[float]] = Field(default=None, min_length=2, max_length=2)
    locked: Optional[bool] = None
    bins: Optional[int] = Field(default=None, ge=2, le=512)
    k: Optional[int] = Field(default=None, ge=1, le=16)


class SessionResponse(BaseModel):
    token: str


class ErrorBody(BaseModel):
    code: str
    message: str


class MetaResponse(BaseModel):
    dims: list[int]
    spacing: list[float]
    fields: list[str]
    iso_field: str
    iso_values: list[float]
    n_layers: int
    n_components: int
    n_regions: int
    n_records: int
    small_component_threshold: int
    session: dict
