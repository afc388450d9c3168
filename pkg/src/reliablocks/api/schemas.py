"""Request and response bodies for the HTTP read model."""
from typing import Optional

from pydantic import BaseModel, ConfigDict, Field


class ScoreOut(BaseModel):
    l2_block: int
    score: float
    interest_rate: float
    cumulative_value_base_units: str
    exit_count: int
    depth: int
    finalized: bool


class HealthOut(BaseModel):
    status: str
    head: int
    events: int


class TaskIn(BaseModel):
    model_config = ConfigDict(extra="forbid")

    l2_block: int = Field(ge=0, strict=True)


class SubmissionOut(BaseModel):
    operator_id: str
    task_id: str
    score: float
    submitted_at: int


class AggregationOut(BaseModel):
    consensus_score: float
    accepted: list[str]
    slashed: list[str]
    non_responders: list[str]
    stake_deltas: dict[str, int]
    treasury_delta: int


class TaskOut(BaseModel):
    task_id: str
    l2_block: int
    created_tick: int
    status: str
    submissions: list[SubmissionOut]
    result: Optional[AggregationOut] = None


class OperatorOut(BaseModel):
    id: str
    stake: str
    active: bool
    slashed_total: str
    rewards_total: str
    strategy: str


class ErrorOut(BaseModel):
    code: str
    message: str
