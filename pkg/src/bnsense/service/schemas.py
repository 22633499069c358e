"""Request bodies for the HTTP service.

Responses are the same JSON shapes the CLI emits with --format json, built
by the converters in `formats`; only requests need declared models.
"""

from __future__ import annotations

from typing import Any, Literal

from pydantic import BaseModel, Field


class ScenarioIn(BaseModel):
    evidence: dict[str, str] = Field(default_factory=dict)
    target: str


class SensitivitiesRequest(ScenarioIn):
    nodes: list[str] | None = None
    summary: bool = False


class McSensitivitiesRequest(ScenarioIn):
    method: Literal["likelihood-weighting", "logic-rejection"] = "likelihood-weighting"
    sample_count: int = Field(default=100000, ge=1)
    seed: int = 0


class ParamUpdate(BaseModel):
    param: dict[str, Any]
    value: float


class PatchParamsRequest(BaseModel):
    updates: list[ParamUpdate] = Field(min_length=1)


class AssessmentIn(BaseModel):
    scenario: ScenarioIn
    assessed: dict[str, float]
    weight: float = 1.0
    kind: Literal["holistic", "local"] = "holistic"


class FitRequest(BaseModel):
    rule: Literal["logarithmic", "quadratic"] = "logarithmic"
    step_size: float = 0.2
    max_epochs: int = 200
    convergence_tol: float = 1e-8
    restarts: int = 1
    scenario_order: Literal["fixed-cycle", "shuffled"] = "fixed-cycle"
    parameter_floor: float = 1e-6
    seed: int = 0
    wait: bool = False


class GradientStepRequest(BaseModel):
    assessment: AssessmentIn
    step_size: float = 0.2
    rule: Literal["logarithmic", "quadratic"] = "logarithmic"
