"""Pydantic schemas for the run manifest."""

from datetime import datetime
from typing import Any, Optional

from pydantic import BaseModel, Field

from rnpsim.core.models import InvariantCheck


class InvariantSummary(BaseModel):
    """Pass/fail of one invariant family."""

    name: str
    passed: bool
    asserted: bool = True  # False when the family is reported only
    detail: str = ""
    worst: Optional[float] = None  # worst margin or deviation observed

    @classmethod
    def from_check(cls, check: InvariantCheck) -> "InvariantSummary":
        return cls(
            name=check.name,
            passed=check.passed,
            asserted=check.asserted,
            detail=check.detail,
            worst=check.worst,
        )


class RunManifest(BaseModel):
    """One per run: the resolved configuration plus what the run concluded."""

    command: str
    version: str
    section: str  # config section, rnp or cho
    config: dict[str, Any]  # resolved, keyed by config-file names
    started_at: datetime
    finished_at: Optional[datetime] = None
    invariants: list[InvariantSummary] = Field(default_factory=list)
    passed: Optional[bool] = None  # None until a run has finished
    error: Optional[str] = None
    results: dict[str, Any] = Field(default_factory=dict)  # run-specific figures
