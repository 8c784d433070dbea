"""RepairReport: what a repair run found, serialised as JSON"""

from __future__ import annotations

from typing import Literal, Optional

from pydantic import BaseModel, Field

from .. import __version__
from ..config import SearchConfig

Status = Literal["repaired", "no_vulnerabilities", "no_plausible_patch"]


class PlausiblePatch(BaseModel):
    content_hash: str
    space: Optional[str] = None
    distance: int
    edits: list[dict]
    source: str
    gas_formula: Optional[str] = None
    # level among the original and every plausible patch
    gas_level: Optional[int] = None
    gas_differs: bool = False
    level_differs: bool = False
    mean_gas: Optional[str] = None
    verified: bool = False


class RepairReport(BaseModel):
    version: str = __version__
    status: Status
    mode: Literal["genetic", "urs"] = "genetic"
    config: dict = Field(default_factory=dict)
    cost_table: str = ""
    vulnerabilities_before: dict[str, int] = Field(default_factory=dict)
    vulnerabilities_after: dict[str, int] = Field(default_factory=dict)
    original_gas_formula: Optional[str] = None
    original_gas_level: Optional[int] = None
    plausible: list[PlausiblePatch] = Field(default_factory=list)
    recommended: list[str] = Field(default_factory=list)
    generated: dict[str, int] = Field(default_factory=dict)
    evaluations: int = 0
    discarded: int = 0
    generations: int = 0
    timed_out: bool = False
    interrupted: bool = False
    exhausted: bool = False
    elapsed: Optional[float] = None

    @property
    def repaired(self) -> bool:
        return bool(self.plausible)

    def to_json(self) -> str:
        return self.model_dump_json(indent=2) + "\n"


def config_echo(config: SearchConfig) -> dict:
    """Search configuration as reported (the cost table appears as its digest)"""
    echo = config.model_dump(mode="json", exclude={"cost_table"})
    if config.deterministic:
        echo.pop("evaluators", None)
    return echo
