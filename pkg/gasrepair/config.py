"""
Configuration models for gasrepair.

All knobs live in pydantic models so that values coming from the command line or from
JSON files are validated once, up front, before any analysis work starts.

    - CostTable: gas price of every opcode-kind plus the memory-expansion function.
    - AdversaryConfig: the re-entering attacker used by detector confirmation tests.
    - SearchConfig: everything the repair engine needs (population sizes, budget,
      objectives, concurrency, analysis caps).
"""

from __future__ import annotations

import hashlib
import json
import os
from pathlib import Path
from typing import Literal, Optional

from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    ValidationError,
    field_serializer,
    field_validator,
)

from .detect import VulnKind
from .exceptions import ConfigError

# Number of space-generator workers: one per mutation space S1..S7.
GENERATOR_COUNT = 7

DEFAULT_COSTS: dict[str, int] = {
    "push": 3,
    "mload": 3,
    "mstore": 3,
    "sload": 50,
    "sstore_zero": 4,
    "sstore_nonzero": 68,
    "sha3": 30,
    "add": 3,
    "sub": 3,
    "mul": 5,
    "div": 5,
    "lt": 3,
    "gt": 3,
    "le": 3,
    "ge": 3,
    "eq": 3,
    "ne": 3,
    "and": 3,
    "or": 3,
    "not": 3,
    "caller": 2,
    "callvalue": 2,
    "balance": 20,
    "send": 9040,
    "jumpi": 10,
    "jump": 8,
    "return": 2,
    "pop": 2,
}


class CostTable(BaseModel):
    """Gas price per opcode-kind.

    A config file may override any subset of the default prices; unknown kinds are
    rejected so that typos do not silently fall back to defaults.
    """

    model_config = ConfigDict(extra="forbid", frozen=True)

    costs: dict[str, int] = Field(default_factory=lambda: dict(DEFAULT_COSTS))
    memory_linear: int = Field(3, ge=0)
    memory_quadratic_divisor: Optional[int] = Field(None, gt=0)

    @field_validator("costs")
    @classmethod
    def _merge_defaults(cls, value: dict[str, int]) -> dict[str, int]:
        unknown = sorted(set(value) - set(DEFAULT_COSTS))
        if unknown:
            raise ValueError(f"unknown opcode kinds: {', '.join(unknown)}")
        non_positive = sorted(k for k, v in value.items() if v <= 0)
        if non_positive:
            raise ValueError(f"costs must be positive: {', '.join(non_positive)}")
        return {**DEFAULT_COSTS, **value}

    def cost(self, kind: str) -> int:
        """Base price of one opcode-kind"""
        return self.costs[kind]

    def memory_size_cost(self, words: int) -> int:
        """Total cost of a memory of the given size (affine, optionally + quadratic)"""
        cost = self.memory_linear * words
        if self.memory_quadratic_divisor:
            cost += words * words // self.memory_quadratic_divisor
        return cost

    def memory_expansion(self, old_words: int, new_words: int) -> int:
        """Price of growing memory from old_words to new_words"""
        if new_words <= old_words:
            return 0
        return self.memory_size_cost(new_words) - self.memory_size_cost(old_words)

    def digest(self) -> str:
        """Stable fingerprint of this table, echoed in reports"""
        canonical = json.dumps(self.model_dump(), sort_keys=True)
        return hashlib.sha256(canonical.encode()).hexdigest()[:16]

    @classmethod
    def load(cls, path: str | Path) -> CostTable:
        """Load a cost table from a JSON file (``{"costs": {...}, ...}``)"""
        return load_model(cls, path)


class AdversaryConfig(BaseModel):
    """An attacker account that re-enters the contract when it receives a Send"""

    model_config = ConfigDict(extra="forbid", frozen=True)

    address: int = Field(..., ge=0)
    function: str
    args: tuple[int | bool, ...] = ()
    reentries: int = Field(1, ge=0)
    max_depth: int = Field(4, ge=1)


class SearchConfig(BaseModel):
    """Inputs of the repair engine: search budget, objectives and analysis caps"""

    model_config = ConfigDict(extra="forbid", frozen=True)

    initial_population: int = Field(20, ge=1)
    generation_size: int = Field(10, ge=1)
    population_size: int = Field(40, ge=1)
    max_bound: float = Field(3600.0, gt=0)
    seed: int = 0
    gas_objective: bool = True
    gas_bound: Optional[int] = Field(None, gt=0)
    targeted_kinds: frozenset[VulnKind] = frozenset(
        {VulnKind.ED, VulnKind.RE, VulnKind.IO}
    )
    mode: Literal["genetic", "urs"] = "genetic"
    gmax_early_discard: bool = False
    evaluators: int = Field(default_factory=lambda: os.cpu_count() or 1, ge=1)
    deterministic: bool = False
    gas_limit: int = Field(1_000_000, gt=0)
    path_cap: int = Field(512, ge=1)
    trip_cap: int = Field(1024, ge=1)
    per_test_timeout: float = Field(5.0, gt=0)
    max_generations: Optional[int] = Field(None, ge=1)
    urs_retention: Optional[int] = Field(None, ge=1)
    cost_table: CostTable = Field(default_factory=CostTable)

    @field_validator("targeted_kinds")
    @classmethod
    def _non_empty(cls, value: frozenset[VulnKind]) -> frozenset[VulnKind]:
        if not value:
            raise ValueError("at least one vulnerability kind must be targeted")
        return value

    @field_serializer("targeted_kinds")
    def _sorted_kinds(self, value: frozenset[VulnKind]) -> list[str]:
        return sorted(kind.value for kind in value)

    @property
    def retention(self) -> int:
        """How many candidates URS mode keeps around"""
        return self.urs_retention or self.population_size


def load_model(model: type[BaseModel], path: str | Path):
    """Read and validate a JSON config file, wrapping failures in ConfigError"""
    try:
        return model.model_validate_json(Path(path).read_text(encoding="utf-8"))
    except OSError as e:
        raise ConfigError(f"cannot read {path}: {e}") from e
    except ValidationError as e:
        raise ConfigError(f"invalid {model.__name__} in {path}: {e}") from e
