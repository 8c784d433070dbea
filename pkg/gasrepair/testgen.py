"""
Regression tests from transaction histories.

A TransactionRecord captures what one call observed: the touched accounts before the
call (balances, and the contract's full storage), the call itself, the same accounts
afterwards and the return value.  Replaying the call from the captured pre-state must
reproduce the rest, which is exactly what a TestCase checks against a patched
contract.

Histories come from JSON-lines logs, or are recorded by running a Scenario (funded
accounts plus an ordered list of calls) on the original contract.
"""

from __future__ import annotations

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Iterable, Literal, Optional, Sequence, TypeVar

from pydantic import BaseModel, ConfigDict, Field, ValidationError

from .config import CostTable, load_model
from .exceptions import ConfigError, ExecutionError, ExecutionTimeout
from .lang import nodes as n
from .vm import (
    CONTRACT_ADDRESS,
    DEFAULT_COST_TABLE,
    DEFAULT_GAS_LIMIT,
    AccountSlice,
    ExecutionEnv,
    deploy,
    execute,
    run_test,
)

logger = logging.getLogger(__name__)

DEFAULT_PER_TEST_TIMEOUT = 5.0

StatusName = Literal["success", "require_failed", "out_of_gas"]


class Call(BaseModel):
    model_config = ConfigDict(extra="forbid")

    caller: int = Field(..., ge=0)
    function: str
    args: list[int | bool] = Field(default_factory=list)
    value: int = Field(0, ge=0)


class TransactionRecord(BaseModel):
    """One observed call: pre-state slice, call, post-state slice, return value"""

    model_config = ConfigDict(extra="forbid")

    contract_address: int = CONTRACT_ADDRESS
    pre_state: dict[int, AccountSlice]
    call: Call
    post_state: dict[int, AccountSlice]
    return_value: Optional[int | bool] = None
    status: StatusName = "success"


class TestCase(TransactionRecord):
    """A replay-checked TransactionRecord"""

    __test__ = False  # not a pytest test class

    id: str
    source: int = Field(..., ge=0, description="index of the record in its log")


class Discard(BaseModel):
    source: int
    reason: str


class Scenario(BaseModel):
    """Fixture accounts and the calls to record, in order"""

    model_config = ConfigDict(extra="forbid")

    contract_address: int = CONTRACT_ADDRESS
    accounts: dict[int, int] = Field(default_factory=dict)
    contract_balance: int = Field(0, ge=0)
    storage: dict[str, int | bool] = Field(default_factory=dict)
    gas_limit: int = Field(DEFAULT_GAS_LIMIT, gt=0)
    calls: list[Call] = Field(default_factory=list)

    @classmethod
    def load(cls, path: str | Path) -> Scenario:
        return load_model(cls, path)


def record_transactions(
    contract: n.Contract,
    scenario: Scenario,
    table: CostTable = DEFAULT_COST_TABLE,
) -> list[TransactionRecord]:
    """Run the scenario's calls in order on an evolving world state.

    Failing requires are recorded too (the post-state then equals the pre-state).

    Raises:
        ExecutionError: a call does not fit the contract (unknown function, bad
            arguments, caller unable to pay the value).
    """
    world = deploy(
        contract,
        balance=scenario.contract_balance,
        funded=scenario.accounts,
        storage=scenario.storage,
        address=scenario.contract_address,
    )
    records = []
    for index, call in enumerate(scenario.calls):
        env = ExecutionEnv(
            call.caller, call.function, tuple(call.args), call.value, scenario.gas_limit
        )
        try:
            result = execute(contract, world, env, table)
        except ExecutionError as e:
            raise ExecutionError(f"scenario call #{index} ({call.function}): {e}") from e
        touched = set(result.touched) | {call.caller, world.contract_address}
        records.append(
            TransactionRecord(
                contract_address=world.contract_address,
                pre_state=world.slice(touched),
                call=call,
                post_state=result.post_state.slice(touched),
                return_value=result.return_value,
                status=result.status.value,
            )
        )
        logger.debug("recorded %s -> %s", call.function, result.status.value)
        world = result.post_state
    return records


def _check(contract, record, timeout, table, gas_limit) -> Optional[str]:
    """None if the record replays on contract, else the reason it does not"""
    deadline = time.monotonic() + timeout
    try:
        verdict = run_test(contract, record, table, gas_limit, deadline=deadline)
    except ExecutionTimeout:
        return f"replay exceeded {timeout:g}s"
    return None if verdict.passed else verdict.reason


def generate_tests(
    contract: n.Contract,
    log: Sequence[TransactionRecord],
    per_test_timeout: float = DEFAULT_PER_TEST_TIMEOUT,
    table: CostTable = DEFAULT_COST_TABLE,
    gas_limit: int = DEFAULT_GAS_LIMIT,
    workers: Optional[int] = None,
) -> tuple[list[TestCase], list[Discard]]:
    """Replay every record on contract; matching ones become tests, the rest are
    discarded with a reason"""
    with ThreadPoolExecutor(max_workers=workers) as pool:
        reasons = list(
            pool.map(
                lambda record: _check(
                    contract, record, per_test_timeout, table, gas_limit
                ),
                log,
            )
        )
    tests, discards = [], []
    for index, (record, reason) in enumerate(zip(log, reasons)):
        if reason is None:
            tests.append(
                TestCase(id=f"t{index:04d}", source=index, **record.model_dump())
            )
        else:
            discards.append(Discard(source=index, reason=reason))
    if discards:
        logger.warning("%d of %d transactions discarded", len(discards), len(log))
    return tests, discards


#########
# JSONL
#########

Model = TypeVar("Model", bound=BaseModel)


def read_jsonl(path: str | Path, model: type[Model]) -> list[Model]:
    """Validate every non-blank line of a JSON-lines file as `model`"""
    items = []
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as e:
        raise ConfigError(f"cannot read {path}: {e}") from e
    for number, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            items.append(model.model_validate_json(line))
        except ValidationError as e:
            raise ConfigError(f"{path}:{number}: invalid {model.__name__}: {e}") from e
    return items


def write_jsonl(path: str | Path, items: Iterable[BaseModel]):
    with open(path, "w", encoding="utf-8") as out:
        for item in items:
            out.write(item.model_dump_json() + "\n")
