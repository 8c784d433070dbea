"""
Gas-metered MiniSol interpreter.

    Core Model:
        - WorldState: accounts with balances and storage; the contract under
          execution is one of them.
        - MachineState: gas used, memory size, call depth, local scopes, trace.
        - ExecutionEnv: caller, value, function, arguments, gas limit.

    Gas:
        - Every evaluated expression node and executed statement charges one
          opcode-kind from the CostTable; instruction_gas() is the single pricing
          function, so a trace's gas is the sum of its steps.
        - The pricing of each node kind mirrors gas.paths exactly: the symbolic path
          formulas and concrete executions agree by construction.

    Semantics worth knowing:
        - uint arithmetic wraps modulo 2**256 and flags the wrapping node.
        - Send never throws: it returns False when the contract cannot pay.
        - A failed Require rolls the world state back; gas used is still reported.
        - Running out of gas rolls back too and reports gas_used == gas_limit.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import TYPE_CHECKING, Optional

from pydantic import BaseModel, ConfigDict, Field

from .config import AdversaryConfig, CostTable
from .exceptions import ExecutionError, ExecutionTimeout
from .lang import nodes as n

if TYPE_CHECKING:  # pragma: no cover
    from .testgen import TransactionRecord

logger = logging.getLogger(__name__)

CONTRACT_ADDRESS = 1000
DEFAULT_GAS_LIMIT = 1_000_000
DEFAULT_COST_TABLE = CostTable()
Value = int | bool

# how often (in charged steps) the wall-clock deadline is checked
_DEADLINE_STRIDE = 512


class Status(str, Enum):
    SUCCESS = "success"
    REQUIRE_FAILED = "require_failed"
    OUT_OF_GAS = "out_of_gas"


###############
# World state
###############


@dataclass
class Account:
    balance: int = 0
    storage: dict[str, Value] = field(default_factory=dict)

    def copy(self) -> Account:
        return Account(self.balance, dict(self.storage))


@dataclass
class WorldState:
    """Accounts by address; storage slots absent from an account read as zero"""

    accounts: dict[int, Account] = field(default_factory=dict)
    contract_address: int = CONTRACT_ADDRESS

    def copy(self) -> WorldState:
        return WorldState(
            {a: acct.copy() for a, acct in self.accounts.items()},
            self.contract_address,
        )

    def account(self, address: int) -> Account:
        """The account at address, created empty on first use"""
        return self.accounts.setdefault(address, Account())

    def balance(self, address: int) -> int:
        acct = self.accounts.get(address)
        return acct.balance if acct else 0

    @property
    def storage(self) -> dict[str, Value]:
        return self.account(self.contract_address).storage

    def total_balance(self) -> int:
        return sum(acct.balance for acct in self.accounts.values())

    def slice(self, addresses) -> dict[int, AccountSlice]:
        """Serializable snapshot of the given accounts"""
        out = {}
        for address in sorted(addresses):
            acct = self.accounts.get(address, Account())
            out[address] = AccountSlice(
                balance=acct.balance, storage=dict(sorted(acct.storage.items()))
            )
        return out

    @classmethod
    def from_slices(
        cls, slices: dict[int, AccountSlice], contract_address: int
    ) -> WorldState:
        accounts = {
            address: Account(s.balance, _normalized(s.storage))
            for address, s in slices.items()
        }
        return cls(accounts, contract_address)


class AccountSlice(BaseModel):
    """Balance and storage of one account, as captured in logs and tests"""

    model_config = ConfigDict(extra="forbid")

    balance: int = Field(0, ge=0)
    storage: dict[str, Value] = Field(default_factory=dict)


def _normalized(storage: dict[str, Value]) -> dict[str, Value]:
    return {slot: v for slot, v in storage.items() if not _is_zero(v)}


def _is_zero(value) -> bool:
    return value is False or value == 0


def slot_name(name: str, key: Optional[Value] = None) -> str:
    """Storage slot of a state variable, or of one mapping entry"""
    if key is None:
        return name
    if isinstance(key, bool):
        return f"{name}[{'true' if key else 'false'}]"
    return f"{name}[{key}]"


def deploy(
    contract: n.Contract,
    balance: int = 0,
    funded: Optional[dict[int, int]] = None,
    storage: Optional[dict[str, Value]] = None,
    address: int = CONTRACT_ADDRESS,
) -> WorldState:
    """Initial world: the contract with its initialised state plus funded accounts"""
    world = WorldState(contract_address=address)
    for account, amount in (funded or {}).items():
        world.account(account).balance = amount
    contract_account = world.account(address)
    contract_account.balance = balance
    for var in contract.state_vars:
        if isinstance(var.init, (n.IntLiteral, n.BoolLiteral)) and not _is_zero(
            var.init.value
        ):
            contract_account.storage[var.name] = var.init.value
    contract_account.storage.update(_normalized(storage or {}))
    return world


#################
# Machine state
#################


@dataclass(frozen=True)
class TraceStep:
    node: n.NodePath
    kind: str
    gas: int


@dataclass(frozen=True)
class Flag:
    """Runtime observation tied to a node: 'overflow_wrapped', 'unchecked_send_failed'"""

    kind: str
    node: n.NodeId


@dataclass
class MachineState:
    gas_used: int = 0
    memory_words: int = 0
    call_depth: int = 0
    frames: list[dict[str, Value]] = field(default_factory=list)
    trace: list[TraceStep] = field(default_factory=list)


@dataclass(frozen=True)
class ExecutionEnv:
    caller: int
    function: str
    args: tuple[Value, ...] = ()
    call_value: int = 0
    gas_limit: int = DEFAULT_GAS_LIMIT


@dataclass
class ExecutionResult:
    post_state: WorldState
    return_value: Optional[Value]
    gas_used: int
    status: Status
    flags: frozenset[Flag] = frozenset()
    trace: tuple[TraceStep, ...] = ()
    branches: tuple[tuple[n.NodePath, bool], ...] = ()
    loop_counts: dict[n.NodePath, int] = field(default_factory=dict)
    touched: frozenset[int] = frozenset()

    @property
    def succeeded(self) -> bool:
        return self.status is Status.SUCCESS


#######
# Gas
#######


def instruction_gas(
    kind: str,
    world: WorldState,
    machine: MachineState,
    table: CostTable = DEFAULT_COST_TABLE,
    *,
    value: Optional[Value] = None,
    words: int = 0,
) -> int:
    """Gas of one step: the opcode-kind price plus any memory expansion.

    Args:
        kind: opcode-kind; "sstore" is priced by the written value, "memory" by the
            words requested on top of the current memory size, "noop" is free.
        world: state before the step (kept for pricing rules that depend on it).
        machine: state before the step.
        value: the value written, for "sstore".
        words: the number of new memory words, for "memory".
    """
    if kind == "noop":
        return 0
    if kind == "sstore":
        return table.cost("sstore_zero" if _is_zero(value) else "sstore_nonzero")
    if kind == "memory":
        return table.memory_expansion(
            machine.memory_words, machine.memory_words + words
        )
    return table.cost(kind)


def frame_words(function: n.Function) -> int:
    """Memory words allocated when a call to function starts"""
    declarations = sum(
        1 for _, node in n.iter_nodes(function.body) if isinstance(node, n.VarDecl)
    )
    return len(function.params) + declarations


##############
# Interpreter
##############


@dataclass
class AdversaryHook:
    """Execution hook: the attacker at config.address re-enters on receiving value"""

    config: AdversaryConfig

    def targets(self, address: int) -> bool:
        return address == self.config.address


def adversary_callback(config: AdversaryConfig) -> AdversaryHook:
    """Build the reentrancy hook passed to execute()"""
    return AdversaryHook(config)


class _Return(Exception):
    def __init__(self, value):
        self.value = value


class _Revert(Exception):
    pass


class _OutOfGas(Exception):
    pass


def execute(
    contract: n.Contract,
    world: WorldState,
    env: ExecutionEnv,
    table: CostTable = DEFAULT_COST_TABLE,
    hook: Optional[AdversaryHook] = None,
    deadline: Optional[float] = None,
) -> ExecutionResult:
    """Run one transaction.

    Args:
        contract: a typechecked contract.
        world: state before the transaction (not modified).
        env: caller, value, function and arguments, gas limit.
        table: gas prices.
        hook: optional adversary re-entering on Send.
        deadline: time.monotonic() value after which ExecutionTimeout is raised.

    Returns:
        ExecutionResult; gas_used equals the sum of the trace steps' gas.

    Raises:
        ExecutionError: the environment does not fit the contract.
        ExecutionTimeout: the deadline passed.
    """
    return _Interpreter(contract, world, env, table, hook, deadline).run()


class _Interpreter:
    def __init__(self, contract, world, env, table, hook, deadline):
        self.contract: n.Contract = contract
        self.initial = world
        self.world: WorldState = world.copy()
        self.env: ExecutionEnv = env
        self.table: CostTable = table
        self.hook: Optional[AdversaryHook] = hook
        self.reentries_left = hook.config.reentries if hook else 0
        self.deadline = deadline
        self.machine = MachineState()
        self.flags: set[Flag] = set()
        self.branches: list[tuple[n.NodePath, bool]] = []
        self.loop_counts: dict[n.NodePath, int] = {}
        self.touched: set[int] = {env.caller, world.contract_address}
        self.sender = env.caller
        self.value = env.call_value
        self.function: Optional[n.Function] = None
        self.function_path: n.NodePath = ()

    # public entry

    def run(self) -> ExecutionResult:
        function = self._resolve(self.env.function, self.env.args)
        caller = self.env.caller
        if self.env.call_value:
            if not function.payable:
                return self._result(None, Status.REQUIRE_FAILED, rollback=True)
            if self.world.balance(caller) < self.env.call_value:
                raise ExecutionError(
                    f"caller {caller} cannot fund a value of {self.env.call_value}"
                )
            self._transfer(caller, self.world.contract_address, self.env.call_value)
        try:
            value = self._call(function, self.env.args, caller, self.env.call_value)
        except _Revert:
            return self._result(None, Status.REQUIRE_FAILED, rollback=True)
        except _OutOfGas:
            return self._result(None, Status.OUT_OF_GAS, rollback=True)
        return self._result(value, Status.SUCCESS)

    def _result(self, value, status: Status, rollback=False) -> ExecutionResult:
        return ExecutionResult(
            post_state=self.initial.copy() if rollback else self.world,
            return_value=value,
            gas_used=self.machine.gas_used,
            status=status,
            flags=frozenset(self.flags),
            trace=tuple(self.machine.trace),
            branches=tuple(self.branches),
            loop_counts=dict(self.loop_counts),
            touched=frozenset(self.touched),
        )

    def _resolve(self, name: str, args) -> n.Function:
        function = self.contract.function(name)
        if function is None:
            raise ExecutionError(f"unknown function '{name}'")
        if len(args) != len(function.params):
            raise ExecutionError(
                f"'{name}' takes {len(function.params)} argument(s), got {len(args)}"
            )
        for param, arg in zip(function.params, args):
            if not _fits(arg, param.type):
                raise ExecutionError(f"argument {param.name}={arg!r} is not {param.type}")
        return function

    # calls

    def _call(self, function: n.Function, args, sender: int, value: int):
        """Run a function body in a fresh frame and memory; returns its value"""
        saved = (
            self.machine.frames,
            self.machine.memory_words,
            self.sender,
            self.value,
            self.function,
            self.function_path,
        )
        self.machine.frames = [{p.name: a for p, a in zip(function.params, args)}]
        self.machine.memory_words = 0
        self.sender, self.value, self.function = sender, value, function
        self.function_path = self.contract.function_id(function.name).path
        try:
            self._charge("memory", self.function_path, words=frame_words(function))
            self.machine.memory_words = frame_words(function)
            try:
                self._block(function.body, self.function_path + (0,))
            except _Return as r:
                return r.value
            if function.returns is None:
                return None
            return n.zero_value(function.returns)
        finally:
            (
                self.machine.frames,
                self.machine.memory_words,
                self.sender,
                self.value,
                self.function,
                self.function_path,
            ) = saved

    def _charge(self, kind: str, path: n.NodePath, value=None, words: int = 0):
        gas = instruction_gas(
            kind, self.world, self.machine, self.table, value=value, words=words
        )
        machine = self.machine
        if machine.gas_used + gas > self.env.gas_limit:
            machine.gas_used = self.env.gas_limit
            raise _OutOfGas()
        machine.gas_used += gas
        machine.trace.append(TraceStep(path, kind, gas))
        if self.deadline is not None and len(machine.trace) % _DEADLINE_STRIDE == 0:
            if time.monotonic() > self.deadline:
                raise ExecutionTimeout(f"execution of '{self.env.function}' timed out")

    # statements

    def _block(self, block: n.Block, path: n.NodePath):
        self.machine.frames.append({})
        try:
            for index, statement in enumerate(block.statements):
                self._statement(statement, path + (index,))
        finally:
            self.machine.frames.pop()

    def _statement(self, stmt: n.Statement, path: n.NodePath):
        match stmt:
            case n.VarDecl(name=name, type=type_name, init=init):
                if init is None:
                    self._charge("push", path)
                    value = n.zero_value(type_name)
                else:
                    value = self._eval(init, path + (0,))
                self._charge("mstore", path)
                self.machine.frames[-1][name] = value
            case n.Assign(target=target, value=value_expr):
                self._assign(target, value_expr, path)
            case n.If(cond=cond, then=then, orelse=orelse):
                taken = self._eval(cond, path + (0,))
                self._charge("jumpi", path)
                self.branches.append((path, taken))
                if taken:
                    self._block(then, path + (1,))
                elif orelse is not None:
                    self._block(orelse, path + (2,))
            case n.While(cond=cond, body=body):
                self._charge("jump", path)
                while True:
                    taken = self._eval(cond, path + (0,))
                    self._charge("jumpi", path)
                    self.branches.append((path, taken))
                    if not taken:
                        break
                    self._block(body, path + (1,))
                    self.loop_counts[path] = self.loop_counts.get(path, 0) + 1
            case n.Require(cond=cond):
                passed = self._eval(cond, path + (0,))
                self._charge("jumpi", path)
                self.branches.append((path, passed))
                if not passed:
                    raise _Revert()
            case n.Return(value=value_expr):
                value = None if value_expr is None else self._eval(value_expr, path + (0,))
                self._charge("return", path)
                raise _Return(value)
            case n.ExprStmt(expr=expr):
                value = self._eval(expr, path + (0,))
                self._charge("pop", path)
                if isinstance(expr, n.Send) and value is False:
                    self.flags.add(Flag("unchecked_send_failed", n.NodeId(path + (0,))))

    def _assign(self, target: n.Expression, value_expr: n.Expression, path):
        if isinstance(target, n.MappingIndex):
            key = self._eval(target.key, path + (0, 0))
            self._charge("sha3", path + (0,))
            value = self._eval(value_expr, path + (1,))
            self._charge("sstore", path, value=value)
            self._store(slot_name(target.name, key), value)
            return
        value = self._eval(value_expr, path + (1,))
        frame = self._frame_of(target.name)
        if frame is not None:
            self._charge("mstore", path)
            frame[target.name] = value
        else:
            self._charge("sstore", path, value=value)
            self._store(slot_name(target.name), value)

    def _frame_of(self, name: str) -> Optional[dict]:
        for frame in reversed(self.machine.frames):
            if name in frame:
                return frame
        return None

    def _store(self, slot: str, value: Value):
        storage = self.world.storage
        if _is_zero(value):
            storage.pop(slot, None)
        else:
            storage[slot] = value

    def _load(self, slot: str, type_name: n.TypeName) -> Value:
        return self.world.storage.get(slot, n.zero_value(type_name))

    # expressions

    def _eval(self, expr: n.Expression, path: n.NodePath) -> Value:
        match expr:
            case n.IntLiteral(value=value) | n.BoolLiteral(value=value):
                self._charge("push", path)
                return value
            case n.Var(name=name):
                frame = self._frame_of(name)
                if frame is not None:
                    self._charge("mload", path)
                    return frame[name]
                self._charge("sload", path)
                return self._load(name, self.contract.state_var(name).type)
            case n.MappingIndex(name=name, key=key_expr):
                key = self._eval(key_expr, path + (0,))
                self._charge("sha3", path)
                self._charge("sload", path)
                value_type = self.contract.state_var(name).type.value
                return self._load(slot_name(name, key), value_type)
            case n.Binary(op=op, lhs=lhs, rhs=rhs):
                left = self._eval(lhs, path + (0,))
                right = self._eval(rhs, path + (1,))
                self._charge(n.OPCODES[op], path)
                return self._binary(op, left, right, path)
            case n.Not(operand=operand):
                value = self._eval(operand, path + (0,))
                self._charge("not", path)
                return not value
            case n.MsgSender():
                self._charge("caller", path)
                return self.sender
            case n.MsgValue():
                self._charge("callvalue", path)
                return self.value
            case n.BalanceOf(address=address_expr):
                address = self._eval(address_expr, path + (0,))
                self._charge("balance", path)
                self.touched.add(address)
                return self.world.balance(address)
            case n.Send(target=target_expr, amount=amount_expr):
                target = self._eval(target_expr, path + (0,))
                amount = self._eval(amount_expr, path + (1,))
                self._charge("send", path)
                self.touched.add(target)
                return self._send(target, amount)
        raise ExecutionError(f"cannot evaluate {type(expr).__name__}")

    def _binary(self, op: str, left, right, path) -> Value:
        match op:
            case "+":
                result = left + right
            case "-":
                result = left - right
            case "*":
                result = left * right
            case "/":
                return 0 if right == 0 else left // right
            case "<":
                return left < right
            case "<=":
                return left <= right
            case ">":
                return left > right
            case ">=":
                return left >= right
            case "==":
                return left == right
            case "!=":
                return left != right
            case "&&":
                return left and right
            case "||":
                return left or right
            case _:
                raise ExecutionError(f"unknown operator '{op}'")
        if not 0 <= result <= n.UINT_MAX:
            self.flags.add(Flag("overflow_wrapped", n.NodeId(path)))
            result %= n.UINT_MODULUS
        return result

    # value transfer

    def _transfer(self, source: int, target: int, amount: int):
        self.world.account(source).balance -= amount
        self.world.account(target).balance += amount

    def _send(self, target: int, amount: int) -> bool:
        contract = self.world.contract_address
        if self.world.balance(contract) < amount:
            return False
        if self.hook is None or not self.hook.targets(target) or not self.reentries_left:
            self._transfer(contract, target, amount)
            return True
        config = self.hook.config
        depth = self.machine.call_depth + 1
        if depth > config.max_depth:
            return False
        snapshot = self.world.copy()
        self._transfer(contract, target, amount)
        self.reentries_left -= 1
        function = self._resolve(config.function, config.args)
        logger.debug("adversary re-enters %s at depth %d", function.name, depth)
        self.machine.call_depth = depth
        try:
            self._call(function, config.args, config.address, 0)
        except _Revert:
            self.world = snapshot
            return False
        finally:
            self.machine.call_depth = depth - 1
        return True


def _fits(value, type_name: n.TypeName) -> bool:
    if type_name == n.BOOL:
        return isinstance(value, bool)
    return isinstance(value, int) and not isinstance(value, bool) and 0 <= value <= n.UINT_MAX


############
# Run tests
############


@dataclass(frozen=True)
class TestVerdict:
    """Pass, or Fail with the first mismatched observable"""

    passed: bool
    reason: Optional[str] = None

    __test__ = False  # not a pytest test class


def replay(
    contract: n.Contract,
    record: TransactionRecord,
    table: CostTable = DEFAULT_COST_TABLE,
    gas_limit: int = DEFAULT_GAS_LIMIT,
    deadline: Optional[float] = None,
) -> ExecutionResult:
    """Execute a recorded call from its captured pre-state"""
    world = WorldState.from_slices(record.pre_state, record.contract_address)
    call = record.call
    env = ExecutionEnv(call.caller, call.function, tuple(call.args), call.value, gas_limit)
    return execute(contract, world, env, table, deadline=deadline)


def run_test(
    contract: n.Contract,
    test: TransactionRecord,
    table: CostTable = DEFAULT_COST_TABLE,
    gas_limit: int = DEFAULT_GAS_LIMIT,
    deadline: Optional[float] = None,
) -> TestVerdict:
    """Replay a recorded call from its pre-state and compare every observable"""
    try:
        result = replay(contract, test, table, gas_limit, deadline)
    except ExecutionError as e:
        return TestVerdict(False, f"cannot execute: {e}")
    if result.status.value != test.status:
        return TestVerdict(
            False, f"status mismatch: expected {test.status}, got {result.status.value}"
        )
    if result.return_value != test.return_value or type(result.return_value) is not type(
        test.return_value
    ):  # True == 1 in Python, the types must agree too
        return TestVerdict(
            False,
            f"return mismatch: expected {test.return_value!r}, got {result.return_value!r}",
        )
    actual = result.post_state.slice(test.post_state.keys())
    for address, expected in test.post_state.items():
        got = actual[address]
        if got.balance != expected.balance:
            return TestVerdict(
                False,
                f"balance mismatch at {address}: expected {expected.balance}, "
                f"got {got.balance}",
            )
        want = _normalized(expected.storage)
        if got.storage != want:
            slot = next(
                s
                for s in sorted(set(got.storage) | set(want))
                if got.storage.get(s) != want.get(s)
            )
            return TestVerdict(
                False,
                f"storage mismatch at {address}[{slot}]: expected {want.get(slot, 0)!r}, "
                f"got {got.storage.get(slot, 0)!r}",
            )
    return TestVerdict(True)
