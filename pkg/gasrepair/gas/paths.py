"""
Symbolic path enumeration and gas formulas.

Paths are enumerated per public function over the statement tree.  Every branch
point (if, require, the exit test of a loop) splits the path; a while loop is
summarised once with a trip-count variable:

    exit path         jump + cond * (n + 1) + body * n
    terminating path  jump + cond * (n + 1) + body * n + t

where ``body`` is one continuing resolution of the loop body and ``t`` a resolution
that leaves the function (return or revert) during iteration n + 1.  A body with
no continuing resolution runs at most once and gets no variable.  Trip variables are
named n1, n2, ... in contract document order; nested loops multiply them.

Each Step carries the opcode-kind the interpreter charges for the same node, so a
path formula evaluated at the concrete trip counts equals the interpreter's gas for
any execution following that path (storage writes excepted, which are priced by a
value only known at run time: a literal zero is priced as zero, anything else as
non-zero).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import TYPE_CHECKING, Iterable, Optional, Sequence

from ..config import CostTable
from ..exceptions import (
    ExecutionError,
    ExecutionTimeout,
    PathExplosion,
    ReplayError,
    WeightError,
)
from ..lang import nodes as n
from ..lang.dataflow import contains, names_read, names_written
from ..lang.printer import expression_text, statement_header
from ..vm import (
    DEFAULT_COST_TABLE,
    DEFAULT_GAS_LIMIT,
    frame_words,
    replay,
)
from .formula import GasFormula, total

if TYPE_CHECKING:  # pragma: no cover
    from ..testgen import TransactionRecord

logger = logging.getLogger(__name__)

DEFAULT_PATH_CAP = 512

ONE = GasFormula.constant(1)


@dataclass(frozen=True)
class Step:
    node: n.NodePath
    kind: str
    weight: GasFormula
    label: str = ""
    words: int = 0

    def gas(self, table: CostTable) -> GasFormula:
        if self.kind == "memory":
            return self.weight * table.memory_expansion(0, self.words)
        return self.weight * table.cost(self.kind)


@dataclass(frozen=True)
class Path:
    """One branch resolution of a public function"""

    function: str
    steps: tuple[Step, ...]
    loop_vars: tuple[tuple[n.NodePath, str], ...] = ()
    condition: tuple[tuple[n.NodePath, bool], ...] = ()
    unbounded: frozenset[str] = frozenset()
    terminal: str = "end"

    @property
    def signature(self) -> tuple:
        """Syntactic identity of the path, independent of node positions"""
        return (
            self.function,
            self.terminal,
            tuple((s.label, s.kind, str(s.weight), s.words) for s in self.steps),
        )

    @property
    def skeleton(self) -> tuple:
        """Function, outcome and branch decisions (without where they are)"""
        return (self.function, self.terminal, tuple(taken for _, taken in self.condition))

    @property
    def decisions(self) -> frozenset[tuple[n.NodePath, bool]]:
        """Branch decisions outside loop exit tests (what a concrete run can match)"""
        loops = {path for path, _ in self.loop_vars}
        return frozenset((p, t) for p, t in self.condition if p not in loops)


@dataclass
class _Partial:
    steps: list[Step] = field(default_factory=list)
    condition: list[tuple[n.NodePath, bool]] = field(default_factory=list)
    loop_vars: list[tuple[n.NodePath, str]] = field(default_factory=list)
    unbounded: set[str] = field(default_factory=set)
    terminal: Optional[str] = None

    def copy(self) -> _Partial:
        return _Partial(
            list(self.steps),
            list(self.condition),
            list(self.loop_vars),
            set(self.unbounded),
            self.terminal,
        )

    def join(self, other: _Partial) -> _Partial:
        return _Partial(
            self.steps + other.steps,
            self.condition + other.condition,
            self.loop_vars + other.loop_vars,
            self.unbounded | other.unbounded,
            other.terminal,
        )


def loop_variables(contract: n.Contract) -> dict[n.NodePath, str]:
    """Trip-count variable of every loop, numbered in document order"""
    loops = [path for path, node in n.iter_nodes(contract) if isinstance(node, n.While)]
    return {path: f"n{index}" for index, path in enumerate(loops, start=1)}


def constant_value(expr: n.Expression) -> Optional[bool]:
    """Value of a literal-only boolean condition, else None"""
    match expr:
        case n.BoolLiteral(value=value):
            return value
        case n.Not(operand=operand):
            inner = constant_value(operand)
            return None if inner is None else not inner
        case n.Binary(op="&&", lhs=lhs, rhs=rhs):
            left, right = constant_value(lhs), constant_value(rhs)
            if left is False or right is False:
                return False
            return True if left and right else None
        case n.Binary(op="||", lhs=lhs, rhs=rhs):
            left, right = constant_value(lhs), constant_value(rhs)
            if left or right:
                return True
            return False if left is False and right is False else None
    return None


def loop_is_stuck(loop: n.While) -> bool:
    """True when nothing in the body can change the loop condition"""
    if names_read(loop.cond) & names_written(loop.body):
        return False
    if contains(loop.cond, n.BalanceOf) and contains(loop.body, n.Send):
        return False
    return True


class _Enumerator:
    def __init__(self, contract: n.Contract, function: n.Function, cap: int):
        self.contract = contract
        self.function = function
        self.cap = cap
        self.loop_vars = loop_variables(contract)
        self.state = {v.name for v in contract.state_vars}

    def run(self) -> list[Path]:
        fn_path = self.contract.function_id(self.function.name).path
        entry = _Partial(
            [
                Step(
                    fn_path,
                    "memory",
                    ONE,
                    f"function {self.function.name}",
                    frame_words(self.function),
                )
            ]
        )
        params = frozenset(p.name for p in self.function.params)
        partials = self._block(self.function.body, fn_path + (0,), ONE, [entry], params)
        paths = []
        for partial in partials:
            paths.append(
                Path(
                    self.function.name,
                    tuple(partial.steps),
                    tuple(partial.loop_vars),
                    tuple(partial.condition),
                    frozenset(partial.unbounded),
                    partial.terminal or "end",
                )
            )
        return paths

    def _check(self, partials: list[_Partial]) -> list[_Partial]:
        if len(partials) > self.cap:
            raise PathExplosion(self.function.name, self.cap)
        return partials

    def _block(self, block, path, weight, partials, scope) -> list[_Partial]:
        for index, statement in enumerate(block.statements):
            out = []
            for partial in partials:
                if partial.terminal is not None:
                    out.append(partial)
                    continue
                for tail in self._statement(statement, path + (index,), weight, scope):
                    out.append(partial.join(tail))
            partials = self._check(out)
            if isinstance(statement, n.VarDecl):
                scope = scope | {statement.name}
        return partials

    # expressions: post-order steps, mirroring the interpreter

    def _expr(self, expr, path, weight, scope, out: list[Step]):
        label = expression_text(expr)
        match expr:
            case n.IntLiteral() | n.BoolLiteral():
                out.append(Step(path, "push", weight, label))
            case n.Var(name=name):
                kind = "mload" if name in scope else "sload"
                out.append(Step(path, kind, weight, label))
            case n.MappingIndex(key=key):
                self._expr(key, path + (0,), weight, scope, out)
                out.append(Step(path, "sha3", weight, label))
                out.append(Step(path, "sload", weight, label))
            case n.Binary(op=op, lhs=lhs, rhs=rhs):
                self._expr(lhs, path + (0,), weight, scope, out)
                self._expr(rhs, path + (1,), weight, scope, out)
                out.append(Step(path, n.OPCODES[op], weight, label))
            case n.Not(operand=operand):
                self._expr(operand, path + (0,), weight, scope, out)
                out.append(Step(path, "not", weight, label))
            case n.MsgSender():
                out.append(Step(path, "caller", weight, label))
            case n.MsgValue():
                out.append(Step(path, "callvalue", weight, label))
            case n.BalanceOf(address=address):
                self._expr(address, path + (0,), weight, scope, out)
                out.append(Step(path, "balance", weight, label))
            case n.Send(target=target, amount=amount):
                self._expr(target, path + (0,), weight, scope, out)
                self._expr(amount, path + (1,), weight, scope, out)
                out.append(Step(path, "send", weight, label))

    def _steps(self, expr, path, weight, scope) -> list[Step]:
        out: list[Step] = []
        self._expr(expr, path, weight, scope, out)
        return out

    @staticmethod
    def _store_kind(value: n.Expression) -> str:
        if isinstance(value, (n.IntLiteral, n.BoolLiteral)) and not value.value:
            return "sstore_zero"
        return "sstore_nonzero"

    # statements: list of outcomes, each a _Partial

    def _statement(self, stmt, path, weight, scope) -> list[_Partial]:
        label = statement_header(stmt)
        match stmt:
            case n.VarDecl(init=init):
                steps = (
                    [Step(path, "push", weight, label)]
                    if init is None
                    else self._steps(init, path + (0,), weight, scope)
                )
                steps.append(Step(path, "mstore", weight, label))
                return [_Partial(steps)]
            case n.Assign(target=target, value=value):
                steps: list[Step] = []
                if isinstance(target, n.MappingIndex):
                    steps += self._steps(target.key, path + (0, 0), weight, scope)
                    steps.append(Step(path + (0,), "sha3", weight, label))
                    steps += self._steps(value, path + (1,), weight, scope)
                    steps.append(Step(path, self._store_kind(value), weight, label))
                else:
                    steps += self._steps(value, path + (1,), weight, scope)
                    kind = "mstore" if target.name in scope else self._store_kind(value)
                    steps.append(Step(path, kind, weight, label))
                return [_Partial(steps)]
            case n.ExprStmt(expr=expr):
                steps = self._steps(expr, path + (0,), weight, scope)
                steps.append(Step(path, "pop", weight, label))
                return [_Partial(steps)]
            case n.Return(value=value):
                steps = [] if value is None else self._steps(value, path + (0,), weight, scope)
                steps.append(Step(path, "return", weight, label))
                return [_Partial(steps, terminal="return")]
            case n.Require(cond=cond):
                steps = self._steps(cond, path + (0,), weight, scope)
                steps.append(Step(path, "jumpi", weight, label))
                outcomes = []
                constant = constant_value(cond)
                if constant is not False:
                    outcomes.append(_Partial(list(steps), [(path, True)]))
                if constant is not True:
                    outcomes.append(_Partial(list(steps), [(path, False)], terminal="revert"))
                return outcomes
            case n.If(cond=cond, then=then, orelse=orelse):
                steps = self._steps(cond, path + (0,), weight, scope)
                steps.append(Step(path, "jumpi", weight, label))
                constant = constant_value(cond)
                outcomes = []
                if constant is not False:
                    head = _Partial(list(steps), [(path, True)])
                    outcomes += self._block(then, path + (1,), weight, [head], scope)
                if constant is not True:
                    head = _Partial(list(steps), [(path, False)])
                    if orelse is None:
                        outcomes.append(head)
                    else:
                        outcomes += self._block(orelse, path + (2,), weight, [head], scope)
                return self._check(outcomes)
            case n.While():
                return self._loop(stmt, path, weight, scope, label)
        raise TypeError(f"not a statement: {stmt!r}")

    def _loop(self, loop: n.While, path, weight, scope, label) -> list[_Partial]:
        var = self.loop_vars[path]
        trips = GasFormula.variable(var)
        entry = [Step(path, "jump", weight, label)]
        constant = constant_value(loop.cond)

        def check(times: GasFormula) -> list[Step]:
            steps = self._steps(loop.cond, path + (0,), weight * times, scope)
            steps.append(Step(path, "jumpi", weight * times, label))
            return steps

        if constant is False:
            return [_Partial(entry + check(ONE), [(path, False)])]

        # body resolutions: repeated ones (weight * n) and a once-only final one
        repeated = self._block(loop.body, path + (1,), weight * trips, [_Partial()], scope)
        final = self._block(loop.body, path + (1,), weight, [_Partial()], scope)
        continuing = [p for p in repeated if p.terminal is None]
        leaving = [p for p in final if p.terminal is not None]
        stuck = loop_is_stuck(loop)
        outcomes = []
        if not continuing:
            if constant is not True:
                outcomes.append(_Partial(entry + check(ONE), [(path, False)]))
            for t in leaving:
                head = _Partial(entry + check(ONE), [(path, True)])
                outcomes.append(head.join(t))
            return self._check(outcomes)

        for body in continuing:
            head = _Partial(entry + check(trips + 1), [(path, True)], [(path, var)])
            looped = head.join(body)
            if stuck:
                looped.unbounded.add(var)
            if constant is True and not leaving:
                diverging = looped.copy()
                diverging.terminal = "diverge"
                diverging.unbounded.add(var)
                outcomes.append(diverging)
            elif constant is not True:
                exit_path = looped.copy()
                exit_path.condition.append((path, False))
                outcomes.append(exit_path)
            for t in leaving:
                outcomes.append(looped.join(t))
        return self._check(outcomes)


def enumerate_paths(
    contract: n.Contract,
    cap: int = DEFAULT_PATH_CAP,
    functions: Optional[Iterable[str]] = None,
) -> list[Path]:
    """Every path of every public function (or of the named functions).

    Raises:
        PathExplosion: a function has more than `cap` paths.
    """
    wanted = None if functions is None else set(functions)
    paths: list[Path] = []
    for function in contract.functions:
        if wanted is None or function.name in wanted:
            paths.extend(_Enumerator(contract, function, cap).run())
    return paths


def path_gas_formula(path: Path, table: CostTable = DEFAULT_COST_TABLE) -> GasFormula:
    return total(step.gas(table) for step in path.steps)


def expected_gas_formula(
    contract: n.Contract,
    weights: Optional[Sequence[Fraction]] = None,
    table: CostTable = DEFAULT_COST_TABLE,
    cap: int = DEFAULT_PATH_CAP,
    functions: Optional[Iterable[str]] = None,
    paths: Optional[list[Path]] = None,
) -> GasFormula:
    """Sum over paths of P_i times the path's formula (uniform P_i by default).

    Raises:
        WeightError: the weights do not match the enumerated paths.
    """
    if paths is None:
        paths = enumerate_paths(contract, cap, functions)
    if not paths:
        return GasFormula()
    if weights is None:
        weights = [Fraction(1, len(paths))] * len(paths)
    if len(weights) != len(paths):
        raise WeightError(f"{len(weights)} weights for {len(paths)} paths")
    if sum(Fraction(w) for w in weights) != 1 or any(w < 0 for w in weights):
        raise WeightError("path weights must be non-negative and sum to 1")
    return total(
        path_gas_formula(path, table) * Fraction(w) for path, w in zip(paths, weights)
    )


def lifespan_gas(
    contract: n.Contract,
    records: Sequence[TransactionRecord],
    table: CostTable = DEFAULT_COST_TABLE,
    gas_limit: int = DEFAULT_GAS_LIMIT,
) -> int:
    """Total concrete gas of a transaction history replayed on contract.

    Raises:
        ReplayError: listing every transaction that could not be executed.
    """
    used = 0
    failures = []
    for index, record in enumerate(records):
        try:
            used += replay(contract, record, table, gas_limit).gas_used
        except (ExecutionError, ExecutionTimeout) as e:
            failures.append((index, str(e)))
    if failures:
        raise ReplayError(failures)
    return used


def log_weights(
    contract: n.Contract,
    records: Sequence[TransactionRecord],
    paths: Optional[list[Path]] = None,
    table: CostTable = DEFAULT_COST_TABLE,
    gas_limit: int = DEFAULT_GAS_LIMIT,
) -> list[Fraction]:
    """Path probabilities estimated from the paths a transaction log visits.

    A transaction visits the path of its function whose branch decisions (outside
    loop exit tests) equal those the interpreter recorded; transactions matching no
    path (e.g. taking different branches in different loop iterations) are ignored.

    Raises:
        WeightError: no transaction matched any path.
    """
    if paths is None:
        paths = enumerate_paths(contract)
    index = {}
    for i, path in enumerate(paths):
        index.setdefault((path.function, path.decisions), i)
    counts = [0] * len(paths)
    loops = set(loop_variables(contract))
    for record in records:
        try:
            result = replay(contract, record, table, gas_limit)
        except (ExecutionError, ExecutionTimeout):
            continue
        decisions = frozenset((p, t) for p, t in result.branches if p not in loops)
        hit = index.get((record.call.function, decisions))
        if hit is None:
            logger.debug("transaction on %s matched no path", record.call.function)
            continue
        counts[hit] += 1
    matched = sum(counts)
    if not matched:
        raise WeightError("no logged transaction matches an enumerated path")
    return [Fraction(count, matched) for count in counts]
