"""
Vulnerability detectors: exception disorder, reentrancy, integer overflow and
transaction-order dependence.

Each detector is a syntactic/dataflow pass over one contract returning located
Vulnerability entries.  Locations are NodeIds of the analysed tree:
    - ED, RE: the Send expression
    - IO: the arithmetic Binary node
    - TOD: the StateVar declaration
The entry count of detect_all() is the first repair objective.
"""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Iterator, Optional

from .lang import nodes as n
from .lang.dataflow import conjuncts, names_read, names_written, state_names
from .lang.printer import pretty_print_with_lines

logger = logging.getLogger(__name__)


class VulnKind(str, Enum):
    ED = "ED"
    RE = "RE"
    IO = "IO"
    TOD = "TOD"

    @classmethod
    def parse_list(cls, text: str) -> frozenset[VulnKind]:
        """Parse a comma-separated list such as ``ED,RE``"""
        kinds = [part.strip().upper() for part in text.split(",") if part.strip()]
        try:
            return frozenset(cls(kind) for kind in kinds)
        except ValueError as e:
            raise ValueError(f"unknown vulnerability kind in '{text}'") from e


ALL_KINDS = frozenset(VulnKind)


@dataclass(frozen=True, order=True)
class Vulnerability:
    location: n.NodeId
    kind: VulnKind
    note: str = field(default="", compare=False)


@dataclass(frozen=True)
class VulnReport:
    entries: tuple[Vulnerability, ...] = ()

    def __len__(self):
        return len(self.entries)

    def __iter__(self) -> Iterator[Vulnerability]:
        return iter(self.entries)

    def counts(self) -> dict[str, int]:
        counter = Counter(v.kind.value for v in self.entries)
        return {kind.value: counter.get(kind.value, 0) for kind in VulnKind}

    def locations(self) -> tuple[n.NodeId, ...]:
        return tuple(v.location for v in self.entries)

    def to_json(self, contract: n.Contract) -> list[dict]:
        _, lines = pretty_print_with_lines(contract)
        return [
            {
                "kind": v.kind.value,
                "nodePath": str(v.location),
                "line": lines.get(v.location.path),
                "note": v.note,
            }
            for v in self.entries
        ]


def detect_all(
    contract: n.Contract, targeted: Optional[Iterable[VulnKind]] = None
) -> VulnReport:
    """Union of the detectors for the targeted kinds (all kinds by default)"""
    kinds = ALL_KINDS if targeted is None else frozenset(targeted)
    if not kinds:
        raise ValueError("at least one vulnerability kind must be targeted")
    found: set[Vulnerability] = set()
    for kind in sorted(kinds, key=lambda k: k.value):
        found.update(DETECTORS[kind](contract))
    return VulnReport(tuple(sorted(found)))


def _functions(contract: n.Contract) -> Iterator[tuple[n.NodePath, n.Function]]:
    offset = len(contract.state_vars)
    for index, function in enumerate(contract.functions):
        yield (offset + index,), function


def _sends(function: n.Function, path: n.NodePath):
    for sub_path, node in n.iter_nodes(function.body, path + (0,)):
        if isinstance(node, n.Send):
            yield sub_path, node


def _statement_chain(contract: n.Contract, path: n.NodePath):
    """(block path, index, statement) for every statement enclosing path, outermost first"""
    chain = []
    for cut in range(2, len(path) + 1):
        node = n.node_at(contract, path[:cut])
        if isinstance(node, n.Statement):
            chain.append((path[: cut - 1], path[cut - 1], node))
    return chain


#####################
# Exception disorder
#####################


def detect_ed(contract: n.Contract) -> list[Vulnerability]:
    """Sends whose success flag is neither required, branched on, nor returned"""
    found = []
    for fn_path, function in _functions(contract):
        for path, _ in _sends(function, fn_path):
            if not _send_checked(contract, function, fn_path, path):
                found.append(
                    Vulnerability(
                        n.NodeId(path),
                        VulnKind.ED,
                        f"result of send in '{function.name}' is not checked",
                    )
                )
    return found


def _send_checked(contract, function, fn_path, path) -> bool:
    chain = _statement_chain(contract, path)
    for block_path, index, statement in chain:
        stmt_path = block_path + (index,)
        in_cond = path[len(stmt_path)] == 0
        if isinstance(statement, (n.Require, n.If, n.While)) and in_cond:
            return True
    _, _, owner = chain[-1]
    owner_path = chain[-1][0] + (chain[-1][1],)
    if isinstance(owner, n.Return):
        return True
    bound = None
    if isinstance(owner, n.VarDecl):
        bound = owner.name
    elif isinstance(owner, n.Assign) and isinstance(owner.target, n.Var):
        bound = owner.target.name
    if bound is None:
        return False
    # the flag is checked if a later condition reads the variable it was bound to
    for sub_path, node in n.iter_nodes(function.body, fn_path + (0,)):
        if sub_path <= owner_path or owner_path == sub_path[: len(owner_path)]:
            continue
        if isinstance(node, (n.Require, n.If, n.While)) and bound in names_read(
            node.cond
        ):
            return True
    return False


##############
# Reentrancy
##############


def detect_re(contract: n.Contract) -> list[Vulnerability]:
    """Sends that are followed by a write to state that was read before the send"""
    found = []
    for fn_path, function in _functions(contract):
        state = state_names(contract, function)
        for path, _ in _sends(function, fn_path):
            before, after = _reads_before_writes_after(contract, path)
            shared = sorted(before & after & state)
            if shared:
                found.append(
                    Vulnerability(
                        n.NodeId(path),
                        VulnKind.RE,
                        f"'{', '.join(shared)}' updated after send in '{function.name}'",
                    )
                )
    return found


def _reads_before_writes_after(contract, path) -> tuple[set[str], set[str]]:
    reads: set[str] = set()
    writes: set[str] = set()
    chain = _statement_chain(contract, path)
    block_of = {}
    for block_path, index, statement in chain:
        block_of[block_path] = index
        if isinstance(statement, (n.If, n.While)):
            reads |= names_read(statement.cond)
        if isinstance(statement, n.While):
            # the body repeats: everything in it is both before and after the send
            reads |= names_read(statement.body)
            writes |= names_written(statement.body)
    _, _, own = chain[-1]
    if isinstance(own, (n.If, n.While)):
        # the send sits in the condition; the branches run after it
        reads |= names_read(own.cond)
        writes |= names_written(own)
    else:
        reads |= names_read(own)
    if isinstance(own, n.Assign):
        writes.add(own.target.name)

    blocks = [(block_path, index) for block_path, index, _ in chain]
    for block_path, index in blocks:
        block = n.node_at(contract, block_path)
        for earlier in block.statements[:index]:
            reads |= names_read(earlier)
    for block_path, index in reversed(blocks):
        block = n.node_at(contract, block_path)
        for later in block.statements[index + 1 :]:
            writes |= names_written(later)
            if isinstance(later, n.Return):
                return reads, writes
    return reads, writes


####################
# Integer overflow
####################


def detect_io(contract: n.Contract) -> list[Vulnerability]:
    """Unguarded uint +, - and * (no dominating require/if bounding the operands)"""
    found = []
    for fn_path, function in _functions(contract):
        body_path = fn_path + (0,)
        for path, node in n.iter_nodes(function.body, body_path):
            if not isinstance(node, n.Binary) or node.op not in ("+", "-", "*"):
                continue
            if _literal_only(node):
                continue
            guards = _dominating_conditions(contract, path)
            if any(_guards(cond, node) for cond in guards):
                continue
            found.append(
                Vulnerability(
                    n.NodeId(path),
                    VulnKind.IO,
                    f"unchecked '{node.op}' in '{function.name}'",
                )
            )
    return found


def _literal_only(expr: n.Expression) -> bool:
    return all(
        not isinstance(sub, n.Expression) or isinstance(sub, (n.IntLiteral, n.Binary))
        for _, sub in n.iter_nodes(expr)
    )


def _dominating_conditions(contract, path) -> list[n.Expression]:
    """Conditions known to hold when the node at path is evaluated.

    Walks the statement chain top-down: a require adds its condition once passed, an
    if/while adds its condition inside its body (or when the node is in the condition
    itself), and any statement writing a name read by a condition retires it.
    """
    live: list[n.Expression] = []

    def retire(written: set[str]):
        live[:] = [c for c in live if not names_read(c) & written]

    for block_path, index, statement in _statement_chain(contract, path):
        block = n.node_at(contract, block_path)
        for earlier in block.statements[:index]:
            retire(names_written(earlier))
            if isinstance(earlier, n.Require):
                live.append(earlier.cond)
        stmt_path = block_path + (index,)
        if isinstance(statement, (n.Require, n.If, n.While)):
            if path[len(stmt_path)] == 0 and isinstance(statement, n.Require):
                live.append(statement.cond)  # self-guarding comparison
            elif isinstance(statement, (n.If, n.While)):
                if path[len(stmt_path)] in (0, 1):
                    live.append(statement.cond)
    return [c for cond in live for c in _guard_candidates(cond)]


def _guard_candidates(cond: n.Expression) -> Iterator[n.Expression]:
    for part in conjuncts(cond):
        if isinstance(part, n.Binary) and part.op == "||":
            # `a == 0 || a * b / a == b`
            yield part.lhs
            yield part.rhs
        else:
            yield part


def _guards(cond: n.Expression, op: n.Binary) -> bool:
    """True if cond rules out wrap-around of op"""
    if not isinstance(cond, n.Binary):
        return False
    a, b = op.lhs, op.rhs
    match op.op:
        case "+":
            if _compares(cond, op, (a, b), strict=False):
                return True
            # a < x implies a + 1 cannot wrap
            for one, other in ((b, a), (a, b)):
                if one == n.IntLiteral(1) and _less_than(cond, other):
                    return True
            return False
        case "-":
            return _compares(cond, a, (b,), strict=False) or _compares(
                cond, a, (b,), strict=True
            )
        case "*":
            if cond.op != "==":
                return False
            for side, other in ((cond.lhs, cond.rhs), (cond.rhs, cond.lhs)):
                if (
                    isinstance(side, n.Binary)
                    and side.op == "/"
                    and side.lhs == op
                    and ((side.rhs == a and other == b) or (side.rhs == b and other == a))
                ):
                    return True
            return False
    return False


def _compares(cond: n.Binary, big, smalls, strict: bool) -> bool:
    """cond states big >= s (or big > s) for some s in smalls"""
    greater, less = (">", "<") if strict else (">=", "<=")
    if cond.op == greater:
        return cond.lhs == big and cond.rhs in smalls
    if cond.op == less:
        return cond.rhs == big and cond.lhs in smalls
    return False


def _less_than(cond: n.Binary, expr) -> bool:
    return (cond.op == "<" and cond.lhs == expr) or (cond.op == ">" and cond.rhs == expr)


###################################
# Transaction-order dependence
###################################


def detect_tod(contract: n.Contract) -> list[Vulnerability]:
    """State variables written by one function and steering a send in another"""
    writers: dict[str, set[str]] = {}
    for _, function in _functions(contract):
        state = state_names(contract, function)
        for _, node in n.iter_nodes(function.body):
            if isinstance(node, n.Assign) and isinstance(node.target, n.Var):
                if node.target.name in state:
                    writers.setdefault(node.target.name, set()).add(function.name)

    found = []
    for index, var in enumerate(contract.state_vars):
        if var.type.is_mapping or var.name not in writers:
            continue
        for fn_path, function in _functions(contract):
            if var.name not in state_names(contract, function):
                continue
            others = writers[var.name] - {function.name}
            if others and _steers_send(function, fn_path, var.name):
                found.append(
                    Vulnerability(
                        n.NodeId((index,)),
                        VulnKind.TOD,
                        f"'{var.name}' set by {', '.join(sorted(others))} "
                        f"decides a send in '{function.name}'",
                    )
                )
                break
    return found


def _steers_send(function: n.Function, fn_path, name: str) -> bool:
    # locals holding a value computed from the state variable (one step)
    derived = {name}
    for _, node in n.iter_nodes(function.body):
        if isinstance(node, n.VarDecl) and node.init is not None:
            if name in names_read(node.init):
                derived.add(node.name)
        elif isinstance(node, n.Assign) and isinstance(node.target, n.Var):
            if name in names_read(node.value):
                derived.add(node.target.name)
    for _, send in _sends(function, fn_path):
        if derived & (names_read(send.target) | names_read(send.amount)):
            return True
    return False


DETECTORS = {
    VulnKind.ED: detect_ed,
    VulnKind.RE: detect_re,
    VulnKind.IO: detect_io,
    VulnKind.TOD: detect_tod,
}
