"""
Catalog of mutable sites and scope queries used by the mutation operators.

Sites are NodeIds of the current tree.  When fault-localization hints (detector report
locations) are supplied, sites are ordered in three tiers, document order within each:
    0. the statements owning a hinted node / expressions inside a hinted node
    1. other sites on the hinted spine (ancestors, descendants, same statement)
    2. everything else
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional

from . import nodes as n


@dataclass(frozen=True)
class MutableSites:
    """Mutation targets of a contract.

    Unpacks as the (statements, expressions) pair; ``blocks`` lists the Block nodes,
    which serve as head/tail insertion anchors (the only anchors of an empty body).
    """

    statements: tuple[n.NodeId, ...]
    expressions: tuple[n.NodeId, ...]
    blocks: tuple[n.NodeId, ...]

    def __iter__(self):
        return iter((self.statements, self.expressions))


def mutable_sites(
    contract: n.Contract, hints: Iterable[n.NodeId] = (), generation: int = 0
) -> MutableSites:
    """List every Move source / Insert anchor, Replace target and block anchor.

    Args:
        contract: a typechecked contract.
        hints: detector-located NodeIds; sites near them are listed first.
        generation: generation tag stamped on the returned NodeIds.

    Returns:
        MutableSites in hinted-first, then document order.
    """
    statements: list[n.NodePath] = []
    expressions: list[n.NodePath] = []
    blocks: list[n.NodePath] = []
    offset = len(contract.state_vars)
    for index, function in enumerate(contract.functions):
        for path, node in n.iter_nodes(function.body, (offset + index, 0)):
            if isinstance(node, n.Block):
                blocks.append(path)
            elif isinstance(node, n.Statement):
                statements.append(path)
                if isinstance(node, n.ExprStmt) and isinstance(node.expr, n.Send):
                    expressions.append(path)  # checked-form replacement target
            elif isinstance(node, n.Expression) and not _is_assign_target(
                contract, path
            ):
                expressions.append(path)

    hint_paths = [h.path for h in hints]
    owners = {_owning_statement(statements, h) for h in hint_paths} - {None}

    def statement_tier(path: n.NodePath) -> int:
        if path in owners:
            return 0
        if any(_related(path, h) for h in hint_paths):
            return 1
        return 2

    def expression_tier(path: n.NodePath) -> int:
        if any(_prefix(h, path) for h in hint_paths):
            return 0
        if any(_prefix(owner, path) for owner in owners):
            return 1
        return 2

    def stamp(paths):
        return tuple(n.NodeId(p, generation) for p in paths)

    if hint_paths:
        statements.sort(key=statement_tier)
        expressions.sort(key=expression_tier)
    return MutableSites(stamp(statements), stamp(expressions), stamp(blocks))


def _prefix(prefix: n.NodePath, path: n.NodePath) -> bool:
    return path[: len(prefix)] == prefix


def _related(a: n.NodePath, b: n.NodePath) -> bool:
    return _prefix(a, b) or _prefix(b, a)


def _owning_statement(statements: list[n.NodePath], hint: n.NodePath):
    """Deepest statement containing (or equal to) the hinted node"""
    owners = [s for s in statements if _prefix(s, hint)]
    return max(owners, key=len) if owners else None


def _is_assign_target(contract: n.Contract, path: n.NodePath) -> bool:
    parent = n.node_at(contract, path[:-1])
    return isinstance(parent, n.Assign) and path[-1] == 0


# Scope queries


def visible_locals(
    contract: n.Contract, block_path: n.NodePath, index: int
) -> dict[str, n.TypeName]:
    """Parameters and locals visible at position `index` of the block at block_path"""
    function = n.enclosing_function(contract, block_path)
    env = {p.name: p.type for p in function.params}
    node: n.Block = function.body
    rest = block_path[2:]
    while rest:
        stmt_index, child_index = rest[0], rest[1]
        _declare(env, node.statements[:stmt_index])
        node = node.statements[stmt_index].children()[child_index]
        rest = rest[2:]
    _declare(env, node.statements[:index])
    return env


def _declare(env: dict[str, n.TypeName], statements):
    for statement in statements:
        if isinstance(statement, n.VarDecl):
            env[statement.name] = statement.type


def enclosing_statement(contract: n.Contract, path: n.NodePath) -> n.NodePath:
    """Path of the innermost statement containing the node at path"""
    for cut in range(len(path), 1, -1):
        if isinstance(n.node_at(contract, path[:cut]), n.Statement):
            return path[:cut]
    raise LookupError(f"no statement encloses {path}")


def environment_at(contract: n.Contract, path: n.NodePath) -> dict[str, n.TypeName]:
    """Every name (state variables included) visible to the node at path"""
    statement = enclosing_statement(contract, path)
    env = {v.name: v.type for v in contract.state_vars}
    env.update(visible_locals(contract, statement[:-1], statement[-1]))
    return env


def infer_type(
    expr: n.Expression, env: dict[str, n.TypeName]
) -> Optional[n.TypeName]:
    """Best-effort static type of an expression (None when it does not resolve)"""
    match expr:
        case n.IntLiteral():
            return n.UINT
        case n.BoolLiteral():
            return n.BOOL
        case n.Var(name=name):
            found = env.get(name)
            return None if found is None or found.is_mapping else found
        case n.MappingIndex(name=name):
            found = env.get(name)
            return found.value if found is not None and found.is_mapping else None
        case n.Binary(op=op):
            return n.UINT if op in n.ARITHMETIC_OPS else n.BOOL
        case n.Not() | n.Send():
            return n.BOOL
        case n.MsgSender():
            return n.ADDRESS
        case n.MsgValue() | n.BalanceOf():
            return n.UINT
    return None
