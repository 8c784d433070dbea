"""
Enumeration of the candidate edits of each mutation operator.

The vocabulary is closed: everything synthesized is built from names visible at
the edit site, the literals 0/1/true/false, ``msg.sender``, the operators already
present at the site and the guard/checked-send templates below.  This keeps each
operator's edit set finite, so a mutation space can be exhausted.

Edits are produced in document order; ``ordered_edits`` then groups them in
fault-localization tiers (see ``edit_tier``) and shuffles each tier with the
caller's random generator.
"""

from __future__ import annotations

import random
from typing import Iterable, Iterator

from ..lang import nodes as n
from ..lang.dataflow import names_read
from ..lang.sites import environment_at, infer_type, mutable_sites, visible_locals
from .edits import EditOp, Insert, Move, Position, Replace

OPERATOR_FAMILIES = (
    n.ARITHMETIC_OPS,
    n.COMPARISON_OPS,
    n.EQUALITY_OPS,
    n.LOGICAL_OPS,
)

TIERS = 4


def ordered_edits(
    contract: n.Contract,
    tags: Iterable[str],
    rng: random.Random,
    hints: Iterable[n.NodeId] = (),
    generation: int = 0,
) -> list[EditOp]:
    """All edits of the given operators: hinted tiers first, shuffled within a tier"""
    hint_paths = [h.path for h in hints]
    tiers: list[list[EditOp]] = [[] for _ in range(TIERS)]
    for tag in sorted(tags):
        for edit in GENERATORS[tag](contract, generation):
            tiers[edit_tier(edit, hint_paths)].append(edit)
    ordered = []
    for tier in tiers:
        rng.shuffle(tier)
        ordered.extend(tier)
    return ordered


def edit_tier(edit: EditOp, hint_paths: list[n.NodePath]) -> int:
    """0: on a hinted node, 1: beside one, 2: same function, 3: elsewhere"""
    if not hint_paths:
        return 0
    return min(_tier(node_id.path, hint_paths) for node_id in edit.node_ids)


def _tier(path: n.NodePath, hint_paths: list[n.NodePath]) -> int:
    tier = TIERS - 1
    for hint in hint_paths:
        if path[: len(hint)] == hint or hint[: len(path)] == path:
            return 0
        if hint[: len(path) - 1] == path[:-1]:
            tier = min(tier, 1)
        elif path[:1] == hint[:1]:
            tier = min(tier, 2)
    return tier


##########
# Move
##########


def _positions(contract: n.Contract, function_index: int, generation: int):
    """(block path, index, anchor, position) of every slot of one function's blocks"""
    offset = len(contract.state_vars)
    function = contract.functions[function_index]
    for path, node in n.iter_nodes(function.body, (offset + function_index, 0)):
        if not isinstance(node, n.Block):
            continue
        count = len(node.statements)
        for index in range(count):
            yield path, index, n.NodeId(path + (index,), generation), Position.BEFORE
        if count:
            last = n.NodeId(path + (count - 1,), generation)
            yield path, count, last, Position.AFTER
        else:
            yield path, 0, n.NodeId(path, generation), Position.BEFORE


def move_edits(contract: n.Contract, generation: int = 0) -> Iterator[EditOp]:
    """Every statement moved to every other slot of its function"""
    offset = len(contract.state_vars)
    statements, _ = mutable_sites(contract, generation=generation)
    for src in statements:
        function_index = src.path[0] - offset
        block, index = src.path[:-1], src.path[-1]
        for slot_block, slot, anchor, position in _positions(
            contract, function_index, generation
        ):
            if slot_block[: len(src.path)] == src.path:
                continue  # inside the moved statement
            if slot_block == block and slot in (index, index + 1):
                continue  # the statement's own place
            yield Move(src, anchor, position)


##########
# Replace
##########


def _values(type_name: n.TypeName, env: dict[str, n.TypeName]) -> list[n.Expression]:
    """Closed vocabulary of expressions of a type at a site"""
    if type_name == n.UINT:
        out: list[n.Expression] = [n.IntLiteral(0), n.IntLiteral(1)]
    elif type_name == n.BOOL:
        out = [n.BoolLiteral(False), n.BoolLiteral(True)]
    elif type_name == n.ADDRESS:
        out = [n.MsgSender()]
    else:
        return []
    out.extend(n.Var(name) for name, t in sorted(env.items()) if t == type_name)
    return out


def replacements(expr: n.Expression, env: dict[str, n.TypeName]) -> list[n.Expression]:
    """Candidate substitutes for an expression (the expression itself excluded)"""
    out: list[n.Expression] = []
    type_name = infer_type(expr, env)
    if type_name is not None:
        out.extend(_values(type_name, env))
    match expr:
        case n.Binary(op=op, lhs=lhs, rhs=rhs):
            for family in OPERATOR_FAMILIES:
                if op in family:
                    out.extend(n.Binary(other, lhs, rhs) for other in family if other != op)
            out.append(n.Binary(op, rhs, lhs))
        case n.Not(operand=operand):
            out.append(operand)
    if type_name == n.BOOL and not isinstance(expr, n.Not):
        out.append(n.Not(expr))
    unique = []
    for candidate in out:
        if candidate != expr and candidate not in unique:
            unique.append(candidate)
    return unique


def replace_edits(contract: n.Contract, generation: int = 0) -> Iterator[EditOp]:
    _, expressions = mutable_sites(contract, generation=generation)
    for site in expressions:
        node = n.node_at(contract, site.path)
        if isinstance(node, n.ExprStmt):
            # checked form of an unchecked send
            yield Replace(site, n.Require(node.expr))
            continue
        env = environment_at(contract, site.path)
        for candidate in replacements(node, env):
            yield Replace(site, candidate)


##########
# Insert
##########


def guard_templates(function: n.Function) -> list[n.Expression]:
    """Overflow guards for the arithmetic of a function, in document order"""
    guards: list[n.Expression] = []
    for _, node in n.iter_nodes(function.body):
        if not isinstance(node, n.Binary):
            continue
        a, b = node.lhs, node.rhs
        match node.op:
            case "+":
                guard = n.Binary(">=", node, a)
            case "-":
                guard = n.Binary(">=", a, b)
            case "*":
                guard = n.Binary("==", n.Binary("/", node, a), b)
            case _:
                continue
        if guard not in guards:
            guards.append(guard)
    return guards


def statement_templates(
    contract: n.Contract,
    function: n.Function,
    env: dict[str, n.TypeName],
) -> list[n.Statement]:
    """Statements insertable where the names in env are visible"""
    out: list[n.Statement] = []
    for name, type_name in sorted(env.items()):
        if type_name.is_mapping:
            for key in _values(type_name.key, env):
                zero = n.BoolLiteral(False) if type_name.value == n.BOOL else n.IntLiteral(0)
                out.append(n.Assign(n.MappingIndex(name, key), zero))
            continue
        for value in _values(type_name, env):
            if value != n.Var(name):
                out.append(n.Assign(n.Var(name), value))
        if type_name == n.BOOL:
            out.append(n.Require(n.Var(name)))
            out.append(n.Require(n.Not(n.Var(name))))
    for guard in guard_templates(function):
        if names_read(guard) <= set(env):
            out.append(n.Require(guard))
    return out


def insert_edits(contract: n.Contract, generation: int = 0) -> Iterator[EditOp]:
    state = {v.name: v.type for v in contract.state_vars}
    for function_index, function in enumerate(contract.functions):
        for block, index, anchor, position in _positions(
            contract, function_index, generation
        ):
            env = {**state, **visible_locals(contract, block, index)}
            for statement in statement_templates(contract, function, env):
                yield Insert(statement, anchor, position)


GENERATORS = {
    "M": move_edits,
    "R": replace_edits,
    "I": insert_edits,
}
