"""
Edit operations, patches and their application.

A Patch is the list of edits leading from the ORIGINAL contract to a mutant; edits
accumulate across generations, so the i-th edit addresses nodes of the tree obtained
after the first i edits.  Every NodeId an edit carries is stamped with that index as
its generation, which lets apply() reject an edit used against the wrong tree.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum
from typing import ClassVar, Union

from ..exceptions import ApplyError, ParseError
from ..lang import nodes as n
from ..lang.parser import parse_expression, parse_statement
from ..lang.printer import content_hash, expression_text, statement_header

logger = logging.getLogger(__name__)


class Position(str, Enum):
    BEFORE = "before"
    AFTER = "after"


@dataclass(frozen=True)
class Move:
    """Move the statement at src next to anchor (a statement, or a block's head/tail)"""

    src: n.NodeId
    anchor: n.NodeId
    position: Position
    tag: ClassVar[str] = "M"

    @property
    def node_ids(self):
        return (self.src, self.anchor)


@dataclass(frozen=True)
class Insert:
    stmt: n.Statement
    anchor: n.NodeId
    position: Position
    tag: ClassVar[str] = "I"

    @property
    def node_ids(self):
        return (self.anchor,)


@dataclass(frozen=True)
class Replace:
    """Swap the node at site; an unchecked-send statement may become a Require"""

    site: n.NodeId
    node: n.Node
    tag: ClassVar[str] = "R"

    @property
    def node_ids(self):
        return (self.site,)


EditOp = Union[Move, Insert, Replace]


@dataclass(frozen=True)
class Patch:
    base: str
    edits: tuple[EditOp, ...] = ()

    @property
    def trace(self) -> tuple[str, ...]:
        """Operator tags of the edits, in order"""
        return tuple(edit.tag for edit in self.edits)

    def extend(self, edit: EditOp) -> Patch:
        return Patch(self.base, self.edits + (edit,))

    def to_json(self) -> list[dict]:
        return [edit_to_json(edit) for edit in self.edits]

    @classmethod
    def from_json(cls, base: str, data: list[dict]) -> Patch:
        return cls(base, tuple(edit_from_json(item, i) for i, item in enumerate(data)))


def mutation_distance(patch: Patch) -> int:
    """Number of mutation operators applied since the original contract"""
    return len(patch.trace)


###############
# Application
###############


def apply(patch: Patch, base: n.Contract) -> n.Contract:
    """Apply a patch to the contract it was built against.

    Raises:
        ApplyError: the base does not match the patch, or an edit is stale.
    """
    if content_hash(base) != patch.base:
        raise ApplyError("patch was built against a different contract")
    contract = base
    for generation, edit in enumerate(patch.edits):
        contract = apply_edit(contract, edit, generation)
    return contract


def apply_chain(patch: Patch, base: n.Contract) -> list[n.Contract]:
    """The base followed by every intermediate contract of the patch"""
    if content_hash(base) != patch.base:
        raise ApplyError("patch was built against a different contract")
    chain = [base]
    for generation, edit in enumerate(patch.edits):
        chain.append(apply_edit(chain[-1], edit, generation))
    return chain


def apply_edit(contract: n.Contract, edit: EditOp, generation: int = 0) -> n.Contract:
    """Apply one edit to the tree reached after `generation` previous edits"""
    for node_id in edit.node_ids:
        if node_id.generation != generation:
            raise ApplyError(
                f"stale edit: {node_id} is from generation {node_id.generation}, "
                f"tree is at generation {generation}"
            )
    try:
        match edit:
            case Insert(stmt=stmt, anchor=anchor, position=position):
                block_path, index = insertion_point(contract, anchor.path, position)
                return _insert(contract, block_path, index, stmt)
            case Move(src=src, anchor=anchor, position=position):
                return _move(contract, src.path, anchor.path, position)
            case Replace(site=site, node=node):
                return _replace(contract, site.path, node)
    except (LookupError, IndexError) as e:
        raise ApplyError(f"edit does not resolve: {e}") from e
    raise ApplyError(f"unknown edit {edit!r}")


def insertion_point(
    contract: n.Contract, anchor: n.NodePath, position: Position
) -> tuple[n.NodePath, int]:
    """(block path, index) where a statement lands relative to anchor"""
    node = n.node_at(contract, anchor)
    if isinstance(node, n.Block):
        if n.enclosing_function(contract, anchor) is None:
            raise ApplyError("anchor block is outside any function")
        return anchor, 0 if position is Position.BEFORE else len(node.statements)
    if not isinstance(node, n.Statement):
        raise ApplyError(f"anchor {'/'.join(map(str, anchor))} is not a statement")
    return anchor[:-1], anchor[-1] + (position is Position.AFTER)


def _block_at(contract: n.Contract, path: n.NodePath) -> n.Block:
    block = n.node_at(contract, path)
    if not isinstance(block, n.Block):
        raise ApplyError(f"{'/'.join(map(str, path))} is not a block")
    return block


def _insert(contract, block_path, index, stmt) -> n.Contract:
    block = _block_at(contract, block_path)
    statements = block.statements[:index] + (stmt,) + block.statements[index:]
    return n.replace_at(contract, block_path, n.Block(statements))


def _remove(contract, path) -> n.Contract:
    block = _block_at(contract, path[:-1])
    statements = block.statements[: path[-1]] + block.statements[path[-1] + 1 :]
    return n.replace_at(contract, path[:-1], n.Block(statements))


def _move(contract, src, anchor, position) -> n.Contract:
    statement = n.node_at(contract, src)
    if not isinstance(statement, n.Statement):
        raise ApplyError("only statements can be moved")
    if anchor[: len(src)] == src:
        raise ApplyError("cannot move a statement next to itself or into its own body")
    block_path, index = insertion_point(contract, anchor, position)
    moved = _insert(contract, block_path, index, statement)
    # the insertion may shift the source one slot to the right
    depth = len(block_path)
    if src[:depth] == block_path and src[depth] >= index:
        src = src[:depth] + (src[depth] + 1,) + src[depth + 1 :]
    return _remove(moved, src)


def _replace(contract, site, node) -> n.Contract:
    current = n.node_at(contract, site)
    if isinstance(current, n.Statement):
        if not isinstance(node, n.Statement):
            raise ApplyError("a statement can only be replaced by a statement")
    elif isinstance(current, n.Expression):
        if not isinstance(node, n.Expression):
            raise ApplyError("an expression can only be replaced by an expression")
    else:
        raise ApplyError(f"{type(current).__name__} nodes cannot be replaced")
    return n.replace_at(contract, site, node)


#################
# Serialization
#################


def _node_text(node: n.Node) -> str:
    if isinstance(node, n.Statement):
        return statement_header(node)
    return expression_text(node)


def edit_to_json(edit: EditOp) -> dict:
    match edit:
        case Move(src=src, anchor=anchor, position=position):
            return {
                "op": "move",
                "src": str(src),
                "anchor": str(anchor),
                "position": position.value,
            }
        case Insert(stmt=stmt, anchor=anchor, position=position):
            return {
                "op": "insert",
                "stmt": statement_header(stmt),
                "anchor": str(anchor),
                "position": position.value,
            }
        case Replace(site=site, node=node):
            return {
                "op": "replace",
                "site": str(site),
                "node": _node_text(node),
                "kind": "statement" if isinstance(node, n.Statement) else "expression",
            }
    raise TypeError(f"not an edit: {edit!r}")


def _node_id(text: str, generation: int) -> n.NodeId:
    path = () if text == "/" else tuple(int(part) for part in text.split("/"))
    return n.NodeId(path, generation)


def edit_from_json(data: dict, generation: int) -> EditOp:
    """Rebuild the edit at position `generation` of a serialized patch"""
    try:
        match data["op"]:
            case "move":
                return Move(
                    _node_id(data["src"], generation),
                    _node_id(data["anchor"], generation),
                    Position(data["position"]),
                )
            case "insert":
                return Insert(
                    parse_statement(data["stmt"]),
                    _node_id(data["anchor"], generation),
                    Position(data["position"]),
                )
            case "replace":
                text = data["node"]
                node = (
                    parse_statement(text)
                    if data.get("kind") == "statement"
                    else parse_expression(text)
                )
                return Replace(_node_id(data["site"], generation), node)
    except (KeyError, ValueError, ParseError) as e:
        raise ApplyError(f"malformed edit {data!r}: {e}") from e
    raise ApplyError(f"unknown edit op {data.get('op')!r}")
