"""
MiniSol abstract syntax tree.

Nodes are frozen dataclasses, so a Contract is an immutable value: it can be shared
between concurrent workers and compared structurally with ``==``.

Node identity:
    - Nodes do not store their own position.  A NodeId is the path of child indices
      from the Contract root (plus a generation tag counting the edits applied so
      far), recomputed whenever the tree changes.
    - Children are enumerated generically through each class's CHILDREN field list;
      tuple-valued fields are flattened and ``None`` optional children are skipped.
"""

from __future__ import annotations

from dataclasses import dataclass, fields, replace
from typing import ClassVar, Iterator, Optional

UINT_BITS = 256
UINT_MODULUS = 2**UINT_BITS
UINT_MAX = UINT_MODULUS - 1

ARITHMETIC_OPS = ("+", "-", "*", "/")
COMPARISON_OPS = ("<", "<=", ">", ">=")
EQUALITY_OPS = ("==", "!=")
LOGICAL_OPS = ("&&", "||")
BINARY_OPS = ARITHMETIC_OPS + COMPARISON_OPS + EQUALITY_OPS + LOGICAL_OPS

# opcode-kind charged for each binary operator
OPCODES = {
    "+": "add",
    "-": "sub",
    "*": "mul",
    "/": "div",
    "<": "lt",
    ">": "gt",
    "<=": "le",
    ">=": "ge",
    "==": "eq",
    "!=": "ne",
    "&&": "and",
    "||": "or",
}

NodePath = tuple[int, ...]


@dataclass(frozen=True, order=True)
class NodeId:
    """Position of a node: child-index path from the contract root + generation tag"""

    path: NodePath
    generation: int = 0

    def child(self, index: int) -> NodeId:
        return NodeId(self.path + (index,), self.generation)

    @property
    def parent(self) -> NodeId:
        return NodeId(self.path[:-1], self.generation)

    def contains(self, other: NodeId) -> bool:
        """True if other is this node or one of its descendants"""
        return other.path[: len(self.path)] == self.path

    def __str__(self):
        return "/".join(str(i) for i in self.path) or "/"


# Types


@dataclass(frozen=True)
class TypeName:
    """uint, bool, address, or mapping(key => value)"""

    name: str
    key: Optional[TypeName] = None
    value: Optional[TypeName] = None

    @property
    def is_mapping(self) -> bool:
        return self.name == "mapping"

    def __str__(self):
        if self.is_mapping:
            return f"mapping({self.key} => {self.value})"
        return self.name


UINT = TypeName("uint")
BOOL = TypeName("bool")
ADDRESS = TypeName("address")


def zero_value(type_name: TypeName) -> int | bool:
    """Default value of a variable of the given (non-mapping) type"""
    return False if type_name == BOOL else 0


# Node machinery


@dataclass(frozen=True)
class Node:
    """Base class for all AST nodes."""

    CHILDREN: ClassVar[tuple[str, ...]] = ()

    def children(self) -> tuple[Node, ...]:
        out: list[Node] = []
        for name in self.CHILDREN:
            value = getattr(self, name)
            if value is None:
                continue
            if isinstance(value, tuple):
                out.extend(value)
            else:
                out.append(value)
        return tuple(out)

    def replace_child(self, index: int, new: Node) -> Node:
        """Return a copy of this node with its index-th child swapped for new"""
        position = 0
        for name in self.CHILDREN:
            value = getattr(self, name)
            if value is None:
                continue
            if isinstance(value, tuple):
                if index < position + len(value):
                    items = list(value)
                    items[index - position] = new
                    return replace(self, **{name: tuple(items)})
                position += len(value)
            else:
                if index == position:
                    return replace(self, **{name: new})
                position += 1
        raise IndexError(f"{type(self).__name__} has no child {index}")

    def attributes(self) -> tuple:
        """The non-child fields of this node (its label for structural comparison)"""
        return tuple(
            getattr(self, f.name) for f in fields(self) if f.name not in self.CHILDREN
        )


class Expression(Node):
    """Marker base for expressions"""


class Statement(Node):
    """Marker base for statements"""


# Expressions


@dataclass(frozen=True)
class IntLiteral(Expression):
    value: int


@dataclass(frozen=True)
class BoolLiteral(Expression):
    value: bool


@dataclass(frozen=True)
class Var(Expression):
    name: str


@dataclass(frozen=True)
class MappingIndex(Expression):
    name: str
    key: Expression
    CHILDREN: ClassVar[tuple[str, ...]] = ("key",)


@dataclass(frozen=True)
class Binary(Expression):
    op: str
    lhs: Expression
    rhs: Expression
    CHILDREN: ClassVar[tuple[str, ...]] = ("lhs", "rhs")


@dataclass(frozen=True)
class Not(Expression):
    operand: Expression
    CHILDREN: ClassVar[tuple[str, ...]] = ("operand",)


@dataclass(frozen=True)
class MsgSender(Expression):
    pass


@dataclass(frozen=True)
class MsgValue(Expression):
    pass


@dataclass(frozen=True)
class BalanceOf(Expression):
    address: Expression
    CHILDREN: ClassVar[tuple[str, ...]] = ("address",)


@dataclass(frozen=True)
class Send(Expression):
    """``target.send(amount)``: transfers value, yields a success flag, never throws"""

    target: Expression
    amount: Expression
    CHILDREN: ClassVar[tuple[str, ...]] = ("target", "amount")


# Statements


@dataclass(frozen=True)
class Block(Node):
    statements: tuple[Statement, ...] = ()
    CHILDREN: ClassVar[tuple[str, ...]] = ("statements",)


@dataclass(frozen=True)
class VarDecl(Statement):
    name: str
    type: TypeName
    init: Optional[Expression] = None
    CHILDREN: ClassVar[tuple[str, ...]] = ("init",)


@dataclass(frozen=True)
class Assign(Statement):
    target: Expression  # Var or MappingIndex
    value: Expression
    CHILDREN: ClassVar[tuple[str, ...]] = ("target", "value")


@dataclass(frozen=True)
class If(Statement):
    cond: Expression
    then: Block
    orelse: Optional[Block] = None
    CHILDREN: ClassVar[tuple[str, ...]] = ("cond", "then", "orelse")


@dataclass(frozen=True)
class While(Statement):
    cond: Expression
    body: Block
    CHILDREN: ClassVar[tuple[str, ...]] = ("cond", "body")


@dataclass(frozen=True)
class Require(Statement):
    cond: Expression
    CHILDREN: ClassVar[tuple[str, ...]] = ("cond",)


@dataclass(frozen=True)
class Return(Statement):
    value: Optional[Expression] = None
    CHILDREN: ClassVar[tuple[str, ...]] = ("value",)


@dataclass(frozen=True)
class ExprStmt(Statement):
    expr: Expression
    CHILDREN: ClassVar[tuple[str, ...]] = ("expr",)


# Declarations


@dataclass(frozen=True)
class Param:
    name: str
    type: TypeName


@dataclass(frozen=True)
class StateVar(Node):
    name: str
    type: TypeName
    init: Optional[Expression] = None
    CHILDREN: ClassVar[tuple[str, ...]] = ("init",)


@dataclass(frozen=True)
class Function(Node):
    name: str
    params: tuple[Param, ...]
    returns: Optional[TypeName]
    body: Block
    payable: bool = False
    CHILDREN: ClassVar[tuple[str, ...]] = ("body",)


@dataclass(frozen=True)
class Contract(Node):
    name: str
    state_vars: tuple[StateVar, ...] = ()
    functions: tuple[Function, ...] = ()
    CHILDREN: ClassVar[tuple[str, ...]] = ("state_vars", "functions")

    def function(self, name: str) -> Optional[Function]:
        return next((f for f in self.functions if f.name == name), None)

    def state_var(self, name: str) -> Optional[StateVar]:
        return next((v for v in self.state_vars if v.name == name), None)

    def function_id(self, name: str) -> NodeId:
        """NodeId of the named function"""
        for index, f in enumerate(self.functions):
            if f.name == name:
                return NodeId((len(self.state_vars) + index,))
        raise KeyError(name)


# Tree navigation


def iter_nodes(root: Node, path: NodePath = ()) -> Iterator[tuple[NodePath, Node]]:
    """Pre-order walk yielding (path, node) pairs, root first"""
    yield path, root
    for index, child in enumerate(root.children()):
        yield from iter_nodes(child, path + (index,))


def node_at(root: Node, path: NodePath) -> Node:
    """Resolve a path; raises LookupError when it does not exist"""
    node = root
    for index in path:
        kids = node.children()
        if not 0 <= index < len(kids):
            raise LookupError(f"no node at {'/'.join(map(str, path))}")
        node = kids[index]
    return node


def replace_at(root: Node, path: NodePath, new: Node) -> Node:
    """Return a copy of root with the node at path swapped for new"""
    if not path:
        return new
    child = node_at(root, path[:1])
    return root.replace_child(path[0], replace_at(child, path[1:], new))


def tree_size(node: Optional[Node]) -> int:
    if node is None:
        return 0
    return 1 + sum(tree_size(child) for child in node.children())


def enclosing_function(contract: Contract, path: NodePath) -> Optional[Function]:
    """The function containing the node at path, if any"""
    if not path or path[0] < len(contract.state_vars):
        return None
    return contract.functions[path[0] - len(contract.state_vars)]
