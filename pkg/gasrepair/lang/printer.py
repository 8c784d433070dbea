"""
Deterministic MiniSol pretty-printer.

Output is canonical: two structurally equal contracts print to byte-identical text,
and parsing the text gives back a structurally equal contract.  Parentheses are
emitted only where operator precedence requires them.
"""

from __future__ import annotations

import hashlib
from typing import Optional

from . import nodes as n

INDENT = "    "

PRECEDENCE = {
    "||": 1,
    "&&": 2,
    "<": 3,
    "<=": 3,
    ">": 3,
    ">=": 3,
    "==": 3,
    "!=": 3,
    "+": 4,
    "-": 4,
    "*": 5,
    "/": 5,
}
COMPARISON_LEVEL = 3
UNARY_LEVEL = 6
POSTFIX_LEVEL = 7
ATOM_LEVEL = 8


def pretty_print(contract: n.Contract) -> str:
    return _Printer().contract(contract)


def pretty_print_with_lines(contract: n.Contract) -> tuple[str, dict[n.NodePath, int]]:
    """Print a contract and return a map from node path to its (1-based) line"""
    printer = _Printer()
    text = printer.contract(contract)
    return text, printer.line_of


def content_hash(contract: n.Contract) -> str:
    """Content hash of a contract (of its canonical text)"""
    return hashlib.sha256(pretty_print(contract).encode()).hexdigest()


def _level(expr: n.Expression) -> int:
    match expr:
        case n.Binary(op=op):
            return PRECEDENCE[op]
        case n.Not():
            return UNARY_LEVEL
        case n.Send() | n.BalanceOf():
            return POSTFIX_LEVEL
    return ATOM_LEVEL


def _wrap(expr: n.Expression, needs_parens: bool) -> str:
    text = expression_text(expr)
    return f"({text})" if needs_parens else text


def expression_text(expr: n.Expression) -> str:
    """Canonical source text of an expression"""
    match expr:
        case n.IntLiteral(value=value):
            return str(value)
        case n.BoolLiteral(value=value):
            return "true" if value else "false"
        case n.Var(name=name):
            return name
        case n.MappingIndex(name=name, key=key):
            return f"{name}[{expression_text(key)}]"
        case n.Binary(op=op, lhs=lhs, rhs=rhs):
            level = PRECEDENCE[op]
            if level == COMPARISON_LEVEL:  # non-associative
                left = _wrap(lhs, _level(lhs) <= level)
            else:
                left = _wrap(lhs, _level(lhs) < level)
            right = _wrap(rhs, _level(rhs) <= level)
            return f"{left} {op} {right}"
        case n.Not(operand=operand):
            return "!" + _wrap(operand, _level(operand) < UNARY_LEVEL)
        case n.MsgSender():
            return "msg.sender"
        case n.MsgValue():
            return "msg.value"
        case n.BalanceOf(address=address):
            return _wrap(address, _level(address) < POSTFIX_LEVEL) + ".balance"
        case n.Send(target=target, amount=amount):
            target_text = _wrap(target, _level(target) < POSTFIX_LEVEL)
            return f"{target_text}.send({expression_text(amount)})"
    raise TypeError(f"not an expression: {expr!r}")


def statement_header(stmt: n.Statement) -> str:
    """One-line text of a statement; compound statements print their header only"""
    match stmt:
        case n.VarDecl(name=name, type=type_name, init=init):
            if init is None:
                return f"{type_name} {name};"
            return f"{type_name} {name} = {expression_text(init)};"
        case n.Assign(target=target, value=value):
            return f"{expression_text(target)} = {expression_text(value)};"
        case n.If(cond=cond):
            return f"if ({expression_text(cond)})"
        case n.While(cond=cond):
            return f"while ({expression_text(cond)})"
        case n.Require(cond=cond):
            return f"require({expression_text(cond)});"
        case n.Return(value=value):
            return "return;" if value is None else f"return {expression_text(value)};"
        case n.ExprStmt(expr=expr):
            return f"{expression_text(expr)};"
    raise TypeError(f"not a statement: {stmt!r}")


class _Printer:
    def __init__(self):
        self.lines: list[str] = []
        self.line_of: dict[n.NodePath, int] = {}

    def emit(self, depth: int, text: str, path: Optional[n.NodePath] = None):
        self.lines.append(INDENT * depth + text)
        if path is not None:
            self.line_of[path] = len(self.lines)

    def mark(self, node: Optional[n.Node], path: n.NodePath):
        """Attribute every node of an expression subtree to the current line"""
        if node is None:
            return
        for sub_path, _ in n.iter_nodes(node, path):
            self.line_of[sub_path] = len(self.lines)

    def contract(self, contract: n.Contract) -> str:
        self.emit(0, f"contract {contract.name} {{", ())
        for index, var in enumerate(contract.state_vars):
            init = "" if var.init is None else f" = {expression_text(var.init)}"
            self.emit(1, f"{var.type} {var.name}{init};", (index,))
            self.mark(var.init, (index, 0))
        offset = len(contract.state_vars)
        for index, function in enumerate(contract.functions):
            if index or contract.state_vars:
                self.lines.append("")
            self.function(function, (offset + index,))
        self.emit(0, "}")
        return "\n".join(self.lines) + "\n"

    def function(self, function: n.Function, path: n.NodePath):
        params = ", ".join(f"{p.type} {p.name}" for p in function.params)
        header = f"function {function.name}({params}) public"
        if function.payable:
            header += " payable"
        if function.returns is not None:
            header += f" returns ({function.returns})"
        self.emit(1, header + " {", path)
        self.line_of[path + (0,)] = len(self.lines)
        self.block_body(function.body, path + (0,), 2)
        self.emit(1, "}")

    def block_body(self, block: n.Block, path: n.NodePath, depth: int):
        for index, statement in enumerate(block.statements):
            self.statement(statement, path + (index,), depth)

    def statement(self, stmt: n.Statement, path: n.NodePath, depth: int):
        match stmt:
            case n.If(then=then, orelse=orelse):
                self.emit(depth, statement_header(stmt) + " {", path)
                self.mark(stmt.cond, path + (0,))
                self.line_of[path + (1,)] = len(self.lines)
                self.block_body(then, path + (1,), depth + 1)
                if orelse is not None:
                    self.emit(depth, "} else {", path + (2,))
                    self.block_body(orelse, path + (2,), depth + 1)
                self.emit(depth, "}")
            case n.While(body=body):
                self.emit(depth, statement_header(stmt) + " {", path)
                self.mark(stmt.cond, path + (0,))
                self.line_of[path + (1,)] = len(self.lines)
                self.block_body(body, path + (1,), depth + 1)
                self.emit(depth, "}")
            case _:
                self.emit(depth, statement_header(stmt), path)
                for index, child in enumerate(stmt.children()):
                    self.mark(child, path + (index,))
