"""
MiniSol parser.

The grammar in `minisol.lark` is compiled once into an LALR Lark parser; a Lark
Transformer then rebuilds the parse tree bottom-up as the frozen dataclasses of
`nodes`.  Malformed input is reported as a ParseError carrying line/column.
"""

from __future__ import annotations

import functools
from pathlib import Path

import lark
from lark.exceptions import UnexpectedCharacters, UnexpectedEOF, UnexpectedInput

from ..exceptions import ParseError
from . import nodes as n


def parse(source: str) -> n.Contract:
    """Parse MiniSol source text into a Contract.

    Args:
        source: contract text (a single contract per source).

    Returns:
        The contract AST.

    Raises:
        ParseError: with the line and column of the first offending token.
    """
    try:
        tree = _parser().parse(source)
    except UnexpectedCharacters as e:
        raise ParseError(f"unexpected character {e.char!r}", e.line, e.column) from e
    except UnexpectedInput as e:
        token = getattr(e, "token", None)
        # LALR reports a truncated source as the $END token
        if isinstance(e, UnexpectedEOF) or getattr(token, "type", None) == "$END":
            line = source.count("\n") + 1
            raise ParseError("unexpected end of input", line, 0) from e
        raise ParseError(f"unexpected token {token!r}", e.line, e.column) from e
    return _Transformer().transform(tree)


def parse_file(path: str | Path) -> n.Contract:
    """Parse a `.msol` file"""
    return parse(Path(path).read_text(encoding="utf-8"))


def parse_statement(text: str) -> n.Statement:
    """Parse a single statement (used to reload serialized patches)"""
    contract = parse(f"contract Fragment {{ function fragment() public payable {{ {text} }} }}")
    statements = contract.functions[0].body.statements
    if len(statements) != 1:
        raise ParseError(f"expected exactly one statement in {text!r}", 1, 0)
    return statements[0]


def parse_expression(text: str) -> n.Expression:
    statement = parse_statement(f"{text};")
    if not isinstance(statement, n.ExprStmt):
        raise ParseError(f"not an expression: {text!r}", 1, 0)
    return statement.expr


@functools.cache
def _parser() -> lark.Lark:
    """Create/retrieve a singleton Lark parser from the MiniSol grammar."""
    return lark.Lark.open(
        "minisol.lark", rel_to=__file__, parser="lalr", maybe_placeholders=True
    )


class _Transformer(lark.Transformer):
    """Lark parse tree -> nodes dataclasses"""

    @lark.v_args(inline=True)
    def start(self, contract):
        return contract

    @lark.v_args(inline=True)
    def contract(self, name, *members):
        state_vars = tuple(m for m in members if isinstance(m, n.StateVar))
        functions = tuple(m for m in members if isinstance(m, n.Function))
        return n.Contract(str(name), state_vars, functions)

    @lark.v_args(inline=True)
    def state_var(self, type_name, name, init):
        return n.StateVar(str(name), type_name, init)

    @lark.v_args(inline=True)
    def function(self, name, params, payable, returns, body):
        return n.Function(str(name), params, returns, body, payable is not None)

    params = tuple

    @lark.v_args(inline=True)
    def param(self, type_name, name):
        return n.Param(str(name), type_name)

    @lark.v_args(inline=True)
    def returns(self, type_name):
        return type_name

    # Types

    def uint_type(self, _):
        return n.UINT

    def bool_type(self, _):
        return n.BOOL

    def address_type(self, _):
        return n.ADDRESS

    @lark.v_args(inline=True)
    def mapping_type(self, key, value):
        return n.TypeName("mapping", key, value)

    # Statements

    def block(self, statements):
        return n.Block(tuple(statements))

    @lark.v_args(inline=True)
    def var_decl(self, type_name, name, init):
        return n.VarDecl(str(name), type_name, init)

    assign = lark.v_args(inline=True)(n.Assign)
    if_stmt = lark.v_args(inline=True)(n.If)
    while_stmt = lark.v_args(inline=True)(n.While)
    require_stmt = lark.v_args(inline=True)(n.Require)
    return_stmt = lark.v_args(inline=True)(n.Return)
    expr_stmt = lark.v_args(inline=True)(n.ExprStmt)

    # Expressions

    @lark.v_args(inline=True)
    def binary(self, lhs, op, rhs):
        return n.Binary(str(op), lhs, rhs)

    not_expr = lark.v_args(inline=True)(n.Not)
    send = lark.v_args(inline=True)(n.Send)
    balance_of = lark.v_args(inline=True)(n.BalanceOf)

    @lark.v_args(inline=True)
    def int_lit(self, token):
        return n.IntLiteral(int(token))

    def true_lit(self, _):
        return n.BoolLiteral(True)

    def false_lit(self, _):
        return n.BoolLiteral(False)

    @lark.v_args(inline=True)
    def var(self, name):
        return n.Var(str(name))

    @lark.v_args(inline=True)
    def mapping_index(self, name, key):
        return n.MappingIndex(str(name), key)

    def msg_sender(self, _):
        return n.MsgSender()

    def msg_value(self, _):
        return n.MsgValue()
