"""
Static checks for MiniSol: name resolution and typing.

typecheck() is the compilability gate of the repair loop: a mutant that fails it is
discarded before any execution.  It is total: every problem is returned as a
TypeCheckError value naming the offending node, nothing is raised.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional

from . import nodes as n

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TypeCheckError:
    node_id: n.NodeId
    message: str

    def __str__(self):
        return f"{self.node_id}: {self.message}"


def typecheck(contract: n.Contract) -> list[TypeCheckError]:
    """Return all type errors of a contract; an empty list means the contract is Ok"""
    return _Checker(contract).run()


def is_compilable(contract: n.Contract) -> bool:
    return not typecheck(contract)


class Scope:
    """Lexically nested local-variable environment of one function body"""

    def __init__(self, contract: n.Contract, function: n.Function):
        self.contract = contract
        self.function = function
        self.frames: list[dict[str, n.TypeName]] = [
            {p.name: p.type for p in function.params}
        ]

    def push(self):
        self.frames.append({})

    def pop(self):
        self.frames.pop()

    def declare(self, name: str, type_name: n.TypeName):
        self.frames[-1][name] = type_name

    def local(self, name: str) -> Optional[n.TypeName]:
        for frame in reversed(self.frames):
            if name in frame:
                return frame[name]
        return None

    def lookup(self, name: str) -> Optional[n.TypeName]:
        """Type of a local, parameter or state variable, or None if unresolved"""
        local = self.local(name)
        if local is not None:
            return local
        state = self.contract.state_var(name)
        return state.type if state else None

    def locals_in_scope(self) -> dict[str, n.TypeName]:
        merged: dict[str, n.TypeName] = {}
        for frame in self.frames:
            merged.update(frame)
        return merged


class _Checker:
    def __init__(self, contract: n.Contract):
        self.contract = contract
        self.errors: list[TypeCheckError] = []

    def error(self, path: n.NodePath, message: str):
        self.errors.append(TypeCheckError(n.NodeId(path), message))

    def run(self) -> list[TypeCheckError]:
        self._check_declarations()
        offset = len(self.contract.state_vars)
        for index, function in enumerate(self.contract.functions):
            self._check_function(function, (offset + index,))
        return self.errors

    def _check_declarations(self):
        seen: set[str] = set()
        for index, var in enumerate(self.contract.state_vars):
            path = (index,)
            if var.name in seen:
                self.error(path, f"duplicate state variable '{var.name}'")
            seen.add(var.name)
            if var.init is None:
                continue
            if var.type.is_mapping:
                self.error(path, "mapping state variables cannot be initialised")
            elif not isinstance(var.init, (n.IntLiteral, n.BoolLiteral)):
                self.error(path + (0,), "state initialisers must be literals")
            else:
                self._expect(var.init, path + (0,), var.type, None)
        names: set[str] = set()
        for index, function in enumerate(self.contract.functions):
            path = (len(self.contract.state_vars) + index,)
            if function.name in names:
                self.error(path, f"duplicate function '{function.name}'")
            names.add(function.name)
            params = [p.name for p in function.params]
            if len(set(params)) != len(params):
                self.error(path, f"duplicate parameter in '{function.name}'")
            for p in function.params:
                if p.type.is_mapping:
                    self.error(path, f"parameter '{p.name}' cannot be a mapping")
            if function.returns is not None and function.returns.is_mapping:
                self.error(path, "functions cannot return mappings")

    def _check_function(self, function: n.Function, path: n.NodePath):
        scope = Scope(self.contract, function)
        self._check_block(function.body, path + (0,), scope)

    def _check_block(self, block: n.Block, path: n.NodePath, scope: Scope):
        scope.push()
        for index, statement in enumerate(block.statements):
            self._check_statement(statement, path + (index,), scope)
        scope.pop()

    def _check_statement(self, stmt: n.Statement, path: n.NodePath, scope: Scope):
        match stmt:
            case n.VarDecl(name=name, type=type_name, init=init):
                if type_name.is_mapping:
                    self.error(path, "local variables cannot be mappings")
                if scope.local(name) is not None:
                    self.error(path, f"'{name}' is already declared")
                if init is not None:
                    self._expect(init, path + (0,), type_name, scope)
                # declared after the initialiser: `uint x = x;` does not resolve
                scope.declare(name, type_name)
            case n.Assign(target=target, value=value):
                target_type = self._lvalue(target, path + (0,), scope)
                if target_type is not None:
                    self._expect(value, path + (1,), target_type, scope)
                else:
                    self._expr(value, path + (1,), scope)
            case n.If(cond=cond, then=then, orelse=orelse):
                self._expect(cond, path + (0,), n.BOOL, scope)
                self._check_block(then, path + (1,), scope)
                if orelse is not None:
                    self._check_block(orelse, path + (2,), scope)
            case n.While(cond=cond, body=body):
                self._expect(cond, path + (0,), n.BOOL, scope)
                self._check_block(body, path + (1,), scope)
            case n.Require(cond=cond):
                self._expect(cond, path + (0,), n.BOOL, scope)
            case n.Return(value=value):
                expected = scope.function.returns
                if value is None:
                    if expected is not None:
                        self.error(path, f"missing return value of type {expected}")
                elif expected is None:
                    self.error(path, "function does not return a value")
                else:
                    self._expect(value, path + (0,), expected, scope)
            case n.ExprStmt(expr=expr):
                self._expr(expr, path + (0,), scope)
            case _:
                self.error(path, f"unexpected statement {type(stmt).__name__}")

    def _lvalue(self, target, path, scope: Scope) -> Optional[n.TypeName]:
        if isinstance(target, n.Var):
            found = scope.lookup(target.name)
            if found is None:
                self.error(path, f"undeclared name '{target.name}'")
            elif found.is_mapping:
                self.error(path, f"cannot assign to mapping '{target.name}'")
                return None
            return found
        if isinstance(target, n.MappingIndex):
            return self._expr(target, path, scope)
        self.error(path, "invalid assignment target")
        return None

    def _expect(self, expr, path, expected: n.TypeName, scope: Optional[Scope]):
        actual = self._expr(expr, path, scope)
        if actual is not None and actual != expected:
            self.error(path, f"expected {expected}, found {actual}")

    def _expr(self, expr, path, scope: Optional[Scope]) -> Optional[n.TypeName]:
        """Type of an expression, or None when it is ill-typed (errors recorded)"""
        match expr:
            case n.IntLiteral(value=value):
                if not 0 <= value <= n.UINT_MAX:
                    self.error(path, "integer literal out of uint256 range")
                return n.UINT
            case n.BoolLiteral():
                return n.BOOL
            case n.Var(name=name):
                found = scope.lookup(name) if scope else None
                if found is None:
                    self.error(path, f"undeclared name '{name}'")
                elif found.is_mapping:
                    self.error(path, f"mapping '{name}' used as a value")
                    return None
                return found
            case n.MappingIndex(name=name, key=key):
                found = scope.lookup(name) if scope else None
                if found is None or not found.is_mapping:
                    self.error(path, f"'{name}' is not a mapping")
                    self._expr(key, path + (0,), scope)
                    return None
                self._expect(key, path + (0,), found.key, scope)
                return found.value
            case n.Binary(op=op, lhs=lhs, rhs=rhs):
                return self._binary(op, lhs, rhs, path, scope)
            case n.Not(operand=operand):
                self._expect(operand, path + (0,), n.BOOL, scope)
                return n.BOOL
            case n.MsgSender():
                return n.ADDRESS
            case n.MsgValue():
                if scope is not None and not scope.function.payable:
                    self.error(path, "msg.value used in a non-payable function")
                return n.UINT
            case n.BalanceOf(address=address):
                self._expect(address, path + (0,), n.ADDRESS, scope)
                return n.UINT
            case n.Send(target=target, amount=amount):
                self._expect(target, path + (0,), n.ADDRESS, scope)
                self._expect(amount, path + (1,), n.UINT, scope)
                return n.BOOL
        self.error(path, f"unexpected expression {type(expr).__name__}")
        return None

    def _binary(self, op, lhs, rhs, path, scope) -> Optional[n.TypeName]:
        if op in n.ARITHMETIC_OPS:
            self._expect(lhs, path + (0,), n.UINT, scope)
            self._expect(rhs, path + (1,), n.UINT, scope)
            return n.UINT
        if op in n.COMPARISON_OPS:
            self._expect(lhs, path + (0,), n.UINT, scope)
            self._expect(rhs, path + (1,), n.UINT, scope)
            return n.BOOL
        if op in n.LOGICAL_OPS:
            self._expect(lhs, path + (0,), n.BOOL, scope)
            self._expect(rhs, path + (1,), n.BOOL, scope)
            return n.BOOL
        if op in n.EQUALITY_OPS:
            left = self._expr(lhs, path + (0,), scope)
            right = self._expr(rhs, path + (1,), scope)
            if left is not None and right is not None and left != right:
                self.error(path, f"cannot compare {left} with {right}")
            return n.BOOL
        self.error(path, f"unknown operator '{op}'")
        return None
