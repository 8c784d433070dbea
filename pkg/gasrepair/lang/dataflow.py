"""Name-level read/write sets of AST subtrees"""

from __future__ import annotations

from typing import Iterable

from . import nodes as n


def names_read(node: n.Node) -> set[str]:
    """Variables and mappings read anywhere in the subtree (assignment targets excluded,
    their mapping keys included)"""
    found: set[str] = set()
    _collect_reads(node, found)
    return found


def _collect_reads(node: n.Node, found: set[str]):
    match node:
        case n.Var(name=name):
            found.add(name)
            return
        case n.MappingIndex(name=name, key=key):
            found.add(name)
            _collect_reads(key, found)
            return
        case n.Assign(target=target, value=value):
            if isinstance(target, n.MappingIndex):
                _collect_reads(target.key, found)
            _collect_reads(value, found)
            return
    for child in node.children():
        _collect_reads(child, found)


def names_written(node: n.Node) -> set[str]:
    """Variables and mappings assigned (or declared) anywhere in the subtree"""
    written: set[str] = set()
    for _, sub in n.iter_nodes(node):
        if isinstance(sub, n.Assign):
            written.add(sub.target.name)
        elif isinstance(sub, n.VarDecl):
            written.add(sub.name)
    return written


def contains(node: n.Node, kind: type) -> bool:
    return any(isinstance(sub, kind) for _, sub in n.iter_nodes(node))


def state_names(contract: n.Contract, function: n.Function) -> set[str]:
    """State variables a function can see (those not shadowed by a parameter or local)"""
    local = {p.name for p in function.params}
    local |= {s.name for _, s in n.iter_nodes(function.body) if isinstance(s, n.VarDecl)}
    return {v.name for v in contract.state_vars} - local


def conjuncts(expr: n.Expression) -> Iterable[n.Expression]:
    """The operands of a (possibly nested) && chain"""
    if isinstance(expr, n.Binary) and expr.op == "&&":
        yield from conjuncts(expr.lhs)
        yield from conjuncts(expr.rhs)
    else:
        yield expr
