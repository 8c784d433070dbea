"""MiniSol: grammar, AST, type checking, printing and mutable-site catalog"""

from .nodes import Contract, NodeId
from .parser import parse, parse_file
from .printer import content_hash, pretty_print, pretty_print_with_lines
from .sites import MutableSites, mutable_sites
from .typecheck import TypeCheckError, is_compilable, typecheck

__all__ = [
    "Contract",
    "MutableSites",
    "NodeId",
    "TypeCheckError",
    "content_hash",
    "is_compilable",
    "mutable_sites",
    "parse",
    "parse_file",
    "pretty_print",
    "pretty_print_with_lines",
    "typecheck",
]
