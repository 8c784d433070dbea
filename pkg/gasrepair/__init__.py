"""Top-level package for gasrepair: gas-aware search-based repair of MiniSol contracts"""

__author__ = """Joseph Fall"""
__email__ = "powderflask@gmail.com"
__version__ = "0.1.0"

from .config import CostTable, SearchConfig
from .detect import VulnKind, detect_all
from .lang import parse, pretty_print, typecheck
from .search import repair, repair_urs

__all__ = [
    "CostTable",
    "SearchConfig",
    "VulnKind",
    "detect_all",
    "parse",
    "pretty_print",
    "repair",
    "repair_urs",
    "typecheck",
]
