"""Symbolic gas: path formulas, expected gas, dominance and gas bounds"""

from .dominance import (
    DominanceVerdict,
    GasBoundVerdict,
    PathPartition,
    check_gas_bound,
    classify_paths,
    compare_dominance,
    dominance_levels,
    partition_paths,
    reduced_compare,
)
from .formula import GasFormula, SubstitutionBinding, to_polynomial
from .paths import (
    Path,
    Step,
    enumerate_paths,
    expected_gas_formula,
    lifespan_gas,
    log_weights,
    path_gas_formula,
)

__all__ = [
    "DominanceVerdict",
    "GasBoundVerdict",
    "GasFormula",
    "Path",
    "PathPartition",
    "Step",
    "SubstitutionBinding",
    "check_gas_bound",
    "classify_paths",
    "compare_dominance",
    "dominance_levels",
    "enumerate_paths",
    "expected_gas_formula",
    "lifespan_gas",
    "log_weights",
    "partition_paths",
    "path_gas_formula",
    "reduced_compare",
    "to_polynomial",
]
