"""
Gas dominance between contracts.

A dominates B when A's expected gas is never higher and somewhere lower.  The
decision procedure works on the polynomial image of both formulas:

    rule 1: different numbers of monomials          -> no dominance
    rule 2: coefficient vectors aligned by monomial -> A <= B and A != B: A dominates

Rule 1 is kept literally: 5n + 1 and 5n do not dominate each other.
"""

from __future__ import annotations

import logging
from collections import defaultdict
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Optional, Sequence

import sympy

from ..config import CostTable
from ..lang import nodes as n
from ..vm import DEFAULT_COST_TABLE
from .formula import GasFormula, SubstitutionBinding, to_polynomial, total
from .paths import DEFAULT_PATH_CAP, Path, enumerate_paths, path_gas_formula

logger = logging.getLogger(__name__)


class DominanceVerdict(str, Enum):
    A_DOMINATES_B = "AdominatesB"
    B_DOMINATES_A = "BdominatesA"
    NO_DOMINANCE = "NoDominance"


def coefficient_vector(
    formula: GasFormula, binding: SubstitutionBinding, gens: Sequence[sympy.Symbol]
) -> dict[tuple[int, ...], Fraction]:
    """Nonzero coefficients of the formula's polynomial image, keyed by monomial"""
    poly = to_polynomial(formula, binding, gens)
    return {
        monomial: Fraction(int(c.p), int(c.q))
        for monomial, c in poly.as_dict().items()
        if c != 0
    }


def _generators(binding, *formulas: GasFormula) -> list[sympy.Symbol]:
    symbols: set[sympy.Symbol] = set()
    for formula in formulas:
        symbols |= formula.to_sympy(binding).free_symbols
    return sorted(symbols, key=str) or [sympy.Symbol(f"{SubstitutionBinding.PREFIX}0")]


def _vectors(fa, fb, binding):
    gens = _generators(binding, fa, fb)
    return coefficient_vector(fa, binding, gens), coefficient_vector(fb, binding, gens)


def order_vectors(
    va: dict[tuple[int, ...], Fraction], vb: dict[tuple[int, ...], Fraction]
) -> DominanceVerdict:
    """Rule 2 over the union of monomials (absent coefficients read as zero)"""
    keys = set(va) | set(vb)
    a_le_b = all(va.get(k, 0) <= vb.get(k, 0) for k in keys)
    b_le_a = all(vb.get(k, 0) <= va.get(k, 0) for k in keys)
    if a_le_b and b_le_a:
        return DominanceVerdict.NO_DOMINANCE
    if a_le_b:
        return DominanceVerdict.A_DOMINATES_B
    if b_le_a:
        return DominanceVerdict.B_DOMINATES_A
    return DominanceVerdict.NO_DOMINANCE


def compare_dominance(
    fa: GasFormula, fb: GasFormula, binding: Optional[SubstitutionBinding] = None
) -> DominanceVerdict:
    """Decide gas dominance between two formulas under one substitution session"""
    binding = binding if binding is not None else SubstitutionBinding()
    va, vb = _vectors(fa, fb, binding)
    if len(va) != len(vb):
        return DominanceVerdict.NO_DOMINANCE
    return order_vectors(va, vb)


def dominance_levels(formulas: Sequence[GasFormula]) -> list[int]:
    """Non-dominated sorting rank of each formula (1 = dominated by none)"""
    if not formulas:
        raise ValueError("dominance levels need at least one formula")
    binding = SubstitutionBinding()
    # identical formulas compare the same way: compare each distinct one once
    distinct = list(dict.fromkeys(formulas))
    count = len(distinct)
    dominated_by = [0] * count
    dominates: list[list[int]] = [[] for _ in range(count)]
    for i in range(count):
        for j in range(i + 1, count):
            verdict = compare_dominance(distinct[i], distinct[j], binding)
            if verdict is DominanceVerdict.A_DOMINATES_B:
                dominates[i].append(j)
                dominated_by[j] += 1
            elif verdict is DominanceVerdict.B_DOMINATES_A:
                dominates[j].append(i)
                dominated_by[i] += 1
    rank = [0] * count
    front = [i for i in range(count) if dominated_by[i] == 0]
    level = 1
    while front:
        following = []
        for i in front:
            rank[i] = level
            for j in dominates[i]:
                dominated_by[j] -= 1
                if dominated_by[j] == 0:
                    following.append(j)
        front = following
        level += 1
    position = {formula: index for index, formula in enumerate(distinct)}
    return [rank[position[formula]] for formula in formulas]


###################
# Path differences
###################


@dataclass
class PathPartition:
    joint: list[tuple[Path, Path]] = field(default_factory=list)
    repaired: list[tuple[Path, Path]] = field(default_factory=list)
    new: list[Path] = field(default_factory=list)
    removed: list[Path] = field(default_factory=list)


def _pair_off(old: list[Path], new: list[Path], key) -> tuple[list, list, list]:
    """Match paths with equal keys (as multisets); returns (pairs, old rest, new rest)"""
    pool: dict = defaultdict(list)
    for index, path in enumerate(old):
        pool[key(path)].append(index)
    pairs, rest_new = [], []
    used = set()
    for path in new:
        candidates = pool.get(key(path))
        if candidates:
            index = candidates.pop(0)
            used.add(index)
            pairs.append((old[index], path))
        else:
            rest_new.append(path)
    rest_old = [path for index, path in enumerate(old) if index not in used]
    return pairs, rest_old, rest_new


def partition_paths(old_paths: list[Path], new_paths: list[Path]) -> PathPartition:
    """Split two path sets into joint, repaired, new and removed paths"""
    joint, old_rest, new_rest = _pair_off(old_paths, new_paths, lambda p: p.signature)
    repaired, removed, new = _pair_off(old_rest, new_rest, lambda p: p.skeleton)
    return PathPartition(joint, repaired, new, removed)


def classify_paths(
    old: n.Contract, new: n.Contract, cap: int = DEFAULT_PATH_CAP
) -> PathPartition:
    """Joint paths are syntactically identical (same statements, kinds and weights);
    repaired paths keep their function, outcome and branch decisions but differ in
    content; the rest are new (in `new`) or removed (from `old`)."""
    return partition_paths(enumerate_paths(old, cap), enumerate_paths(new, cap))


def reduced_compare(
    old: n.Contract,
    new: n.Contract,
    table: CostTable = DEFAULT_COST_TABLE,
    cap: int = DEFAULT_PATH_CAP,
    binding: Optional[SubstitutionBinding] = None,
) -> DominanceVerdict:
    """compare_dominance(old, new) on expected formulas, skipping joint paths.

    Joint paths contribute the same terms to both expected formulas.  With uniform
    weights over equally many paths the comparison reduces to the two Diff sums
    (rule 2), and rule 1 to the monomials of the joint sum plus each Diff sum;
    path formulas have non-negative coefficients, so no term cancels.
    """
    binding = binding if binding is not None else SubstitutionBinding()
    old_paths = enumerate_paths(old, cap)
    new_paths = enumerate_paths(new, cap)
    if len(old_paths) != len(new_paths):
        return compare_dominance(
            _uniform(old_paths, table), _uniform(new_paths, table), binding
        )
    partition = partition_paths(old_paths, new_paths)
    joint_old = {id(a) for a, _ in partition.joint}
    joint_new = {id(b) for _, b in partition.joint}
    shared = total(path_gas_formula(a, table) for a, _ in partition.joint)
    diff_old = total(path_gas_formula(p, table) for p in old_paths if id(p) not in joint_old)
    diff_new = total(path_gas_formula(p, table) for p in new_paths if id(p) not in joint_new)
    gens = _generators(binding, shared, diff_old, diff_new)
    v_shared = coefficient_vector(shared, binding, gens)
    v_old = coefficient_vector(diff_old, binding, gens)
    v_new = coefficient_vector(diff_new, binding, gens)
    if len(set(v_shared) | set(v_old)) != len(set(v_shared) | set(v_new)):
        return DominanceVerdict.NO_DOMINANCE
    return order_vectors(v_old, v_new)


def _uniform(paths: list[Path], table: CostTable) -> GasFormula:
    if not paths:
        return GasFormula()
    weight = Fraction(1, len(paths))
    return total(path_gas_formula(p, table) * weight for p in paths)


#############
# Gas bound
#############


@dataclass(frozen=True)
class GasBoundVerdict:
    """WithinBound, or Exceeds with the offending path and a witness assignment"""

    within: bool
    path: Optional[Path] = None
    witness: Optional[dict[str, int]] = None
    gas: Optional[Fraction] = None
    unbounded: bool = False


def check_gas_bound(
    contract: n.Contract,
    limit: int,
    table: CostTable = DEFAULT_COST_TABLE,
    trip_cap: int = 1024,
    cap: int = DEFAULT_PATH_CAP,
) -> GasBoundVerdict:
    """Every path's gas, maximised over trip counts in [0, trip_cap], is <= limit.

    A path through a loop that nothing can stop exceeds any finite limit.
    """
    if limit <= 0:
        raise ValueError("the gas bound must be positive")
    for path in enumerate_paths(contract, cap):
        formula = path_gas_formula(path, table)
        witness = {var: trip_cap for _, var in path.loop_vars}
        for var in sorted(path.unbounded):
            grows = any(
                coefficient > 0 and any(v == var for v, _ in mono)
                for (mono, _), coefficient in formula.terms.items()
            )
            if grows:
                return GasBoundVerdict(False, path, witness, None, unbounded=True)
        # coefficients are non-negative: the maximum sits at the trip cap
        gas = formula.evaluate(witness)
        if gas > limit:
            return GasBoundVerdict(False, path, witness, gas)
    return GasBoundVerdict(True)
