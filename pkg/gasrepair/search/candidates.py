"""
Candidates, their fitness, and the plausibility checks.

A candidate is a patch of the original contract together with the contract it
produces.  Its fitness has four components, all minimised:

    vuln_count    targeted vulnerabilities still detected
    fail_count    regression tests that fail
    gas_level     gas-dominance level within the current population
    mut_distance  mutation operators applied since the original

The last two only discriminate between valid candidates (no vulnerability, no failing
test); gas_level is assigned at selection time, eval() leaves it at zero.
"""

from __future__ import annotations

import logging
import time
from concurrent.futures import Executor
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Callable, Iterable, Optional, Sequence

from ..config import SearchConfig
from ..detect import VulnKind, detect_all
from ..exceptions import ApplyError, ExecutionTimeout, GasRepairError
from ..gas import GasFormula, check_gas_bound, expected_gas_formula, log_weights
from ..lang import nodes as n
from ..lang.printer import content_hash
from ..lang.typecheck import is_compilable
from ..mutate import Patch, SpaceId, apply, mutation_distance
from ..testgen import TestCase, TransactionRecord
from ..vm import replay, run_test

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class FitnessVector:
    vuln_count: int
    fail_count: int
    gas_level: int = 0
    mut_distance: int = 0
    # False when evaluation stopped early (fail_count is then a lower bound).  Only
    # candidates with a targeted vulnerability stop early, so this never hides a
    # plausible patch; keep it that way if the discard order changes.
    complete: bool = True

    @property
    def valid(self) -> bool:
        return self.complete and self.vuln_count == 0 and self.fail_count == 0

    def key(self) -> tuple[int, int, int, int]:
        """Lexicographic 'highest fitness' order, best first"""
        return (self.vuln_count, self.fail_count, self.gas_level, self.mut_distance)

    def to_json(self) -> dict:
        return {
            "vulnCount": self.vuln_count,
            "failCount": self.fail_count,
            "gasLevel": self.gas_level,
            "mutDistance": self.mut_distance,
        }


@dataclass(frozen=True)
class Candidate:
    """A patch of the original, the contract it yields and where it came from"""

    patch: Patch
    contract: n.Contract = field(repr=False)
    space: Optional[SpaceId] = None
    generation: int = 0
    parent: Optional[str] = None
    fitness: Optional[FitnessVector] = None
    hints: tuple[n.NodeId, ...] = field(default=(), repr=False)
    gas_formula: Optional[GasFormula] = field(default=None, repr=False)
    content_hash: str = field(init=False, default="")

    def __post_init__(self):
        object.__setattr__(self, "content_hash", content_hash(self.contract))

    @classmethod
    def root(cls, contract: n.Contract) -> Candidate:
        return cls(Patch(content_hash(contract)), contract)

    @property
    def distance(self) -> int:
        return mutation_distance(self.patch)

    def with_fitness(self, fitness: FitnessVector) -> Candidate:
        return replace(self, fitness=fitness)

    def sort_key(self) -> tuple:
        return (self.fitness.key() if self.fitness else (1 << 62,), self.content_hash)


def candidate_gas(
    contract: n.Contract,
    config: SearchConfig,
    weight_log: Optional[Sequence[TransactionRecord]] = None,
) -> Optional[GasFormula]:
    """Expected-gas formula of a contract, None when it cannot be derived"""
    table = config.cost_table
    try:
        weights = None
        if weight_log is not None:
            weights = log_weights(contract, weight_log, table=table, gas_limit=config.gas_limit)
        return expected_gas_formula(contract, weights, table, config.path_cap)
    except GasRepairError as e:
        logger.debug("no gas formula: %s", e)
        return None


def _test_fails(contract, test, config: SearchConfig, deadline: Optional[float]) -> bool:
    limit = time.monotonic() + config.per_test_timeout
    if deadline is not None:
        limit = min(limit, deadline)
    try:
        verdict = run_test(contract, test, config.cost_table, config.gas_limit, limit)
    except ExecutionTimeout:
        return True
    return not verdict.passed


def evaluate(
    candidate: Candidate,
    kinds: Iterable[VulnKind],
    tests: Sequence[TestCase],
    config: SearchConfig,
    pool: Optional[Executor] = None,
    short_circuit: bool = False,
    discard: Optional[Callable[[Candidate], bool]] = None,
    deadline: Optional[float] = None,
    weight_log: Optional[Sequence[TransactionRecord]] = None,
) -> Candidate:
    """Fitness of a compilable candidate.

    Args:
        candidate: the candidate to score.
        kinds: targeted vulnerability kinds.
        tests: the regression suite.
        config: search configuration (cost table, gas limit, timeouts).
        pool: runs the tests concurrently when given.
        short_circuit: stop at the first vulnerability or the first failing test.
        discard: called with a still-vulnerable candidate (gas formula attached)
            before its tests run; returning True stops the evaluation there.  A
            candidate with no targeted vulnerability is always fully tested, so a
            discard never hides a plausible patch.
        deadline: monotonic time after which running tests count as failing.
        weight_log: transactions weighting paths in the gas formula.

    Returns:
        The candidate with fitness and gas formula attached.  An evaluation cut short
        has fitness.complete False.
    """
    contract = candidate.contract
    found = detect_all(contract, kinds)
    formula = candidate_gas(contract, config, weight_log)
    scored = replace(candidate, hints=found.locations(), gas_formula=formula)
    distance = candidate.distance
    if short_circuit and len(found):
        return scored.with_fitness(FitnessVector(len(found), 0, 0, distance, complete=False))
    if discard is not None and len(found) and discard(scored):
        logger.debug("discarding %s before its tests", candidate.content_hash[:12])
        return scored.with_fitness(FitnessVector(len(found), 0, 0, distance, complete=False))

    if short_circuit:
        failures = 0
        for test in tests:
            if _test_fails(contract, test, config, deadline):
                failures = 1
                break
        complete = failures == 0
    else:
        if pool is not None:
            outcomes = list(pool.map(lambda t: _test_fails(contract, t, config, deadline), tests))
        else:
            outcomes = [_test_fails(contract, t, config, deadline) for t in tests]
        failures = sum(outcomes)
        complete = True
    return scored.with_fitness(FitnessVector(len(found), failures, 0, distance, complete))


def within_gas_bound(candidate: Candidate, config: SearchConfig) -> bool:
    if config.gas_bound is None:
        return True
    try:
        verdict = check_gas_bound(
            candidate.contract,
            config.gas_bound,
            config.cost_table,
            config.trip_cap,
            config.path_cap,
        )
    except GasRepairError as e:
        logger.info("gas bound undecided for %s: %s", candidate.content_hash[:12], e)
        return False
    return verdict.within


def filter_plausible(
    population: Iterable[Candidate], config: SearchConfig
) -> list[Candidate]:
    """Fully evaluated candidates with no targeted vulnerability, no failing test and,
    when a gas bound is set, no path exceeding it"""
    return [
        c
        for c in population
        if c.fitness is not None
        and c.fitness.valid
        and within_gas_bound(c, config)
    ]


def reverify(
    candidate: Candidate,
    original: n.Contract,
    tests: Sequence[TestCase],
    config: SearchConfig,
) -> bool:
    """Check a reported patch from scratch: it applies to the original, typechecks,
    removes every targeted vulnerability, passes every test and respects the bound"""
    try:
        contract = apply(candidate.patch, original)
    except ApplyError as e:
        logger.warning("patch %s no longer applies: %s", candidate.content_hash[:12], e)
        return False
    if content_hash(contract) != candidate.content_hash or not is_compilable(contract):
        return False
    if len(detect_all(contract, config.targeted_kinds)):
        return False
    fresh = replace(candidate, contract=contract)
    if any(_test_fails(contract, test, config, None) for test in tests):
        return False
    return within_gas_bound(fresh, config)


def mean_concrete_gas(
    contract: n.Contract, tests: Sequence[TestCase], config: SearchConfig
) -> Fraction:
    """Average gas used by the regression suite on contract"""
    if not tests:
        return Fraction(0)
    used = sum(
        replay(contract, test, config.cost_table, config.gas_limit).gas_used
        for test in tests
    )
    return Fraction(used, len(tests))
