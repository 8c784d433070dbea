"""
The repair loop.

Genetic mode bootstraps a population of mutants of the original, then alternates
selection and breeding until the population holds a plausible patch, the generators
run dry or the time budget is spent:

    population := original + IP mutants
    loop:
        plausible := filter_plausible(population)      -> done when non-empty
        population := nsga2_select(population, Psize)
        population += GR mutants of parents drawn by binary tournament

Unguided random search (URS) uses the same generators without selection: every new
candidate mutates a uniformly drawn, previously generated candidate (or the original),
and its evaluation stops at the first vulnerability or failing test.
"""

from __future__ import annotations

import logging
import random
import threading
import time
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

from ..config import SearchConfig
from ..detect import detect_all
from ..gas import DominanceVerdict, compare_dominance, dominance_levels
from ..lang import nodes as n
from ..lang.printer import pretty_print
from ..mutate import SpaceId
from ..testgen import TestCase, TransactionRecord
from .candidates import (
    Candidate,
    candidate_gas,
    evaluate,
    filter_plausible,
    mean_concrete_gas,
    reverify,
)
from .nsga import Ranked, best, rank_select, tournament
from .report import PlausiblePatch, RepairReport, config_echo
from .workers import GeneratorPool

logger = logging.getLogger(__name__)


class GasMaxCell:
    """The cheapest plausible candidate so far, by gas dominance"""

    def __init__(self):
        self._lock = threading.Lock()
        self.holder: Optional[Candidate] = None

    def offer(self, candidate: Candidate):
        if candidate.gas_formula is None:
            return
        with self._lock:
            if self.holder is None or (
                compare_dominance(candidate.gas_formula, self.holder.gas_formula)
                is DominanceVerdict.A_DOMINATES_B
            ):
                self.holder = candidate

    def dominates(self, candidate: Candidate) -> bool:
        """True when the holder's gas formula dominates the candidate's"""
        with self._lock:
            holder = self.holder
        if holder is None or candidate.gas_formula is None:
            return False
        verdict = compare_dominance(holder.gas_formula, candidate.gas_formula)
        return verdict is DominanceVerdict.A_DOMINATES_B


@dataclass
class SearchStats:
    evaluations: int = 0
    discarded: int = 0
    generations: int = 0
    timed_out: bool = False
    interrupted: bool = False
    exhausted: bool = False
    generated: Counter = field(default_factory=Counter)


class RepairEngine:
    """Runs one repair of `contract` against its regression suite.

    Args:
        contract: the original (typechecked) contract.
        config: search configuration.
        tests: regression tests recorded from the original.
        weight_log: transactions weighting paths in the gas formulas; uniform
            weights when None.
    """

    def __init__(
        self,
        contract: n.Contract,
        config: SearchConfig,
        tests: Sequence[TestCase] = (),
        weight_log: Optional[Sequence[TransactionRecord]] = None,
    ):
        self.contract = contract
        self.config = config
        self.tests = list(tests)
        self.weight_log = weight_log
        self.stats = SearchStats()
        self.gmax = GasMaxCell() if config.gmax_early_discard else None
        self._seen: set[str] = set()
        self._started = 0.0
        self._deadline = 0.0
        self._pool: Optional[ThreadPoolExecutor] = None
        self._best: Optional[Candidate] = None
        self._parents = random.Random(f"{config.seed}:parents")

    ##########
    # Budget
    ##########

    def expired(self) -> bool:
        return time.monotonic() >= self._deadline

    def _out_of_generations(self) -> bool:
        limit = self.config.max_generations
        return limit is not None and self.stats.generations >= limit

    ##############
    # Evaluation
    ##############

    def _evaluate(self, candidate: Candidate, short_circuit: bool = False) -> Candidate:
        discard = self.gmax.dominates if self.gmax is not None else None
        scored = evaluate(
            candidate,
            self.config.targeted_kinds,
            self.tests,
            self.config,
            pool=self._pool,
            short_circuit=short_circuit,
            discard=discard,
            deadline=self._deadline,
            weight_log=self.weight_log,
        )
        fitness = scored.fitness
        if not fitness.complete and not short_circuit:
            self.stats.discarded += 1
        else:
            self.stats.evaluations += 1
        if self.gmax is not None and fitness.valid:
            self.gmax.offer(scored)
        if self._best is None or scored.sort_key() < self._best.sort_key():
            self._best = scored
        logger.debug(
            "%s %s -> %s",
            scored.space.value if scored.space else "--",
            scored.content_hash[:12],
            fitness.key(),
        )
        return scored

    def _fresh(self, candidate: Optional[Candidate]) -> bool:
        """Count a generated candidate; False for a duplicate of an earlier one"""
        if candidate is None:
            return False
        self.stats.generated[candidate.space.value] += 1
        if candidate.content_hash in self._seen:
            return False
        self._seen.add(candidate.content_hash)
        return True

    ###########
    # Running
    ###########

    def run(self) -> RepairReport:
        """Search, then report (an immediate report when nothing is vulnerable)"""
        self._started = time.monotonic()
        self._deadline = self._started + self.config.max_bound
        before = detect_all(self.contract, self.config.targeted_kinds)
        if not len(before):
            logger.info("no targeted vulnerability in %s", self.contract.name)
            return self._report([], before.counts(), before.counts(), "no_vulnerabilities")

        workers = 1 if self.config.deterministic else self.config.evaluators
        if workers > 1:
            self._pool = ThreadPoolExecutor(max_workers=workers, thread_name_prefix="eval")
        try:
            with GeneratorPool(
                self.contract, self.config.seed, self.config.deterministic
            ) as generators:
                if self.config.mode == "urs":
                    plausible = self._run_urs(generators)
                else:
                    plausible = self._run_genetic(generators)
        finally:
            if self._pool is not None:
                self._pool.shutdown(wait=True, cancel_futures=True)
                self._pool = None

        after = detect_all(self._best.contract, self.config.targeted_kinds).counts()
        status = "repaired" if plausible else "no_plausible_patch"
        return self._report(plausible, before.counts(), after, status)

    def _run_genetic(self, generators: GeneratorPool) -> list[Candidate]:
        config = self.config
        root = Candidate.root(self.contract)
        self._seen.add(root.content_hash)
        # the scored root carries the detector hints
        root = self._evaluate(root)
        population = [root]
        try:
            for _ in range(config.initial_population):
                if self.expired():
                    break
                candidate = generators.request(root, 0)
                if candidate is None:
                    break
                if self._fresh(candidate):
                    population.append(self._evaluate(candidate))
            exhausted: set[str] = set()
            while True:
                plausible = filter_plausible(population, config)
                if plausible:
                    return plausible
                if self.expired():
                    self.stats.timed_out = True
                    return []
                if self._out_of_generations():
                    return []
                ranked = rank_select(population, config.population_size, config.gas_objective)
                population = [entry.candidate for entry in ranked]
                self.stats.generations += 1
                offspring = self._breed(ranked, generators, exhausted)
                logger.info(
                    "generation %d: %d candidates, best %s, %d new",
                    self.stats.generations,
                    len(population),
                    best(population).fitness.key(),
                    len(offspring),
                )
                if not offspring and self._all_exhausted(population, exhausted):
                    self.stats.exhausted = True
                    return []
                population.extend(offspring)
        except KeyboardInterrupt:
            logger.warning("interrupted, reporting the best candidates so far")
            self.stats.interrupted = True
            return filter_plausible(population, config)

    def _breed(
        self, ranked: list[Ranked], generators: GeneratorPool, exhausted: set[str]
    ) -> list[Candidate]:
        """GR new candidates, each mutating a parent drawn by tournament among the
        survivors whose samplers are not exhausted"""
        live = [entry for entry in ranked if entry.candidate.content_hash not in exhausted]
        # duplicates and dry parents consume draws; give up on this generation after
        # this many fruitless requests
        patience = 2 * len(ranked) + self.config.generation_size
        offspring = []
        for _ in range(self.config.generation_size):
            produced = None
            while live and patience > 0 and not self.expired():
                parent = tournament(live, self._parents)
                produced = generators.request(parent.candidate, self.stats.generations)
                if produced is None:
                    exhausted.add(parent.candidate.content_hash)
                    live.remove(parent)
                elif self._fresh(produced):
                    break
                else:
                    produced = None
                patience -= 1
            if produced is None:
                break
            offspring.append(self._evaluate(produced))
        return offspring

    @staticmethod
    def _all_exhausted(population, exhausted: set[str]) -> bool:
        return all(c.content_hash in exhausted for c in population)

    def _run_urs(self, generators: GeneratorPool) -> list[Candidate]:
        config = self.config
        rng = random.Random(config.seed)
        root = Candidate.root(self.contract)
        self._seen.add(root.content_hash)
        root = self._best = self._evaluate(root, short_circuit=True)
        retained = [root]
        found: list[Candidate] = []
        try:
            while not found:
                if self.expired():
                    self.stats.timed_out = True
                    break
                if self._out_of_generations():
                    break
                self.stats.generations += 1
                batch = []
                for _ in range(config.generation_size):
                    if self.expired() or not retained:
                        break
                    base = rng.choice(retained)
                    candidate = generators.request(base, self.stats.generations)
                    if candidate is None:
                        retained.remove(base)
                        continue
                    if not self._fresh(candidate):
                        continue
                    scored = self._evaluate(candidate, short_circuit=True)
                    batch.append(scored)
                    retained.append(scored)
                    if len(retained) > config.retention:
                        # the original stays a possible base
                        del retained[1 if retained[0] is root else 0]
                found = filter_plausible(batch, config)
                if not retained:
                    self.stats.exhausted = True
                    break
        except KeyboardInterrupt:
            logger.warning("interrupted, reporting the plausible candidates so far")
            self.stats.interrupted = True
        return found

    #############
    # Reporting
    #############

    def _report(self, plausible, before, after, status) -> RepairReport:
        config = self.config
        ordered = sorted(plausible, key=lambda c: (c.distance, c.content_hash))
        original_formula = candidate_gas(self.contract, config, self.weight_log)
        formulas = [original_formula] + [c.gas_formula for c in ordered]
        known = [i for i, f in enumerate(formulas) if f is not None]
        joint = dict(zip(known, dominance_levels([formulas[i] for i in known]))) if known else {}

        entries = []
        for i, candidate in enumerate(ordered, start=1):
            formula = candidate.gas_formula
            entries.append(
                PlausiblePatch(
                    content_hash=candidate.content_hash,
                    space=candidate.space.value if candidate.space else None,
                    distance=candidate.distance,
                    edits=candidate.patch.to_json(),
                    source=pretty_print(candidate.contract),
                    gas_formula=str(formula) if formula is not None else None,
                    gas_level=joint.get(i),
                    gas_differs=formula != original_formula,
                    level_differs=joint.get(i) != joint.get(0),
                    mean_gas=str(mean_concrete_gas(candidate.contract, self.tests, config)),
                    verified=reverify(candidate, self.contract, self.tests, config),
                )
            )
        report = RepairReport(
            status=status,
            mode=config.mode,
            config=config_echo(config),
            cost_table=config.cost_table.digest(),
            vulnerabilities_before=before,
            vulnerabilities_after=after,
            original_gas_formula=str(original_formula) if original_formula is not None else None,
            original_gas_level=joint.get(0),
            plausible=entries,
            recommended=self._recommended(ordered),
            generated={s.value: self.stats.generated.get(s.value, 0) for s in SpaceId},
            evaluations=self.stats.evaluations,
            discarded=self.stats.discarded,
            generations=self.stats.generations,
            timed_out=self.stats.timed_out,
            interrupted=self.stats.interrupted,
            exhausted=self.stats.exhausted,
            elapsed=None if config.deterministic else round(time.monotonic() - self._started, 3),
        )
        logger.info(
            "%s: %d plausible patch(es) after %d evaluations",
            status,
            len(entries),
            self.stats.evaluations,
        )
        return report

    def _recommended(self, plausible: list[Candidate]) -> list[str]:
        """Plausible patches no other plausible patch gas-dominates (all of them
        when the gas objective is off)"""
        if not self.config.gas_objective:
            return [c.content_hash for c in plausible]
        with_gas = [c for c in plausible if c.gas_formula is not None]
        levels = dominance_levels([c.gas_formula for c in with_gas]) if with_gas else []
        preferred = {c.content_hash for c, level in zip(with_gas, levels) if level == 1}
        return [
            c.content_hash
            for c in plausible
            if c.gas_formula is None or c.content_hash in preferred
        ]


def repair(
    contract: n.Contract,
    config: SearchConfig,
    tests: Sequence[TestCase] = (),
    weight_log: Optional[Sequence[TransactionRecord]] = None,
) -> RepairReport:
    """Genetic repair (the mode in config is overridden)"""
    genetic = config.model_copy(update={"mode": "genetic"})
    return RepairEngine(contract, genetic, tests, weight_log).run()


def repair_urs(
    contract: n.Contract,
    config: SearchConfig,
    tests: Sequence[TestCase] = (),
    weight_log: Optional[Sequence[TransactionRecord]] = None,
) -> RepairReport:
    """Unguided random search repair (the mode in config is overridden)"""
    unguided = config.model_copy(update={"mode": "urs"})
    return RepairEngine(contract, unguided, tests, weight_log).run()
