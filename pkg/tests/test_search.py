"""
    Test suite for the repair search: NSGA-II selection, generators, candidates, engine.
"""
import math
import random
from dataclasses import replace
from functools import lru_cache
from unittest import TestCase

from gasrepair.config import SearchConfig
from gasrepair.detect import VulnKind
from gasrepair.gas import DominanceVerdict, GasFormula, compare_dominance
from gasrepair.lang import NodeId, content_hash, is_compilable, parse
from gasrepair.lang import nodes as n
from gasrepair.mutate import Patch, Replace, SpaceId, apply
from gasrepair.search import (
    Candidate,
    FitnessVector,
    GeneratorPool,
    RepairEngine,
    crowding_distance,
    evaluate,
    fast_non_dominated_sort,
    filter_plausible,
    nsga2_select,
    repair,
    repair_urs,
    reverify,
)
from gasrepair.search.engine import GasMaxCell
from gasrepair.search.nsga import Ranked, best, dominates, rank_select, tournament
from tests.fixtures import contract, load, payout, suite

###############
# Test Fixtures
###############

ED_ONLY = frozenset({VulnKind.ED})

# Payout that never pays: no unchecked send left, but its tests fail
SILENT_PAYOUT = """
contract Payout {
    mapping(address => uint) owed;

    function claim() public {
        uint amount = owed[msg.sender];
        owed[msg.sender] = 0;
    }
}
"""


def search_config(**overrides):
    """A small, reproducible search"""
    settings = dict(
        seed=7,
        deterministic=True,
        targeted_kinds=ED_ONLY,
        initial_population=20,
        generation_size=10,
        population_size=20,
        max_generations=30,
        max_bound=600.0,
    )
    settings.update(overrides)
    return SearchConfig(**settings)


def checked_payout():
    """Payout with its send wrapped in a require, as a candidate"""
    subject, _ = payout()
    site = NodeId(subject.function_id("claim").path + (0, 2))
    send = n.node_at(subject, site.path).expr
    patch = Patch(content_hash(subject), (Replace(site, n.Require(send)),))
    return Candidate(patch, apply(patch, subject), space=SpaceId.S2)


def numbered(i, fitness, gas=None):
    """A candidate with a distinct contract and the given fitness"""
    contract = parse(f"contract C{i} {{ uint x; function f() public {{ x = {i}; }} }}")
    candidate = Candidate.root(contract).with_fitness(fitness)
    return replace(candidate, gas_formula=gas) if gas is not None else candidate


def peel_fronts(vectors):
    """Non-dominated fronts by repeatedly removing the non-dominated set"""
    remaining = list(range(len(vectors)))
    fronts = []
    while remaining:
        front = [
            i for i in remaining if not any(dominates(vectors[j], vectors[i]) for j in remaining)
        ]
        fronts.append(front)
        remaining = [i for i in remaining if i not in front]
    return fronts


#########
# NSGA-II
#########


class SortingTests(TestCase):
    def test_matches_peeling(self):
        """Fast non-dominated sorting agrees with brute-force peeling"""
        rng = random.Random(11)
        for _ in range(200):
            size = rng.randint(1, 32)
            vectors = [tuple(rng.randint(0, 4) for _ in range(4)) for _ in range(size)]
            self.assertEqual(fast_non_dominated_sort(vectors), peel_fronts(vectors), vectors)

    def test_fronts_partition(self):
        """Every index lands in exactly one front"""
        vectors = [(1, 2), (2, 1), (1, 1), (3, 3), (1, 1)]
        fronts = fast_non_dominated_sort(vectors)
        self.assertEqual(fronts, [[2, 4], [0, 1], [3]])

    def test_dominates(self):
        """Pareto dominance needs one strict improvement"""
        self.assertTrue(dominates((0, 1), (0, 2)))
        self.assertFalse(dominates((0, 2), (0, 2)))
        self.assertFalse(dominates((0, 3), (1, 2)))


class CrowdingTests(TestCase):
    def test_boundaries_infinite(self):
        """Extreme points of every objective are kept first"""
        vectors = [(0, 3), (1, 1), (3, 0)]
        distance = crowding_distance(vectors, [0, 1, 2])
        self.assertEqual(distance[0], math.inf)
        self.assertEqual(distance[2], math.inf)
        self.assertAlmostEqual(distance[1], 2.0)

    def test_small_fronts(self):
        """Fronts of one or two are all boundary"""
        self.assertEqual(crowding_distance([(1, 1), (2, 0)], [0, 1]), {0: math.inf, 1: math.inf})


class SelectTests(TestCase):
    def test_valid_candidates_first(self):
        """A candidate with a vulnerability never outranks a valid one"""
        valid = [numbered(i, FitnessVector(0, 0, 0, 5 + i)) for i in range(3)]
        invalid = [numbered(10 + i, FitnessVector(1, 0, 0, 1)) for i in range(3)]
        chosen = nsga2_select(invalid + valid, 3, gas_objective=False)
        self.assertEqual({c.content_hash for c in chosen}, {c.content_hash for c in valid})

    def test_gas_level_decides(self):
        """Between otherwise equal valid candidates the cheaper one survives"""
        cheap = numbered(1, FitnessVector(0, 0, 0, 1), GasFormula.parse("5*n + 1"))
        dear = numbered(2, FitnessVector(0, 0, 0, 1), GasFormula.parse("7*n + 1"))
        (chosen,) = nsga2_select([dear, cheap], 1)
        self.assertEqual(chosen.content_hash, cheap.content_hash)
        self.assertEqual(chosen.fitness.gas_level, 1)

    def test_keeps_everything_when_small(self):
        """A population within the size is only reordered"""
        population = [numbered(i, FitnessVector(i % 2, 0, 0, i)) for i in range(5)]
        self.assertEqual(len(nsga2_select(population, 10, gas_objective=False)), 5)

    def test_errors(self):
        """Empty populations and non-positive sizes are rejected"""
        with self.assertRaises(ValueError):
            nsga2_select([], 3)
        with self.assertRaises(ValueError):
            nsga2_select([numbered(0, FitnessVector(0, 0))], 0)

    def test_rank_select_keeps_fronts(self):
        """Survivors carry their front; boundary points of a front are uncrowded"""
        population = [
            numbered(0, FitnessVector(1, 0, 0, 1)),
            numbered(1, FitnessVector(0, 3, 0, 1)),
            numbered(2, FitnessVector(1, 3, 0, 1)),
        ]
        ranked = rank_select(population, 3, gas_objective=False)
        fronts = {entry.candidate.content_hash: entry.front for entry in ranked}
        self.assertEqual(fronts[population[0].content_hash], 0)
        self.assertEqual(fronts[population[1].content_hash], 0)
        self.assertEqual(fronts[population[2].content_hash], 1)
        self.assertEqual(ranked[0].crowding, math.inf)
        self.assertEqual(
            [e.candidate for e in ranked], nsga2_select(population, 3, gas_objective=False)
        )

    def test_tournament_prefers_lower_front(self):
        """A tournament between two fronts is always won by the better one"""
        good = Ranked(numbered(0, FitnessVector(0, 1)), 0, 1.0)
        poor = Ranked(numbered(1, FitnessVector(1, 1)), 1, math.inf)
        rng = random.Random(5)
        self.assertEqual({tournament([good, poor], rng).front for _ in range(50)}, {0})
        self.assertIs(tournament([poor], rng), poor)
        with self.assertRaises(ValueError):
            tournament([], rng)

    def test_tournament_spreads_over_a_front(self):
        """Equally ranked entrants all get drawn"""
        entries = [Ranked(numbered(i, FitnessVector(i, 3 - i)), 0, math.inf) for i in range(4)]
        rng = random.Random(5)
        winners = {tournament(entries, rng).candidate.content_hash for _ in range(200)}
        self.assertEqual(winners, {e.candidate.content_hash for e in entries})

    def test_best(self):
        """Best is lexicographic on the fitness vector"""
        population = [
            numbered(0, FitnessVector(1, 0, 0, 0)),
            numbered(1, FitnessVector(0, 2, 0, 0)),
            numbered(2, FitnessVector(0, 1, 0, 9)),
        ]
        self.assertEqual(best(population).content_hash, population[2].content_hash)


############
# Generators
############


class GeneratorTests(TestCase):
    def test_round_robin_rotates(self):
        """Deterministic requests start at the next space; unreachable ones pass the turn on"""
        subject, _ = payout()
        root = Candidate.root(subject)
        with GeneratorPool(subject, seed=3, deterministic=True) as pool:
            spaces = [pool.request(root).space for _ in range(len(SpaceId))]
        # two-operator spaces need a base that already used one of their operators
        single = [SpaceId.S1, SpaceId.S2, SpaceId.S3]
        self.assertEqual(spaces[:3], single)
        self.assertLessEqual(set(spaces[3:]), set(single))

    def test_race_accepts_one_per_request(self):
        """Racing workers hand back exactly one compilable mutant per request"""
        subject, _ = payout()
        root = Candidate.root(subject)
        with GeneratorPool(subject, seed=3) as pool:
            produced = [pool.request(root) for _ in range(6)]
            self.assertEqual(sum(pool.accepted.values()), 6)
        for candidate in produced:
            self.assertIsNotNone(candidate)
            self.assertTrue(is_compilable(candidate.contract))
            self.assertEqual(candidate.parent, root.content_hash)
            self.assertTrue(candidate.patch.edits)

    def test_same_seed_same_mutants(self):
        """Seeded deterministic pools produce the same mutants"""
        subject, _ = payout()
        root = Candidate.root(subject)
        runs = []
        for _ in range(2):
            with GeneratorPool(subject, seed=5, deterministic=True) as pool:
                runs.append([pool.request(root).content_hash for _ in range(10)])
        self.assertEqual(runs[0], runs[1])


############
# Candidates
############


class CandidateTests(TestCase):
    def setUp(self):
        self.subject, self.tests = payout()
        self.config = search_config()

    def test_original_fitness(self):
        """The original has one unchecked send and passes its own tests"""
        scored = evaluate(Candidate.root(self.subject), ED_ONLY, self.tests, self.config)
        self.assertEqual(scored.fitness, FitnessVector(1, 0, 0, 0))
        self.assertFalse(scored.fitness.valid)
        self.assertEqual(len(scored.hints), 1)
        self.assertIsNotNone(scored.gas_formula)

    def test_checked_send_is_valid(self):
        """Requiring the send's result removes the vulnerability"""
        scored = evaluate(checked_payout(), ED_ONLY, self.tests, self.config)
        self.assertEqual(scored.fitness, FitnessVector(0, 0, 0, 1))
        self.assertTrue(scored.fitness.valid)

    def test_short_circuit(self):
        """A vulnerable candidate is not tested when evaluation short-circuits"""
        scored = evaluate(
            Candidate.root(self.subject), ED_ONLY, self.tests, self.config, short_circuit=True
        )
        self.assertFalse(scored.fitness.complete)
        self.assertEqual(scored.fitness.fail_count, 0)

    def test_discard_skips_tests(self):
        """A discarded vulnerable candidate stops before its tests"""
        scored = evaluate(
            Candidate.root(self.subject), ED_ONLY, self.tests, self.config, discard=lambda c: True
        )
        self.assertFalse(scored.fitness.complete)
        self.assertFalse(scored.fitness.valid)
        self.assertEqual(filter_plausible([scored], self.config), [])

    def test_discard_spares_repairs(self):
        """A candidate without targeted vulnerabilities is always fully tested"""
        asked = []
        scored = evaluate(checked_payout(), ED_ONLY, self.tests, self.config, discard=asked.append)
        self.assertEqual(asked, [])
        self.assertTrue(scored.fitness.complete)
        self.assertEqual(len(filter_plausible([scored], self.config)), 1)

    def test_gas_bound_filter(self):
        """Plausible candidates must respect a gas bound"""
        scored = evaluate(checked_payout(), ED_ONLY, self.tests, self.config)
        self.assertEqual(len(filter_plausible([scored], self.config)), 1)
        bounded = search_config(gas_bound=10)
        self.assertEqual(filter_plausible([scored], bounded), [])
        roomy = search_config(gas_bound=1_000_000)
        self.assertEqual(len(filter_plausible([scored], roomy)), 1)

    def test_reverify(self):
        """Reported patches are checked again from the original"""
        fixed = checked_payout()
        self.assertTrue(reverify(fixed, self.subject, self.tests, self.config))
        self.assertFalse(
            reverify(Candidate.root(self.subject), self.subject, self.tests, self.config)
        )
        foreign = Candidate(Patch("0" * 64, fixed.patch.edits), fixed.contract)
        self.assertFalse(reverify(foreign, self.subject, self.tests, self.config))


class GasMaxTests(TestCase):
    def test_holder_is_cheapest(self):
        """The cell keeps the gas-dominating plausible candidate"""
        cell = GasMaxCell()
        dear = numbered(1, FitnessVector(0, 0), GasFormula.parse("7*n + 3"))
        cheap = numbered(2, FitnessVector(0, 0), GasFormula.parse("5*n + 3"))
        cell.offer(dear)
        cell.offer(cheap)
        self.assertEqual(cell.holder.content_hash, cheap.content_hash)
        self.assertTrue(cell.dominates(dear))
        self.assertFalse(cell.dominates(cheap))
        unknown = numbered(3, FitnessVector(0, 0))
        self.assertFalse(cell.dominates(unknown))


########
# Engine
########


class RepairTests(TestCase):
    def test_nothing_to_repair(self):
        """A contract without targeted vulnerabilities is reported at once"""
        report = repair(load("clean"), search_config())
        self.assertEqual(report.status, "no_vulnerabilities")
        self.assertEqual(report.plausible, [])
        self.assertEqual(report.evaluations, 0)

    def test_genetic_repair(self):
        """The genetic search finds a verified patch for the unchecked send"""
        subject, tests = payout()
        report = repair(subject, search_config(), tests)
        self.assertEqual(report.status, "repaired")
        self.assertEqual(report.mode, "genetic")
        self.assertEqual(report.vulnerabilities_before["ED"], 1)
        self.assertEqual(report.vulnerabilities_after["ED"], 0)
        self.assertTrue(all(p.verified for p in report.plausible))
        self.assertTrue(report.recommended)
        self.assertLessEqual(set(report.recommended), {p.content_hash for p in report.plausible})
        self.assertIsNone(report.elapsed)

    def test_deterministic_output(self):
        """Same seed, same report, byte for byte"""
        subject, tests = payout()
        first = repair(subject, search_config(), tests).to_json()
        second = repair(subject, search_config(), tests).to_json()
        self.assertEqual(first, second)

    def test_unguided_search(self):
        """URS mode reports under its own name"""
        subject, tests = payout()
        report = repair_urs(subject, search_config(), tests)
        self.assertEqual(report.mode, "urs")
        self.assertIn(report.status, ("repaired", "no_plausible_patch"))
        self.assertEqual(report.to_json(), repair_urs(subject, search_config(), tests).to_json())

    def test_generation_limit(self):
        """The search stops after the allowed generations"""
        report = repair(load("escrow"), search_config(max_generations=1, initial_population=3))
        self.assertLessEqual(report.generations, 1)
        self.assertLessEqual(sum(report.generated.values()), 3 + 10)

    def test_breeding_spreads_over_the_front(self):
        """Parents come from every non-dominated candidate, not only the lexicographic best"""
        subject, tests = payout()
        config = search_config(generation_size=30)
        engine = RepairEngine(subject, config, tests)
        engine._deadline = math.inf
        root = engine._evaluate(Candidate.root(subject))
        muted = engine._evaluate(Candidate(Patch(root.content_hash), contract(SILENT_PAYOUT)))
        self.assertEqual(muted.fitness.vuln_count, 0)
        self.assertGreater(muted.fitness.fail_count, 0)
        # the vulnerability-free mutant sorts first, yet the original is not dominated
        self.assertLess(muted.sort_key(), root.sort_key())
        ranked = rank_select([root, muted], config.population_size, config.gas_objective)
        self.assertEqual([entry.front for entry in ranked], [0, 0])
        with GeneratorPool(subject, config.seed, deterministic=True) as generators:
            offspring = engine._breed(ranked, generators, set())
        self.assertEqual({c.parent for c in offspring}, {root.content_hash, muted.content_hash})

    def test_gmax_discard_keeps_plausible_set(self):
        """Early discard never loses a plausible patch and never adds evaluations"""
        for name in ("payout", "auction", "wallet"):
            plain = corpus_report(name)
            pruned = corpus_report(name, gmax_early_discard=True)
            self.assertEqual(
                [p.content_hash for p in pruned.plausible],
                [p.content_hash for p in plain.plausible],
                name,
            )
            self.assertEqual(pruned.recommended, plain.recommended, name)
            self.assertLessEqual(pruned.evaluations, plain.evaluations, name)


##############
# Corpus runs
##############

# subjects with targeted (ED/RE/IO) findings
REPAIRABLE = (
    "airdrop",
    "auction",
    "banana",
    "bank",
    "dgame",
    "escrow",
    "refund",
    "token",
    "wallet",
)


@lru_cache(maxsize=None)
def _corpus_report(name, mode, overrides):
    if name == "payout":
        subject, tests = payout()
    else:
        subject, tests = load(name), suite(name)
    settings = dict(
        seed=7,
        deterministic=True,
        mode=mode,
        initial_population=20,
        generation_size=10,
        population_size=40,
        max_bound=60.0,
    )
    settings.update(overrides)
    return RepairEngine(subject, SearchConfig(**settings), tests).run()


def corpus_report(name, mode="genetic", **overrides):
    """Seeded, deterministic repair of a corpus subject (cached per settings)"""
    return _corpus_report(name, mode, tuple(sorted(overrides.items())))


class CorpusRepairTests(TestCase):
    def test_repair_rate(self):
        """Genetic repair removes every targeted finding on at least 80% of the subjects"""
        repaired = [name for name in REPAIRABLE if corpus_report(name).status == "repaired"]
        self.assertGreaterEqual(len(repaired), 0.8 * len(REPAIRABLE), repaired)
        for name in repaired:
            report = corpus_report(name)
            self.assertTrue(all(p.verified for p in report.plausible), name)
            self.assertEqual(sum(report.vulnerabilities_after.values()), 0, name)

    def test_guided_not_behind_unguided(self):
        """With the same seed and budget, genetic mode repairs at least as many subjects"""
        genetic = {name for name in REPAIRABLE if corpus_report(name).status == "repaired"}
        unguided = {name for name in REPAIRABLE if corpus_report(name, "urs").status == "repaired"}
        self.assertGreaterEqual(len(genetic), len(unguided), (genetic, unguided))

    def test_gas_objective_does_not_regress(self):
        """No recommended patch is gas-dominated by a patch found with the gas objective off"""
        compared = 0
        for name in ("payout", "auction", "bank", "wallet"):
            on = corpus_report(name)
            off = corpus_report(name, gas_objective=False)
            if on.status != "repaired":
                continue
            compared += 1
            self.assertEqual(
                {p.content_hash for p in on.plausible}, {p.content_hash for p in off.plausible}
            )
            formulas = {p.content_hash: p.gas_formula for p in off.plausible}
            for chosen in on.recommended:
                if formulas[chosen] is None:
                    continue
                mine = GasFormula.parse(formulas[chosen])
                for other in off.plausible:
                    if other.gas_formula is None:
                        continue
                    verdict = compare_dominance(GasFormula.parse(other.gas_formula), mine)
                    self.assertIsNot(verdict, DominanceVerdict.A_DOMINATES_B, (name, other))
        self.assertGreater(compared, 0)
