"""
NSGA-II population trimming.

Objective vectors are minimised.  The primary objectives (targeted vulnerabilities,
failing tests) apply to every candidate; the secondary ones (gas level, mutation
distance) only between valid candidates, so invalid candidates carry the worst
possible secondary values and can never outrank a valid one.

Parents for the next generation are drawn from the survivors by binary tournament
under the crowded-comparison order, so every non-dominated trade-off keeps breeding.
"""

from __future__ import annotations

import logging
import math
import random
import sys
from dataclasses import dataclass, replace
from typing import Sequence

from ..gas import dominance_levels
from .candidates import Candidate, FitnessVector

logger = logging.getLogger(__name__)

# secondary objective value of an invalid candidate
UNRANKED = sys.maxsize

Vector = tuple[int, ...]


def dominates(a: Vector, b: Vector) -> bool:
    """Pareto dominance for minimisation"""
    return all(x <= y for x, y in zip(a, b)) and any(x < y for x, y in zip(a, b))


def fast_non_dominated_sort(vectors: Sequence[Vector]) -> list[list[int]]:
    """Indices of vectors grouped into fronts, best front first"""
    count = len(vectors)
    dominated: list[list[int]] = [[] for _ in range(count)]
    domination_count = [0] * count
    fronts: list[list[int]] = [[]]
    for p in range(count):
        for q in range(count):
            if dominates(vectors[p], vectors[q]):
                dominated[p].append(q)
            elif dominates(vectors[q], vectors[p]):
                domination_count[p] += 1
        if domination_count[p] == 0:
            fronts[0].append(p)
    while fronts[-1]:
        following = []
        for p in fronts[-1]:
            for q in dominated[p]:
                domination_count[q] -= 1
                if domination_count[q] == 0:
                    following.append(q)
        fronts.append(sorted(following))
    fronts.pop()
    return fronts


def crowding_distance(vectors: Sequence[Vector], front: Sequence[int]) -> dict[int, float]:
    distance = {i: 0.0 for i in front}
    if len(front) <= 2:
        return {i: math.inf for i in front}
    for m in range(len(vectors[front[0]])):
        ordered = sorted(front, key=lambda i: (vectors[i][m], i))
        low, high = vectors[ordered[0]][m], vectors[ordered[-1]][m]
        if high == low:
            continue
        distance[ordered[0]] = distance[ordered[-1]] = math.inf
        for k in range(1, len(ordered) - 1):
            gap = vectors[ordered[k + 1]][m] - vectors[ordered[k - 1]][m]
            distance[ordered[k]] += gap / (high - low)
    return distance


def assign_gas_levels(population: Sequence[Candidate]) -> list[Candidate]:
    """Gas-dominance level of every valid candidate within the population.

    Valid candidates without a gas formula rank after every level; invalid ones keep
    level 0, which selection never consults.
    """
    valid = [
        i
        for i, c in enumerate(population)
        if c.fitness.valid and c.gas_formula is not None
    ]
    levels = dominance_levels([population[i].gas_formula for i in valid]) if valid else []
    worst = max(levels, default=0) + 1
    by_index = dict(zip(valid, levels))
    ranked = []
    for i, c in enumerate(population):
        level = by_index.get(i, worst) if c.fitness.valid else 0
        ranked.append(c.with_fitness(replace(c.fitness, gas_level=level)))
    return ranked


def objective_vector(fitness: FitnessVector, gas_objective: bool = True) -> Vector:
    if fitness.valid:
        secondary = (fitness.gas_level, fitness.mut_distance)
    else:
        secondary = (UNRANKED, UNRANKED)
    if not gas_objective:
        secondary = secondary[1:]
    return (fitness.vuln_count, fitness.fail_count) + secondary


@dataclass(frozen=True)
class Ranked:
    """A selected candidate with its front (0 is the best) and crowding distance"""

    candidate: Candidate
    front: int
    crowding: float

    def beats(self, other: Ranked) -> bool:
        """Crowded-comparison order: lower front, then larger crowding distance"""
        return (self.front, -self.crowding) < (other.front, -other.crowding)


def rank_select(
    population: Sequence[Candidate], size: int, gas_objective: bool = True
) -> list[Ranked]:
    """nsga2_select, keeping each survivor's front and crowding distance"""
    if not population:
        raise ValueError("cannot select from an empty population")
    if size < 1:
        raise ValueError("population size must be positive")
    if gas_objective:
        population = assign_gas_levels(population)
    vectors = [objective_vector(c.fitness, gas_objective) for c in population]
    selected: list[Ranked] = []
    for rank, front in enumerate(fast_non_dominated_sort(vectors)):
        distance = crowding_distance(vectors, front)
        ordered = sorted(front, key=lambda i: (-distance[i], population[i].content_hash))
        for i in ordered:
            if len(selected) == size:
                return selected
            selected.append(Ranked(population[i], rank, distance[i]))
    return selected


def nsga2_select(
    population: Sequence[Candidate], size: int, gas_objective: bool = True
) -> list[Candidate]:
    """Trim a population to `size` by non-dominated sorting and crowding distance.

    Returns candidates best-first: front by front, within a front by decreasing
    crowding distance, ties broken by content hash.
    """
    return [entry.candidate for entry in rank_select(population, size, gas_objective)]


def tournament(entries: Sequence[Ranked], rng: random.Random) -> Ranked:
    """Binary tournament under the crowded-comparison order; the first drawn wins ties"""
    if not entries:
        raise ValueError("no entrant")
    if len(entries) == 1:
        return entries[0]
    first, second = rng.sample(range(len(entries)), 2)
    a, b = entries[first], entries[second]
    return b if b.beats(a) else a

def best(population: Sequence[Candidate]) -> Candidate:
    """The highest-fitness candidate: lexicographic fitness, then content hash"""
    return min(population, key=Candidate.sort_key)
