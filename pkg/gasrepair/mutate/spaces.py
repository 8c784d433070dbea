"""
The seven mutation spaces and their samplers.

A space is named by the set of operators a patch used since the original contract:

    S1={M}  S2={R}  S3={I}  S4={M,R}  S5={M,I}  S6={R,I}  S7={M,R,I}

A patch belongs to exactly one space (its operator set) provided every contract of
its edit chain is distinct; the spaces therefore partition the mutants.
"""

from __future__ import annotations

import logging
import random
from enum import Enum
from typing import Iterable, Optional

from ..exceptions import ApplyError, SpaceExhausted
from ..lang import nodes as n
from ..lang.printer import content_hash
from .edits import Patch, apply_chain, apply_edit
from .synthesis import ordered_edits

logger = logging.getLogger(__name__)


class SpaceId(str, Enum):
    S1 = "S1"
    S2 = "S2"
    S3 = "S3"
    S4 = "S4"
    S5 = "S5"
    S6 = "S6"
    S7 = "S7"

    @property
    def operators(self) -> frozenset[str]:
        return SPACE_OPS[self]


SPACE_OPS: dict[SpaceId, frozenset[str]] = {
    SpaceId.S1: frozenset("M"),
    SpaceId.S2: frozenset("R"),
    SpaceId.S3: frozenset("I"),
    SpaceId.S4: frozenset("MR"),
    SpaceId.S5: frozenset("MI"),
    SpaceId.S6: frozenset("RI"),
    SpaceId.S7: frozenset("MRI"),
}


def space_of(trace: Iterable[str]) -> Optional[SpaceId]:
    """The space whose operator set is exactly the operators of trace"""
    used = frozenset(trace)
    return next((s for s, ops in SPACE_OPS.items() if ops == used), None)


def space_validity(space: SpaceId, patch: Patch, base: n.Contract) -> bool:
    """Accept iff the patch uses exactly the space's operators and every contract of
    its edit chain (base included) differs from all earlier ones"""
    if frozenset(patch.trace) != SPACE_OPS[space]:
        return False
    try:
        chain = apply_chain(patch, base)
    except ApplyError:
        return False
    hashes = [content_hash(contract) for contract in chain]
    return len(set(hashes)) == len(hashes)


def operators_to_apply(space: SpaceId, trace: Iterable[str]) -> frozenset[str]:
    """Operators whose next application can still land the patch in space.

    Empty when the space is unreachable from this trace: the trace uses an operator
    outside the space, or more than one of the space's operators is still missing.
    """
    used = frozenset(trace)
    ops = SPACE_OPS[space]
    if not used <= ops:
        return frozenset()
    missing = ops - used
    if len(missing) > 1:
        return frozenset()
    return missing or ops


class Sampler:
    """Unseen mutants of one space for one base; the seen-set lives per (worker, base).

    Args:
        space: the space sampled.
        contract: the base contract (the patch applied to the original).
        patch: the base patch.
        rng: seeded generator fixing the sample order.
        hints: detector locations in the base contract.
        ancestors: content hashes of every contract on the base patch's chain.
    """

    def __init__(
        self,
        space: SpaceId,
        contract: n.Contract,
        patch: Patch,
        rng: random.Random,
        hints: Iterable[n.NodeId] = (),
        ancestors: Iterable[str] = (),
    ):
        self.space = space
        self.contract = contract
        self.patch = patch
        self.generation = len(patch.edits)
        self.seen: set[str] = set(ancestors) | {content_hash(contract)}
        self.operators = operators_to_apply(space, patch.trace)
        self._rng = rng
        self._hints = tuple(n.NodeId(h.path, self.generation) for h in hints)
        self._edits: Optional[list] = None
        self._position = 0

    @property
    def exhausted(self) -> bool:
        return not self.operators or (
            self._edits is not None and self._position >= len(self._edits)
        )

    def draw(self) -> tuple[Patch, n.Contract]:
        """Next (patch, mutant) whose mutant has not been seen for this base.

        Raises:
            SpaceExhausted: no unseen edit remains.
        """
        if not self.operators:
            raise SpaceExhausted(f"{self.space.value} unreachable from {self.patch.trace}")
        if self._edits is None:
            self._edits = ordered_edits(
                self.contract, self.operators, self._rng, self._hints, self.generation
            )
            logger.debug(
                "%s: %d candidate edits at generation %d",
                self.space.value,
                len(self._edits),
                self.generation,
            )
        while self._position < len(self._edits):
            edit = self._edits[self._position]
            self._position += 1
            try:
                mutant = apply_edit(self.contract, edit, self.generation)
            except ApplyError:
                continue
            digest = content_hash(mutant)
            if digest in self.seen:
                continue
            self.seen.add(digest)
            return self.patch.extend(edit), mutant
        raise SpaceExhausted(f"{self.space.value} exhausted at generation {self.generation}")


def _mutate(
    tag: str,
    base: n.Contract,
    rng: random.Random,
    hints: Iterable[n.NodeId] = (),
    seen: Optional[set[str]] = None,
) -> Patch:
    space = space_of(tag)
    sampler = Sampler(space, base, Patch(content_hash(base)), rng, hints, seen or ())
    patch, mutant = sampler.draw()
    if seen is not None:
        seen.add(content_hash(mutant))
    return patch


def mutate_m(base, rng, hints=(), seen=None) -> Patch:
    """A single-Move patch of base, hinted sites first.

    Args:
        base: a typechecked contract.
        rng: seeded random generator.
        hints: detector locations ordering the sites.
        seen: content hashes of mutants already drawn; updated in place.

    Raises:
        SpaceExhausted: every Move of base yields a seen (or unchanged) contract.
    """
    return _mutate("M", base, rng, hints, seen)


def mutate_r(base, rng, hints=(), seen=None) -> Patch:
    """A single-Replace patch of base (see mutate_m)"""
    return _mutate("R", base, rng, hints, seen)


def mutate_i(base, rng, hints=(), seen=None) -> Patch:
    """A single-Insert patch of base (see mutate_m)"""
    return _mutate("I", base, rng, hints, seen)
