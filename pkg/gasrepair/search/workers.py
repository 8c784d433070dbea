"""
Space-generator workers and the request coordinator.

There is one worker per mutation space.  Given a base candidate, a worker draws
unseen mutants of its space until one compiles and is valid for the space.  A
request goes to every live worker; the first compilable mutant wins and the others
stop at their next draw.  In deterministic mode the workers are polled round-robin
on the calling thread instead, the starting worker rotating with every request.
"""

from __future__ import annotations

import logging
import random
import threading
from collections import Counter
from concurrent.futures import ThreadPoolExecutor, as_completed
from typing import Optional

from ..config import GENERATOR_COUNT
from ..exceptions import ApplyError, SpaceExhausted
from ..lang import nodes as n
from ..lang.printer import content_hash
from ..lang.typecheck import is_compilable
from ..mutate import Sampler, SpaceId, space_validity
from ..mutate.edits import apply_chain
from .candidates import Candidate

logger = logging.getLogger(__name__)


class GeneratorWorker:
    """Draws compilable mutants of one space, keeping a sampler per base"""

    def __init__(self, space: SpaceId, original: n.Contract, seed: int = 0):
        self.space = space
        self.original = original
        self.seed = seed
        self.retired = False
        self.drawn = 0
        self._samplers: dict[str, Sampler] = {}

    def __repr__(self):
        return f"<GeneratorWorker {self.space.value}>"

    def sampler(self, base: Candidate) -> Sampler:
        sampler = self._samplers.get(base.content_hash)
        if sampler is None:
            rng = random.Random(f"{self.seed}:{self.space.value}:{base.content_hash}")
            try:
                ancestors = [content_hash(c) for c in apply_chain(base.patch, self.original)]
            except ApplyError:
                ancestors = []
            sampler = Sampler(
                self.space, base.contract, base.patch, rng, base.hints, ancestors
            )
            self._samplers[base.content_hash] = sampler
        return sampler

    def exhausted(self, base: Candidate) -> bool:
        return self.retired or self.sampler(base).exhausted

    def generate(
        self,
        base: Candidate,
        generation: int = 0,
        cancel: Optional[threading.Event] = None,
    ) -> Optional[Candidate]:
        """Next compilable, space-valid mutant of base; None when the space is
        exhausted for this base or the request was cancelled"""
        sampler = self.sampler(base)
        while cancel is None or not cancel.is_set():
            try:
                patch, mutant = sampler.draw()
            except SpaceExhausted:
                return None
            self.drawn += 1
            if not is_compilable(mutant):
                continue
            if not space_validity(self.space, patch, self.original):
                continue
            return Candidate(
                patch,
                mutant,
                space=self.space,
                generation=generation,
                parent=base.content_hash,
            )
        return None


class GeneratorPool:
    """Fans requests out to the seven space workers; first result wins.

    Args:
        original: the contract every patch is relative to.
        seed: fixes each worker's sample order.
        deterministic: poll workers round-robin on the calling thread.
    """

    def __init__(self, original: n.Contract, seed: int = 0, deterministic: bool = False):
        self.workers = [GeneratorWorker(space, original, seed) for space in SpaceId]
        self.deterministic = deterministic
        self.accepted: Counter[str] = Counter()
        self._turn = 0
        self._executor: Optional[ThreadPoolExecutor] = None
        if not deterministic:
            self._executor = ThreadPoolExecutor(
                max_workers=GENERATOR_COUNT, thread_name_prefix="generator"
            )

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def close(self):
        if self._executor is not None:
            self._executor.shutdown(wait=True, cancel_futures=True)
            self._executor = None

    @property
    def live(self) -> list[GeneratorWorker]:
        return [w for w in self.workers if not w.retired]

    def _run(self, worker, base, generation, cancel=None) -> Optional[Candidate]:
        try:
            return worker.generate(base, generation, cancel)
        except Exception:
            logger.exception("%s crashed, retiring it", worker)
            worker.retired = True
            return None

    def request(self, base: Candidate, generation: int = 0) -> Optional[Candidate]:
        """One new mutant of base, or None when every live worker is exhausted"""
        if self.deterministic or self._executor is None:
            winner = self._round_robin(base, generation)
        else:
            winner = self._race(base, generation)
        if winner is not None:
            self.accepted[winner.space.value] += 1
            logger.debug(
                "%s produced %s from %s",
                winner.space.value,
                winner.content_hash[:12],
                base.content_hash[:12],
            )
        return winner

    def _round_robin(self, base, generation) -> Optional[Candidate]:
        start = self._turn % len(self.workers)
        self._turn += 1
        for worker in self.workers[start:] + self.workers[:start]:
            if worker.retired:
                continue
            candidate = self._run(worker, base, generation)
            if candidate is not None:
                return candidate
        return None

    def _race(self, base, generation) -> Optional[Candidate]:
        cancel = threading.Event()
        futures = {
            self._executor.submit(self._run, worker, base, generation, cancel): worker
            for worker in self.live
        }
        winner = None
        # wait for every worker so that no draw overlaps the next request
        for future in as_completed(futures):
            candidate = future.result()
            if candidate is not None and winner is None:
                winner = candidate
                cancel.set()
        return winner
