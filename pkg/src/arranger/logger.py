"""Simulated L1 ``logger`` contract and the L1 chain that feeds it.

The contract keeps the first certified tag per batch id and rejects
everything else. :class:`L1Chain` models L1 inclusion: submitted posts are
processed at a scheduled later tick, possibly reordered, never dropped.
"""

from __future__ import annotations

import csv
import heapq
import random
from dataclasses import dataclass
from enum import Enum
from typing import Callable, TextIO

from .core import CertifiedBatchTag, signer_bitmap
from .crypto.signing import AggregateSignature, ReplicaDirectory, SignatureScheme


class PostOutcome(str, Enum):
    ACCEPTED = "Accepted"
    BAD_SIGNATURE = "BadSignature"
    TOO_FEW_SIGNERS = "TooFewSigners"
    DUPLICATE_ID = "DuplicateId"

    @property
    def accepted(self) -> bool:
        return self is PostOutcome.ACCEPTED


class NotFound(LookupError):
    pass


@dataclass(frozen=True)
class PostRecord:
    tick: int
    outcome: PostOutcome
    tag: CertifiedBatchTag
    poster: str


class Logger:
    def __init__(self, pki: ReplicaDirectory, f: int, scheme: SignatureScheme):
        self.pki = pki
        self.f = f
        self.scheme = scheme
        self.accepted: dict[int, CertifiedBatchTag] = {}
        self.history: list[PostRecord] = []
        self._gap = 0

    def post(self, tag: CertifiedBatchTag, tick: int = 0, poster: str = "?") -> PostOutcome:
        outcome = self._judge(tag)
        if outcome.accepted:
            self.accepted[tag.id] = tag
            while self._gap in self.accepted:
                self._gap += 1
        self.history.append(PostRecord(tick, outcome, tag, poster))
        return outcome

    def _judge(self, tag: CertifiedBatchTag) -> PostOutcome:
        if len(tag.signers) < self.f + 1:
            return PostOutcome.TOO_FEW_SIGNERS
        agg = AggregateSignature(tag.combined_signature, tag.signers)
        if not self.scheme.verify_aggregate(tag.tag, agg, self.pki):
            return PostOutcome.BAD_SIGNATURE
        if tag.id in self.accepted:
            return PostOutcome.DUPLICATE_ID
        return PostOutcome.ACCEPTED

    def get(self, id: int) -> CertifiedBatchTag:
        try:
            return self.accepted[id]
        except KeyError:
            raise NotFound(id) from None

    def max_contiguous(self) -> int:
        """Smallest batch id without an accepted tag."""
        return self._gap

    def export_csv(self, out: TextIO) -> None:
        n = len(self.pki)
        w = csv.writer(out)
        w.writerow(["tick", "outcome", "id", "hash", "signers", "poster"])
        for rec in self.history:
            w.writerow(
                [
                    rec.tick,
                    rec.outcome.value,
                    rec.tag.id,
                    rec.tag.hash.hex(),
                    signer_bitmap(rec.tag.signers, n).hex(),
                    rec.poster,
                ]
            )


class L1Chain:
    """Pending L1 transactions keyed by their scheduled processing tick."""

    def __init__(
        self,
        logger: Logger,
        rng: random.Random,
        max_delay: int = 3,
        on_outcome: Callable[[PostRecord], None] | None = None,
    ):
        self.logger = logger
        self.rng = rng
        self.max_delay = max_delay
        self.on_outcome = on_outcome
        self._queue: list[tuple[int, float, int, CertifiedBatchTag, str]] = []
        self._seq = 0

    def submit(self, tag: CertifiedBatchTag, now: int, poster: str) -> int:
        due = now + self.rng.randint(1, self.max_delay)
        heapq.heappush(self._queue, (due, self.rng.random(), self._seq, tag, poster))
        self._seq += 1
        return due

    def process(self, now: int) -> list[PostRecord]:
        done = []
        while self._queue and self._queue[0][0] <= now:
            _, _, _, tag, poster = heapq.heappop(self._queue)
            self.logger.post(tag, now, poster)
            rec = self.logger.history[-1]
            done.append(rec)
            if self.on_outcome is not None:
                self.on_outcome(rec)
        return done

    def pending(self) -> int:
        return len(self._queue)
