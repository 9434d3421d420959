"""Seeded partially-synchronous message network over logical ticks."""

from __future__ import annotations

import heapq
import math
import random
from dataclasses import dataclass
from typing import Any


@dataclass(frozen=True)
class Schedule:
    """Timing model.

    Before ``gst`` a message takes ``1 + Geometric`` ticks with mean
    ``pre_gst_mean``, capped so it still arrives by ``gst + delta``. From
    ``gst`` on, every delay is uniform in ``[1, delta]``.
    """

    seed: int = 0
    gst: int = 0
    delta: int = 4
    pre_gst_mean: float = 12.0

    def __post_init__(self) -> None:
        if self.delta < 1 or self.gst < 0 or self.pre_gst_mean < 1:
            raise ValueError("delta and pre_gst_mean must be >= 1, gst >= 0")

    def delay(self, now: int, rng: random.Random) -> int:
        if now >= self.gst:
            return rng.randint(1, self.delta)
        p = 1.0 / self.pre_gst_mean
        u = rng.random()
        extra = int(math.log(1.0 - u) / math.log(1.0 - p)) if p < 1 else 0
        return min(1 + extra, self.gst + self.delta - now)


class Network:
    def __init__(self, schedule: Schedule, rng: random.Random):
        self.schedule = schedule
        self.rng = rng
        self._heap: list[tuple[int, float, int, str, str, Any]] = []
        self._seq = 0
        self.sent = 0

    def send(self, now: int, src: str, dst: str, msg: Any) -> int:
        at = now + self.schedule.delay(now, self.rng)
        # the random key shuffles messages that land on the same tick
        heapq.heappush(self._heap, (at, self.rng.random(), self._seq, src, dst, msg))
        self._seq += 1
        self.sent += 1
        return at

    def due(self, now: int):
        while self._heap and self._heap[0][0] <= now:
            _, _, _, src, dst, msg = heapq.heappop(self._heap)
            yield src, dst, msg

    def __len__(self) -> int:
        return len(self._heap)
