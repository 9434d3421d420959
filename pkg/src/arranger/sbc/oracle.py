"""Oracle SBC: a trusted central service that satisfies the five SBC
properties by construction.

It exists for differential testing against the reference protocol and as a
fault-free substrate for arranger tests. Its sabotage modes plant specific
property violations so that the checkers can be shown to catch them.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Callable

from ..core import ClientKey, KeyDirectory, TransactionRequest, validate
from .protocol import DeliverFn, Env

SABOTAGE_MODES = (
    "sbc-split",
    "sbc-duplicate",
    "sbc-empty",
    "sbc-invalid",
    "sbc-stall",
    "sbc-censor",
)


@dataclass
class OracleEndpoint:
    """Per-replica handle exposing ``add`` and delivering ``SetDeliver`` events."""

    rid: int
    oracle: "OracleSbc"
    on_deliver: DeliverFn | None = None
    pending: dict[bytes, TransactionRequest] = field(default_factory=dict)
    round: int = 0  # next round to be delivered here

    def add(self, e: TransactionRequest) -> bool:
        d = e.digest
        if d in self.pending or d in self.oracle.decided_log:
            return False
        if not validate(e, self.oracle.clients):
            return False
        self.pending[d] = e
        return True

    def knows(self, d: bytes) -> bool:
        return d in self.pending or d in self.oracle.decided_log

    def on_message(self, src: int, msg: object) -> None:
        pass

    def on_tick(self, now: int) -> None:
        pass

    def idle(self) -> bool:
        return True

    def _deliver(self, rnd: int, elements: tuple[TransactionRequest, ...]) -> None:
        self.round = rnd + 1
        for e in elements:
            self.pending.pop(e.digest, None)
        self.oracle.env.record(
            f"r{self.rid}", "set_deliver", round=rnd, view=0, digests=[e.digest.hex() for e in elements]
        )
        if self.on_deliver is not None:
            self.on_deliver(rnd, elements)


class OracleSbc:
    def __init__(
        self,
        n: int,
        clients: KeyDirectory,
        env: Env,
        rng: random.Random,
        honest: frozenset[int] | None = None,
        latency: int = 3,
        jitter: int = 3,
        sabotage: str | None = None,
        targets: Callable[[TransactionRequest], bool] | None = None,
    ):
        if sabotage is not None and sabotage not in SABOTAGE_MODES:
            raise ValueError(f"unknown oracle sabotage {sabotage!r}")
        self.n = n
        self.clients = clients
        self.env = env
        self.rng = rng
        self.honest = frozenset(range(n)) if honest is None else honest
        self.latency = latency
        self.jitter = jitter
        self.sabotage = sabotage
        self.targets = targets if sabotage == "sbc-censor" and targets else (lambda e: False)
        self.endpoints: list[OracleEndpoint] = [OracleEndpoint(i, self) for i in range(n)]
        self.decided_log: set[bytes] = set()
        self.decisions: list[tuple[TransactionRequest, ...]] = []
        self.round = 0
        self._deciding: tuple[int, dict[int, tuple[TransactionRequest, ...]]] | None = None
        self._queue: list[tuple[int, int, int, tuple[TransactionRequest, ...]]] = []
        self._last_due = [0] * n
        self._sabotaged = False

    def endpoint(self, rid: int, on_deliver: DeliverFn | None = None) -> OracleEndpoint:
        ep = self.endpoints[rid]
        ep.on_deliver = on_deliver
        return ep

    # ------------------------------------------------------------ driver

    def _candidates(self, ep: OracleEndpoint) -> tuple[TransactionRequest, ...]:
        return tuple(ep.pending[d] for d in sorted(ep.pending) if d not in self.decided_log)

    def _decidable(self, els) -> bool:
        # censored elements are proposed but can never carry a round on their own
        return any(not self.targets(e) for e in els)

    def on_tick(self, now: int) -> None:
        self._flush(now)
        if self._deciding is None:
            snaps = {ep.rid: self._candidates(ep) for ep in self.endpoints}
            if any(self._decidable(els) for els in snaps.values()):
                self._start(now, snaps)
        if self._deciding is not None and self._deciding[0] <= now:
            self._decide(now)
        self._flush(now)

    def _start(self, now: int, snaps: dict[int, tuple[TransactionRequest, ...]]) -> None:
        rnd = self.round
        self.env.record("oracle", "round_start", round=rnd)
        if self.sabotage == "sbc-duplicate" and rnd >= 1 and not self._sabotaged and self.decisions[-1]:
            # replica 0 re-proposes an element that was decided last round
            self._sabotaged = True
            snaps[0] = snaps[0] + (self.decisions[-1][0],)
        if self.sabotage == "sbc-invalid" and not self._sabotaged:
            self._sabotaged = True
            forged = ClientKey.from_seed(b"oracle-forger").sign(rnd, b"forged")
            snaps[0] = snaps[0] + (forged,)
        for rid in sorted(snaps):
            els = snaps[rid]
            if els:
                for e in els:
                    self.env.note_tx(e)
                self.env.record(
                    f"r{rid}", "sbc_input", round=rnd, seq=0, digests=[e.digest.hex() for e in els]
                )
        self._deciding = (now + self.latency, snaps)

    def _decide(self, now: int) -> None:
        _, snaps = self._deciding
        self._deciding = None
        rnd = self.round
        union: dict[bytes, TransactionRequest] = {}
        for rid in sorted(snaps):
            for e in snaps[rid]:
                union.setdefault(e.digest, e)
        decided = tuple(union[d] for d in sorted(union) if not self.targets(union[d]))
        if self.sabotage != "sbc-invalid":
            decided = tuple(e for e in decided if validate(e, self.clients))
        if self.sabotage != "sbc-duplicate":
            decided = tuple(e for e in decided if e.digest not in self.decided_log)

        per_replica = {rid: decided for rid in range(self.n)}
        honest = sorted(self.honest)
        if self.sabotage == "sbc-empty" and rnd == 0:
            per_replica = {rid: () for rid in range(self.n)}
            decided = ()
        elif self.sabotage == "sbc-split" and len(decided) >= 2 and not self._sabotaged:
            self._sabotaged = True
            x = decided[0]
            for rid in honest[len(honest) // 2 :]:
                per_replica[rid] = tuple(e for e in decided if e is not x)
        if decided:
            for e in decided:
                self.decided_log.add(e.digest)
            for ep in self.endpoints:
                for e in decided:
                    ep.pending.pop(e.digest, None)
        self.decisions.append(decided)
        self.round += 1
        stalled = honest[-1] if self.sabotage == "sbc-stall" and rnd >= 1 else None
        for rid in range(self.n):
            if rid == stalled:
                continue
            due = max(now + self.rng.randint(0, self.jitter), self._last_due[rid])
            self._last_due[rid] = due
            self._queue.append((due, rid, rnd, per_replica[rid]))

    def _flush(self, now: int) -> None:
        if not self._queue:
            return
        ready = sorted((q for q in self._queue if q[0] <= now), key=lambda q: (q[0], q[2], q[1]))
        self._queue = [q for q in self._queue if q[0] > now]
        for _, rid, rnd, els in ready:
            self.endpoints[rid]._deliver(rnd, els)

    def idle(self) -> bool:
        if self._deciding is not None or self._queue:
            return False
        return not any(self._decidable(self._candidates(ep)) for ep in self.endpoints)
