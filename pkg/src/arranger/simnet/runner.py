"""Discrete-event driver: builds the actors of a scenario and runs them.

Each tick processes, in order: L1 inclusions, due network messages, the
oracle SBC (if used), then every actor's timer in a fixed order. The run
stops at the tick budget or once nothing is in flight and every honest actor
reports idle.
"""

from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass
from typing import Any

from ..clients import ClientPolicy, StfClient, UserClient
from ..core import ClientKey, KeyDirectory, TransactionRequest
from ..crypto.signing import ReplicaDirectory, _ed_private, get_scheme
from ..full import FULL_SABOTAGE, ByzantineFullReplica, FullReplica
from ..logger import L1Chain, Logger, PostRecord
from ..sbc import messages as sbc_messages
from ..sbc.byzantine import ByzantineSbcReplica
from ..sbc.oracle import SABOTAGE_MODES, OracleSbc
from ..sbc.protocol import SbcParams, SbcReplica, TransportKeys
from ..semi import SEQUENCER, ByzantineDacMember, ByzantineSequencer, DacMember, Sequencer
from ..transcript import Transcript
from .. import wire
from .network import Network
from .scenario import Scenario

# arranger behavior -> SBC-level script of the embedded engine
_SBC_SCRIPT = {"silent": "silent", "equivocate": "equivocate", "censor-element": "censor"}


def _seed_bytes(seed: int, purpose: str) -> bytes:
    return hashlib.sha256(f"{seed}/{purpose}".encode()).digest()


@dataclass
class RunResult:
    scenario: Scenario
    transcript: Transcript
    world: "World"
    ticks: int
    quiescent: bool


class World:
    """Host for every actor: clock, network, L1, and the transcript."""

    def __init__(self, sc: Scenario):
        sc.validate()
        self.sc = sc
        self.cfg = sc.config
        self.now = 0
        seed = sc.seed
        self.net = Network(sc.network_schedule(seed), self._rng("net"))
        self.scheme = get_scheme(sc.scheme)
        self.pki, self.keys = ReplicaDirectory.generate(self.scheme, sc.n, _seed_bytes(seed, "tags"))
        self.logger = Logger(self.pki, sc.f, self.scheme)
        self.l1 = L1Chain(self.logger, self._rng("l1"), sc.schedule.l1_delay, self._on_l1)
        self._seen_tx: set[bytes] = set()
        self._l1_listeners: list[Any] = []
        self.actors: dict[str, Any] = {}
        self.oracle: OracleSbc | None = None

        self.client_keys = [ClientKey.from_seed(_seed_bytes(seed, f"client/{k}")) for k in range(sc.workload.clients)]
        self.client_pki = KeyDirectory(k.sender for k in self.client_keys)
        censored = {self.client_keys[k].sender for k in sc.faults.censor_clients if k < len(self.client_keys)}
        self.targets = lambda e: e.sender in censored
        self.byzantine = dict(sc.faults.byzantine)

        honest = [f"r{i}" for i in range(sc.n) if i not in self.byzantine]
        if sc.mode == "semi" and sc.faults.sequencer == "honest":
            honest.append(SEQUENCER)
        self.transcript = Transcript(
            {
                "scenario": sc.name,
                "seed": seed,
                "mode": sc.mode,
                "n": sc.n,
                "f": sc.f,
                "sbc": sc.sbc if sc.mode == "full" else None,
                "scheme": self.scheme.name,
                "honest": sorted(honest),
                "byzantine": {str(k): v for k, v in sorted(self.byzantine.items())},
                "sequencer": sc.faults.sequencer if sc.mode == "semi" else None,
                "sabotage": sc.faults.sabotage,
                "quorum_ok": sc.quorum_ok,
                "clients": sorted(k.sender.hex() for k in self.client_keys),
                "tag_pks": [self.pki.public_key(i).hex() for i in range(sc.n)],
            }
        )

        if sc.mode == "full":
            self._build_full()
        else:
            self._build_semi()
        self.servers = {i: self.actors[f"r{i}"] for i in range(sc.n)}
        self.stf = StfClient(self, self.servers, sc.stf_strategy, sc.f, self._rng("stf"))
        self._l1_listeners.append(self.stf)
        self._build_clients()
        self.actors[self.stf.name] = self.stf
        self._order = list(self.actors)

    def _rng(self, purpose: str) -> random.Random:
        return random.Random(f"{self.sc.seed}/{purpose}")

    # ------------------------------------------------------------ builders

    def _build_full(self) -> None:
        sc = self.sc
        coalition = {j: self.keys[j] for j in self.byzantine}
        sabotage = sc.faults.sabotage
        oracle_sab = sabotage if sabotage in SABOTAGE_MODES else None
        if sabotage == "duplicate-element":
            oracle_sab = "sbc-duplicate"
        if sc.sbc == "oracle":
            self.oracle = OracleSbc(
                sc.n,
                self.client_pki,
                self,
                self._rng("oracle"),
                honest=frozenset(i for i in range(sc.n) if i not in self.byzantine),
                latency=sc.schedule.oracle_latency,
                sabotage=oracle_sab,
                targets=self.targets,
            )
        else:
            secrets = {i: _seed_bytes(sc.seed, f"transport/{i}") for i in range(sc.n)}
            publics = [_ed_private(secrets[i]).public_key().public_bytes_raw() for i in range(sc.n)]
            transport = TransportKeys(secrets, publics)
            params = SbcParams(sc.n, sc.f, sc.schedule.sbc_timeout)
        arranger_sab = sabotage if sabotage in FULL_SABOTAGE else None
        for i in range(sc.n):
            behavior = self.byzantine.get(i)

            def make_sbc(on_deliver, i=i, behavior=behavior):
                if self.oracle is not None:
                    return self.oracle.endpoint(i, on_deliver)
                if behavior is None:
                    return SbcReplica(i, params, transport, self.client_pki, self, on_deliver)
                return ByzantineSbcReplica(
                    i,
                    params,
                    transport,
                    self.client_pki,
                    self,
                    on_deliver,
                    behavior=_SBC_SCRIPT.get(behavior, "honest"),
                    targets=self.targets,
                )

            args = (i, self.cfg, self, self.scheme, self.keys[i], self.pki, self.client_pki, make_sbc)
            if behavior is None:
                actor = FullReplica(*args, sabotage=arranger_sab)
            else:
                actor = ByzantineFullReplica(*args, behavior=behavior, coalition=coalition, targets=self.targets)
            self.actors[actor.name] = actor

    def _build_semi(self) -> None:
        sc = self.sc
        coalition = {j: self.keys[j] for j in self.byzantine}
        for i in range(sc.n):
            behavior = self.byzantine.get(i)
            args = (i, self.cfg, self, self.scheme, self.keys[i])
            if behavior is None:
                actor = DacMember(*args)
            else:
                actor = ByzantineDacMember(*args, behavior=behavior, coalition=coalition)
            self.actors[actor.name] = actor
        seq_args = (self.cfg, self, self.scheme, self.pki, self.client_pki)
        if sc.faults.sequencer == "honest":
            seq = Sequencer(*seq_args)
        else:
            seq = ByzantineSequencer(*seq_args, behavior=sc.faults.sequencer, targets=self.targets)
        self.actors[seq.name] = seq
        self._l1_listeners.insert(0, seq)

    def _build_clients(self) -> None:
        sc = self.sc
        w = sc.workload
        rng = self._rng("workload")
        policy = ClientPolicy(sc.client_strategy, sc.client_budget, sc.client_timeout).resolved(
            sc.n, sc.f, sc.turn_slice
        )
        jobs: list[list[tuple[int, TransactionRequest]]] = [[] for _ in range(w.clients)]
        for k, key in enumerate(self.client_keys):
            for j in range(w.txs_per_client):
                jobs[k].append((rng.randint(0, w.spread), key.sign(j, rng.randbytes(w.payload))))
        for j in range(w.invalid):
            k = rng.randrange(w.clients)
            good = self.client_keys[k].sign(10_000 + j, rng.randbytes(w.payload))
            bad = TransactionRequest(good.sender, good.nonce, good.payload, bytes(64))
            jobs[k].append((rng.randint(0, w.spread), bad))
        for k in range(w.clients):
            if sc.mode == "full":
                order = [f"r{(k + j) % sc.n}" for j in range(sc.n)]
            else:
                order = [SEQUENCER]
            client = UserClient(
                f"c{k}",
                self,
                sorted(jobs[k], key=lambda job: (job[0], job[1].nonce)),
                order,
                policy,
                self.stf,
                resubmit=k < w.resubmit,
            )
            self.actors[client.name] = client

    # ------------------------------------------------------------ host API

    def send(self, src, dst, msg) -> None:
        src = src if isinstance(src, str) else f"r{src}"
        dst = dst if isinstance(dst, str) else f"r{dst}"
        if self.sc.wire_check:
            msg = _roundtrip(msg)
        self.net.send(self.now, src, dst, msg)

    def record(self, actor: str, kind: str, **data: Any) -> None:
        self.transcript.record(self.now, actor, kind, **data)

    def note_tx(self, tx: TransactionRequest) -> None:
        d = tx.digest
        if d not in self._seen_tx:
            self._seen_tx.add(d)
            self.record("world", "tx", d=d.hex(), enc=tx.encoding.hex())

    def post(self, poster: str, ctag) -> int:
        self.record(poster, "l1_submit", id=ctag.id, hash=ctag.hash.hex(), signers=sorted(ctag.signers))
        return self.l1.submit(ctag, self.now, poster)

    def _on_l1(self, rec: PostRecord) -> None:
        self.record(
            "l1",
            "l1",
            outcome=rec.outcome.value,
            id=rec.tag.id,
            hash=rec.tag.hash.hex(),
            signers=sorted(rec.tag.signers),
            poster=rec.poster,
        )
        for actor in self._l1_listeners:
            actor.on_l1(rec)

    # ------------------------------------------------------------ loop

    def quiescent(self) -> bool:
        if len(self.net) or self.l1.pending():
            return False
        if self.oracle is not None and not self.oracle.idle():
            return False
        return all(a.idle() for a in self.actors.values() if a.honest)

    def run(self) -> RunResult:
        quiet = False
        tick = 0
        for tick in range(self.sc.budget + 1):
            self.now = tick
            self.l1.process(tick)
            for src, dst, msg in self.net.due(tick):
                self.actors[dst].on_message(src, msg)
            if self.oracle is not None:
                self.oracle.on_tick(tick)
            for name in self._order:
                self.actors[name].on_tick(tick)
            if tick > 0 and self.quiescent():
                quiet = True
                break
        self.stf.finish()
        self.record(
            "world",
            "end",
            quiescent=quiet,
            messages=self.net.sent,
            accepted=[[i, t.hash.hex()] for i, t in sorted(self.logger.accepted.items())],
        )
        return RunResult(self.sc, self.transcript, self, tick, quiet)


def _roundtrip(msg):
    if isinstance(msg, sbc_messages.Message):
        back = sbc_messages.decode(msg.encode())
    elif hasattr(msg, "encode"):
        back = wire.decode(msg.encode())
    else:
        return msg
    if back != msg:
        raise AssertionError(f"wire round trip changed {type(msg).__name__}")
    return back


def run(sc: Scenario, seed: int | None = None) -> RunResult:
    if seed is not None:
        sc = sc.with_seed(seed)
    return World(sc).run()
