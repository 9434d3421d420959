"""Fully decentralized arranger replica.

Each replica embeds an SBC engine. Every decided set becomes one batch whose
identifier is the SBC round; replicas sign the batch tag, gossip the
signature, and take turns posting certified tags to the logger.

Replicas talk to the rest of the world through a *host* offering
``now``, ``send(src, dst, msg)``, ``record(actor, kind, **data)``,
``note_tx(tx)``, ``post(poster, certified_tag) -> due_tick`` and ``logger``.
"""

from __future__ import annotations

import hashlib
import logging
from typing import Callable, Mapping

from .core import (
    AddResult,
    AllDuplicates,
    Batch,
    BatchStore,
    BatchTag,
    CertifiedBatchTag,
    ClientKey,
    KeyDirectory,
    SystemConfig,
    TransactionRequest,
    TranslateMiss,
    tobatch,
    validate,
)
from .crypto.hashing import hash_batch
from .crypto.signing import KeyPair, ReplicaDirectory, SignatureScheme
from .wire import AddReply, AddRequest, SigTag

log = logging.getLogger(__name__)

FULL_BEHAVIORS = (
    "silent",
    "equivocate",
    "wrong-hash",
    "censor-element",
    "spam-posts",
    "wrong-translate",
)

# Planted bugs for checker-soundness runs; honest replicas only.
FULL_SABOTAGE = ("duplicate-element", "nondeterministic-order", "forget-batch")

SbcFactory = Callable[[Callable[[int, tuple[TransactionRequest, ...]], None]], object]


class FullReplica:
    honest = True

    def __init__(
        self,
        rid: int,
        cfg: SystemConfig,
        host,
        scheme: SignatureScheme,
        key: KeyPair,
        pki: ReplicaDirectory,
        clients: KeyDirectory,
        make_sbc: SbcFactory,
        sabotage: str | None = None,
    ):
        self.rid = rid
        self.name = f"r{rid}"
        self.cfg = cfg
        self.host = host
        self.scheme = scheme
        self.key = key
        self.pki = pki
        self.clients = clients
        self.sabotage = sabotage
        self.store = BatchStore()
        self.signatures: dict[BatchTag, dict[int, bytes]] = {}
        self.batched: set[bytes] = set()
        self.my_tags: dict[int, BatchTag] = {}
        self._posted: dict[int, int] = {}  # batch id -> tick by which L1 will have processed our post
        self.sbc = make_sbc(self.on_set_deliver)

    # ------------------------------------------------------------ add

    def add(self, tr: TransactionRequest) -> AddResult:
        if not validate(tr, self.clients):
            res = AddResult.INVALID
        elif tr.digest in self.batched or self.sbc.knows(tr.digest):
            res = AddResult.DUPLICATE
        else:
            self.sbc.add(tr)
            res = AddResult.ACK
        self._record_add(tr, res)
        return res

    def _record_add(self, tr: TransactionRequest, res: AddResult) -> None:
        self.host.note_tx(tr)
        if res.ok:
            self.host.record(self.name, "ack", tx=tr.digest.hex())
        else:
            self.host.record(self.name, "reject", tx=tr.digest.hex(), reason=res.value)

    # ------------------------------------------------------------ events

    def on_message(self, src: str, msg) -> None:
        if isinstance(msg, AddRequest):
            res = self.add(msg.tx)
            self.host.send(self.name, src, AddReply(msg.tx.digest, res))
        elif isinstance(msg, SigTag):
            self.on_signature(msg.tag, msg.signer, msg.sig)
        elif src.startswith("r"):
            self.sbc.on_message(int(src[1:]), msg)

    def on_set_deliver(self, rnd: int, decided: tuple[TransactionRequest, ...]) -> None:
        already = frozenset() if self.sabotage == "duplicate-element" else self.batched
        try:
            b = tobatch(rnd, decided, already)
        except AllDuplicates:
            self.host.record(self.name, "skip", id=rnd)
            return
        if self.sabotage == "nondeterministic-order" and self.rid % 2 == 1:
            b = Batch(b.id, tuple(reversed(b.txs)))
        h = hash_batch(b)
        self.host.record(self.name, "batch", id=rnd, hash=h.hex(), digests=[d.hex() for d in b.digests()])
        if not (self.sabotage == "forget-batch" and rnd == 0):
            self.store.put(b, h)
            self.host.record(self.name, "store", id=rnd, hash=h.hex())
        self.batched.update(b.digests())
        self._sign_and_gossip(BatchTag(rnd, h))

    def _sign_and_gossip(self, tag: BatchTag) -> None:
        sig = self.scheme.sign(tag, self.key.secret)
        self.my_tags.setdefault(tag.id, tag)
        self.host.record(self.name, "sign", id=tag.id, hash=tag.hash.hex(), signer=self.rid, sig=sig.hex())
        self.on_signature(tag, self.rid, sig)
        self._broadcast(SigTag(tag, self.rid, sig))

    def _broadcast(self, msg) -> None:
        for j in range(self.cfg.n):
            if j != self.rid:
                self.host.send(self.name, f"r{j}", msg)

    def on_signature(self, tag: BatchTag, signer: int, sig: bytes) -> bool:
        if signer not in self.pki:
            return False
        held = self.signatures.setdefault(tag, {})
        if signer in held:
            return held[signer] == sig
        if not self.scheme.verify(tag, sig, self.pki.public_key(signer)):
            return False
        held[signer] = sig
        return True

    # ------------------------------------------------------------ posting

    def turn_owner(self, now: int) -> int:
        return (now // self.cfg.turn_slice) % self.cfg.n

    def on_tick(self, now: int) -> None:
        self.sbc.on_tick(now)
        if self.turn_owner(now) == self.rid:
            self.on_myturn(now)

    def certified_for(self, id: int) -> BatchTag | None:
        """A tag for ``id`` holding f+1 verified signatures, preferring our own."""
        mine = self.my_tags.get(id)
        if mine is not None and len(self.signatures.get(mine, ())) > self.cfg.f:
            return mine
        cands = [t for t, s in self.signatures.items() if t.id == id and len(s) > self.cfg.f]
        return min(cands, key=lambda t: t.hash) if cands else None

    def on_myturn(self, now: int) -> None:
        # post the certified tags for nextBatch and the consecutive ids after it
        nxt = self.host.logger.max_contiguous()
        while True:
            tag = self.certified_for(nxt)
            if tag is None:
                return
            if self._posted.get(nxt, -1) < now:
                agg = self.scheme.aggregate(self.signatures[tag])
                self._posted[nxt] = self.host.post(
                    self.name, CertifiedBatchTag(tag, agg.signature, agg.signers)
                )
            nxt += 1

    # ------------------------------------------------------------ translate

    def translate(self, id: int, digest: bytes) -> Batch | TranslateMiss:
        return self.store.translate(id, digest)

    def idle(self) -> bool:
        if not self.sbc.idle():
            return False
        accepted = self.host.logger.accepted
        return all(i in accepted for i in self.my_tags)


class ByzantineFullReplica(FullReplica):
    """A full replica running one scripted attack from :data:`FULL_BEHAVIORS`.

    ``coalition`` holds the tag keys of every Byzantine replica, so fabricated
    tags carry at most f signatures.
    """

    honest = False

    def __init__(
        self,
        *args,
        behavior: str,
        coalition: Mapping[int, KeyPair],
        targets: Callable[[TransactionRequest], bool] = lambda e: False,
        **kw,
    ):
        if behavior not in FULL_BEHAVIORS:
            raise ValueError(f"unknown behavior {behavior!r}")
        self.behavior = behavior
        self.coalition = dict(coalition)
        self.targets = targets
        super().__init__(*args, **kw)
        self._last_turn = -1

    def _junk(self, *parts: object) -> bytes:
        return hashlib.sha256(repr((self.rid, self.behavior) + parts).encode()).digest()

    def add(self, tr: TransactionRequest) -> AddResult:
        if self.behavior == "censor-element" and self.targets(tr):
            # acknowledge, then drop on the floor
            self._record_add(tr, AddResult.ACK)
            return AddResult.ACK
        return super().add(tr)

    def on_message(self, src: str, msg) -> None:
        if self.behavior == "silent":
            return
        super().on_message(src, msg)

    def on_set_deliver(self, rnd, decided) -> None:
        if self.behavior == "wrong-hash":
            self._sign_and_gossip(BatchTag(rnd, self._junk("hash", rnd)))
            return
        super().on_set_deliver(rnd, decided)
        if self.behavior == "equivocate":
            self._sign_and_gossip(BatchTag(rnd, self._junk("equivocate", rnd)))

    def _fabricate(self, id: int) -> CertifiedBatchTag:
        tag = BatchTag(id, self._junk("fake", id))
        sigs = {}
        for j, kp in sorted(self.coalition.items()):
            sigs[j] = self.scheme.sign(tag, kp.secret)
            self.host.record(self.name, "sign", id=id, hash=tag.hash.hex(), signer=j, sig=sigs[j].hex())
        agg = self.scheme.aggregate(sigs)
        return CertifiedBatchTag(tag, agg.signature, agg.signers)

    def on_tick(self, now: int) -> None:
        if self.behavior == "silent":
            return
        self.sbc.on_tick(now)
        if self.turn_owner(now) != self.rid:
            return
        slot = now // self.cfg.turn_slice
        first = slot != self._last_turn
        self._last_turn = slot
        if self.behavior in ("wrong-hash", "equivocate", "spam-posts"):
            if first:
                logger = self.host.logger
                self.host.post(self.name, self._fabricate(logger.max_contiguous()))
                if self.behavior == "spam-posts" and logger.accepted:
                    self.host.post(self.name, logger.accepted[max(logger.accepted)])
            if self.behavior == "spam-posts":
                self.on_myturn(now)
            return
        self.on_myturn(now)

    def translate(self, id: int, digest: bytes):
        if self.behavior == "silent":
            return TranslateMiss.INVALID_ID
        if self.behavior == "wrong-translate":
            fake = ClientKey.from_seed(b"wrong-translate").sign(id, self._junk("tx", id))
            return Batch(id, (fake,))
        return super().translate(id, digest)

    def idle(self) -> bool:
        return True
