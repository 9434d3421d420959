"""Semi-decentralized arranger: one sequencer plus a data availability committee.

The sequencer orders requests into batches, asks every DAC member to sign
``(batchId, hash)``, and posts the tag once f+1 signatures arrive. DAC
members sign only after re-hashing the batch themselves and keep every batch
they signed so they can translate it later.

Actors use the same host interface as :mod:`arranger.full`. DAC member ``i``
is named ``r{i}``; the sequencer is ``seq``.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Callable, Mapping

from .core import (
    AddResult,
    Batch,
    BatchStore,
    BatchTag,
    CertifiedBatchTag,
    ClientKey,
    KeyDirectory,
    SystemConfig,
    TransactionRequest,
    TranslateMiss,
    validate,
)
from .crypto.hashing import EmptyInput, hash_batch
from .crypto.signing import KeyPair, ReplicaDirectory, SignatureScheme
from .logger import PostRecord
from .wire import AddReply, AddRequest, SignReq, SignResp

SEQUENCER = "seq"
SEQUENCER_BEHAVIORS = ("silent", "wrong-hash", "equivocate", "censor-element")
DAC_BEHAVIORS = ("silent", "wrong-hash", "equivocate", "spam-posts", "wrong-translate")


@dataclass
class Inflight:
    batch: Batch
    tag: BatchTag
    sigs: dict[int, bytes] = field(default_factory=dict)
    submitted: bool = False


class Sequencer:
    honest = True
    name = SEQUENCER

    def __init__(
        self,
        cfg: SystemConfig,
        host,
        scheme: SignatureScheme,
        pki: ReplicaDirectory,
        clients: KeyDirectory,
    ):
        self.cfg = cfg
        self.host = host
        self.scheme = scheme
        self.pki = pki
        self.clients = clients
        self.all_txs: set[bytes] = set()
        self.pending: list[TransactionRequest] = []
        self.batch_id = 0
        self.inflight: list[Inflight] = []
        self.last_post = 0

    # ------------------------------------------------------------ add

    def add(self, tr: TransactionRequest) -> AddResult:
        if not validate(tr, self.clients):
            res = AddResult.INVALID
        elif tr.digest in self.all_txs:
            res = AddResult.DUPLICATE
        else:
            self.all_txs.add(tr.digest)
            self._enqueue(tr)
            res = AddResult.ACK
        self.host.note_tx(tr)
        if res.ok:
            self.host.record(self.name, "ack", tx=tr.digest.hex())
        else:
            self.host.record(self.name, "reject", tx=tr.digest.hex(), reason=res.value)
        return res

    def _enqueue(self, tr: TransactionRequest) -> None:
        self.pending.append(tr)

    def on_message(self, src: str, msg) -> None:
        if isinstance(msg, AddRequest):
            self.host.send(self.name, src, AddReply(msg.tx.digest, self.add(msg.tx)))
        elif isinstance(msg, SignResp):
            self.on_sign_response(msg)

    # ------------------------------------------------------------ batching

    def timetopost(self, now: int) -> bool:
        if not self.pending or self.inflight:
            return False
        return len(self.pending) >= self.cfg.max_batch or now - self.last_post >= self.cfg.batch_timeout

    def on_tick(self, now: int) -> None:
        if self.timetopost(now):
            self.on_timetopost(now)

    def on_timetopost(self, now: int) -> None:
        b = Batch(self.batch_id, tuple(self.pending))
        self._request(b, hash_batch(b), range(self.cfg.n))

    def _request(self, b: Batch, h: bytes, members) -> None:
        tag = BatchTag(b.id, h)
        self.inflight.append(Inflight(b, tag))
        self.host.record(self.name, "batch", id=b.id, hash=h.hex(), digests=[d.hex() for d in b.digests()])
        req = SignReq(b, tag)
        for i in members:
            self.host.send(self.name, f"r{i}", req)

    def on_sign_response(self, msg: SignResp) -> None:
        for fl in self.inflight:
            if fl.tag == msg.tag:
                break
        else:
            return
        if fl.submitted or msg.signer in fl.sigs or msg.signer not in self.pki:
            return
        if not self.scheme.verify(fl.tag, msg.sig, self.pki.public_key(msg.signer)):
            return
        fl.sigs[msg.signer] = msg.sig
        if len(fl.sigs) >= self.cfg.certified:
            agg = self.scheme.aggregate(fl.sigs)
            fl.submitted = True
            self.host.post(self.name, CertifiedBatchTag(fl.tag, agg.signature, agg.signers))

    def on_l1(self, rec: PostRecord) -> None:
        if rec.poster != self.name or not self.inflight:
            return
        if not any(fl.tag == rec.tag.tag for fl in self.inflight):
            return
        if rec.outcome.accepted:
            self._advance(rec)

    def _advance(self, rec: PostRecord) -> None:
        fl = next(f for f in self.inflight if f.tag == rec.tag.tag)
        # drop exactly the snapshot; requests added meanwhile stay pending
        posted = {t.digest for t in fl.batch.txs}
        self.pending = [t for t in self.pending if t.digest not in posted]
        self.inflight = []
        self.batch_id += 1
        self.last_post = self.host.now

    def idle(self) -> bool:
        return not self.pending and not self.inflight


class ByzantineSequencer(Sequencer):
    """Sequencer scripts: withhold everything, sign requests for wrong hashes,
    equivocate between two batches for one id, or drop targeted requests."""

    honest = False

    def __init__(self, *args, behavior: str, targets: Callable[[TransactionRequest], bool] = lambda e: False, **kw):
        if behavior not in SEQUENCER_BEHAVIORS:
            raise ValueError(f"unknown sequencer behavior {behavior!r}")
        super().__init__(*args, **kw)
        self.behavior = behavior
        self.targets = targets

    def _enqueue(self, tr: TransactionRequest) -> None:
        if self.behavior == "censor-element" and self.targets(tr):
            return
        super()._enqueue(tr)

    def on_tick(self, now: int) -> None:
        if self.behavior != "silent":
            super().on_tick(now)

    def on_timetopost(self, now: int) -> None:
        b = Batch(self.batch_id, tuple(self.pending))
        if self.behavior == "wrong-hash":
            self._request(b, hashlib.sha256(b"wrong" + hash_batch(b)).digest(), range(self.cfg.n))
        elif self.behavior == "equivocate":
            half = max(1, len(b.txs) // 2)
            a, c = Batch(b.id, b.txs[:half]), Batch(b.id, b.txs[half:])
            n = self.cfg.n
            self._request(a, hash_batch(a), range(0, (n + 1) // 2))
            if c.txs:
                self._request(c, hash_batch(c), range((n + 1) // 2, n))
        else:
            super().on_timetopost(now)

    def _advance(self, rec: PostRecord) -> None:
        if self.behavior != "equivocate":
            super()._advance(rec)
            return
        # forget both halves; the losing half is never posted
        posted = {t.digest for fl in self.inflight for t in fl.batch.txs}
        self.pending = [t for t in self.pending if t.digest not in posted]
        self.inflight = []
        self.batch_id += 1
        self.last_post = self.host.now

    def idle(self) -> bool:
        return True


class DacMember:
    honest = True

    def __init__(
        self,
        rid: int,
        cfg: SystemConfig,
        host,
        scheme: SignatureScheme,
        key: KeyPair,
    ):
        self.rid = rid
        self.name = f"r{rid}"
        self.cfg = cfg
        self.host = host
        self.scheme = scheme
        self.key = key
        self.store = BatchStore()

    def on_message(self, src: str, msg) -> None:
        if src == SEQUENCER and isinstance(msg, SignReq):
            resp = self.on_sign_request(msg.batch, msg.tag.id, msg.tag.hash)
            if resp is not None:
                self.host.send(self.name, SEQUENCER, resp)

    def on_sign_request(self, b: Batch, id: int, h: bytes) -> SignResp | None:
        if b.id != id:
            return None
        try:
            if hash_batch(b) != h:
                return None
        except EmptyInput:
            return None
        if self.store.has_id(id) and (id, h) not in self.store:
            return None  # first write wins
        for tx in b.txs:
            self.host.note_tx(tx)
        if self.store.put(b, h):
            self.host.record(self.name, "batch", id=id, hash=h.hex(), digests=[d.hex() for d in b.digests()])
            self.host.record(self.name, "store", id=id, hash=h.hex())
        return self._sign(BatchTag(id, h))

    def _sign(self, tag: BatchTag, key: KeyPair | None = None, signer: int | None = None) -> SignResp:
        key = key or self.key
        signer = self.rid if signer is None else signer
        sig = self.scheme.sign(tag, key.secret)
        self.host.record(self.name, "sign", id=tag.id, hash=tag.hash.hex(), signer=signer, sig=sig.hex())
        return SignResp(tag, signer, sig)

    def translate(self, id: int, digest: bytes) -> Batch | TranslateMiss:
        return self.store.translate(id, digest)

    def on_tick(self, now: int) -> None:
        pass

    def idle(self) -> bool:
        return True


class ByzantineDacMember(DacMember):
    honest = False

    def __init__(self, *args, behavior: str, coalition: Mapping[int, KeyPair], **kw):
        if behavior not in DAC_BEHAVIORS:
            raise ValueError(f"unknown DAC behavior {behavior!r}")
        super().__init__(*args, **kw)
        self.behavior = behavior
        self.coalition = dict(coalition)
        self._next_spam = 0

    def _junk(self, *parts: object) -> bytes:
        return hashlib.sha256(repr((self.rid, self.behavior) + parts).encode()).digest()

    def on_sign_request(self, b, id, h):
        if self.behavior == "silent":
            return None
        if self.behavior == "wrong-hash":
            wrong = self._sign(BatchTag(id, self._junk("hash", id, h)))
            return SignResp(BatchTag(id, h), self.rid, wrong.sig)
        if self.behavior == "equivocate":
            # sign without checking, and sign a conflicting tag too
            self._sign(BatchTag(id, self._junk("other", id)))
            return self._sign(BatchTag(id, h))
        return super().on_sign_request(b, id, h)

    def on_tick(self, now: int) -> None:
        if self.behavior != "spam-posts" or now < self._next_spam:
            return
        self._next_spam = now + self.cfg.batch_timeout
        logger = self.host.logger
        if logger.accepted:
            self.host.post(self.name, logger.accepted[max(logger.accepted)])
        tag = BatchTag(logger.max_contiguous(), self._junk("fake", now))
        sigs = {j: self._sign(tag, kp, j).sig for j, kp in sorted(self.coalition.items())}
        agg = self.scheme.aggregate(sigs)
        self.host.post(self.name, CertifiedBatchTag(tag, agg.signature, agg.signers))

    def translate(self, id, digest):
        if self.behavior == "silent":
            return TranslateMiss.INVALID_ID
        if self.behavior == "wrong-translate":
            fake = ClientKey.from_seed(b"wrong-translate").sign(id, self._junk("tx", id))
            return Batch(id, (fake,))
        return super().translate(id, digest)
