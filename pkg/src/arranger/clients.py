"""L2-user submission with retries and STF-side batch translation.

A user contacts replicas according to a :class:`ClientPolicy` and watches
for its request in translated batches. The STF translates every accepted
tag, checking each answer by re-hashing it.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Mapping, Protocol, Sequence

from .core import AddResult, Batch, CertifiedBatchTag, TransactionRequest, TranslateMiss
from .crypto.hashing import EmptyInput, hash_batch
from .logger import PostRecord
from .wire import AddReply, AddRequest

STRATEGIES = ("parallel", "sequential", "optimistic")


@dataclass(frozen=True)
class ClientPolicy:
    strategy: str = "sequential"
    budget: int | None = None  # distinct replicas to contact; default f+1
    timeout: int | None = None  # observation ticks per contact; default 2*slice*n

    def __post_init__(self) -> None:
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}")
        if self.budget is not None and self.budget < 1:
            raise ValueError("retry budget must be positive")

    def resolved(self, n: int, f: int, turn_slice: int) -> "ClientPolicy":
        budget = self.budget if self.budget is not None else f + 1
        timeout = self.timeout if self.timeout is not None else 2 * turn_slice * n
        return ClientPolicy(self.strategy, min(budget, n), timeout)


class Translator(Protocol):
    def translate(self, id: int, digest: bytes) -> Batch | TranslateMiss: ...


@dataclass
class TranslateAttempt:
    batch: Batch | None
    contacts: list[tuple[int, str]]  # (replica, "ok" | "mismatch" | miss value)


def _check(tag: CertifiedBatchTag, answer) -> str:
    if isinstance(answer, TranslateMiss):
        return answer.value
    if not isinstance(answer, Batch) or answer.id != tag.id:
        return "mismatch"
    try:
        return "ok" if hash_batch(answer) == tag.hash else "mismatch"
    except EmptyInput:
        return "mismatch"


def translate_tag(
    tag: CertifiedBatchTag,
    servers: Mapping[int, Translator],
    strategy: str,
    f: int,
    order: Sequence[int] | None = None,
) -> TranslateAttempt:
    """Resolve ``tag`` to its batch.

    ``optimistic`` asks the tag's signers one by one; ``sequential`` asks the
    first f+1 replicas of ``order`` one by one; ``parallel`` asks the same
    f+1 at once and keeps the first answer that verifies. Answers that do
    not re-hash to the tag are discarded.
    """
    order = list(order if order is not None else sorted(servers))
    if strategy == "optimistic":
        cands = [i for i in order if i in tag.signers]
    else:
        cands = order[: f + 1]
    contacts: list[tuple[int, str]] = []
    found: Batch | None = None
    for i in cands:
        answer = servers[i].translate(tag.id, tag.hash)
        verdict = _check(tag, answer)
        contacts.append((i, verdict))
        if verdict == "ok":
            found = answer
            if strategy != "parallel":
                break
    return TranslateAttempt(found, contacts)


class StfClient:
    """Translates every accepted tag and publishes which requests were included."""

    name = "stf"
    honest = True

    def __init__(self, host, servers: Mapping[int, Translator], strategy: str, f: int, rng, retry: int = 8):
        self.host = host
        self.servers = servers
        self.strategy = strategy
        self.f = f
        self.rng = rng
        self.retry = retry
        self.included: dict[bytes, int] = {}
        self.batches: dict[int, Batch] = {}
        self._todo: list[tuple[int, CertifiedBatchTag]] = []

    def on_l1(self, rec: PostRecord) -> None:
        if rec.outcome.accepted:
            self._todo.append((self.host.now, rec.tag))

    def on_message(self, src: str, msg) -> None:
        pass

    def on_tick(self, now: int) -> None:
        later = []
        for due, tag in self._todo:
            if due > now:
                later.append((due, tag))
                continue
            order = sorted(self.servers)
            self.rng.shuffle(order)
            res = translate_tag(tag, self.servers, self.strategy, self.f, order)
            for i, verdict in res.contacts:
                self.host.record(self.name, "translate", id=tag.id, hash=tag.hash.hex(), replica=i, result=verdict)
            if res.batch is None:
                later.append((now + self.retry, tag))
                continue
            self.batches[tag.id] = res.batch
            for t in res.batch.txs:
                self.included.setdefault(t.digest, tag.id)
            self.host.record(
                self.name,
                "stf_batch",
                id=tag.id,
                hash=tag.hash.hex(),
                contacts=len(res.contacts),
                digests=[d.hex() for d in res.batch.digests()],
            )
        self._todo = later

    def idle(self) -> bool:
        return not self._todo

    def finish(self) -> None:
        for _, tag in self._todo:
            self.host.record(self.name, "stf_fail", id=tag.id, hash=tag.hash.hex())


@dataclass
class _Job:
    tx: TransactionRequest
    start: int
    contacted: list[str] = field(default_factory=list)
    deadline: int = 0
    done: bool = False
    resubmit: bool = False


class UserClient:
    """Submits scripted requests and retries other replicas until inclusion.

    ``order`` is the replica contact order; ``stf`` supplies the inclusion
    view. A request still missing when the last contact times out is
    reported ``exhausted``.
    """

    honest = True

    def __init__(
        self,
        name: str,
        host,
        jobs: Sequence[tuple[int, TransactionRequest]],
        order: Sequence[str],
        policy: ClientPolicy,
        stf: StfClient,
        resubmit: bool = False,
    ):
        self.name = name
        self.host = host
        self.order = list(order)
        self.policy = replace(policy, budget=min(policy.budget or 1, len(self.order)))
        self.stf = stf
        self.jobs = [_Job(tx, t, resubmit=resubmit) for t, tx in jobs]
        self.replies: list[tuple[str, bytes, AddResult]] = []

    def _contact(self, job: _Job, now: int, count: int = 1) -> None:
        for _ in range(count):
            if len(job.contacted) >= len(self.order):
                break
            dst = self.order[len(job.contacted)]
            job.contacted.append(dst)
            self.host.note_tx(job.tx)
            self.host.record(self.name, "submit", tx=job.tx.digest.hex(), to=dst)
            self.host.send(self.name, dst, AddRequest(job.tx))
        job.deadline = now + self.policy.timeout

    def on_message(self, src: str, msg) -> None:
        if isinstance(msg, AddReply):
            self.replies.append((src, msg.digest, msg.result))
            if msg.result is AddResult.INVALID:
                for job in self.jobs:
                    if job.tx.digest == msg.digest and not job.done:
                        job.done = True
                        self.host.record(self.name, "rejected", tx=msg.digest.hex(), by=src)

    def on_tick(self, now: int) -> None:
        for job in self.jobs:
            if job.done or job.start > now:
                continue
            d = job.tx.digest
            if not job.contacted:
                k = self.policy.budget if self.policy.strategy == "parallel" else 1
                self._contact(job, now, k)
                continue
            if d in self.stf.included:
                job.done = True
                self.host.record(self.name, "included", tx=d.hex(), id=self.stf.included[d], contacts=len(job.contacted))
                if job.resubmit:
                    # a second submission must never lead to a second inclusion
                    job.resubmit = False
                    dst = self.order[-1]
                    self.host.record(self.name, "submit", tx=d.hex(), to=dst)
                    self.host.send(self.name, dst, AddRequest(job.tx))
                continue
            if now < job.deadline:
                continue
            if self.policy.strategy != "parallel" and len(job.contacted) < self.policy.budget:
                self._contact(job, now)
            else:
                job.done = True
                self.host.record(self.name, "exhausted", tx=d.hex(), contacts=len(job.contacted))

    def idle(self) -> bool:
        return all(j.done for j in self.jobs)
