"""Reference Set Byzantine Consensus protocol.

One SBC round is a single-slot PBFT instance whose value is a set:

1. every replica broadcasts a signed INPUT with its pending elements;
2. the coordinator of view ``v`` (``(round + v) mod n``) proposes the union of
   at least ``n - f`` signed inputs, minus elements decided earlier;
3. replicas ECHO a valid proposal, COMMIT after a quorum of echoes, and decide
   after a quorum of commits;
4. on timeout replicas send VIEWCHANGE carrying their prepared certificate;
   the next coordinator must re-propose the highest prepared value.

Because a proposal is justified by ``n - f`` inputs, at least one of which is
honest, an element present in every honest input cannot be left out.
Replicas that fall behind are answered with a DECIDE record holding the
commit quorum.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Protocol, Sequence

from ..core import KeyDirectory, TransactionRequest, validate
from ..crypto.signing import _ed_private, _ed_verify
from .messages import (
    Commit,
    Decide,
    Echo,
    Input,
    Message,
    Prepared,
    Propose,
    ViewChange,
    set_digest,
)

log = logging.getLogger(__name__)

DeliverFn = Callable[[int, tuple[TransactionRequest, ...]], None]


class Env(Protocol):
    now: int

    def send(self, src: int, dst: int, msg: object) -> None: ...

    def record(self, actor: str, kind: str, **data: object) -> None: ...

    def note_tx(self, tx: TransactionRequest) -> None: ...


@dataclass(frozen=True)
class SbcParams:
    n: int
    f: int
    timeout: int = 24  # base view timeout in ticks; doubles per view
    max_timeout_exp: int = 8

    @property
    def quorum(self) -> int:
        return (self.n + self.f + 2) // 2

    @property
    def inputs_needed(self) -> int:
        return self.n - self.f

    def coordinator(self, rnd: int, view: int) -> int:
        return (rnd + view) % self.n

    def view_timeout(self, view: int) -> int:
        return self.timeout << min(view, self.max_timeout_exp)


@dataclass
class TransportKeys:
    """Per-replica Ed25519 keys authenticating protocol messages."""

    secrets: dict[int, bytes]
    publics: list[bytes]

    def sign(self, rid: int, msg: Message) -> bytes:
        return _ed_private(self.secrets[rid]).sign(msg.signing_bytes())

    def verify(self, msg: Message, sig: bytes) -> bool:
        if not 0 <= msg.sender < len(self.publics):
            return False
        return _ed_verify(self.publics[msg.sender], sig, msg.signing_bytes())


@dataclass
class RoundState:
    round: int
    view: int = 0
    changing: bool = False  # sent VIEWCHANGE for ``view``, waiting for its proposal
    live: bool = False
    deadline: int | None = None
    my_seq: int = -1
    my_input_empty: bool = True
    inputs: dict[int, Input] = field(default_factory=dict)
    proposals: dict[int, Propose] = field(default_factory=dict)
    values: dict[bytes, tuple[TransactionRequest, ...]] = field(default_factory=dict)
    echoes: dict[tuple[int, bytes], dict[int, Echo]] = field(default_factory=dict)
    commits: dict[tuple[int, bytes], dict[int, Commit]] = field(default_factory=dict)
    sent_echo: set[int] = field(default_factory=set)
    sent_commit: set[int] = field(default_factory=set)
    proposed: set[int] = field(default_factory=set)
    prepared: Prepared | None = None
    view_changes: dict[int, dict[int, ViewChange]] = field(default_factory=dict)


class SbcReplica:
    """Honest SBC replica; an event-driven state machine over (tick | message | add)."""

    def __init__(
        self,
        rid: int,
        params: SbcParams,
        keys: TransportKeys,
        clients: KeyDirectory,
        env: Env,
        on_deliver: DeliverFn | None = None,
    ):
        self.rid = rid
        self.params = params
        self.keys = keys
        self.clients = clients
        self.env = env
        self.on_deliver = on_deliver
        self.actor = f"r{rid}"
        self.round = 0
        self.pending: dict[bytes, TransactionRequest] = {}
        self.decided_log: set[bytes] = set()
        self.decisions: dict[int, tuple[TransactionRequest, ...]] = {}
        self.certs: dict[int, tuple[Commit, ...]] = {}
        self.rs = RoundState(0)
        self.relay = True  # adopt valid elements seen in other replicas' inputs
        self._future: dict[int, list[tuple[int, Message]]] = {}
        self._ahead: dict[int, set[int]] = {}
        self._answered: set[tuple[int, int]] = set()

    # ------------------------------------------------------------ endpoints

    def add(self, e: TransactionRequest) -> bool:
        """Submit an element; invalid or already-decided elements are dropped."""
        d = e.digest
        if d in self.decided_log or d in self.pending:
            return False
        if not validate(e, self.clients):
            return False
        self.pending[d] = e
        self._maybe_send_input()
        return True

    def knows(self, d: bytes) -> bool:
        return d in self.pending or d in self.decided_log

    def idle(self) -> bool:
        return not self.pending and not self.rs.live

    def on_tick(self, now: int) -> None:
        rs = self.rs
        if rs.live and rs.deadline is not None and now >= rs.deadline:
            self._start_view_change(rs.view + 1)

    def on_message(self, src: int, msg: Message) -> None:
        if msg.round < self.round:
            self._answer_laggard(src, msg.round)
            return
        if msg.round > self.round:
            self._future.setdefault(msg.round, []).append((src, msg))
            # f+1 replicas already past us: arm the timer so we ask for catch-up
            ahead = self._ahead.setdefault(msg.round, set())
            ahead.add(msg.sender)
            if len(ahead) > self.params.f:
                self._set_live()
            return
        self._dispatch(src, msg)

    def _dispatch(self, src: int, msg: Message) -> None:
        if isinstance(msg, Input):
            self._on_input(msg)
        elif isinstance(msg, Propose):
            self._on_propose(msg)
        elif isinstance(msg, Echo):
            self._on_echo(msg)
        elif isinstance(msg, Commit):
            self._on_commit(msg)
        elif isinstance(msg, ViewChange):
            self._on_view_change(msg)
        elif isinstance(msg, Decide):
            self._on_decide(msg)

    # ------------------------------------------------------------ helpers

    def fresh(self, elements: Iterable[TransactionRequest]) -> tuple[TransactionRequest, ...]:
        """Valid, not-yet-decided elements, deduplicated and digest-sorted."""
        out: dict[bytes, TransactionRequest] = {}
        for e in elements:
            d = e.digest
            if d not in self.decided_log and d not in out and validate(e, self.clients):
                out[d] = e
        return tuple(out[d] for d in sorted(out))

    def _sign(self, msg: Message) -> Message:
        return replace(msg, sig=self.keys.sign(self.rid, msg))

    def _broadcast(self, msg: Message) -> None:
        for dst in range(self.params.n):
            if dst == self.rid:
                continue
            self.env.send(self.rid, dst, msg)
        self._dispatch(self.rid, msg)

    def _send(self, dst: int, msg: Message) -> None:
        if dst == self.rid:
            self._dispatch(self.rid, msg)
        else:
            self.env.send(self.rid, dst, msg)

    def _set_live(self) -> None:
        rs = self.rs
        if not rs.live:
            rs.live = True
            rs.deadline = self.env.now + self.params.view_timeout(rs.view)
            self.env.record(self.actor, "sbc_live", round=rs.round)

    def _record_input(self, msg: Input, to: Sequence[int] | None = None) -> None:
        for e in msg.elements:
            self.env.note_tx(e)
        data = dict(round=msg.round, seq=msg.seq, digests=[e.digest.hex() for e in msg.elements])
        if to is not None:
            data["to"] = list(to)
        self.env.record(self.actor, "sbc_input", **data)

    # ------------------------------------------------------------ inputs

    def _input_elements(self) -> tuple[TransactionRequest, ...]:
        return tuple(self.pending[d] for d in sorted(self.pending))

    def _maybe_send_input(self) -> None:
        rs = self.rs
        if rs.my_seq >= 0 and not (rs.my_input_empty and self.pending):
            return
        if rs.my_seq < 0 and not self.pending and not rs.inputs:
            return
        self._send_input(self._input_elements())

    def _send_input(self, elements: tuple[TransactionRequest, ...]) -> None:
        rs = self.rs
        rs.my_seq += 1
        rs.my_input_empty = not elements
        msg = self._sign(Input(rs.round, 0, self.rid, rs.my_seq, elements))
        self._record_input(msg)
        self._broadcast(msg)

    def _valid_input(self, msg: Input) -> bool:
        return msg.round == self.rs.round and self.keys.verify(msg, msg.sig)

    def _store_input(self, msg: Input) -> bool:
        prev = self.rs.inputs.get(msg.sender)
        if prev is not None and prev.seq >= msg.seq:
            return False
        if not self._valid_input(msg):
            return False
        self.rs.inputs[msg.sender] = msg
        fresh = self.fresh(msg.elements)
        if fresh:
            self._set_live()
            if self.relay and msg.sender != self.rid:
                for e in fresh:
                    self.pending.setdefault(e.digest, e)
        return True

    def _on_input(self, msg: Input) -> None:
        if not self._store_input(msg):
            return
        self._maybe_send_input()
        self._maybe_propose()

    # ------------------------------------------------------------ proposing

    def _union(self, inputs: Iterable[Input]) -> tuple[TransactionRequest, ...]:
        els: list[TransactionRequest] = []
        for m in inputs:
            els.extend(m.elements)
        return self.fresh(els)

    def _choose_inputs(self) -> list[Input] | None:
        """Inputs to justify a fresh proposal; ``None`` if not yet possible."""
        inputs = [self.rs.inputs[s] for s in sorted(self.rs.inputs)]
        if len(inputs) < self.params.inputs_needed or not self._union(inputs):
            return None
        return inputs

    def _maybe_propose(self) -> None:
        rs = self.rs
        v = rs.view
        if self.params.coordinator(rs.round, v) != self.rid or v in rs.proposed:
            return
        vcs: tuple[ViewChange, ...] = ()
        if v > 0:
            have = rs.view_changes.get(v, {})
            if len(have) < self.params.quorum:
                return
            vcs = tuple(have[s] for s in sorted(have))[: self.params.quorum]
        best = _highest_prepared(vcs)
        if best is not None:
            elements, inputs = best.elements, ()
        else:
            chosen = self._choose_inputs()
            if chosen is None:
                return
            inputs = tuple(chosen)
            elements = self._union(inputs)
        self._emit_proposal(v, elements, inputs, vcs)

    def _emit_proposal(self, v, elements, inputs, vcs) -> None:
        self.rs.proposed.add(v)
        msg = self._sign(Propose(self.rs.round, v, self.rid, elements, inputs, vcs))
        self._broadcast(msg)

    # ------------------------------------------------------------ validation

    def _valid_echo_quorum(self, rnd: int, view: int, digest: bytes, echoes: Iterable[Echo]) -> bool:
        senders = set()
        for e in echoes:
            if (
                e.round == rnd
                and e.view == view
                and e.digest == digest
                and e.sender not in senders
                and self.keys.verify(e, e.sig)
            ):
                senders.add(e.sender)
        return len(senders) >= self.params.quorum

    def _valid_prepared(self, rnd: int, p: Prepared) -> bool:
        return set_digest(p.elements) == p.digest and self._valid_echo_quorum(
            rnd, p.view, p.digest, p.echoes
        )

    def _valid_view_change(self, vc: ViewChange) -> bool:
        if not self.keys.verify(vc, vc.sig):
            return False
        if vc.prepared is not None:
            if vc.prepared.view >= vc.view or not self._valid_prepared(vc.round, vc.prepared):
                return False
        return True

    def _valid_proposal(self, msg: Propose) -> bool:
        p = self.params
        if msg.sender != p.coordinator(msg.round, msg.view) or not self.keys.verify(msg, msg.sig):
            return False
        if not msg.elements:
            return False
        best = None
        if msg.view > 0:
            senders = set()
            for vc in msg.view_changes:
                if vc.round != msg.round or vc.view != msg.view or vc.sender in senders:
                    return False
                if not self._valid_view_change(vc):
                    return False
                senders.add(vc.sender)
            if len(senders) < p.quorum:
                return False
            best = _highest_prepared(msg.view_changes)
        elif msg.view_changes:
            return False
        if best is not None:
            return best.digest == msg.value_digest
        senders = set()
        for inp in msg.inputs:
            if inp.round != msg.round or inp.sender in senders or not self.keys.verify(inp, inp.sig):
                return False
            senders.add(inp.sender)
        if len(senders) < p.inputs_needed:
            return False
        union = self._union(msg.inputs)
        return bool(union) and set_digest(union) == msg.value_digest and len(union) == len(msg.elements)

    # ------------------------------------------------------------ agreement

    def _on_propose(self, msg: Propose) -> None:
        rs = self.rs
        if msg.view < rs.view or msg.view in rs.proposals:
            return
        if not self._valid_proposal(msg):
            return
        for inp in msg.inputs:
            if inp.sender not in rs.inputs or rs.inputs[inp.sender].seq < inp.seq:
                rs.inputs[inp.sender] = inp
        if msg.view > rs.view or rs.changing:
            rs.view = msg.view
            rs.changing = False
        rs.proposals[msg.view] = msg
        rs.values[msg.value_digest] = msg.elements
        self._set_live()
        rs.deadline = self.env.now + self.params.view_timeout(rs.view)
        self._echo(msg)
        self._check_prepared(msg.view, msg.value_digest)

    def _echo(self, msg: Propose) -> None:
        rs = self.rs
        if msg.view in rs.sent_echo:
            return
        rs.sent_echo.add(msg.view)
        self._broadcast(self._sign(Echo(rs.round, msg.view, self.rid, msg.value_digest)))

    def _on_echo(self, msg: Echo) -> None:
        rs = self.rs
        bucket = rs.echoes.setdefault((msg.view, msg.digest), {})
        if msg.sender in bucket or not self.keys.verify(msg, msg.sig):
            return
        bucket[msg.sender] = msg
        self._check_prepared(msg.view, msg.digest)

    def _check_prepared(self, view: int, digest: bytes) -> None:
        rs = self.rs
        if view != rs.view or rs.changing or view in rs.sent_commit:
            return
        prop = rs.proposals.get(view)
        if prop is None or prop.value_digest != digest:
            return
        bucket = rs.echoes.get((view, digest), {})
        if len(bucket) < self.params.quorum:
            return
        echoes = tuple(bucket[s] for s in sorted(bucket))
        rs.prepared = Prepared(view, digest, prop.elements, echoes)
        rs.sent_commit.add(view)
        self._broadcast(self._sign(Commit(rs.round, view, self.rid, digest)))

    def _on_commit(self, msg: Commit) -> None:
        rs = self.rs
        bucket = rs.commits.setdefault((msg.view, msg.digest), {})
        if msg.sender in bucket or not self.keys.verify(msg, msg.sig):
            return
        bucket[msg.sender] = msg
        self._check_decide(msg.view, msg.digest)

    def _check_decide(self, view: int, digest: bytes) -> None:
        rs = self.rs
        bucket = rs.commits.get((view, digest), {})
        if len(bucket) < self.params.quorum or digest not in rs.values:
            return
        cert = tuple(bucket[s] for s in sorted(bucket))
        self._decide(rs.values[digest], cert)

    def _on_decide(self, msg: Decide) -> None:
        if not msg.commits:
            return
        c0 = msg.commits[0]
        senders = set()
        for c in msg.commits:
            if c.round != msg.round or c.view != c0.view or c.digest != c0.digest:
                return
            if c.sender not in senders and self.keys.verify(c, c.sig):
                senders.add(c.sender)
        if len(senders) < self.params.quorum or set_digest(msg.elements) != c0.digest:
            return
        self._decide(msg.elements, msg.commits)

    # ------------------------------------------------------------ view change

    def _start_view_change(self, view: int) -> None:
        rs = self.rs
        if view <= rs.view and rs.changing:
            return
        rs.view = view
        rs.changing = True
        rs.deadline = self.env.now + self.params.view_timeout(view)
        inputs = tuple(rs.inputs[s] for s in sorted(rs.inputs))
        vc = self._sign(ViewChange(rs.round, view, self.rid, rs.prepared, inputs))
        self.env.record(self.actor, "sbc_view_change", round=rs.round, view=view)
        self._broadcast(vc)

    def _on_view_change(self, msg: ViewChange) -> None:
        rs = self.rs
        if msg.view <= 0:
            return
        bucket = rs.view_changes.setdefault(msg.view, {})
        if msg.sender in bucket or not self._valid_view_change(msg):
            return
        bucket[msg.sender] = msg
        for inp in msg.inputs:
            if inp.round == rs.round and (
                inp.sender not in rs.inputs or rs.inputs[inp.sender].seq < inp.seq
            ):
                if self.keys.verify(inp, inp.sig):
                    rs.inputs[inp.sender] = inp
                    if self.fresh(inp.elements):
                        self._set_live()
        if vc_prepared := msg.prepared:
            rs.values.setdefault(vc_prepared.digest, vc_prepared.elements)
        # join once f+1 replicas want a higher view
        higher = [v for v in rs.view_changes if v > rs.view]
        if len({s for v in higher for s in rs.view_changes[v]}) > self.params.f:
            self._set_live()
            self._start_view_change(min(higher))
        v = msg.view
        if (
            self.params.coordinator(rs.round, v) == self.rid
            and len(rs.view_changes.get(v, {})) >= self.params.quorum
            and v >= rs.view
        ):
            if v > rs.view:
                rs.view = v
                rs.changing = True
            self._maybe_propose()

    # ------------------------------------------------------------ decisions

    def _decide(self, elements: tuple[TransactionRequest, ...], cert: tuple[Commit, ...]) -> None:
        rnd = self.round
        if rnd in self.decisions:
            return
        self.decisions[rnd] = elements
        self.certs[rnd] = cert
        for e in elements:
            self.decided_log.add(e.digest)
            self.pending.pop(e.digest, None)
        self.env.record(
            self.actor,
            "set_deliver",
            round=rnd,
            view=cert[0].view if cert else 0,
            digests=[e.digest.hex() for e in elements],
        )
        self.round = rnd + 1
        self.rs = RoundState(self.round)
        self._ahead.pop(self.round, None)
        if self.on_deliver is not None:
            self.on_deliver(rnd, elements)
        self._maybe_send_input()
        for src, msg in self._future.pop(self.round, []):
            if msg.round == self.round:
                self._dispatch(src, msg)

    def _answer_laggard(self, src: int, rnd: int) -> None:
        if src == self.rid:
            return
        for r in range(rnd, self.round):
            key = (src, r)
            if key in self._answered:
                continue
            self._answered.add(key)
            self.env.send(self.rid, src, Decide(r, 0, self.rid, self.decisions[r], self.certs[r]))


def _highest_prepared(vcs: Iterable[ViewChange]) -> Prepared | None:
    best: Prepared | None = None
    for vc in vcs:
        p = vc.prepared
        if p is not None and (best is None or p.view > best.view):
            best = p
    return best
