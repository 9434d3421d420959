"""Scripted Byzantine variants of the reference SBC replica."""

from __future__ import annotations

from typing import Callable

from ..core import ClientKey, TransactionRequest
from .messages import Commit, Echo, Input, Propose
from .protocol import SbcReplica

Targets = Callable[[TransactionRequest], bool]


class ByzantineSbcReplica(SbcReplica):
    """SBC replica following one of the scripted attacks.

    ``silent``
        never sends anything.
    ``equivocate``
        sends different signed inputs to the two halves of the system (one
        carrying a forged element), proposes conflicting values when
        coordinator, and echoes and commits every proposal it sees.
    ``censor``
        drops elements matched by ``targets`` from its inputs; as coordinator
        it picks justifying inputs that avoid them, or stays silent.
    anything else
        follows the protocol.
    """

    def __init__(self, *args, behavior: str = "honest", targets: Targets | None = None, **kw):
        super().__init__(*args, **kw)
        self.behavior = behavior
        self.targets = targets or (lambda e: False)
        self.relay = behavior not in ("censor", "silent")
        self._forger = ClientKey.from_seed(b"byzantine-forger/%d" % self.rid)

    # -- entry points

    def add(self, e: TransactionRequest) -> bool:
        if self.behavior == "silent":
            return False
        if self.behavior == "censor" and self.targets(e):
            return False
        return super().add(e)

    def on_message(self, src, msg) -> None:
        if self.behavior == "silent":
            return
        super().on_message(src, msg)

    def on_tick(self, now: int) -> None:
        if self.behavior != "silent":
            super().on_tick(now)

    # -- inputs

    def _input_elements(self) -> tuple[TransactionRequest, ...]:
        els = super()._input_elements()
        if self.behavior == "censor":
            els = tuple(e for e in els if not self.targets(e))
        return els

    def _send_input(self, elements) -> None:
        if self.behavior != "equivocate":
            super()._send_input(elements)
            return
        rs = self.rs
        rs.my_seq += 1
        rs.my_input_empty = not elements
        forged = self._forger.sign(rs.round, b"forged")
        # corrupt the signature so the element is invalid
        bad = TransactionRequest(forged.sender, forged.nonce, forged.payload, bytes(64))
        half = len(elements) // 2
        a = tuple(elements[:half]) + (bad,)
        b = tuple(elements[half:])
        n = self.params.n
        left = [d for d in range(n) if d < n // 2]
        right = [d for d in range(n) if d >= n // 2]
        for els, group in ((a, left), (b, right)):
            msg = self._sign(Input(rs.round, 0, self.rid, rs.my_seq, els))
            self._record_input(msg, to=group)
            for dst in group:
                self._send(dst, msg)

    # -- proposing

    def _choose_inputs(self):
        if self.behavior != "censor":
            return super()._choose_inputs()
        clean = [
            self.rs.inputs[s]
            for s in sorted(self.rs.inputs)
            if not any(self.targets(e) for e in self.rs.inputs[s].elements)
        ]
        if len(clean) < self.params.inputs_needed or not self._union(clean):
            return None
        return clean

    def _emit_proposal(self, v, elements, inputs, vcs) -> None:
        if self.behavior != "equivocate" or not inputs:
            super()._emit_proposal(v, elements, inputs, vcs)
            return
        self.rs.proposed.add(v)
        # two justifications differing in which of our own inputs they carry
        alt = self._alternative(inputs)
        n = self.params.n
        variants = [(elements, inputs)]
        if alt is not None:
            variants.append((self._union(alt), alt))
        for k, (els, inps) in enumerate(variants):
            if not els:
                continue
            msg = self._sign(Propose(self.rs.round, v, self.rid, els, tuple(inps), vcs))
            group = [d for d in range(n) if (d < n // 2) == (k == 0)] if len(variants) > 1 else range(n)
            for dst in group:
                self._send(dst, msg)

    def _alternative(self, inputs):
        others = [i for i in inputs if i.sender != self.rid]
        spare = [
            self.rs.inputs[s]
            for s in sorted(self.rs.inputs)
            if s != self.rid and all(s != i.sender for i in others)
        ]
        if len(others) >= self.params.inputs_needed and spare:
            alt = others[1:] + spare[:1]
            return alt if len(alt) >= self.params.inputs_needed else None
        if len(others) >= self.params.inputs_needed:
            return others
        return None

    # -- voting

    def _on_propose(self, msg: Propose) -> None:
        if self.behavior != "equivocate":
            super()._on_propose(msg)
            return
        if not self.keys.verify(msg, msg.sig):
            return
        self.rs.values.setdefault(msg.value_digest, msg.elements)
        echo = self._sign(Echo(msg.round, msg.view, self.rid, msg.value_digest))
        commit = self._sign(Commit(msg.round, msg.view, self.rid, msg.value_digest))
        for dst in range(self.params.n):
            if dst != self.rid:
                self.env.send(self.rid, dst, echo)
                self.env.send(self.rid, dst, commit)
        self._dispatch(self.rid, commit)
