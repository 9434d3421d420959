"""SBC wire records.

Every record starts with a common header::

    kind u8 | version u8 | round u64 | view u32 | sender u16

followed by a kind-specific body and, for signed kinds, a trailing
``u16 length | signature``. The signature covers ``signing_bytes()``: the
header plus a 32-byte digest of the signed content. Certificates nested
inside a record (inputs, echoes, view changes, commits) are full encoded
records, each length-prefixed. See ``docs/wire-format.md``.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Sequence

from ..core import DecodeError, TransactionRequest, _decode_tx_at

WIRE_VERSION = 1

KIND_INPUT = 1
KIND_PROPOSE = 2
KIND_ECHO = 3
KIND_COMMIT = 4
KIND_VIEWCHANGE = 5
KIND_DECIDE = 6

KIND_NAMES = {
    KIND_INPUT: "INPUT",
    KIND_PROPOSE: "PROPOSE",
    KIND_ECHO: "ECHO",
    KIND_COMMIT: "COMMIT",
    KIND_VIEWCHANGE: "VIEWCHANGE",
    KIND_DECIDE: "DECIDE",
}

_HDR = struct.Struct(">BBQIH")
_U16 = struct.Struct(">H")
_U32 = struct.Struct(">I")
_I64 = struct.Struct(">q")
NO_DIGEST = b"\x00" * 32


def set_digest(elements: Iterable[TransactionRequest]) -> bytes:
    h = hashlib.sha256(b"ARR-SET\x01")
    for d in sorted(e.digest for e in elements):
        h.update(d)
    return h.digest()


# ---------------------------------------------------------------- encoding


class _Writer:
    def __init__(self) -> None:
        self.parts: list[bytes] = []

    def raw(self, b: bytes) -> None:
        self.parts.append(b)

    def u16(self, v: int) -> None:
        self.parts.append(_U16.pack(v))

    def u32(self, v: int) -> None:
        self.parts.append(_U32.pack(v))

    def blob(self, b: bytes) -> None:
        self.parts.append(_U32.pack(len(b)))
        self.parts.append(b)

    def elements(self, els: Sequence[TransactionRequest]) -> None:
        self.u32(len(els))
        for e in els:
            self.blob(e.encoding)

    def records(self, recs: Sequence["Message"]) -> None:
        self.u32(len(recs))
        for r in recs:
            self.blob(r.encode())

    def sig(self, s: bytes) -> None:
        self.u16(len(s))
        self.parts.append(s)

    def done(self) -> bytes:
        return b"".join(self.parts)


class _Reader:
    def __init__(self, buf: bytes, pos: int = 0):
        self.buf = buf
        self.pos = pos

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.buf):
            raise DecodeError("truncated message")
        out = self.buf[self.pos : self.pos + n]
        self.pos += n
        return out

    def u16(self) -> int:
        return _U16.unpack(self.take(2))[0]

    def u32(self) -> int:
        return _U32.unpack(self.take(4))[0]

    def i64(self) -> int:
        return _I64.unpack(self.take(8))[0]

    def blob(self) -> bytes:
        return self.take(self.u32())

    def elements(self) -> tuple[TransactionRequest, ...]:
        out = []
        for _ in range(self.u32()):
            raw = self.blob()
            tr, used = _decode_tx_at(raw, 0)
            if used != len(raw):
                raise DecodeError("element length mismatch")
            out.append(tr)
        return tuple(out)

    def records(self, cls: type) -> tuple:
        return tuple(decode(self.blob(), expect=cls) for _ in range(self.u32()))

    def sig(self) -> bytes:
        return self.take(self.u16())


# ---------------------------------------------------------------- records


@dataclass(frozen=True)
class Message:
    round: int
    view: int
    sender: int

    kind = 0

    def header(self) -> bytes:
        return _HDR.pack(self.kind, WIRE_VERSION, self.round, self.view, self.sender)

    def content_digest(self) -> bytes:
        return NO_DIGEST

    def signing_bytes(self) -> bytes:
        return self.header() + self.content_digest()

    def _body(self, w: _Writer) -> None:
        pass

    def encode(self) -> bytes:
        w = _Writer()
        w.raw(self.header())
        self._body(w)
        return w.done()

    @property
    def name(self) -> str:
        return KIND_NAMES[self.kind]


@dataclass(frozen=True)
class Input(Message):
    """A replica's signed proposal set for one round; ``seq`` orders re-sends."""

    seq: int
    elements: tuple[TransactionRequest, ...]
    sig: bytes = b""

    kind = KIND_INPUT

    @cached_property
    def value_digest(self) -> bytes:
        return set_digest(self.elements)

    def content_digest(self) -> bytes:
        return hashlib.sha256(_U32.pack(self.seq) + self.value_digest).digest()

    def _body(self, w: _Writer) -> None:
        w.u32(self.seq)
        w.elements(self.elements)
        w.sig(self.sig)


@dataclass(frozen=True)
class Echo(Message):
    digest: bytes
    sig: bytes = b""

    kind = KIND_ECHO

    def content_digest(self) -> bytes:
        return self.digest

    def _body(self, w: _Writer) -> None:
        w.raw(self.digest)
        w.sig(self.sig)


@dataclass(frozen=True)
class Commit(Message):
    digest: bytes
    sig: bytes = b""

    kind = KIND_COMMIT

    def content_digest(self) -> bytes:
        return self.digest

    def _body(self, w: _Writer) -> None:
        w.raw(self.digest)
        w.sig(self.sig)


@dataclass(frozen=True)
class Prepared:
    """A value together with a quorum of echoes for it in ``view``."""

    view: int
    digest: bytes
    elements: tuple[TransactionRequest, ...]
    echoes: tuple[Echo, ...]


@dataclass(frozen=True)
class ViewChange(Message):
    """Request to move to ``view``; carries the sender's highest prepared value
    and the signed inputs it holds."""

    prepared: Prepared | None
    inputs: tuple[Input, ...]
    sig: bytes = b""

    kind = KIND_VIEWCHANGE

    def content_digest(self) -> bytes:
        if self.prepared is None:
            return hashlib.sha256(_I64.pack(-1) + NO_DIGEST).digest()
        return hashlib.sha256(_I64.pack(self.prepared.view) + self.prepared.digest).digest()

    def _body(self, w: _Writer) -> None:
        if self.prepared is None:
            w.raw(_I64.pack(-1))
        else:
            p = self.prepared
            w.raw(_I64.pack(p.view))
            w.raw(p.digest)
            w.elements(p.elements)
            w.records(p.echoes)
        w.records(self.inputs)
        w.sig(self.sig)


@dataclass(frozen=True)
class Propose(Message):
    elements: tuple[TransactionRequest, ...]
    inputs: tuple[Input, ...]
    view_changes: tuple[ViewChange, ...] = ()
    sig: bytes = b""

    kind = KIND_PROPOSE

    @cached_property
    def value_digest(self) -> bytes:
        return set_digest(self.elements)

    def content_digest(self) -> bytes:
        return self.value_digest

    def _body(self, w: _Writer) -> None:
        w.elements(self.elements)
        w.records(self.inputs)
        w.records(self.view_changes)
        w.sig(self.sig)


@dataclass(frozen=True)
class Decide(Message):
    """Catch-up record: a decided value with the commit quorum that proves it.
    Self-certifying, so it carries no signature of its own."""

    elements: tuple[TransactionRequest, ...]
    commits: tuple[Commit, ...]

    kind = KIND_DECIDE

    def _body(self, w: _Writer) -> None:
        w.elements(self.elements)
        w.records(self.commits)


_CLASSES = {
    KIND_INPUT: Input,
    KIND_PROPOSE: Propose,
    KIND_ECHO: Echo,
    KIND_COMMIT: Commit,
    KIND_VIEWCHANGE: ViewChange,
    KIND_DECIDE: Decide,
}


def decode(buf: bytes, expect: type | None = None) -> Message:
    if len(buf) < _HDR.size:
        raise DecodeError("short message")
    kind, version, rnd, view, sender = _HDR.unpack_from(buf, 0)
    if version != WIRE_VERSION:
        raise DecodeError(f"unsupported wire version {version}")
    cls = _CLASSES.get(kind)
    if cls is None:
        raise DecodeError(f"unknown kind {kind}")
    if expect is not None and cls is not expect:
        raise DecodeError(f"expected {expect.__name__}, got {cls.__name__}")
    r = _Reader(buf, _HDR.size)
    if cls is Input:
        seq = r.u32()
        msg = Input(rnd, view, sender, seq, r.elements(), r.sig())
    elif cls in (Echo, Commit):
        msg = cls(rnd, view, sender, r.take(32), r.sig())
    elif cls is ViewChange:
        pview = r.i64()
        prepared = None
        if pview >= 0:
            digest = r.take(32)
            prepared = Prepared(pview, digest, r.elements(), r.records(Echo))
        msg = ViewChange(rnd, view, sender, prepared, r.records(Input), r.sig())
    elif cls is Propose:
        msg = Propose(rnd, view, sender, r.elements(), r.records(Input), r.records(ViewChange), r.sig())
    else:
        msg = Decide(rnd, view, sender, r.elements(), r.records(Commit))
    if r.pos != len(buf):
        raise DecodeError("trailing bytes in message")
    return msg
