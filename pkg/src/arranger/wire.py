"""Arranger-level wire records exchanged over the simulated network.

Layouts (big-endian, see ``docs/wire-format.md``)::

    SIGTAG    0x10 | id u64 | digest 32B | signer u16 | u16 len | sig
    SIGNREQ   0x11 | id u64 | digest 32B | u32 len | batch encoding
    SIGNRESP  0x12 | id u64 | digest 32B | signer u16 | u16 len | sig
    ADDREQ    0x13 | u32 len | request encoding
    ADDREPLY  0x14 | digest 32B | u8 len | outcome ascii
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

from .core import AddResult, Batch, BatchTag, DecodeError, TransactionRequest, decode_batch, decode_tx, encode_batch

_TAG = struct.Struct(">Q32s")
_U16 = struct.Struct(">H")
_U32 = struct.Struct(">I")

K_SIGTAG = 0x10
K_SIGNREQ = 0x11
K_SIGNRESP = 0x12
K_ADDREQ = 0x13
K_ADDREPLY = 0x14


@dataclass(frozen=True)
class SigTag:
    """Gossip of one replica's signature over a batch tag."""

    tag: BatchTag
    signer: int
    sig: bytes

    def encode(self) -> bytes:
        return (
            bytes([K_SIGTAG])
            + _TAG.pack(self.tag.id, self.tag.hash)
            + _U16.pack(self.signer)
            + _U16.pack(len(self.sig))
            + self.sig
        )


@dataclass(frozen=True)
class SignResp(SigTag):
    def encode(self) -> bytes:
        return bytes([K_SIGNRESP]) + super().encode()[1:]


@dataclass(frozen=True)
class SignReq:
    batch: Batch
    tag: BatchTag

    def encode(self) -> bytes:
        body = encode_batch(self.batch)
        return bytes([K_SIGNREQ]) + _TAG.pack(self.tag.id, self.tag.hash) + _U32.pack(len(body)) + body


@dataclass(frozen=True)
class AddRequest:
    tx: TransactionRequest

    def encode(self) -> bytes:
        enc = self.tx.encoding
        return bytes([K_ADDREQ]) + _U32.pack(len(enc)) + enc


@dataclass(frozen=True)
class AddReply:
    digest: bytes
    result: AddResult

    def encode(self) -> bytes:
        code = self.result.value.encode()
        return bytes([K_ADDREPLY]) + self.digest + bytes([len(code)]) + code


def decode(buf: bytes):
    if not buf:
        raise DecodeError("empty record")
    kind, body = buf[0], buf[1:]
    try:
        if kind in (K_SIGTAG, K_SIGNRESP):
            bid, digest = _TAG.unpack_from(body, 0)
            (signer,) = _U16.unpack_from(body, 40)
            (ln,) = _U16.unpack_from(body, 42)
            sig = body[44 : 44 + ln]
            if 44 + ln != len(body):
                raise DecodeError("bad signature length")
            cls = SigTag if kind == K_SIGTAG else SignResp
            return cls(BatchTag(bid, digest), signer, sig)
        if kind == K_SIGNREQ:
            bid, digest = _TAG.unpack_from(body, 0)
            (ln,) = _U32.unpack_from(body, 40)
            if 44 + ln != len(body):
                raise DecodeError("bad batch length")
            return SignReq(decode_batch(body[44:]), BatchTag(bid, digest))
        if kind == K_ADDREQ:
            (ln,) = _U32.unpack_from(body, 0)
            if 4 + ln != len(body):
                raise DecodeError("bad request length")
            return AddRequest(decode_tx(body[4:]))
        if kind == K_ADDREPLY:
            digest = body[:32]
            ln = body[32]
            if 33 + ln != len(body):
                raise DecodeError("bad outcome length")
            return AddReply(digest, AddResult(body[33:].decode()))
    except (struct.error, IndexError, ValueError) as exc:
        if isinstance(exc, DecodeError):
            raise
        raise DecodeError(str(exc)) from None
    raise DecodeError(f"unknown record kind {kind:#x}")
