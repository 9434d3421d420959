"""Domain types shared across the arranger, plus request validation and
the deterministic set-to-batch ordering.

Canonical encodings use fixed-width big-endian integers and length-prefixed
byte fields; see ``docs/wire-format.md`` for the byte layout.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property, lru_cache
from typing import Iterable, Mapping

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives.asymmetric.ed25519 import (
    Ed25519PrivateKey,
    Ed25519PublicKey,
)

DIGEST_SIZE = 32
TX_DOMAIN = b"ARR-TX\x01"

_U16 = struct.Struct(">H")
_U32 = struct.Struct(">I")
_U64 = struct.Struct(">Q")


class DecodeError(ValueError):
    """Raised on malformed canonical encodings."""


class AllDuplicates(Exception):
    """Every element of a decided set was already batched."""


class ConfigError(ValueError):
    pass


def sha256(data: bytes) -> bytes:
    return hashlib.sha256(data).digest()


# --------------------------------------------------------------------------
# Transaction requests


@dataclass(frozen=True)
class TransactionRequest:
    sender: bytes  # raw Ed25519 public key of the issuing client
    nonce: int
    payload: bytes
    signature: bytes = b""

    def signing_bytes(self) -> bytes:
        return b"".join(
            (
                TX_DOMAIN,
                _U16.pack(len(self.sender)),
                self.sender,
                _U64.pack(self.nonce),
                _U32.pack(len(self.payload)),
                self.payload,
            )
        )

    @cached_property
    def encoding(self) -> bytes:
        return b"".join(
            (
                _U16.pack(len(self.sender)),
                self.sender,
                _U64.pack(self.nonce),
                _U32.pack(len(self.payload)),
                self.payload,
                _U16.pack(len(self.signature)),
                self.signature,
            )
        )

    @cached_property
    def digest(self) -> bytes:
        return sha256(self.encoding)

    def __repr__(self) -> str:
        return f"Tx({self.digest.hex()[:10]}, nonce={self.nonce}, {len(self.payload)}B)"


def encode_tx(tr: TransactionRequest) -> bytes:
    return tr.encoding


def _decode_tx_at(buf: bytes, pos: int) -> tuple[TransactionRequest, int]:
    try:
        (slen,) = _U16.unpack_from(buf, pos)
        pos += 2
        sender = bytes(buf[pos : pos + slen])
        if len(sender) != slen:
            raise DecodeError("truncated sender")
        pos += slen
        (nonce,) = _U64.unpack_from(buf, pos)
        pos += 8
        (plen,) = _U32.unpack_from(buf, pos)
        pos += 4
        payload = bytes(buf[pos : pos + plen])
        if len(payload) != plen:
            raise DecodeError("truncated payload")
        pos += plen
        (siglen,) = _U16.unpack_from(buf, pos)
        pos += 2
        sig = bytes(buf[pos : pos + siglen])
        if len(sig) != siglen:
            raise DecodeError("truncated signature")
        pos += siglen
    except struct.error as exc:
        raise DecodeError(str(exc)) from None
    return TransactionRequest(sender, nonce, payload, sig), pos


def decode_tx(data: bytes) -> TransactionRequest:
    tr, pos = _decode_tx_at(data, 0)
    if pos != len(data):
        raise DecodeError("trailing bytes after transaction")
    return tr


@dataclass(frozen=True)
class ClientKey:
    """An L2 user's signing key; ``sender`` is the raw public key."""

    private: Ed25519PrivateKey = field(repr=False)
    sender: bytes

    @classmethod
    def from_seed(cls, seed: bytes) -> "ClientKey":
        sk = Ed25519PrivateKey.from_private_bytes(sha256(b"arranger-client" + seed))
        return cls(sk, sk.public_key().public_bytes_raw())

    def sign(self, nonce: int, payload: bytes) -> TransactionRequest:
        unsigned = TransactionRequest(self.sender, nonce, payload)
        return TransactionRequest(
            self.sender, nonce, payload, self.private.sign(unsigned.signing_bytes())
        )


class KeyDirectory:
    """Client PKI: maps sender identifiers to public keys."""

    def __init__(self, senders: Iterable[bytes] = ()):
        self._keys: dict[bytes, Ed25519PublicKey] = {}
        for s in senders:
            self.register(s)

    def register(self, sender: bytes) -> None:
        self._keys[sender] = Ed25519PublicKey.from_public_bytes(sender)

    def __contains__(self, sender: bytes) -> bool:
        return sender in self._keys

    def __len__(self) -> int:
        return len(self._keys)

    def senders(self) -> list[bytes]:
        return sorted(self._keys)

    def lookup(self, sender: bytes) -> Ed25519PublicKey | None:
        return self._keys.get(sender)


@lru_cache(maxsize=1 << 16)
def _ed25519_ok(pk: bytes, sig: bytes, msg: bytes) -> bool:
    try:
        Ed25519PublicKey.from_public_bytes(pk).verify(sig, msg)
    except (InvalidSignature, ValueError):
        return False
    return True


def validate(tr: TransactionRequest, pki: KeyDirectory) -> bool:
    """True iff ``tr`` is signed by the registered key it names as sender."""
    if tr.sender not in pki or len(tr.signature) != 64:
        return False
    return _ed25519_ok(tr.sender, tr.signature, tr.signing_bytes())


# --------------------------------------------------------------------------
# Batches and tags


@dataclass(frozen=True)
class Batch:
    id: int
    txs: tuple[TransactionRequest, ...]

    def __post_init__(self) -> None:
        if not isinstance(self.txs, tuple):
            object.__setattr__(self, "txs", tuple(self.txs))

    def digests(self) -> list[bytes]:
        return [t.digest for t in self.txs]

    def __len__(self) -> int:
        return len(self.txs)


@dataclass(frozen=True)
class BatchTag:
    id: int
    hash: bytes

    def message(self) -> bytes:
        """Bytes signed by replicas: 8-byte big-endian id followed by the digest."""
        return _U64.pack(self.id) + self.hash


@dataclass(frozen=True)
class CertifiedBatchTag:
    tag: BatchTag
    combined_signature: bytes
    signers: frozenset[int]

    @property
    def id(self) -> int:
        return self.tag.id

    @property
    def hash(self) -> bytes:
        return self.tag.hash

    def encode(self, n: int) -> bytes:
        """Wire form posted to L1: id, digest, signer bitmap over ``n`` replicas, signature."""
        return b"".join(
            (
                _U64.pack(self.tag.id),
                self.tag.hash,
                signer_bitmap(self.signers, n),
                _U32.pack(len(self.combined_signature)),
                self.combined_signature,
            )
        )


def signer_bitmap(signers: Iterable[int], n: int) -> bytes:
    bits = bytearray((n + 7) // 8)
    for i in signers:
        if not 0 <= i < n:
            raise ValueError(f"signer {i} outside 0..{n - 1}")
        bits[i // 8] |= 0x80 >> (i % 8)
    return bytes(bits)


def bitmap_signers(bitmap: bytes, n: int) -> frozenset[int]:
    return frozenset(i for i in range(n) if bitmap[i // 8] & (0x80 >> (i % 8)))


_BATCH_MAGIC = b"ARB\x01"


def encode_batch(b: Batch) -> bytes:
    parts = [_BATCH_MAGIC, _U64.pack(b.id), _U32.pack(len(b.txs))]
    for t in b.txs:
        enc = t.encoding
        parts.append(_U32.pack(len(enc)))
        parts.append(enc)
    return b"".join(parts)


def decode_batch(data: bytes) -> Batch:
    if len(data) < 16 or data[:4] != _BATCH_MAGIC:
        raise DecodeError("not a batch encoding")
    (bid,) = _U64.unpack_from(data, 4)
    (count,) = _U32.unpack_from(data, 12)
    pos = 16
    txs = []
    for _ in range(count):
        if pos + 4 > len(data):
            raise DecodeError("truncated batch")
        (ln,) = _U32.unpack_from(data, pos)
        pos += 4
        end = pos + ln
        if end > len(data):
            raise DecodeError("truncated transaction")
        tr, used = _decode_tx_at(data, pos)
        if used != end:
            raise DecodeError("transaction length mismatch")
        txs.append(tr)
        pos = end
    if pos != len(data):
        raise DecodeError("trailing bytes after batch")
    return Batch(bid, tuple(txs))


def tobatch(
    id: int,
    decided: Iterable[TransactionRequest],
    already_batched: set[bytes] | frozenset[bytes],
) -> Batch:
    """Order the fresh part of a decided set into batch ``id``.

    Requests are deduplicated by digest, requests already batched are dropped,
    and the rest are sorted by digest so every replica builds identical bytes.
    """
    fresh: dict[bytes, TransactionRequest] = {}
    for t in decided:
        d = t.digest
        if d not in already_batched:
            fresh[d] = t
    if not fresh:
        raise AllDuplicates(id)
    return Batch(id, tuple(fresh[d] for d in sorted(fresh)))


# --------------------------------------------------------------------------
# Configuration


@dataclass(frozen=True)
class SystemConfig:
    n: int
    f: int
    mode: str = "full"  # "full" | "semi"
    max_batch: int = 16
    batch_timeout: int = 10
    turn_slice: int = 4
    honest_minority: bool = False

    def __post_init__(self) -> None:
        if self.mode not in ("full", "semi"):
            raise ConfigError(f"unknown mode {self.mode!r}")
        if self.n < 1 or self.f < 0:
            raise ConfigError("n must be positive and f non-negative")
        if self.mode == "full" and not 3 * self.f < self.n:
            raise ConfigError(f"full mode needs f < n/3 (n={self.n}, f={self.f})")
        if self.mode == "semi":
            if self.f >= self.n:
                raise ConfigError("f must be below the DAC size")
            if 2 * self.f >= self.n and not self.honest_minority:
                raise ConfigError(
                    f"semi mode needs f < n/2 (n={self.n}, f={self.f}); "
                    "set honest_minority to run the liveness-breaking variant"
                )
        if self.max_batch < 1 or self.batch_timeout < 1 or self.turn_slice < 1:
            raise ConfigError("batch and turn parameters must be positive")

    @property
    def certified(self) -> int:
        """Signatures needed for a certified tag."""
        return self.f + 1

    @property
    def quorum(self) -> int:
        """Byzantine quorum; equals 2f+1 when n = 3f+1."""
        return (self.n + self.f + 2) // 2


def digest_hex(d: bytes) -> str:
    return d.hex()


def make_registry(txs: Iterable[TransactionRequest]) -> Mapping[bytes, TransactionRequest]:
    return {t.digest: t for t in txs}


# --------------------------------------------------------------------------
# Outcomes returned to clients


class AddResult(str, Enum):
    ACK = "Ack"
    INVALID = "Invalid"
    DUPLICATE = "Duplicate"

    @property
    def ok(self) -> bool:
        return self is AddResult.ACK


class TranslateMiss(str, Enum):
    """Error values of ``translate``; a hit returns the batch itself."""

    INVALID_ID = "invalidId"
    INVALID_HASH = "invalidHash"


class BatchStore:
    """Append-only map ``(id, digest) -> Batch`` behind ``translate``."""

    def __init__(self) -> None:
        self._by_key: dict[tuple[int, bytes], Batch] = {}
        self._ids: dict[int, list[bytes]] = {}

    def put(self, b: Batch, digest: bytes) -> bool:
        key = (b.id, digest)
        if key in self._by_key:
            return False
        self._by_key[key] = b
        self._ids.setdefault(b.id, []).append(digest)
        return True

    def has_id(self, id: int) -> bool:
        return id in self._ids

    def __contains__(self, key: tuple[int, bytes]) -> bool:
        return key in self._by_key

    def __len__(self) -> int:
        return len(self._by_key)

    def translate(self, id: int, digest: bytes) -> Batch | TranslateMiss:
        b = self._by_key.get((id, digest))
        if b is not None:
            return b
        return TranslateMiss.INVALID_HASH if id in self._ids else TranslateMiss.INVALID_ID
