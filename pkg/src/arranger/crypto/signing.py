"""Signature schemes over batch tags.

Two interchangeable schemes share one contract:

* ``bls``: BLS12-381 signatures aggregated into a single 96-byte point
  (requires ``milagro_bls_binding``).
* ``ed25519-list``: non-aggregating Ed25519; the "aggregate" is the
  signer-ordered concatenation of individual signatures. It is the fast
  default inside the simulator.

An :class:`AggregateSignature` always carries its signer set and verifies only
against exactly that set.
"""

from __future__ import annotations

import hashlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Mapping, Sequence

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives.asymmetric.ed25519 import (
    Ed25519PrivateKey,
    Ed25519PublicKey,
)

from ..core import BatchTag

try:
    import milagro_bls_binding as _bls
except ImportError:  # pragma: no cover - exercised only without the extra
    _bls = None

BLS_ORDER = 0x73EDA753299D7D483339D80809A1D80553BDA402FFFE5BFEFFFFFFFF00000001
POP_DOMAIN = b"arranger-pop\x01"


class EmptySignerSet(ValueError):
    pass


class RogueKey(ValueError):
    """Registration rejected: the proof of possession does not verify."""


@dataclass(frozen=True)
class KeyPair:
    secret: bytes = field(repr=False)
    public: bytes


@dataclass(frozen=True)
class AggregateSignature:
    signature: bytes
    signers: frozenset[int]


class SignatureScheme:
    name = "abstract"
    signature_size = 0

    def keygen(self, seed: bytes) -> KeyPair:
        raise NotImplementedError

    def sign_bytes(self, msg: bytes, sk: bytes) -> bytes:
        raise NotImplementedError

    def verify_bytes(self, msg: bytes, sig: bytes, pk: bytes) -> bool:
        raise NotImplementedError

    def combine(self, ordered_sigs: Sequence[bytes]) -> bytes:
        raise NotImplementedError

    def verify_combined(self, msg: bytes, sig: bytes, ordered_pks: Sequence[bytes]) -> bool:
        raise NotImplementedError

    # tag-level API -------------------------------------------------------

    def sign(self, tag: BatchTag, sk: bytes) -> bytes:
        return self.sign_bytes(tag.message(), sk)

    def verify(self, tag: BatchTag, sig: bytes, pk: bytes) -> bool:
        return self.verify_bytes(tag.message(), sig, pk)

    def aggregate(self, sigs: Mapping[int, bytes], tag: BatchTag | None = None) -> AggregateSignature:
        """Combine per-replica signatures; inputs are assumed individually valid."""
        if not sigs:
            raise EmptySignerSet("nothing to aggregate")
        order = sorted(sigs)
        return AggregateSignature(self.combine([sigs[i] for i in order]), frozenset(order))

    def verify_aggregate(self, tag: BatchTag, agg: AggregateSignature, pki: "ReplicaDirectory") -> bool:
        if not agg.signers:
            return False
        try:
            pks = [pki.public_key(i) for i in sorted(agg.signers)]
        except KeyError:
            return False
        return self.verify_combined(tag.message(), agg.signature, pks)

    def prove_possession(self, kp: KeyPair) -> bytes:
        return self.sign_bytes(POP_DOMAIN + kp.public, kp.secret)

    def check_possession(self, pk: bytes, proof: bytes) -> bool:
        return self.verify_bytes(POP_DOMAIN + pk, proof, pk)


class Ed25519ListScheme(SignatureScheme):
    name = "ed25519-list"
    signature_size = 64

    def keygen(self, seed: bytes) -> KeyPair:
        sk = hashlib.sha256(b"arranger-ed25519" + seed).digest()
        pk = Ed25519PrivateKey.from_private_bytes(sk).public_key().public_bytes_raw()
        return KeyPair(sk, pk)

    def sign_bytes(self, msg: bytes, sk: bytes) -> bytes:
        return _ed_private(sk).sign(msg)

    def verify_bytes(self, msg: bytes, sig: bytes, pk: bytes) -> bool:
        return _ed_verify(pk, sig, msg)

    def combine(self, ordered_sigs: Sequence[bytes]) -> bytes:
        return b"".join(ordered_sigs)

    def verify_combined(self, msg: bytes, sig: bytes, ordered_pks: Sequence[bytes]) -> bool:
        if len(sig) != 64 * len(ordered_pks):
            return False
        return all(
            _ed_verify(pk, sig[64 * k : 64 * (k + 1)], msg) for k, pk in enumerate(ordered_pks)
        )


@lru_cache(maxsize=4096)
def _ed_private(sk: bytes) -> Ed25519PrivateKey:
    return Ed25519PrivateKey.from_private_bytes(sk)


@lru_cache(maxsize=1 << 17)
def _ed_verify(pk: bytes, sig: bytes, msg: bytes) -> bool:
    # pure function of its inputs; replicas re-verify the same gossip often
    try:
        Ed25519PublicKey.from_public_bytes(pk).verify(sig, msg)
    except (InvalidSignature, ValueError):
        return False
    return True


class BlsScheme(SignatureScheme):
    name = "bls"
    signature_size = 96

    def __init__(self) -> None:
        if _bls is None:
            raise RuntimeError("BLS scheme needs milagro_bls_binding (pip install arranger[bls])")

    def keygen(self, seed: bytes) -> KeyPair:
        x = int.from_bytes(hashlib.sha256(b"arranger-bls" + seed).digest(), "big")
        sk = (x % (BLS_ORDER - 1) + 1).to_bytes(32, "big")
        return KeyPair(sk, _bls.SkToPk(sk))

    def sign_bytes(self, msg: bytes, sk: bytes) -> bytes:
        return _bls.Sign(sk, msg)

    def verify_bytes(self, msg: bytes, sig: bytes, pk: bytes) -> bool:
        try:
            return bool(_bls.Verify(pk, msg, sig))
        except ValueError:
            return False

    def combine(self, ordered_sigs: Sequence[bytes]) -> bytes:
        return _bls.Aggregate(list(ordered_sigs))

    def verify_combined(self, msg: bytes, sig: bytes, ordered_pks: Sequence[bytes]) -> bool:
        try:
            return bool(_bls.FastAggregateVerify(list(ordered_pks), msg, sig))
        except ValueError:
            return False


def bls_available() -> bool:
    return _bls is not None


SCHEMES = {"ed25519-list": Ed25519ListScheme, "bls": BlsScheme}


def get_scheme(name: str) -> SignatureScheme:
    try:
        return SCHEMES[name]()
    except KeyError:
        raise ValueError(f"unknown signature scheme {name!r}; choose from {sorted(SCHEMES)}") from None


class ReplicaDirectory:
    """Replica PKI. Keys are admitted only with a valid proof of possession."""

    def __init__(self, scheme: SignatureScheme):
        self.scheme = scheme
        self._keys: dict[int, bytes] = {}

    def register(self, replica: int, pk: bytes, proof: bytes) -> None:
        if not self.scheme.check_possession(pk, proof):
            raise RogueKey(f"replica {replica}: proof of possession rejected")
        self._keys[replica] = pk

    def public_key(self, replica: int) -> bytes:
        return self._keys[replica]

    def __contains__(self, replica: int) -> bool:
        return replica in self._keys

    def __len__(self) -> int:
        return len(self._keys)

    def items(self) -> list[tuple[int, bytes]]:
        return sorted(self._keys.items())

    @classmethod
    def generate(
        cls, scheme: SignatureScheme, n: int, seed: bytes = b""
    ) -> tuple["ReplicaDirectory", list[KeyPair]]:
        pki = cls(scheme)
        keys = []
        for i in range(n):
            kp = scheme.keygen(seed + b"/replica/" + str(i).encode())
            pki.register(i, kp.public, scheme.prove_possession(kp))
            keys.append(kp)
        return pki, keys


# --------------------------------------------------------------------------
# batch verification helpers


def _verify_slice(args: tuple[str, list[tuple[bytes, bytes, bytes]]]) -> list[bool]:
    name, items = args
    scheme = get_scheme(name)
    return [scheme.verify_bytes(m, s, pk) for m, s, pk in items]


def verify_many(
    scheme: SignatureScheme,
    items: Sequence[tuple[bytes, bytes, bytes]],
    workers: int = 1,
    executor: ProcessPoolExecutor | None = None,
) -> list[bool]:
    """Verify ``(message, signature, public_key)`` triples.

    With ``workers > 1`` the input is cut into contiguous slices verified in
    separate processes; results come back in input order, identical to the
    sequential path.
    """
    if workers <= 1 or len(items) < 2:
        return [scheme.verify_bytes(m, s, pk) for m, s, pk in items]
    k = min(workers, len(items))
    bounds = [len(items) * j // k for j in range(k + 1)]
    slices = [(scheme.name, list(items[bounds[j] : bounds[j + 1]])) for j in range(k)]
    own = executor is None
    pool = executor or ProcessPoolExecutor(max_workers=k)
    try:
        out: list[bool] = []
        for part in pool.map(_verify_slice, slices):
            out.extend(part)
        return out
    finally:
        if own:
            pool.shutdown()


def combine_signers(parts: Iterable[AggregateSignature]) -> frozenset[int]:
    out: set[int] = set()
    for p in parts:
        out |= p.signers
    return frozenset(out)
