"""Merkle-root batch hashing with leaf/node domain separation."""

from __future__ import annotations

from hashlib import sha256
from typing import Sequence

from ..core import Batch

LEAF_TAG = b"\x00"
NODE_TAG = b"\x01"


class EmptyInput(ValueError):
    pass


def leaf_hash(leaf: bytes) -> bytes:
    return sha256(LEAF_TAG + leaf).digest()


def node_hash(left: bytes, right: bytes) -> bytes:
    return sha256(NODE_TAG + left + right).digest()


def merkle_root(leaves: Sequence[bytes]) -> bytes:
    """Root of a binary Merkle tree; an odd level duplicates its last node."""
    if not leaves:
        raise EmptyInput("merkle_root needs at least one leaf")
    level = [sha256(LEAF_TAG + x).digest() for x in leaves]
    while len(level) > 1:
        if len(level) & 1:
            level.append(level[-1])
        level = [
            sha256(NODE_TAG + level[i] + level[i + 1]).digest()
            for i in range(0, len(level), 2)
        ]
    return level[0]


def hash_batch(b: Batch) -> bytes:
    """Merkle root over the canonical encodings of the batch's requests.

    The batch id is not part of the digest; it is bound by the signed tag.
    """
    if not b.txs:
        raise EmptyInput("cannot hash an empty batch")
    return merkle_root([t.encoding for t in b.txs])
