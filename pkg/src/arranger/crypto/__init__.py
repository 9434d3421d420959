from .compression import (
    Codec,
    CompressedBatch,
    CorruptStream,
    compress,
    decompress,
    default_codec,
    get_codec,
)
from .hashing import EmptyInput, hash_batch, leaf_hash, merkle_root, node_hash
from .signing import (
    AggregateSignature,
    BlsScheme,
    Ed25519ListScheme,
    EmptySignerSet,
    KeyPair,
    ReplicaDirectory,
    RogueKey,
    SignatureScheme,
    bls_available,
    get_scheme,
    verify_many,
)

__all__ = [
    "AggregateSignature",
    "BlsScheme",
    "Codec",
    "CompressedBatch",
    "CorruptStream",
    "Ed25519ListScheme",
    "EmptyInput",
    "EmptySignerSet",
    "KeyPair",
    "ReplicaDirectory",
    "RogueKey",
    "SignatureScheme",
    "bls_available",
    "compress",
    "decompress",
    "default_codec",
    "get_codec",
    "get_scheme",
    "hash_batch",
    "leaf_hash",
    "merkle_root",
    "node_hash",
    "verify_many",
]
