"""Synthetic request workloads for the building-block benchmarks.

Requests look like contract calls: a 4-byte selector followed by 32-byte
words. Some words are small left-padded integers and some are random. That
gives realistic compressibility without a recorded trace. Payload sizes
follow a clipped log-normal distribution.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from ..core import ClientKey, TransactionRequest


@dataclass(frozen=True)
class SizeDistribution:
    median: float = 260.0  # bytes
    sigma: float = 0.6  # std-dev of log(size)
    low: int = 36
    high: int = 8192

    @property
    def mu(self) -> float:
        return float(np.log(self.median))


DEFAULT_SIZES = SizeDistribution()


def sample_sizes(n: int, seed: int, dist: SizeDistribution = DEFAULT_SIZES) -> np.ndarray:
    rng = np.random.default_rng([seed, 0x5153])
    raw = rng.lognormal(dist.mu, dist.sigma, size=n)
    return np.clip(np.rint(raw), dist.low, dist.high).astype(np.int64)


def _payload(rng: np.random.Generator, size: int, selectors: np.ndarray) -> bytes:
    words = -(-max(size - 4, 0) // 32)
    body = rng.integers(0, 256, size=(words, 32), dtype=np.uint8)
    # amounts, flags and offsets: a few low-order bytes in an otherwise zero word
    width = np.where(rng.random(words) < 0.55, rng.integers(1, 9, size=words), 32)
    body[np.arange(32)[None, :] < (32 - width)[:, None]] = 0
    sel = selectors[rng.integers(0, len(selectors))].tobytes()
    return (sel + body.tobytes())[:size]


@lru_cache(maxsize=8)
def _workload(n_txs: int, seed: int, dist: SizeDistribution, senders: int) -> tuple[TransactionRequest, ...]:
    sizes = sample_sizes(n_txs, seed, dist)
    rng = np.random.default_rng([seed, 0x7478])
    selectors = rng.integers(0, 256, size=(24, 4), dtype=np.uint8)
    keys = [
        ClientKey.from_seed(hashlib.sha256(f"{seed}/bench-sender/{k}".encode()).digest()) for k in range(senders)
    ]
    who = rng.integers(0, senders, size=n_txs)
    nonces = [0] * senders
    out = []
    for i in range(n_txs):
        k = int(who[i])
        out.append(keys[k].sign(nonces[k], _payload(rng, int(sizes[i]), selectors)))
        nonces[k] += 1
    return tuple(out)


def gen_workload(
    n_txs: int, seed: int = 0, dist: SizeDistribution = DEFAULT_SIZES, senders: int = 500
) -> list[TransactionRequest]:
    """Deterministic list of ``n_txs`` distinct signed requests."""
    if n_txs <= 0:
        raise ValueError("n_txs must be positive")
    return list(_workload(n_txs, seed, dist, senders))
