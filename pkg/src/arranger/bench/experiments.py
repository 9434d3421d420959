"""Building-block micro-benchmarks: sizes and throughputs.

Every throughput figure is produced the same way: inputs are prepared in
memory first, then one operation is applied in a loop for ``duration``
seconds while cycling over the inputs. The rate is the number of units
processed divided by the elapsed time. Each figure is repeated
``repetitions`` times and reported as mean and standard deviation.
"""

from __future__ import annotations

import hashlib
import random
import statistics
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

from ..core import Batch, BatchTag, CertifiedBatchTag, TransactionRequest, encode_batch
from ..crypto.compression import CompressedBatch, Codec, get_codec
from ..crypto.hashing import hash_batch
from ..crypto.signing import KeyPair, SignatureScheme, get_scheme
from .translate_server import TranslateClient, TranslateServer, write_dictionary
from .workload import gen_workload

SUITES = ("size", "hash", "compress", "sign", "agg", "ver", "trans")


@dataclass(frozen=True)
class BenchConfig:
    batch_sizes: tuple[int, ...] = tuple(range(400, 4401, 400))
    batches_per_size: int = 10
    duration: float = 1.0
    repetitions: int = 10
    signer_counts: tuple[int, ...] = (8, 16, 32, 64, 128, 256)
    workers: tuple[int, ...] = (1, 2, 4, 8, 16)
    n_txs: int = 40_000
    pairs: int = 50  # hash-identifier pairs for sign/agg/ver
    tag_replicas: int = 4
    scheme: str = "bls"
    codec: str = "brotli"
    seed: int = 0

    def __post_init__(self) -> None:
        counts = (self.batches_per_size, self.repetitions, self.n_txs, self.pairs, self.tag_replicas)
        if min(counts) < 1 or self.duration <= 0:
            raise ValueError("benchmark counts and duration must be positive")
        if not self.batch_sizes or min(self.batch_sizes) < 1 or max(self.batch_sizes) > self.n_txs:
            raise ValueError("batch sizes must lie in 1..n_txs")
        if not self.signer_counts or min(self.signer_counts) < 1 or not self.workers or min(self.workers) < 1:
            raise ValueError("signer and worker counts must be positive")


@dataclass(frozen=True)
class Row:
    experiment: str
    parameter: int
    mean: float
    std: float
    unit: str
    samples: tuple[float, ...] = field(default=(), repr=False)

    @property
    def cv(self) -> float:
        return self.std / self.mean if self.mean else 0.0


@dataclass
class BenchReport:
    rows: list[Row] = field(default_factory=list)

    def extend(self, rows: Sequence[Row]) -> "BenchReport":
        self.rows.extend(rows)
        return self

    def series(self, experiment: str) -> dict[int, Row]:
        return {r.parameter: r for r in self.rows if r.experiment == experiment}

    @property
    def experiments(self) -> list[str]:
        return list(dict.fromkeys(r.experiment for r in self.rows))


def _row(experiment: str, parameter: int, samples: Sequence[float], unit: str) -> Row:
    samples = tuple(float(s) for s in samples)
    std = statistics.pstdev(samples) if len(samples) > 1 else 0.0
    return Row(experiment, parameter, statistics.fmean(samples), std, unit, samples)


def rate(step: Callable[[int], int], duration: float) -> float:
    """Units per second achieved by ``step(i)`` (which returns its unit count)
    called with i = 0, 1, 2, ... until ``duration`` seconds have elapsed."""
    done, i = 0, 0
    clock = time.perf_counter
    start = clock()
    end = start + duration
    while True:
        done += step(i)
        i += 1
        now = clock()
        if now >= end:
            return done / (now - start)


def _repeat(cfg: BenchConfig, step: Callable[[int], int]) -> list[float]:
    return [rate(step, cfg.duration) for _ in range(cfg.repetitions)]


# ---------------------------------------------------------------- inputs


def split_batches(txs: Sequence[TransactionRequest], size: int) -> list[Batch]:
    """Consecutive batches of exactly ``size`` requests (a short tail is dropped)."""
    return [Batch(j, tuple(txs[k : k + size])) for j, k in enumerate(range(0, len(txs) - size + 1, size))]


def _keys(scheme: SignatureScheme, count: int, seed: int) -> list[KeyPair]:
    return [scheme.keygen(hashlib.sha256(f"{seed}/bench-key/{i}".encode()).digest()) for i in range(count)]


def _pairs(cfg: BenchConfig) -> list[BatchTag]:
    rng = random.Random(f"{cfg.seed}/bench-pairs")
    return [BatchTag(i, rng.randbytes(32)) for i in range(cfg.pairs)]


# ---------------------------------------------------------------- experiments


def bench_size(cfg: BenchConfig) -> list[Row]:
    """Compressed batch bytes versus certified tag bytes per batch size."""
    txs = gen_workload(cfg.n_txs, cfg.seed)
    codec = get_codec(cfg.codec)
    scheme = get_scheme(cfg.scheme)
    keys = _keys(scheme, cfg.tag_replicas, cfg.seed)
    signers = range(cfg.tag_replicas // 2 + 1)
    rows = []
    for s in cfg.batch_sizes:
        rng = random.Random(f"{cfg.seed}/size/{s}")
        compressed, tags = [], []
        for j in range(cfg.batches_per_size):
            b = Batch(j, tuple(rng.sample(txs, s)))
            compressed.append(len(CompressedBatch(j, codec.compress(encode_batch(b))).encode()))
            tag = BatchTag(j, hash_batch(b))
            agg = scheme.aggregate({i: scheme.sign(tag, keys[i].secret) for i in signers})
            tags.append(len(CertifiedBatchTag(tag, agg.signature, agg.signers).encode(cfg.tag_replicas)))
        rows.append(_row("size.compressed", s, compressed, "bytes"))
        rows.append(_row("size.tag", s, tags, "bytes"))
    return rows


def bench_hash(cfg: BenchConfig) -> list[Row]:
    txs = gen_workload(cfg.n_txs, cfg.seed)
    rows = []
    for s in cfg.batch_sizes:
        batches = split_batches(txs, s)

        def step(i: int) -> int:
            hash_batch(batches[i % len(batches)])
            return s

        rows.append(_row("hash", s, _repeat(cfg, step), "tx/s"))
    return rows


def bench_compress(cfg: BenchConfig) -> list[Row]:
    txs = gen_workload(cfg.n_txs, cfg.seed)
    codec = get_codec(cfg.codec)
    rows = []
    for s in cfg.batch_sizes:
        blobs = [encode_batch(b) for b in split_batches(txs, s)]

        def step(i: int) -> int:
            codec.compress(blobs[i % len(blobs)])
            return s

        rows.append(_row("compress", s, _repeat(cfg, step), "tx/s"))
    return rows


def bench_sign(cfg: BenchConfig) -> list[Row]:
    scheme = get_scheme(cfg.scheme)
    sk = _keys(scheme, 1, cfg.seed)[0].secret
    msgs = [t.message() for t in _pairs(cfg)]

    def step(i: int) -> int:
        scheme.sign_bytes(msgs[i % len(msgs)], sk)
        return 1

    return [_row("sign", 1, _repeat(cfg, step), "sig/s")]


def bench_agg(cfg: BenchConfig) -> list[Row]:
    """Aggregations per second of N signatures over the same pair."""
    scheme = get_scheme(cfg.scheme)
    keys = _keys(scheme, max(cfg.signer_counts), cfg.seed)
    msgs = [t.message() for t in _pairs(cfg)]
    # sigs[p][i]: signer i over pair p
    sigs = [[scheme.sign_bytes(m, k.secret) for k in keys] for m in msgs]
    rows = []
    for n in cfg.signer_counts:
        per_pair = [row[:n] for row in sigs]

        def step(i: int) -> int:
            scheme.combine(per_pair[i % len(per_pair)])
            return 1

        rows.append(_row("agg", n, _repeat(cfg, step), "agg/s"))
    return rows


def _verify_window(scheme_name: str, items: list[tuple[bytes, bytes, bytes]], start: float, end: float) -> int:
    scheme = get_scheme(scheme_name)
    while time.time() < start:
        time.sleep(0.001)
    done, i = 0, 0
    while True:
        m, s, pk = items[i % len(items)]
        if not scheme.verify_bytes(m, s, pk):
            raise AssertionError("benchmark signature failed to verify")
        i += 1
        # only verifications that finish inside the window count
        if time.time() > end:
            return done
        done += 1


def _warm(_: int) -> int:
    return 0


def verify_rate(cfg: BenchConfig, items: list[tuple[bytes, bytes, bytes]], workers: int, pool) -> float:
    """Signatures verified per second by ``workers`` processes over disjoint slices,
    all counting inside one shared wall-clock window."""
    bounds = [len(items) * j // workers for j in range(workers + 1)]
    slices = [items[bounds[j] : bounds[j + 1]] or items for j in range(workers)]
    start = time.time() + 0.2
    end = start + cfg.duration
    futs = [pool.submit(_verify_window, cfg.scheme, sl, start, end) for sl in slices]
    return sum(f.result() for f in futs) / cfg.duration


def bench_ver(cfg: BenchConfig) -> list[Row]:
    scheme = get_scheme(cfg.scheme)
    kp = _keys(scheme, 1, cfg.seed)[0]
    items = [(m, scheme.sign_bytes(m, kp.secret), kp.public) for m in (t.message() for t in _pairs(cfg))]
    rows = []
    for k in cfg.workers:
        with ProcessPoolExecutor(max_workers=k) as pool:
            list(pool.map(_warm, range(4 * k)))
            samples = [verify_rate(cfg, items, k, pool) for _ in range(cfg.repetitions)]
        rows.append(_row("ver", k, samples, "sig/s"))
    return rows


def translate_table(
    txs: Sequence[TransactionRequest], size: int, codec: Codec
) -> list[tuple[int, bytes, bytes]]:
    return [(b.id, hash_batch(b), codec.compress(encode_batch(b))) for b in split_batches(txs, size)]


def bench_trans(cfg: BenchConfig) -> list[Row]:
    """Sequential translate requests against a local server; rate in tx/s."""
    txs = gen_workload(cfg.n_txs, cfg.seed)
    codec = get_codec(cfg.codec)
    rows = []
    with tempfile.TemporaryDirectory(prefix="arranger-trans-") as tmp:
        for s in cfg.batch_sizes:
            entries = translate_table(txs, s, codec)
            hp, cp = Path(tmp, f"hashes-{s}.txt"), Path(tmp, f"compressed-{s}.bin")
            write_dictionary(hp, cp, entries)
            keys = [(bid, d) for bid, d, _ in entries]
            with TranslateServer.from_files(hp, cp) as server, TranslateClient(server.address) as client:

                def step(i: int) -> int:
                    if client.translate(*keys[i % len(keys)]) is None:
                        raise AssertionError("translation server lost a batch")
                    return s

                rows.append(_row("trans", s, _repeat(cfg, step), "tx/s"))
    return rows


RUNNERS: dict[str, Callable[[BenchConfig], list[Row]]] = {
    "size": bench_size,
    "hash": bench_hash,
    "compress": bench_compress,
    "sign": bench_sign,
    "agg": bench_agg,
    "ver": bench_ver,
    "trans": bench_trans,
}


def run_suite(suite: str, cfg: BenchConfig | None = None) -> BenchReport:
    cfg = cfg or BenchConfig()
    names = SUITES if suite == "all" else (suite,)
    report = BenchReport()
    for name in names:
        if name not in RUNNERS:
            raise ValueError(f"unknown suite {name!r}; choose from all, {', '.join(SUITES)}")
        report.extend(RUNNERS[name](cfg))
    return report
