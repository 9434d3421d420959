"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -v``; the summary section
at the end of the pytest output lists every criterion line.
"""

import hashlib
import json
import os
import statistics
import subprocess
import sys
from collections import Counter
from dataclasses import replace
from itertools import combinations
from pathlib import Path

import pytest

from arranger.bench import BenchConfig
from arranger.bench.experiments import bench_agg, bench_compress, bench_hash, bench_size, bench_trans, bench_ver
from arranger.core import BatchTag
from arranger.crypto.hashing import merkle_root
from arranger.crypto.signing import AggregateSignature, ReplicaDirectory, bls_available, get_scheme
from arranger.full import FULL_BEHAVIORS
from arranger.sbc.predicates import SBC_PREDICATES
from arranger.simnet.checkers import ARRANGER_PROPERTIES, check_all
from arranger.simnet.matrix import (
    byzantine_sequencer_scenario,
    full_matrix,
    full_scenario,
    honest_minority_scenario,
    sabotage_matrix,
    sabotage_scenario,
    semi_matrix,
    semi_scenario,
    sequencer_matrix,
)
from arranger.simnet.runner import run
from arranger.simnet.scenario import Timing, Workload, dumps, load

pytestmark = pytest.mark.acceptance

SEEDS = range(100)
SCENARIO_DIR = Path(__file__).parent.parent / "scenarios"


def outcomes(sc) -> dict[str, bool]:
    return {k: v.ok for k, v in check_all(run(sc).transcript).items()}


def tally(rows, want) -> tuple[int, list]:
    """Count rows meeting ``want(row)``; keep a few offenders for the report."""
    bad = [name for name, row in rows if not want(row)]
    return len(rows) - len(bad), bad[:5]


@pytest.fixture(scope="module")
def full_runs():
    return [(f"{sc.name}/s{sc.seed}", outcomes(sc)) for sc in full_matrix(SEEDS)]


@pytest.fixture(scope="module")
def semi_runs():
    return {
        "majority": [(f"{sc.name}/s{sc.seed}", outcomes(sc)) for sc in semi_matrix(SEEDS)],
        "minority": [(f"minority/s{s}", outcomes(honest_minority_scenario(s))) for s in SEEDS],
        "sequencer": [(f"{sc.name}/s{sc.seed}", outcomes(sc)) for sc in sequencer_matrix(SEEDS)],
    }


# ---------------------------------------------------------------- 1


def test_criterion_1_full_mode_properties(full_runs, acceptance):
    ok, bad = tally(full_runs, lambda r: all(r[p] for p in ARRANGER_PROPERTIES))
    per_n = Counter(name.split("-")[1] for name, _ in full_runs)
    detail = f"{ok}/{len(full_runs)} runs, n in {dict(per_n)}, {len(FULL_BEHAVIORS)} behaviors + none"
    assert acceptance("1", ok == len(full_runs) and len(full_runs) >= 2100, detail + (f", failing {bad}" if bad else ""))


# ---------------------------------------------------------------- 2


def test_criterion_2_semi_mode_properties(semi_runs, acceptance):
    maj_ok, maj_bad = tally(semi_runs["majority"], lambda r: all(r[p] for p in ARRANGER_PROPERTIES))
    exact = lambda r: not r["termination"] and all(r[p] for p in ARRANGER_PROPERTIES if p != "termination")
    min_ok, min_bad = tally(semi_runs["minority"], exact)
    seq_ok, seq_bad = tally(semi_runs["sequencer"], lambda r: r["dac_safety"] and not r["termination"])
    total = sum(len(v) for v in semi_runs.values())
    ok = maj_ok + min_ok + seq_ok == total
    detail = (
        f"honest majority {maj_ok}/{len(semi_runs['majority'])} all pass; "
        f"honest minority {min_ok}/{len(semi_runs['minority'])} fail exactly termination; "
        f"byzantine sequencer {seq_ok}/{len(semi_runs['sequencer'])} keep dac_safety and fail termination"
    )
    bad = maj_bad + min_bad + seq_bad
    assert acceptance("2", ok, detail + (f", offenders {bad}" if bad else ""))


# ---------------------------------------------------------------- 3


def test_criterion_3_sbc_properties(full_runs, acceptance):
    # (i) every reference-protocol trace, stable and unstable networks
    pre_gst = [
        (f"{sc.name}-gst/s{sc.seed}", outcomes(sc))
        for n in (4, 7)
        for b in (None, "silent", "equivocate")
        for sc in (full_scenario(n, b, s, schedule=Timing(gst=120, pre_gst_mean=15)) for s in SEEDS)
    ]
    traces = full_runs + pre_gst
    pred_ok, pred_bad = tally(traces, lambda r: all(r[p] for p in SBC_PREDICATES))

    # (ii) oracle vs protocol on the same scenario and seed
    props = list(SBC_PREDICATES) + list(ARRANGER_PROPERTIES)
    diff_total, diff_bad = 0, []
    for n in (4, 7):
        for b in (None,) + FULL_BEHAVIORS:
            for s in range(20):
                sc = full_scenario(n, b, s)
                proto = outcomes(sc)
                oracle = outcomes(replace(sc, sbc="oracle"))
                diff_total += 1
                if any(proto[p] != oracle[p] for p in props):
                    diff_bad.append(f"{sc.name}/s{s}")

    # (iii) every planted bug is caught by its intended checker alone
    sab_total, sab_bad = 0, []
    for sc in sabotage_matrix(range(10)):
        res = outcomes(sc)
        sab_total += 1
        if any(res[p] != (want == "pass") for p, want in sc.expect.items()):
            sab_bad.append(f"{sc.name}/s{sc.seed}")

    ok = pred_ok == len(traces) and not diff_bad and not sab_bad
    detail = (
        f"predicates hold on {pred_ok}/{len(traces)} protocol traces; "
        f"differential identical on {diff_total - len(diff_bad)}/{diff_total}; "
        f"sabotage caught as intended {sab_total - len(sab_bad)}/{sab_total}"
    )
    bad = pred_bad + diff_bad[:5] + sab_bad[:5]
    assert acceptance("3", ok, detail + (f", offenders {bad}" if bad else ""))


# ---------------------------------------------------------------- 4


def test_criterion_4_exactly_once(full_runs, semi_runs, acceptance):
    # duplicates on purpose: clients resubmit after inclusion, plus forged requests
    busy = Workload(clients=4, txs_per_client=3, spread=30, invalid=2, resubmit=2)
    stressed = [
        (f"{sc.name}-resubmit/s{sc.seed}", outcomes(replace(sc, workload=busy)))
        for s in SEEDS
        for sc in (full_scenario(4, None, s), full_scenario(7, "censor-element", s), semi_scenario(5, None, s))
    ]
    runs = full_runs + [r for v in semi_runs.values() for r in v] + stressed
    ok, bad = tally(runs, lambda r: r["exactly_once"])
    detail = f"{ok}/{len(runs)} runs execute each request at most once and every acknowledged one under honest quorum"
    assert acceptance("4", ok == len(runs), detail + (f", offenders {bad}" if bad else ""))


# ---------------------------------------------------------------- 5 and 6

BENCH = BenchConfig(duration=0.25, repetitions=10, pairs=20)


def test_criterion_5_tag_size(acceptance):
    rows = bench_size(BENCH)
    tags = [r for r in rows if r.experiment == "size.tag"]
    comp = {r.parameter: r for r in rows if r.experiment == "size.compressed"}
    all_tag = [x for r in tags for x in r.samples]
    spread = statistics.pstdev(all_tag)
    top = max(comp)
    ratio = comp[top].mean / statistics.fmean(all_tag)
    detail = (
        f"tag {all_tag[0]:.0f} B, std {spread:.3g} B over {tags[0].parameter}..{tags[-1].parameter} txs; "
        f"compressed {comp[top].mean:.0f} B at {top} txs, ratio {ratio:.0f}x (need >= 100)"
    )
    assert acceptance("5", spread < 1e-9 and ratio >= 100, detail)


@pytest.fixture(scope="module")
def throughput():
    return {
        "hash": {r.parameter: r for r in bench_hash(BENCH)},
        "compress": {r.parameter: r for r in bench_compress(BENCH)},
        "trans": {r.parameter: r for r in bench_trans(BENCH)},
    }


def test_criterion_6a_hash_beats_compression(throughput, acceptance):
    h, c = throughput["hash"], throughput["compress"]
    worst = min(h[s].mean / c[s].mean for s in h)
    ok = all(h[s].mean > c[s].mean for s in h)
    assert acceptance("6a", ok, f"hash/compress throughput ratio >= {worst:.2f} across {len(h)} batch sizes")


def test_criterion_6b_aggregation_decreasing(acceptance):
    rows = bench_agg(BENCH)
    means = [r.mean for r in sorted(rows, key=lambda r: r.parameter)]
    ok = all(a > b for a, b in zip(means, means[1:]))
    pts = ", ".join(f"{r.parameter}:{r.mean:.0f}" for r in rows)
    assert acceptance("6b", ok, f"agg/s by signer count {pts}")


def test_criterion_6c_verification_scaling(acceptance):
    rows = {r.parameter: r for r in bench_ver(BENCH)}
    gain = rows[16].mean / rows[1].mean
    pts = ", ".join(f"{k}:{r.mean:.0f}" for k, r in sorted(rows.items()))
    detail = f"sig/s by workers {pts}; 16-vs-1 gain {gain:.2f}x (need >= 4) on {os.cpu_count()} CPU(s)"
    assert acceptance("6c", gain >= 4, detail)


def test_criterion_6d_translation_vs_hashing(throughput, acceptance):
    t, h = throughput["trans"], throughput["hash"]
    peak_t = max(r.mean for r in t.values())
    peak_h = max(r.mean for r in h.values())
    ratio = peak_t / peak_h
    low = min(t[s].mean / h[s].mean for s in t)
    detail = f"peak translate {peak_t:.3g} tx/s vs peak hash {peak_h:.3g} tx/s = {ratio:.1f}x (need >= 10); per-size min {low:.1f}x"
    assert acceptance("6d", ratio >= 10, detail)


# ---------------------------------------------------------------- 7


def spot_checks():
    shipped = [load(p) for p in sorted(SCENARIO_DIR.glob("*.yaml"))]
    extra = [
        full_scenario(4, "equivocate", 11),
        full_scenario(7, "spam-posts", 12),
        full_scenario(10, "silent", 13),
        full_scenario(4, None, 14, schedule=Timing(gst=120)),
        full_scenario(7, "censor-element", 15, sbc="oracle"),
        semi_scenario(3, "wrong-translate", 16),
        semi_scenario(7, "equivocate", 17),
        honest_minority_scenario(18),
        byzantine_sequencer_scenario("censor-element", 19),
        sabotage_scenario("sbc-censor", 20, 7),
        sabotage_scenario("nondeterministic-order", 21),
    ]
    return shipped + extra


_DIGEST_SCRIPT = """
import hashlib, json, sys
from arranger.simnet.runner import run
from arranger.simnet.scenario import loads
for text in json.load(sys.stdin):
    print(hashlib.sha256(run(loads(text)).transcript.dumps().encode()).hexdigest())
"""


def test_criterion_7_determinism(acceptance):
    scs = spot_checks()
    first = [run(sc).transcript.dumps() for sc in scs]
    again = [run(sc).transcript.dumps() for sc in scs]
    same = sum(a == b for a, b in zip(first, again))
    # a fresh interpreter with a different string-hash seed must agree too
    env = {**os.environ, "PYTHONHASHSEED": "12345"}
    proc = subprocess.run(
        [sys.executable, "-c", _DIGEST_SCRIPT],
        input=json.dumps([dumps(sc) for sc in scs]),
        capture_output=True,
        text=True,
        env=env,
        check=True,
    )
    fresh = proc.stdout.split()
    cross = sum(hashlib.sha256(a.encode()).hexdigest() == d for a, d in zip(first, fresh))
    ok = len(scs) == 20 and same == cross == 20
    assert acceptance("7", ok, f"{same}/{len(scs)} identical in-process, {cross}/{len(scs)} identical in a fresh interpreter")


# ---------------------------------------------------------------- 8

# Frozen from bare hashlib: leaf = sha256(00 || x), node = sha256(01 || l || r).
ROOT_4 = "e872bf22aae12fbbdc419c9a6b42ee30943539d08c5de1297abc4f847d3c1644"
ROOT_3 = "14c11b1cf36bf23714c2472421ca8d0d51846117157799714f1be9afb9821cf6"


def _subsets_sound_and_complete(scheme_name: str) -> tuple[int, int]:
    scheme = get_scheme(scheme_name)
    tag, other = BatchTag(8, bytes(range(32))), BatchTag(8, bytes(32))
    checked = failures = 0
    for n in range(1, 8):
        pki, keys = ReplicaDirectory.generate(scheme, n, f"acceptance-{n}".encode())
        sigs = {i: scheme.sign(tag, keys[i].secret) for i in range(n)}
        for k in range(1, n + 1):
            for sub in combinations(range(n), k):
                agg = scheme.aggregate({i: sigs[i] for i in sub})
                good = scheme.verify_aggregate(tag, agg, pki)
                bad = scheme.verify_aggregate(other, agg, pki)
                if k < n:
                    extra = next(j for j in range(n) if j not in sub)
                    bad |= scheme.verify_aggregate(tag, AggregateSignature(agg.signature, agg.signers | {extra}), pki)
                if k > 1:
                    bad |= scheme.verify_aggregate(tag, AggregateSignature(agg.signature, agg.signers - {sub[0]}), pki)
                checked += 1
                failures += (not good) or bad
    return checked, failures


def test_criterion_8_crypto_oracles(acceptance):
    leaves = [b"alpha", b"bravo", b"charlie", b"delta"]
    h = lambda b: hashlib.sha256(b).digest()
    a, b, c, d = (h(b"\x00" + x) for x in leaves)
    hand_4 = h(b"\x01" + h(b"\x01" + a + b) + h(b"\x01" + c + d))
    hand_3 = h(b"\x01" + h(b"\x01" + a + b) + h(b"\x01" + c + c))
    roots_ok = (
        merkle_root(leaves) == hand_4
        and merkle_root(leaves[:3]) == hand_3
        and hand_4.hex() == ROOT_4
        and hand_3.hex() == ROOT_3
    )
    schemes = ["ed25519-list"] + (["bls"] if bls_available() else [])
    results = {s: _subsets_sound_and_complete(s) for s in schemes}
    subsets_ok = all(fail == 0 for _, fail in results.values()) and "bls" in results
    detail = "merkle 4- and 3-leaf roots match; " + "; ".join(
        f"{s}: {n - fail}/{n} subsets complete and sound" for s, (n, fail) in results.items()
    )
    assert acceptance("8", roots_ok and subsets_ok, detail)
