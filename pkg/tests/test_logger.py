import csv
import io
import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from arranger.core import BatchTag, CertifiedBatchTag
from arranger.crypto.signing import ReplicaDirectory, get_scheme
from arranger.logger import L1Chain, Logger, NotFound, PostOutcome

N, F = 4, 1


@pytest.fixture(scope="module")
def setup():
    scheme = get_scheme("ed25519-list")
    pki, keys = ReplicaDirectory.generate(scheme, N, b"logger-test")
    return scheme, pki, keys


def certify(scheme, keys, tag, signers):
    agg = scheme.aggregate({i: scheme.sign(tag, keys[i].secret) for i in signers})
    return CertifiedBatchTag(tag, agg.signature, agg.signers)


def tag(id, fill=1):
    return BatchTag(id, bytes([fill]) * 32)


def test_accepts_f_plus_one(setup):
    scheme, pki, keys = setup
    lg = Logger(pki, F, scheme)
    ct = certify(scheme, keys, tag(0), [0, 2])
    assert lg.post(ct) is PostOutcome.ACCEPTED
    assert lg.get(0) == ct


def test_too_few_signers(setup):
    scheme, pki, keys = setup
    lg = Logger(pki, F, scheme)
    assert lg.post(certify(scheme, keys, tag(0), [1])) is PostOutcome.TOO_FEW_SIGNERS
    with pytest.raises(NotFound):
        lg.get(0)


def test_bad_signature(setup):
    scheme, pki, keys = setup
    lg = Logger(pki, F, scheme)
    good = certify(scheme, keys, tag(0), [0, 1])
    # signatures over a different digest
    other = certify(scheme, keys, tag(0, fill=2), [0, 1])
    forged = CertifiedBatchTag(good.tag, other.combined_signature, good.signers)
    assert lg.post(forged) is PostOutcome.BAD_SIGNATURE
    relabelled = CertifiedBatchTag(good.tag, good.combined_signature, frozenset({2, 3}))
    assert lg.post(relabelled) is PostOutcome.BAD_SIGNATURE
    assert not lg.accepted


def test_first_tag_per_id_wins(setup):
    scheme, pki, keys = setup
    lg = Logger(pki, F, scheme)
    first = certify(scheme, keys, tag(5), [0, 1])
    assert lg.post(first).accepted
    assert lg.post(certify(scheme, keys, tag(5, fill=9), [2, 3])) is PostOutcome.DUPLICATE_ID
    assert lg.post(first) is PostOutcome.DUPLICATE_ID
    assert lg.get(5) == first


def test_max_contiguous(setup):
    scheme, pki, keys = setup
    lg = Logger(pki, F, scheme)
    assert lg.max_contiguous() == 0
    for id, want in [(1, 0), (0, 2), (3, 2), (2, 4)]:
        lg.post(certify(scheme, keys, tag(id), [0, 1]))
        assert lg.max_contiguous() == want


def test_export_csv(setup):
    scheme, pki, keys = setup
    lg = Logger(pki, F, scheme)
    lg.post(certify(scheme, keys, tag(0), [0, 3]), tick=7, poster="r0")
    lg.post(certify(scheme, keys, tag(0), [1]), tick=9, poster="r1")
    out = io.StringIO()
    lg.export_csv(out)
    rows = list(csv.DictReader(io.StringIO(out.getvalue())))
    assert [r["outcome"] for r in rows] == ["Accepted", "TooFewSigners"]
    assert rows[0]["signers"] == "90"  # bits 0 and 3, MSB first
    assert rows[1]["tick"] == "9" and rows[1]["poster"] == "r1"


@given(st.lists(st.integers(0, 5), min_size=1, max_size=25), st.integers(0, 2**32), st.integers(1, 6))
def test_chain_never_drops(ids, seed, delay):
    scheme = get_scheme("ed25519-list")
    pki, keys = _cached(scheme)
    lg = Logger(pki, F, scheme)
    seen = []
    chain = L1Chain(lg, random.Random(seed), max_delay=delay, on_outcome=seen.append)
    dues = [chain.submit(certify(scheme, keys, tag(i), [0, 1]), now=3, poster="p") for i in ids]
    assert all(4 <= d <= 3 + delay for d in dues)
    processed = []
    for now in range(3, 3 + delay + 1):
        processed += chain.process(now)
    assert chain.pending() == 0
    assert len(processed) == len(ids) == len(lg.history) == len(seen)
    assert sorted(r.tag.id for r in processed) == sorted(ids)
    assert sum(r.outcome.accepted for r in processed) == len(set(ids))
    ticks = [r.tick for r in processed]
    assert ticks == sorted(ticks)


_KEYS = {}


def _cached(scheme):
    if "k" not in _KEYS:
        _KEYS["k"] = ReplicaDirectory.generate(scheme, N, b"logger-test")
    return _KEYS["k"]
