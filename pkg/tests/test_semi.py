import pytest

from arranger.core import AddResult, Batch, BatchTag, ClientKey, KeyDirectory, SystemConfig
from arranger.crypto.hashing import hash_batch
from arranger.crypto.signing import ReplicaDirectory, get_scheme
from arranger.logger import PostOutcome, PostRecord
from arranger.semi import DAC_BEHAVIORS, SEQUENCER_BEHAVIORS, ByzantineDacMember, DacMember, Sequencer
from arranger.simnet.matrix import byzantine_sequencer_scenario, evaluate, honest_minority_scenario, semi_scenario
from arranger.wire import SignReq


class Host:
    def __init__(self):
        self.now = 0
        self.sent = []
        self.posted = []
        self.events = []

    def record(self, actor, kind, **data):
        self.events.append((actor, kind, data))

    def note_tx(self, tx):
        pass

    def send(self, src, dst, msg):
        self.sent.append((src, dst, msg))

    def post(self, poster, ctag):
        self.posted.append((poster, ctag))


CFG = SystemConfig(3, 1, "semi", 2, 5, 4)
SCHEME = get_scheme("ed25519-list")
PKI, KEYS = ReplicaDirectory.generate(SCHEME, 3, b"semi-test")
USER = ClientKey.from_seed(b"semi-user")
CLIENTS = KeyDirectory([USER.sender])


def tx(i):
    return USER.sign(i, b"payload %d" % i)


def member(rid=0):
    return DacMember(rid, CFG, Host(), SCHEME, KEYS[rid])


def test_member_signs_matching_hash():
    m = member()
    b = Batch(0, (tx(0), tx(1)))
    resp = m.on_sign_request(b, 0, hash_batch(b))
    assert resp is not None and resp.signer == 0
    assert SCHEME.verify(BatchTag(0, hash_batch(b)), resp.sig, PKI.public_key(0))
    assert m.translate(0, hash_batch(b)) == b


def test_member_rehashes():
    m = member()
    b = Batch(0, (tx(0),))
    assert m.on_sign_request(b, 0, bytes(32)) is None
    assert m.on_sign_request(b, 1, hash_batch(b)) is None
    assert m.on_sign_request(Batch(0, ()), 0, bytes(32)) is None
    assert not m.host.events


def test_member_first_write_wins():
    m = member()
    b1, b2 = Batch(4, (tx(0),)), Batch(4, (tx(1),))
    assert m.on_sign_request(b1, 4, hash_batch(b1)) is not None
    assert m.on_sign_request(b2, 4, hash_batch(b2)) is None
    # repeating the first request is fine
    assert m.on_sign_request(b1, 4, hash_batch(b1)) is not None
    assert m.translate(4, hash_batch(b2)).value == "invalidHash"


@pytest.mark.parametrize("behavior", ["silent", "wrong-hash"])
def test_byzantine_member_sig_unusable(behavior):
    m = ByzantineDacMember(1, CFG, Host(), SCHEME, KEYS[1], behavior=behavior, coalition={1: KEYS[1]})
    b = Batch(0, (tx(0),))
    resp = m.on_sign_request(b, 0, hash_batch(b))
    assert resp is None or not SCHEME.verify(resp.tag, resp.sig, PKI.public_key(1))


def test_byzantine_member_unknown_behavior():
    with pytest.raises(ValueError):
        ByzantineDacMember(1, CFG, Host(), SCHEME, KEYS[1], behavior="loud", coalition={})


def test_sequencer_flow():
    host = Host()
    seq = Sequencer(CFG, host, SCHEME, PKI, CLIENTS)
    assert seq.add(tx(0)) is AddResult.ACK
    assert seq.add(tx(0)) is AddResult.DUPLICATE
    bad = tx(1).__class__(tx(1).sender, 1, b"other", tx(1).signature)
    assert seq.add(bad) is AddResult.INVALID
    assert not seq.timetopost(1)
    assert seq.timetopost(5)
    seq.on_tick(5)
    reqs = [m for _, _, m in host.sent if isinstance(m, SignReq)]
    assert len(reqs) == 3 and reqs[0].batch.txs == (tx(0),)
    # a request that arrives while the batch is out stays pending
    seq.add(tx(2))
    members = [DacMember(i, CFG, Host(), SCHEME, KEYS[i]) for i in range(3)]
    for m in members[:2]:
        seq.on_sign_response(m.on_sign_request(reqs[0].batch, 0, reqs[0].tag.hash))
    assert len(host.posted) == 1
    ctag = host.posted[0][1]
    assert ctag.signers == frozenset({0, 1})
    assert not seq.timetopost(100)
    seq.on_l1(PostRecord(6, PostOutcome.ACCEPTED, ctag, seq.name))
    assert [t.digest for t in seq.pending] == [tx(2).digest]
    assert seq.batch_id == 1 and not seq.inflight


def test_sequencer_ignores_bad_response():
    host = Host()
    seq = Sequencer(CFG, host, SCHEME, PKI, CLIENTS)
    seq.add(tx(0))
    seq.on_tick(10)
    req = host.sent[0][2]
    good = member(0).on_sign_request(req.batch, 0, req.tag.hash)
    forged = good.__class__(good.tag, 2, good.sig)  # signer 0's signature claimed by 2
    seq.on_sign_response(forged)
    seq.on_sign_response(good)
    seq.on_sign_response(good)
    assert not host.posted


@pytest.mark.parametrize("n", [3, 5])
@pytest.mark.parametrize("behavior", (None,) + DAC_BEHAVIORS)
@pytest.mark.parametrize("seed", range(3))
def test_semi_matrix(n, behavior, seed):
    row = evaluate(semi_scenario(n, behavior, seed))
    assert row["as_expected"], [v.line() for v in row["verdicts"].values()]


@pytest.mark.parametrize("behavior", SEQUENCER_BEHAVIORS)
@pytest.mark.parametrize("seed", range(3))
def test_byzantine_sequencer_cannot_break_dac(behavior, seed):
    row = evaluate(byzantine_sequencer_scenario(behavior, seed))
    assert row["dac_safety"] == "pass"
    assert row["as_expected"]


@pytest.mark.parametrize("seed", range(3))
def test_honest_minority_loses_termination(seed):
    row = evaluate(honest_minority_scenario(seed))
    assert row["termination"] == "fail"
    assert row["legality"] == row["unique_batch"] == "pass"
