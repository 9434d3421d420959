import copy
import random
from pathlib import Path

import pytest
from hypothesis import given
from hypothesis import strategies as st

from arranger.core import ClientKey
from arranger.simnet.checkers import ARRANGER_PROPERTIES, check, check_all
from arranger.simnet.matrix import evaluate, full_scenario, sabotage_scenario, semi_scenario, sweep, write_report
from arranger.simnet.network import Network, Schedule
from arranger.simnet.runner import run
from arranger.simnet.scenario import Scenario, ScenarioInvalid, dumps, load, loads
from arranger.transcript import Transcript, TranscriptError

SCENARIOS = sorted((Path(__file__).parent.parent / "scenarios").glob("*.yaml"))


# ---------------------------------------------------------------- scenario files


def test_defaults():
    sc = loads("{}")
    assert sc == Scenario()
    assert sc.config.certified == 2


def test_yaml_roundtrip():
    sc = loads(
        """
        mode: semi
        n: 5
        f: 2
        faults: {byzantine: {1: silent, 3: wrong-hash}}
        workload: {clients: 2}
        expect: {termination: PASS}
        """
    )
    assert sc.faults.byzantine == {1: "silent", 3: "wrong-hash"}
    assert sc.expect == {"termination": "pass"}
    assert loads(dumps(sc)) == sc


@pytest.mark.parametrize(
    "text",
    [
        "nodes: 4",
        "schedule: {gts: 3}",
        "faults: {byzantine: {0: silent}, typo: 1}",
        "n: 3\nf: 1",
        "mode: semi\nn: 4\nf: 2",
        "sbc: paxos",
        "faults: {byzantine: {9: silent}}",
        "faults: {byzantine: {0: spam}}",
        "faults: {byzantine: {0: silent, 1: silent}}",
        "faults: {sequencer: silent}",
        "faults: {sabotage: sbc-split}",
        "faults: {sabotage: gremlins}\nsbc: oracle",
        "mode: semi\nn: 3\nf: 1\nfaults: {sabotage: forget-batch}",
        "client_strategy: flood",
        "workload: {clients: 0}",
        "budget: 0",
        "n: [1",
        "faults: {byzantine: [silent]}",
    ],
)
def test_invalid(text):
    with pytest.raises(ScenarioInvalid):
        loads(text)


def test_load_names_after_file(tmp_path):
    p = tmp_path / "my-run.yaml"
    p.write_text("n: 4\n")
    assert load(p).name == "my-run"


@pytest.mark.parametrize("path", SCENARIOS, ids=[p.stem for p in SCENARIOS])
@pytest.mark.parametrize("seed", [None, 101])
def test_shipped_scenarios(path, seed):
    sc = load(path)
    assert sc.expect
    row = evaluate(sc, seed)
    assert row["as_expected"], [v.line() for v in row["verdicts"].values()]


# ---------------------------------------------------------------- network


@given(st.integers(0, 2**32), st.integers(0, 200), st.integers(1, 10), st.floats(1, 40), st.integers(0, 400))
def test_delay_bounds(seed, gst, delta, mean, now):
    sch = Schedule(seed, gst, delta, mean)
    d = sch.delay(now, random.Random(seed))
    assert d >= 1
    if now >= gst:
        assert d <= delta
    else:
        assert now + d <= gst + delta


def test_network_delivers_everything():
    net = Network(Schedule(3, gst=20), random.Random(3))
    for k in range(50):
        net.send(k % 30, "a", "b", k)
    got = [m for now in range(40) for _, _, m in net.due(now)]
    assert sorted(got) == list(range(50))
    assert len(net) == 0


# ---------------------------------------------------------------- runs and transcripts


def test_determinism():
    for sc in [full_scenario(4, "equivocate", 3), semi_scenario(5, "silent", 2), sabotage_scenario("sbc-split", 1)]:
        assert run(sc).transcript.dumps() == run(sc).transcript.dumps()


def test_seed_changes_run():
    sc = full_scenario(4, None, 0)
    assert run(sc, 1).transcript.dumps() != run(sc, 2).transcript.dumps()


def test_wire_check_same_transcript():
    sc = full_scenario(4, "wrong-hash", 4)
    plain = run(sc).transcript.dumps()
    assert run(sc.__class__(**{**sc.__dict__, "wire_check": True})).transcript.dumps() == plain


def test_transcript_roundtrip(tmp_path):
    tr = run(full_scenario(4, None, 0)).transcript
    p = tmp_path / "t.jsonl"
    tr.dump(p)
    back = Transcript.load(p)
    assert back.dumps() == tr.dumps()
    assert {k: v.ok for k, v in check_all(back).items()} == {k: v.ok for k, v in check_all(tr).items()}


@pytest.mark.parametrize("text", ["", '{"format": "other"}', '{"format": "arranger-transcript", "version": 99}'])
def test_transcript_rejects(text):
    with pytest.raises(TranscriptError):
        Transcript.loads(text)


def test_unknown_property():
    tr = run(full_scenario(4, None, 0)).transcript
    with pytest.raises(ValueError):
        check(tr, "liveness")


def test_sweep_report():
    import io

    rows = sweep([full_scenario(4, None, 0)], seeds=[0, 1])
    out = io.StringIO()
    write_report(rows, out)
    lines = out.getvalue().splitlines()
    assert len(lines) == 3 and lines[0].startswith("scenario,seed,ticks")
    assert all(r["as_expected"] for r in rows)


# ---------------------------------------------------------------- checker soundness
# Each mutation of an honest transcript plants one violation.


@pytest.fixture(scope="module")
def honest():
    tr = run(full_scenario(4, None, 0)).transcript
    assert all(v.ok for v in check_all(tr).values())
    return tr


def mutate(tr, fn):
    t = copy.deepcopy(tr)
    fn(t)
    return t


def first(tr, kind):
    return next(tr.of(kind))


def test_accepted_tag_without_batch(honest):
    def fn(t):
        first(t, "l1")["hash"] = "00" * 32

    assert not check(mutate(honest, fn), "legality")


def test_batch_claim_must_rehash(honest):
    def fn(t):
        key = (first(t, "l1")["id"], first(t, "l1")["hash"])
        for ev in t.of("batch"):
            if (ev["id"], ev["hash"]) == key:
                ev["digests"] = list(reversed(ev["digests"])) + ev["digests"][:1]

    assert not check(mutate(honest, fn), "legality")


def test_repeat_across_batches(honest):
    def fn(t):
        acc = [e for e in t.of("l1") if e["outcome"] == "Accepted"]
        a, b = acc[0], acc[1]
        # replay batch a's request under b's id: a re-hashing claim, accepted twice
        for ev in list(t.of("batch")):
            if (ev["id"], ev["hash"]) == (a["id"], a["hash"]):
                t.events.append({**ev, "id": b["id"]})
                t.events.append({**b, "hash": a["hash"]})
                break
        t.events.remove(b)

    v = check(mutate(honest, fn), "legality")
    assert not v and "in batches" in v.detail


def test_conflicting_certificates(honest):
    def fn(t):
        ev = first(t, "l1")
        t.events.append({**ev, "hash": "11" * 32})

    assert not check(mutate(honest, fn), "unique_batch")


def test_unposted_ack(honest):
    tx = ClientKey.from_seed(b"stray").sign(0, b"stray")

    def fn(t):
        t.header["clients"] = t.header["clients"] + [tx.sender.hex()]
        t.events.append({"t": 1, "a": "world", "e": "tx", "d": tx.digest.hex(), "enc": tx.encoding.hex()})
        t.events.append({"t": 1, "a": "r1", "e": "ack", "tx": tx.digest.hex()})

    assert not check(mutate(honest, fn), "termination")


def test_ack_by_byzantine_not_binding(honest):
    tx = ClientKey.from_seed(b"stray").sign(0, b"stray")

    def fn(t):
        t.header["honest"] = [a for a in t.header["honest"] if a != "r1"]
        t.events.append({"t": 1, "a": "world", "e": "tx", "d": tx.digest.hex(), "enc": tx.encoding.hex()})
        t.events.append({"t": 1, "a": "r1", "e": "ack", "tx": tx.digest.hex()})

    assert check(mutate(honest, fn), "termination")


def test_missing_store(honest):
    def fn(t):
        ev = first(t, "l1")
        t.events = [e for e in t.events if not (e["e"] == "store" and e["id"] == ev["id"])]

    t = mutate(honest, fn)
    assert not check(t, "availability")
    assert not check(t, "dac_safety")


def test_double_execution(honest):
    def fn(t):
        t.events.append(dict(first(t, "stf_batch")))

    assert not check(mutate(honest, fn), "exactly_once")


def test_forged_signature_ignored(honest):
    def fn(t):
        for ev in t.of("sign"):
            ev["sig"] = "00" * (len(ev["sig"]) // 2)
            ev["hash"] = "22" * 32

    assert check(mutate(honest, fn), "unique_batch")


@pytest.mark.parametrize("prop", ARRANGER_PROPERTIES)
def test_verdict_line(honest, prop):
    assert check(honest, prop).line().startswith(prop)


@pytest.mark.parametrize("strategy", ["optimistic", "sequential", "parallel"])
@pytest.mark.parametrize("mode,behavior", [("full", "wrong-translate"), ("full", "silent"), ("semi", "wrong-translate")])
def test_stf_contact_bound(strategy, mode, behavior):
    make = full_scenario if mode == "full" else semi_scenario
    for seed in range(5):
        sc = make(4 if mode == "full" else 5, behavior, seed, stf_strategy=strategy)
        tr = run(sc).transcript
        signers = {(e["id"], e["hash"]): len(e["signers"]) for e in tr.of("l1") if e["outcome"] == "Accepted"}
        done = list(tr.of("stf_batch"))
        assert len(done) == len(signers) and not list(tr.of("stf_fail"))
        for ev in done:
            bound = signers[(ev["id"], ev["hash"])] if strategy == "optimistic" else sc.f + 1
            assert ev["contacts"] <= bound
