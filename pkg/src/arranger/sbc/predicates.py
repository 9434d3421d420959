"""The five SBC properties as post-hoc predicates over a run transcript.

They read only ``sbc_input``, ``sbc_live``, ``round_start`` and
``set_deliver`` events plus the recorded requests, so the oracle and the
reference protocol are judged by identical code.
"""

from __future__ import annotations

from collections import defaultdict

from ..transcript import Transcript, TxIndex, Verdict, failed, passed


def _honest_deliveries(tr: Transcript) -> list[dict]:
    return [ev for ev in tr.of("set_deliver") if ev["a"] in tr.honest]


def sbc_agreement(tr: Transcript) -> Verdict:
    by_round: dict[int, dict[str, dict]] = defaultdict(dict)
    for ev in _honest_deliveries(tr):
        first = by_round[ev["round"]]
        ref = next(iter(first.values()), None)
        first.setdefault(ev["a"], ev)
        if ref is not None and sorted(ref["digests"]) != sorted(ev["digests"]):
            return failed("sbc_agreement", f"round {ev['round']}: {ref['a']} and {ev['a']} differ", [ref, ev])
    return passed("sbc_agreement")


def sbc_validity(tr: Transcript) -> Verdict:
    idx = TxIndex(tr)
    proposed: dict[int, set[str]] = defaultdict(set)
    for ev in tr.of("sbc_input"):
        proposed[ev["round"]].update(ev["digests"])
    for ev in _honest_deliveries(tr):
        if not ev["digests"]:
            return failed("sbc_validity", f"round {ev['round']} decided an empty set", [ev])
        for d in ev["digests"]:
            if d not in proposed[ev["round"]]:
                return failed("sbc_validity", f"{d[:12]} was not proposed in round {ev['round']}", [ev])
            if not idx.valid(d):
                return failed("sbc_validity", f"{d[:12]} is not a valid request", [ev])
    return passed("sbc_validity")


def sbc_integrity(tr: Transcript) -> Verdict:
    seen: dict[str, dict[str, dict]] = defaultdict(dict)
    rounds: dict[str, set[int]] = defaultdict(set)
    for ev in _honest_deliveries(tr):
        a = ev["a"]
        if ev["round"] in rounds[a]:
            return failed("sbc_integrity", f"{a} delivered round {ev['round']} twice", [ev])
        rounds[a].add(ev["round"])
        mine = seen[a]
        for d in ev["digests"]:
            if d in mine:
                return failed(
                    "sbc_integrity",
                    f"{d[:12]} decided in rounds {mine[d]['round']} and {ev['round']}",
                    [mine[d], ev],
                )
            mine[d] = ev
    return passed("sbc_integrity")


def sbc_termination(tr: Transcript) -> Verdict:
    honest_replicas = sorted(a for a in tr.honest if a.startswith("r"))
    started: dict[int, dict] = {}
    for ev in tr.of("sbc_live", "round_start", "set_deliver"):
        if ev["e"] == "round_start" or ev["a"] in tr.honest:
            started.setdefault(ev["round"], ev)
    got: dict[int, set[str]] = defaultdict(set)
    for ev in _honest_deliveries(tr):
        got[ev["round"]].add(ev["a"])
    for rnd in sorted(started):
        missing = [a for a in honest_replicas if a not in got[rnd]]
        if missing:
            return failed(
                "sbc_termination", f"round {rnd} never decided at {', '.join(missing)}", [started[rnd]]
            )
    return passed("sbc_termination")


def sbc_censorship(tr: Transcript) -> Verdict:
    """Every element proposed by all honest replicas is eventually decided."""
    honest_replicas = sorted(a for a in tr.honest if a.startswith("r"))
    proposed: dict[str, set[str]] = {a: set() for a in honest_replicas}
    first: dict[str, dict] = {}
    for ev in tr.of("sbc_input"):
        if ev["a"] in proposed:
            proposed[ev["a"]].update(ev["digests"])
            for d in ev["digests"]:
                first.setdefault(d, ev)
    if not honest_replicas:
        return passed("sbc_censorship")
    common = set.intersection(*proposed.values())
    decided = {d for ev in _honest_deliveries(tr) for d in ev["digests"]}
    for d in sorted(common - decided):
        return failed("sbc_censorship", f"{d[:12]} proposed by every honest replica, never decided", [first[d]])
    return passed("sbc_censorship")


SBC_PREDICATES = {
    "sbc_agreement": sbc_agreement,
    "sbc_validity": sbc_validity,
    "sbc_integrity": sbc_integrity,
    "sbc_termination": sbc_termination,
    "sbc_censorship": sbc_censorship,
}
