"""Arranger properties as predicates over a finished transcript.

Batch contents are never taken on trust: a ``batch`` event counts only if
re-hashing the recorded requests reproduces the claimed digest. Signatures
in ``sign`` events are re-verified against the tag keys in the header.
"""

from __future__ import annotations

from collections import defaultdict
from functools import lru_cache
from typing import Callable

from ..core import Batch, BatchTag
from ..crypto.hashing import EmptyInput, hash_batch
from ..crypto.signing import get_scheme
from ..sbc.predicates import SBC_PREDICATES
from ..transcript import Transcript, TxIndex, Verdict, failed, passed

Key = tuple[int, str]


class _Facts:
    """Derived views shared by the checkers of one transcript."""

    def __init__(self, tr: Transcript):
        self.tr = tr
        self.idx = TxIndex(tr)
        self.contents: dict[Key, list[str]] = {}
        self.claims: dict[Key, dict] = {}
        for ev in tr.of("batch"):
            key = (ev["id"], ev["hash"])
            if key in self.contents:
                continue
            txs = [self.idx.get(d) for d in ev["digests"]]
            if any(t is None for t in txs):
                continue
            try:
                ok = hash_batch(Batch(ev["id"], tuple(txs))).hex() == ev["hash"]
            except EmptyInput:
                ok = False
            if ok:
                self.contents[key] = ev["digests"]
                self.claims[key] = ev
        self.accepted = [ev for ev in tr.of("l1") if ev["outcome"] == "Accepted"]
        self.stores: dict[Key, set[str]] = defaultdict(set)
        for ev in tr.of("store"):
            self.stores[(ev["id"], ev["hash"])].add(ev["a"])

    def signed_tags(self) -> dict[Key, set[int]]:
        """Tags with their distinct signers whose signatures verify."""
        scheme = get_scheme(self.tr.header["scheme"])
        pks = [bytes.fromhex(h) for h in self.tr.header["tag_pks"]]
        out: dict[Key, set[int]] = defaultdict(set)
        for ev in self.tr.of("sign"):
            i = ev["signer"]
            if not 0 <= i < len(pks):
                continue
            tag = BatchTag(ev["id"], bytes.fromhex(ev["hash"]))
            if _verify(scheme.name, tag.message(), bytes.fromhex(ev["sig"]), pks[i]):
                out[(ev["id"], ev["hash"])].add(i)
        return out

    def acked(self) -> list[dict]:
        """Acks that oblige the arranger to include the request."""
        tr = self.tr
        semi = tr.header["mode"] == "semi"
        out, seen = [], set()
        for ev in tr.of("ack"):
            if ev["a"] in tr.honest or (semi and ev["a"] == "seq"):
                if ev["tx"] not in seen and self.idx.valid(ev["tx"]):
                    seen.add(ev["tx"])
                    out.append(ev)
        return out


@lru_cache(maxsize=1 << 16)
def _verify(scheme: str, msg: bytes, sig: bytes, pk: bytes) -> bool:
    return get_scheme(scheme).verify_bytes(msg, sig, pk)


def _key(ev: dict) -> Key:
    return (ev["id"], ev["hash"])


# ---------------------------------------------------------------- properties


def legality(tr: Transcript, facts: _Facts | None = None) -> Verdict:
    """Accepted tags decode to batches of valid requests, with no repeat
    inside a batch or across accepted batches."""
    fx = facts or _Facts(tr)
    earlier: dict[str, dict] = {}
    for ev in fx.accepted:
        digests = fx.contents.get(_key(ev))
        if digests is None:
            return failed("legality", f"accepted tag {ev['id']} has no batch that hashes to it", [ev])
        claim = fx.claims[_key(ev)]
        inside: set[str] = set()
        for d in digests:
            if not fx.idx.valid(d):
                return failed("legality", f"batch {ev['id']} holds invalid request {d[:12]}", [ev, claim])
            if d in inside:
                return failed("legality", f"batch {ev['id']} repeats {d[:12]}", [ev, claim])
            if d in earlier:
                return failed(
                    "legality", f"{d[:12]} in batches {earlier[d]['id']} and {ev['id']}", [earlier[d], ev, claim]
                )
            inside.add(d)
        for d in digests:
            earlier[d] = ev
    return passed("legality")


def unique_batch(tr: Transcript, facts: _Facts | None = None) -> Verdict:
    """No two certified tags share an identifier."""
    fx = facts or _Facts(tr)
    certified: dict[int, dict[str, dict]] = defaultdict(dict)
    for ev in fx.accepted:
        certified[ev["id"]].setdefault(ev["hash"], ev)
    for (i, h), signers in sorted(fx.signed_tags().items()):
        if len(signers) > tr.f:
            certified[i].setdefault(h, {"e": "certified", "id": i, "hash": h, "signers": sorted(signers)})
    for i in sorted(certified):
        if len(certified[i]) > 1:
            return failed("unique_batch", f"id {i} certified with {len(certified[i])} hashes", certified[i].values())
    return passed("unique_batch")


def termination(tr: Transcript, facts: _Facts | None = None) -> Verdict:
    """Every valid request acknowledged by an honest entry point ends up in an accepted batch."""
    fx = facts or _Facts(tr)
    included = {d for ev in fx.accepted for d in fx.contents.get(_key(ev), ())}
    for ev in fx.acked():
        if ev["tx"] not in included:
            return failed("termination", f"{ev['tx'][:12]} acknowledged by {ev['a']} never posted", [ev])
    return passed("termination")


def availability(tr: Transcript, facts: _Facts | None = None) -> Verdict:
    """Some honest replica stored the batch of every accepted tag."""
    fx = facts or _Facts(tr)
    for ev in fx.accepted:
        key = _key(ev)
        keepers = fx.stores.get(key, set()) & tr.honest
        if not keepers or key not in fx.contents:
            return failed("availability", f"no honest replica can translate tag {ev['id']}", [ev])
    return passed("availability")


def exactly_once(tr: Transcript, facts: _Facts | None = None) -> Verdict:
    """Translated batches carry each request at most once; with the fault
    assumptions met, every acknowledged request at least once."""
    fx = facts or _Facts(tr)
    seen: dict[str, dict] = {}
    for ev in tr.of("stf_batch"):
        for d in ev["digests"]:
            if d in seen:
                return failed("exactly_once", f"{d[:12]} executed twice", [seen[d], ev])
            seen[d] = ev
    if tr.header.get("quorum_ok"):
        for ev in fx.acked():
            if ev["tx"] not in seen:
                return failed("exactly_once", f"{ev['tx'][:12]} never executed", [ev])
    return passed("exactly_once")


def dac_safety(tr: Transcript, facts: _Facts | None = None) -> Verdict:
    """Every certified tag has an honest signer holding a batch that hashes to it."""
    fx = facts or _Facts(tr)
    signed = fx.signed_tags()
    tags: dict[Key, set[int]] = {}
    for ev in fx.accepted:
        tags.setdefault(_key(ev), set()).update(ev["signers"])
    for key, signers in signed.items():
        if len(signers) > tr.f:
            tags.setdefault(key, set()).update(signers)
    for key in sorted(tags):
        names = {f"r{i}" for i in tags[key]} & tr.honest
        if not (names & fx.stores.get(key, set())) or key not in fx.contents:
            return failed("dac_safety", f"certified tag {key[0]} has no honest signer holding its batch")
    return passed("dac_safety")


ARRANGER_PROPERTIES = ("legality", "unique_batch", "termination", "availability")

CHECKERS: dict[str, Callable[..., Verdict]] = {
    "legality": legality,
    "unique_batch": unique_batch,
    "termination": termination,
    "availability": availability,
    "exactly_once": exactly_once,
    "dac_safety": dac_safety,
}
CHECKERS.update({k: (lambda tr, facts=None, _p=p: _p(tr)) for k, p in SBC_PREDICATES.items()})


def check(tr: Transcript, prop: str) -> Verdict:
    try:
        fn = CHECKERS[prop]
    except KeyError:
        raise ValueError(f"unknown property {prop!r}; choose from {', '.join(CHECKERS)}") from None
    return fn(tr)


def check_all(tr: Transcript, props=None) -> dict[str, Verdict]:
    fx = _Facts(tr)
    return {p: CHECKERS[p](tr, fx) for p in (props or CHECKERS)}
