"""Run transcripts: a versioned, line-oriented JSON event log.

The first line is a header object; every following line is one event
``{"t": tick, "a": actor, "e": kind, ...}``. Objects are written with sorted
keys and no whitespace, so equal runs give byte-identical files.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Iterator

from .core import DecodeError, KeyDirectory, TransactionRequest, decode_tx, validate

FORMAT = "arranger-transcript"
VERSION = 1


class TranscriptError(ValueError):
    pass


def _dumps(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


@dataclass
class Transcript:
    header: dict[str, Any]
    events: list[dict[str, Any]] = field(default_factory=list)

    def record(self, tick: int, actor: str, kind: str, **data: Any) -> None:
        ev = {"t": tick, "a": actor, "e": kind}
        ev.update(data)
        self.events.append(ev)

    def of(self, *kinds: str) -> Iterator[dict[str, Any]]:
        return (ev for ev in self.events if ev["e"] in kinds)

    def dumps(self) -> str:
        head = {"format": FORMAT, "version": VERSION, **self.header}
        return "\n".join([_dumps(head)] + [_dumps(ev) for ev in self.events]) + "\n"

    def dump(self, path: str | Path) -> None:
        Path(path).write_text(self.dumps())

    @classmethod
    def loads(cls, text: str) -> "Transcript":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        if not lines:
            raise TranscriptError("empty transcript")
        head = json.loads(lines[0])
        if head.get("format") != FORMAT:
            raise TranscriptError("not an arranger transcript")
        if head.get("version") != VERSION:
            raise TranscriptError(f"unsupported transcript version {head.get('version')}")
        head = {k: v for k, v in head.items() if k not in ("format", "version")}
        return cls(head, [json.loads(ln) for ln in lines[1:]])

    @classmethod
    def load(cls, path: str | Path) -> "Transcript":
        return cls.loads(Path(path).read_text())

    # convenience views over the header
    @property
    def honest(self) -> frozenset[str]:
        return frozenset(self.header["honest"])

    @property
    def n(self) -> int:
        return self.header["n"]

    @property
    def f(self) -> int:
        return self.header["f"]


@dataclass(frozen=True)
class Verdict:
    property: str
    ok: bool
    detail: str = ""
    witness: tuple[dict[str, Any], ...] = ()

    def __bool__(self) -> bool:
        return self.ok

    def line(self) -> str:
        status = "PASS" if self.ok else "FAIL"
        return f"{self.property}: {status}" + (f" ({self.detail})" if self.detail else "")


def passed(prop: str) -> Verdict:
    return Verdict(prop, True)


def failed(prop: str, detail: str, witness: Iterable[dict[str, Any]] = ()) -> Verdict:
    return Verdict(prop, False, detail, tuple(witness))


class TxIndex:
    """Every request that appeared in a run, with its validity under the run's client PKI."""

    def __init__(self, tr: Transcript):
        self.pki = KeyDirectory(bytes.fromhex(h) for h in tr.header.get("clients", ()))
        self.txs: dict[str, TransactionRequest] = {}
        for ev in tr.of("tx"):
            try:
                tx = decode_tx(bytes.fromhex(ev["enc"]))
            except (DecodeError, ValueError):
                continue
            self.txs[tx.digest.hex()] = tx
        self._valid: dict[str, bool] = {}

    def __contains__(self, d: str) -> bool:
        return d in self.txs

    def valid(self, d: str) -> bool:
        if d not in self._valid:
            tx = self.txs.get(d)
            self._valid[d] = tx is not None and validate(tx, self.pki)
        return self._valid[d]

    def get(self, d: str) -> TransactionRequest | None:
        return self.txs.get(d)
