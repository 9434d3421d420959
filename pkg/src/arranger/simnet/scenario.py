"""Scenario files: YAML documents describing one simulated run.

See ``docs/scenario.md`` for the grammar. Unknown keys are rejected so typos
do not silently fall back to defaults.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any

import yaml

from ..clients import STRATEGIES
from ..core import ConfigError, SystemConfig
from ..full import FULL_BEHAVIORS, FULL_SABOTAGE
from ..sbc.oracle import SABOTAGE_MODES
from ..semi import DAC_BEHAVIORS, SEQUENCER_BEHAVIORS
from .network import Schedule


class ScenarioInvalid(ValueError):
    pass


@dataclass(frozen=True)
class Workload:
    clients: int = 4
    txs_per_client: int = 3
    spread: int = 40  # submissions are spread over ticks [0, spread]
    payload: int = 48
    invalid: int = 0  # extra requests with a broken signature
    resubmit: int = 0  # clients that re-send their requests after inclusion


@dataclass(frozen=True)
class FaultPlan:
    byzantine: dict[int, str] = field(default_factory=dict)
    sequencer: str = "honest"
    censor_clients: tuple[int, ...] = (0,)
    sabotage: str | None = None


@dataclass(frozen=True)
class Timing:
    gst: int = 0
    delta: int = 4
    pre_gst_mean: float = 12.0
    l1_delay: int = 3
    sbc_timeout: int = 24
    oracle_latency: int = 3


@dataclass(frozen=True)
class Scenario:
    name: str = "scenario"
    mode: str = "full"
    n: int = 4
    f: int = 1
    seed: int = 0
    sbc: str = "protocol"
    scheme: str = "ed25519-list"
    max_batch: int = 16
    batch_timeout: int = 10
    turn_slice: int = 4
    honest_minority: bool = False
    schedule: Timing = Timing()
    faults: FaultPlan = FaultPlan()
    workload: Workload = Workload()
    client_strategy: str = "sequential"
    client_budget: int | None = None
    client_timeout: int | None = None
    stf_strategy: str = "optimistic"
    budget: int = 4000
    wire_check: bool = False
    expect: dict[str, str] = field(default_factory=dict)

    # ------------------------------------------------------------ derived

    @property
    def config(self) -> SystemConfig:
        return SystemConfig(
            self.n,
            self.f,
            self.mode,
            self.max_batch,
            self.batch_timeout,
            self.turn_slice,
            self.honest_minority,
        )

    def network_schedule(self, seed: int) -> Schedule:
        t = self.schedule
        return Schedule(seed, t.gst, t.delta, t.pre_gst_mean)

    def with_seed(self, seed: int) -> "Scenario":
        return replace(self, seed=seed)

    @property
    def quorum_ok(self) -> bool:
        """True when the fault assumptions of the mode hold."""
        byz = len(self.faults.byzantine)
        return byz <= self.f and not self.honest_minority and self.faults.sequencer == "honest"

    def validate(self) -> "Scenario":
        try:
            self.config
        except ConfigError as exc:
            raise ScenarioInvalid(str(exc)) from None
        if self.sbc not in ("protocol", "oracle"):
            raise ScenarioInvalid(f"sbc must be protocol or oracle, not {self.sbc!r}")
        behaviors = FULL_BEHAVIORS if self.mode == "full" else DAC_BEHAVIORS
        for rid, b in self.faults.byzantine.items():
            if not 0 <= rid < self.n:
                raise ScenarioInvalid(f"byzantine replica {rid} outside 0..{self.n - 1}")
            if b not in behaviors:
                raise ScenarioInvalid(f"behavior {b!r} not available in {self.mode} mode")
        limit = self.n - 1 if self.honest_minority else self.f
        if len(self.faults.byzantine) > limit:
            raise ScenarioInvalid(f"{len(self.faults.byzantine)} Byzantine replicas exceed f={self.f}")
        seq = self.faults.sequencer
        if seq != "honest" and (self.mode != "semi" or seq not in SEQUENCER_BEHAVIORS):
            raise ScenarioInvalid(f"sequencer behavior {seq!r} not available")
        sab = self.faults.sabotage
        if sab is not None:
            if sab not in SABOTAGE_MODES + FULL_SABOTAGE:
                raise ScenarioInvalid(f"unknown sabotage {sab!r}")
            if self.mode != "full":
                raise ScenarioInvalid("sabotage modes apply to full mode")
            if sab in SABOTAGE_MODES and self.sbc != "oracle":
                raise ScenarioInvalid(f"{sab} needs the oracle SBC")
            if sab == "duplicate-element" and self.sbc != "oracle":
                raise ScenarioInvalid("duplicate-element needs the oracle SBC")
        if self.client_strategy not in STRATEGIES:
            raise ScenarioInvalid(f"unknown client strategy {self.client_strategy!r}")
        if self.stf_strategy not in STRATEGIES:
            raise ScenarioInvalid(f"unknown STF strategy {self.stf_strategy!r}")
        w = self.workload
        if w.clients < 1 or w.txs_per_client < 0 or w.spread < 0 or w.payload < 0:
            raise ScenarioInvalid("workload counts must be non-negative (and at least one client)")
        if self.budget < 1:
            raise ScenarioInvalid("tick budget must be positive")
        return self

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["faults"]["censor_clients"] = list(self.faults.censor_clients)
        return d


_SECTIONS = {"schedule": Timing, "faults": FaultPlan, "workload": Workload}


def _build(cls, data: dict[str, Any], where: str):
    if not isinstance(data, dict):
        raise ScenarioInvalid(f"{where}: expected a mapping")
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ScenarioInvalid(f"{where}: unknown keys {', '.join(map(str, unknown))}")
    return data


def from_dict(data: dict[str, Any]) -> Scenario:
    data = dict(_build(Scenario, data or {}, "scenario"))
    for key, cls in _SECTIONS.items():
        if key in data:
            sub = dict(_build(cls, data[key] or {}, key))
            if cls is FaultPlan:
                byz = sub.get("byzantine") or {}
                try:
                    sub["byzantine"] = {int(k): str(v) for k, v in byz.items()}
                except (TypeError, ValueError, AttributeError):
                    raise ScenarioInvalid("faults.byzantine: expected replica: behavior pairs") from None
                sub["censor_clients"] = tuple(sub.get("censor_clients", (0,)))
            try:
                data[key] = cls(**sub)
            except TypeError as exc:
                raise ScenarioInvalid(f"{key}: {exc}") from None
    if "expect" in data:
        data["expect"] = {str(k): str(v).lower() for k, v in (data["expect"] or {}).items()}
    try:
        sc = Scenario(**data)
    except TypeError as exc:
        raise ScenarioInvalid(str(exc)) from None
    return sc.validate()


def loads(text: str) -> Scenario:
    try:
        return from_dict(yaml.safe_load(text) or {})
    except yaml.YAMLError as exc:
        raise ScenarioInvalid(f"not valid YAML: {exc}") from None


def load(path: str | Path) -> Scenario:
    sc = loads(Path(path).read_text())
    if sc.name == "scenario":
        sc = replace(sc, name=Path(path).stem)
    return sc


def dumps(sc: Scenario) -> str:
    return yaml.safe_dump(sc.to_dict(), sort_keys=True)
