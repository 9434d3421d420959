"""Standard scenario matrix and multi-seed sweeps."""

from __future__ import annotations

import csv
import random
from dataclasses import replace
from typing import Iterable, Iterator, TextIO

from ..full import FULL_BEHAVIORS, FULL_SABOTAGE
from ..sbc.oracle import SABOTAGE_MODES
from ..sbc.predicates import SBC_PREDICATES
from ..semi import DAC_BEHAVIORS, SEQUENCER_BEHAVIORS
from .checkers import ARRANGER_PROPERTIES, check_all
from .runner import RunResult, run
from .scenario import FaultPlan, Scenario, Workload

ALL_PASS = {p: "pass" for p in ARRANGER_PROPERTIES}


def _pick(seed: int, n: int, k: int) -> list[int]:
    return sorted(random.Random(f"{seed}/byzantine-ids").sample(range(n), k))


def full_scenario(n: int, behavior: str | None, seed: int, **kw) -> Scenario:
    f = (n - 1) // 3
    byz = {i: behavior for i in _pick(seed, n, f)} if behavior else {}
    return Scenario(
        name=f"full-n{n}-{behavior or 'none'}",
        mode="full",
        n=n,
        f=f,
        seed=seed,
        faults=FaultPlan(byzantine=byz),
        workload=Workload(clients=3, txs_per_client=3, spread=30),
        expect=dict(ALL_PASS),
        **kw,
    ).validate()


def semi_scenario(n: int, behavior: str | None, seed: int, **kw) -> Scenario:
    f = (n - 1) // 2
    byz = {i: behavior for i in _pick(seed, n, f)} if behavior else {}
    return Scenario(
        name=f"semi-n{n}-{behavior or 'none'}",
        mode="semi",
        n=n,
        f=f,
        seed=seed,
        faults=FaultPlan(byzantine=byz),
        workload=Workload(clients=3, txs_per_client=3, spread=30),
        expect=dict(ALL_PASS),
        **kw,
    ).validate()


def honest_minority_scenario(seed: int) -> Scenario:
    return Scenario(
        name="semi-honest-minority",
        mode="semi",
        n=5,
        f=3,
        honest_minority=True,
        seed=seed,
        faults=FaultPlan(byzantine={i: "silent" for i in _pick(seed, 5, 3)}),
        workload=Workload(clients=2, txs_per_client=2, spread=20),
        expect={**ALL_PASS, "termination": "fail"},
    ).validate()


def byzantine_sequencer_scenario(behavior: str, seed: int, n: int = 5) -> Scenario:
    return Scenario(
        name=f"semi-seq-{behavior}",
        mode="semi",
        n=n,
        f=(n - 1) // 2,
        seed=seed,
        faults=FaultPlan(sequencer=behavior),
        workload=Workload(clients=3, txs_per_client=2, spread=20),
        expect={"dac_safety": "pass", "termination": "fail"},
    ).validate()


# planted violation -> the checker meant to catch it
SABOTAGE_TARGETS = {
    "sbc-split": "sbc_agreement",
    "sbc-duplicate": "sbc_integrity",
    "sbc-empty": "sbc_validity",
    "sbc-invalid": "sbc_validity",
    "sbc-stall": "sbc_termination",
    "sbc-censor": "sbc_censorship",
    "duplicate-element": "legality",
    "nondeterministic-order": "unique_batch",
    "forget-batch": "availability",
}


def sabotage_scenario(sabotage: str, seed: int, n: int = 4) -> Scenario:
    """Oracle-SBC run with one planted violation.

    The expectation covers the family of the intended checker: the SBC
    predicates for SBC-level sabotage, the arranger properties otherwise.
    Within that family exactly the intended checker must fail; effects that
    leak into the other layer are not judged.
    """
    target = SABOTAGE_TARGETS[sabotage]
    family = SBC_PREDICATES if target in SBC_PREDICATES else ARRANGER_PROPERTIES
    return Scenario(
        name=f"sabotage-{sabotage}-n{n}",
        mode="full",
        n=n,
        f=(n - 1) // 3,
        seed=seed,
        sbc="oracle",
        faults=FaultPlan(sabotage=sabotage),
        workload=Workload(clients=3, txs_per_client=3, spread=30),
        # censorship is only defined for elements every honest replica holds
        client_strategy="parallel" if sabotage == "sbc-censor" else "sequential",
        client_budget=n if sabotage == "sbc-censor" else None,
        expect={p: "fail" if p == target else "pass" for p in family},
    ).validate()


def sabotage_matrix(seeds: Iterable[int], sizes=(4, 7)) -> Iterator[Scenario]:
    for sab in SABOTAGE_MODES + FULL_SABOTAGE:
        for n in sizes:
            for seed in seeds:
                yield sabotage_scenario(sab, seed, n)


def full_matrix(seeds: Iterable[int], sizes=(4, 7, 10)) -> Iterator[Scenario]:
    for n in sizes:
        for behavior in (None,) + FULL_BEHAVIORS:
            for seed in seeds:
                yield full_scenario(n, behavior, seed)


def semi_matrix(seeds: Iterable[int], sizes=(3, 5, 7)) -> Iterator[Scenario]:
    for n in sizes:
        for behavior in (None,) + DAC_BEHAVIORS:
            for seed in seeds:
                yield semi_scenario(n, behavior, seed)


def sequencer_matrix(seeds: Iterable[int]) -> Iterator[Scenario]:
    for behavior in SEQUENCER_BEHAVIORS:
        for seed in seeds:
            yield byzantine_sequencer_scenario(behavior, seed)


def evaluate(sc: Scenario, seed: int | None = None) -> dict:
    return judge(run(sc, seed))


def judge(res: RunResult) -> dict:
    """Report row for a finished run: verdicts plus whether they meet ``expect``."""
    sc = res.scenario
    props = sorted(set(ARRANGER_PROPERTIES) | set(sc.expect))
    verdicts = check_all(res.transcript, props)
    row = {
        "scenario": sc.name,
        "seed": res.scenario.seed,
        "ticks": res.ticks,
        "quiescent": res.quiescent,
        "accepted": len(res.world.logger.accepted),
    }
    ok = True
    for p, v in verdicts.items():
        row[p] = "pass" if v.ok else "fail"
        if p in sc.expect and row[p] != sc.expect[p]:
            ok = False
    row["as_expected"] = ok
    row["verdicts"] = verdicts
    return row


def sweep(scenarios: Iterable[Scenario], seeds: Iterable[int], out: TextIO | None = None) -> list[dict]:
    """Run every scenario under every seed; optionally write a CSV report."""
    rows = []
    seeds = list(seeds)
    for sc in scenarios:
        for s in seeds:
            rows.append(evaluate(replace(sc, seed=s)))
    if out is not None:
        write_report(rows, out)
    return rows


def write_report(rows: list[dict], out: TextIO) -> None:
    props = sorted({k for r in rows for k in r if k in ALL_PASS or k.startswith(("sbc_", "dac_", "exactly"))})
    cols = ["scenario", "seed", "ticks", "quiescent", "accepted"] + props + ["as_expected"]
    w = csv.writer(out)
    w.writerow(cols)
    for r in rows:
        w.writerow([r.get(c, "") for c in cols])
