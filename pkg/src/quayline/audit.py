"""Replay a simulation log and report invariant violations.

Everything here reads only the serialized records plus the scenario, never
live simulator state.
"""

from __future__ import annotations

from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .des import LogRecord
from .model import EquipmentPool, Vessel, YardBlock


@dataclass
class AuditReport:
    violations: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def add(self, message: str) -> None:
        self.violations.append(message)


def _overlaps(intervals: list[tuple[int, int, str]]) -> list[str]:
    out = []
    intervals.sort()
    for (a0, a1, who_a), (b0, b1, who_b) in zip(intervals, intervals[1:]):
        if b0 < a1:
            out.append(f"{who_a} [{a0},{a1}) overlaps {who_b} [{b0},{b1})")
    return out


def audit_log(
    records: Iterable[LogRecord],
    vessels: Sequence[Vessel],
    blocks: Sequence[YardBlock],
    equipment: EquipmentPool,
) -> AuditReport:
    report = AuditReport()
    records = list(records)
    by_id = {v.id: v for v in vessels}
    capacity = {b.name: b.capacity_teu for b in blocks}
    physical = {b.name: b.occupancy_teu for b in blocks}
    committed = dict(physical)

    qc_labels = {f"QC{i}" for i in range(1, equipment.quay_cranes + 1)}
    width = max(1, len(str(equipment.trucks)))
    truck_labels = {f"T{i:0{width}d}" for i in range(1, equipment.trucks + 1)}
    yc_labels = {f"YC{i}" for i in range(1, equipment.yard_cranes + 1)}

    handled: Counter[tuple[str, str]] = Counter()
    vessel_qcs: dict[str, list[str]] = {}
    qc_owner: dict[str, str] = {}
    truck_grant: dict[str, tuple[str, int]] = {}
    unit_busy: dict[str, list[tuple[int, int, str]]] = defaultdict(list)
    block_busy: dict[str, list[tuple[int, int, str]]] = defaultdict(list)
    berthed: dict[str, tuple[float, float]] = {}
    arrivals: list[str] = []
    berths: list[str] = []
    last_time = None

    for rec in records:
        if last_time is not None and rec.time < last_time:
            report.add(f"clock went backwards at seq {rec.seq}")
        last_time = rec.time
        f = rec.fields()
        kind = rec.kind
        if kind == "arrive":
            arrivals.append(rec.entity)
        elif kind == "berth":
            berths.append(rec.entity)
            start, end = float(f["start_m"]), float(f["end_m"])
            if start < 0 or end > equipment.quay_length_m:
                report.add(f"vessel {rec.entity} berthed outside quay at [{start:g},{end:g})")
            for other, (a, b) in berthed.items():
                if start < b and a < end:
                    report.add(f"vessel {rec.entity} quay interval overlaps vessel {other}")
            berthed[rec.entity] = (start, end)
            qcs = f["qcs"].split("+") if f["qcs"] else []
            for qc in qcs:
                if qc not in qc_labels:
                    report.add(f"unknown quay crane {qc}")
                if qc in qc_owner:
                    report.add(f"{qc} assigned to {rec.entity} while serving {qc_owner[qc]}")
                qc_owner[qc] = rec.entity
            if len(qc_owner) > equipment.quay_cranes:
                report.add(f"{len(qc_owner)} quay cranes assigned, pool is {equipment.quay_cranes}")
            vessel_qcs[rec.entity] = qcs
        elif kind == "depart":
            berthed.pop(rec.entity, None)
            for qc in vessel_qcs.get(rec.entity, []):
                qc_owner.pop(qc, None)
        elif kind in ("stage", "qc_lift", "yc_stack", "yc_retrieve", "qc_load"):
            handled[(rec.entity, kind)] += 1
            block, teu = f.get("block"), int(f["teu"])
            if kind == "stage":
                committed[block] += teu
                physical[block] += teu
            elif kind == "qc_lift":
                committed[block] += teu
            elif kind == "yc_stack":
                physical[block] += teu
            elif kind == "yc_retrieve":
                committed[block] -= teu
                physical[block] -= teu
            if block is not None:
                if committed[block] > capacity[block]:
                    report.add(f"block {block} committed {committed[block]} > capacity {capacity[block]}")
                if physical[block] < 0 or physical[block] > committed[block]:
                    report.add(f"block {block} physical occupancy {physical[block]} out of range")
            dur = int(f.get("dur", 0))
            if kind in ("qc_lift", "qc_load"):
                qc = f["qc"]
                if qc not in vessel_qcs.get(f["vessel"], []) or qc_owner.get(qc) != f["vessel"]:
                    report.add(f"{rec.entity} handled by {qc}, not a crane of vessel {f['vessel']}")
                span = (rec.time, rec.time + dur) if kind == "qc_lift" else (rec.time - dur, rec.time)
                unit_busy[qc].append((*span, rec.entity))
            if kind in ("yc_stack", "yc_retrieve"):
                yc = f["yc"]
                if yc not in yc_labels:
                    report.add(f"unknown yard crane {yc}")
                span = (rec.time - dur, rec.time) if kind == "yc_stack" else (rec.time, rec.time + dur)
                unit_busy[yc].append((*span, rec.entity))
                block_busy[block].append((*span, rec.entity))
            if kind in ("qc_lift", "yc_retrieve"):
                truck = f["truck"]
                if truck not in truck_labels:
                    report.add(f"unknown truck {truck}")
                for box, (t, _) in truck_grant.items():
                    if t == truck:
                        report.add(f"{truck} granted to {rec.entity} while carrying {box}")
                truck_grant[rec.entity] = (truck, rec.time)
        elif kind == "truck_arrive":
            truck, start = truck_grant.pop(rec.entity, (None, None))
            if truck != f["truck"]:
                report.add(f"{rec.entity} truck_arrive with {f['truck']}, granted {truck}")
            else:
                unit_busy[truck].append((start, rec.time, rec.entity))

    for unit, spans in unit_busy.items():
        report.violations.extend(f"{unit}: {m}" for m in _overlaps(spans))
    for block, spans in block_busy.items():
        report.violations.extend(f"block {block}: {m}" for m in _overlaps(spans))

    for (entity, kind), n in handled.items():
        if n > 1:
            report.add(f"{entity} logged {kind} {n} times")
    per_vessel: dict[str, Counter[str]] = defaultdict(Counter)
    for (entity, kind), n in handled.items():
        per_vessel[entity.split("/", 1)[0]][kind] += n
    for v in vessels:
        c = per_vessel[v.id]
        nd, nl = v.discharge.boxes, v.load.boxes
        if c["qc_lift"] != nd or c["yc_stack"] != nd:
            report.add(f"vessel {v.id}: {c['qc_lift']} lifts / {c['yc_stack']} stacks for {nd} discharge boxes")
        if c["stage"] != nl or c["yc_retrieve"] != nl or c["qc_load"] != nl:
            report.add(f"vessel {v.id}: {c['stage']}/{c['yc_retrieve']}/{c['qc_load']} stage/retrieve/load for {nl} exports")
    unknown = set(per_vessel) - set(by_id)
    if unknown:
        report.add(f"log mentions unknown vessels {sorted(unknown)}")

    if berths != arrivals[: len(berths)]:
        report.add(f"berthing order {berths} is not arrival order {arrivals}")
    return report
