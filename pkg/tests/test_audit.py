from __future__ import annotations

from quayline.audit import audit_log
from quayline.des import LogRecord, SimulationLog
from quayline.model import YardBlock, YardCategory
from quayline.terminal import simulate

from .conftest import T0, all_category_blocks, make_bundle, vessel


def _run():
    ships = [vessel("1", 200, T0, {"full20": 3, "full40": 2}, {"empty20": 2}),
             vessel("2", 150, T0 + 60, {"haz20": 2}, {"full40": 1})]
    blocks = [YardBlock("I1", YardCategory.IMPORT, 8), *all_category_blocks(20)]
    bundle = make_bundle(ships, blocks, trucks=2, yard_cranes=2)
    return bundle, list(simulate(bundle).log)


def _audit(bundle, records):
    return audit_log(records, bundle.ships, bundle.yards, bundle.equipment)


def _edit(records, index, **changes):
    r = records[index]
    out = list(records)
    out[index] = LogRecord(changes.get("time", r.time), r.seq, changes.get("kind", r.kind),
                           changes.get("entity", r.entity), changes.get("detail", r.detail))
    return out


def test_clean_run_passes():
    bundle, records = _run()
    assert _audit(bundle, records).ok


def test_detects_dropped_box():
    bundle, records = _run()
    i = next(k for k, r in enumerate(records) if r.kind == "yc_stack")
    report = _audit(bundle, records[:i] + records[i + 1:])
    assert any("stacks" in v for v in report.violations)


def test_detects_over_capacity():
    bundle, records = _run()
    tiny = [YardBlock(b.name, b.category, 1 if b.name == "I1" else b.capacity_teu) for b in bundle.yards]
    assert any(r.fields().get("block") == "I1" for r in records)
    report = audit_log(records, bundle.ships, tiny, bundle.equipment)
    assert any("capacity" in v for v in report.violations)


def test_detects_double_truck_grant():
    bundle, records = _run()
    lifts = [k for k, r in enumerate(records) if r.kind == "qc_lift"]
    a, b = records[lifts[0]], records[lifts[1]]
    truck_a = a.fields()["truck"]
    edited = _edit(records, lifts[1], detail=b.detail.replace(f"truck={b.fields()['truck']}", f"truck={truck_a}"))
    assert not _audit(bundle, edited).ok


def test_detects_overtaking():
    bundle, records = _run()
    berths = [k for k, r in enumerate(records) if r.kind == "berth"]
    swapped = list(records)
    swapped[berths[0]], swapped[berths[1]] = records[berths[1]], records[berths[0]]
    report = _audit(bundle, swapped)
    assert any("berthing order" in v for v in report.violations)


def test_detects_clock_going_backwards():
    bundle, records = _run()
    report = _audit(bundle, _edit(records, 5, time=records[0].time - 1))
    assert any("backwards" in v for v in report.violations)


def test_audit_reads_serialized_log():
    bundle, records = _run()
    text = SimulationLog(records).serialize()
    assert _audit(bundle, SimulationLog.parse(text)).ok
