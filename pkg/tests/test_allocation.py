from __future__ import annotations

import itertools
from fractions import Fraction

import pytest

from quayline.allocation import (
    ContainerRef,
    UnknownPolicy,
    YardFull,
    assign_block,
    fcfs_berth,
    fullest_feasible,
    get_policy,
    least_occupancy,
    lowest_gap,
    policy_compare,
)
from quayline.metrics import build_report
from quayline.model import YardBlock, YardCategory, container_class
from quayline.terminal import simulate

from .conftest import T0, all_category_blocks, make_bundle, vessel


def ref(code: str, export: bool = False) -> ContainerRef:
    return ContainerRef(f"x/{code}", container_class(code), export)


def oracle_choice(c: ContainerRef, blocks: list[YardBlock]) -> str | None:
    """Exhaustive scan with exact rational ratios."""
    best = None
    for b in blocks:
        if b.category is not c.category or b.capacity_teu - b.occupancy_teu < c.teu:
            continue
        key = (Fraction(b.occupancy_teu, b.capacity_teu), b.name)
        if best is None or key < best:
            best = key
    return None if best is None else best[1]


# -- berth ------------------------------------------------------------------


def test_single_ship_berths_at_zero():
    [plan] = fcfs_berth([vessel("1", 186)], [], 530, 15)
    assert (plan.start_m, plan.end_m, plan.qcs) == (0, 201, 2)


def test_two_ships_berth_concurrently():
    plans = fcfs_berth([vessel("1", 186), vessel("2", 183)], [], 530, 15)
    assert [(p.start_m, p.end_m) for p in plans] == [(0, 201), (201, 399)]


def test_third_200m_ship_waits():
    ships = [vessel(str(i), 200) for i in range(1, 4)]
    plans = fcfs_berth(ships, [], 530, 15)
    assert [p.vessel for p in plans] == ["1", "2"]


def test_no_overtaking_even_if_later_ship_fits():
    plans = fcfs_berth([vessel("1", 400), vessel("2", 50)], [(0, 215)], 530, 15)
    assert plans == []


def test_berth_respects_available_qcs():
    assert fcfs_berth([vessel("1", 100)], [], 530, 15, available_qcs=0) == []


def test_lowest_gap_reuses_freed_space():
    assert lowest_gap([(215, 430)], 215, 530) == 0
    assert lowest_gap([(0, 100), (300, 530)], 200, 530) == 100
    assert lowest_gap([(0, 100), (300, 530)], 201, 530) is None


def test_third_ship_berths_at_first_departure():
    # Ship 1 has one box, ship 2 has three: ship 1 departs first and ship 3 takes its berth.
    ships = [
        vessel("1", 200, T0, {"full20": 1}),
        vessel("2", 200, T0, {"full20": 3}),
        vessel("3", 200, T0, {"full20": 1}),
    ]
    result = simulate(make_bundle(ships, all_category_blocks()))
    berth = {r.entity: r for r in result.log.of_kind("berth")}
    depart = {r.entity: r.time for r in result.log.of_kind("depart")}
    assert berth["1"].time == berth["2"].time == T0
    assert berth["3"].time == min(depart["1"], depart["2"]) == depart["1"]
    assert berth["3"].fields()["start_m"] == "0"


# -- yard blocks --------------------------------------------------------------


def test_full40_into_empty_alexandria_yard_goes_to_c(alexandria):
    assert assign_block(ref("full40"), alexandria.yards).block == "C"


def test_reefer_into_full_reefer_block_raises(alexandria):
    yard = [YardBlock(b.name, b.category, b.capacity_teu, b.capacity_teu if b.category is YardCategory.REEFER else 0)
            for b in alexandria.yards]
    with pytest.raises(YardFull) as info:
        assign_block(ref("reefer20"), yard)
    assert info.value.category is YardCategory.REEFER


def test_exports_go_to_export_blocks(alexandria):
    assert assign_block(ref("reefer40", export=True), alexandria.yards).block == "Export"


def test_adversarial_prefers_fullest():
    yard = [YardBlock("a", YardCategory.IMPORT, 10, 2), YardBlock("b", YardCategory.IMPORT, 10, 8)]
    assert least_occupancy(ref("full20"), yard).name == "a"
    assert fullest_feasible(ref("full20"), yard).name == "b"
    assert fullest_feasible(ref("full40"), [YardBlock("b", YardCategory.IMPORT, 10, 9), yard[0]]).name == "a"


def test_unknown_policy_lists_names():
    with pytest.raises(UnknownPolicy) as info:
        get_policy("magic")
    assert "baseline-least-occupancy" in str(info.value) and "worst-fit-adversarial" in str(info.value)


CATS = (YardCategory.IMPORT, YardCategory.REEFER)
BLOCK_OPTIONS = [(cat, cap, occ) for cat in CATS for cap in (2, 3, 4) for occ in range(cap + 1)]
PROBES = [ref("full20"), ref("full40"), ref("reefer20"), ref("reefer40")]


def _check(c: ContainerRef, yard: list[YardBlock]) -> None:
    want = oracle_choice(c, yard)
    if want is None:
        with pytest.raises(YardFull):
            least_occupancy(c, yard)
    else:
        assert least_occupancy(c, yard).name == want


def test_baseline_matches_oracle_on_every_small_yard_state():
    # Names are assigned in reverse so name order differs from list order.
    checked = 0
    for n in range(1, 5):
        names = [f"b{n - i}" for i in range(n)]
        for combo in itertools.product(BLOCK_OPTIONS, repeat=n):
            yard = [YardBlock(name, cat, cap, occ) for name, (cat, cap, occ) in zip(names, combo)]
            for c in PROBES:
                _check(c, yard)
                checked += 1
    assert checked == 4 * sum(len(BLOCK_OPTIONS) ** n for n in range(1, 5))


def test_baseline_matches_oracle_on_every_ten_box_sequence():
    starts = [
        [YardBlock("A", YardCategory.IMPORT, 6), YardBlock("B", YardCategory.IMPORT, 4),
         YardBlock("C", YardCategory.IMPORT, 3, 1), YardBlock("D", YardCategory.REEFER, 2)],
        [YardBlock("Z", YardCategory.IMPORT, 5, 2), YardBlock("Y", YardCategory.IMPORT, 5, 2)],
    ]
    for start in starts:
        for seq in itertools.product(("full20", "full40"), repeat=10):
            yard = [YardBlock(b.name, b.category, b.capacity_teu, b.occupancy_teu) for b in start]
            for code in seq:
                c = ref(code)
                want = oracle_choice(c, yard)
                if want is None:
                    with pytest.raises(YardFull):
                        assign_block(c, yard)
                    continue
                decision = assign_block(c, yard)
                assert decision.block == want
                chosen = next(b for b in yard if b.name == want)
                chosen.occupancy_teu += c.teu
                assert chosen.occupancy_teu <= chosen.capacity_teu


# -- policy comparison ---------------------------------------------------------


def _small_bundle():
    ships = [vessel("1", 150, T0, {"full20": 6, "full40": 4}, {"full20": 3}),
             vessel("2", 120, T0 + 600, {"full40": 5}, {"empty40": 2})]
    blocks = [YardBlock("I1", YardCategory.IMPORT, 40, 30), YardBlock("I2", YardCategory.IMPORT, 40),
              *all_category_blocks(100)]
    return make_bundle(ships, blocks, trucks=4, yard_cranes=2)


def test_policy_compare_single_policy_equals_plain_run():
    bundle = _small_bundle()
    reports = policy_compare(bundle, ["baseline-least-occupancy"])
    plain = build_report(simulate(bundle).log, bundle)
    assert reports["baseline-least-occupancy"].rows == plain.rows


def test_policy_compare_same_policy_twice_identical():
    bundle = _small_bundle()
    a = policy_compare(bundle, ["worst-fit-adversarial"])["worst-fit-adversarial"]
    b = policy_compare(bundle, ["worst-fit-adversarial"])["worst-fit-adversarial"]
    assert a.rows == b.rows


def test_policy_compare_tags_errors_with_policy():
    bundle = make_bundle([vessel("1", 100, T0, {"reefer20": 1})], [YardBlock("I", YardCategory.IMPORT, 10)])
    with pytest.raises(Exception) as info:
        policy_compare(bundle, ["baseline-least-occupancy"])
    assert info.value.policy == "baseline-least-occupancy"
    with pytest.raises(ValueError):
        policy_compare(bundle, [])
