from __future__ import annotations

import pytest

from quayline.model import Manifest, Vessel, YardBlock, YardCategory, yard_category_for
from quayline.scenario import Config, ScenarioBundle, ShipRow, ShipTable, YardTable, load_bundled

T0 = 1_393_819_200  # 2014-03-03T04:00:00Z


def make_bundle(ships: list[Vessel], blocks: list[YardBlock], **config) -> ScenarioBundle:
    """Assemble an in-memory scenario without going through files."""
    config.setdefault("horizon", T0 + 30 * 86400)
    rows = [ShipRow(v, {}) for v in ships]
    return ScenarioBundle(YardTable(blocks), ShipTable(rows), Config(**config))


def all_category_blocks(capacity: int = 1000) -> list[YardBlock]:
    return [YardBlock(f"B-{c.value}", c, capacity) for c in YardCategory]


def vessel(vid: str = "1", length: float = 100, arrival: int = T0, discharge=None, load=None, **kw) -> Vessel:
    return Vessel(vid, length, arrival, Manifest.of(**(discharge or {})), Manifest.of(**(load or {})), **kw)


@pytest.fixture(scope="session")
def alexandria():
    return load_bundled()


CODES = ["full20", "full40", "haz20", "haz40", "reefer20", "reefer40", "empty20", "empty40"]


def random_scenario(r, max_ships: int = 5, max_blocks: int = 6, max_boxes: int = 6) -> ScenarioBundle:
    """Small random terminal that can always finish.

    Non-export categories get enough room for every discharged box. Export
    room is kept tight so staging has to wait for retrievals.
    """
    ships, t = [], T0
    for i in range(r.randint(1, max_ships)):
        t += r.choice([0, 0, 300, 1800, 7200])
        d = {c: r.randint(0, max_boxes) for c in r.sample(CODES, r.randint(0, 3))}
        l = {c: r.randint(0, max_boxes) for c in r.sample(CODES, r.randint(0, 2))}
        ships.append(vessel(str(i + 1), r.randint(60, 300), t, d, l))
    demand = {c: 0 for c in YardCategory}
    for v in ships:
        for cls in v.discharge.expand():
            demand[yard_category_for(cls, False)] += cls.size.teu
    blocks = []
    n_blocks = r.randint(len(YardCategory), max(len(YardCategory), max_blocks))
    extra = [r.choice(list(YardCategory)) for _ in range(n_blocks - len(YardCategory))]
    for j, cat in enumerate([*YardCategory, *extra]):
        if cat is YardCategory.EXPORT:
            cap, occ = r.randint(2, 12), 0
        else:
            occ = r.randint(0, 5)
            cap = occ + demand[cat] + r.randint(0, 10)
        blocks.append(YardBlock(f"{cat.value[:2]}{j}", cat, max(cap, 2), occ))
    return make_bundle(
        ships, blocks,
        trucks=r.randint(1, 6), yard_cranes=r.randint(1, 4), quay_cranes=r.randint(1, 5),
        qc_cycle_s=r.randint(30, 200), truck_cycle_s=r.randint(30, 400), yc_cycle_s=r.randint(30, 200),
        quay_length_m=r.choice([330, 530]),
    )


def write_scenario(bundle: ScenarioBundle, directory) -> None:
    from quayline.scenario import serialize_config, serialize_ships, serialize_yards

    directory.mkdir(parents=True, exist_ok=True)
    (directory / "yards.csv").write_text(serialize_yards(bundle.yard_table), encoding="utf-8")
    (directory / "ships.csv").write_text(serialize_ships(bundle.ship_table), encoding="utf-8")
    (directory / "config.kv").write_text(serialize_config(bundle.config), encoding="utf-8")
