from __future__ import annotations

import csv
import io
import shutil
from dataclasses import replace

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from quayline.model import YardCategory, teu
from quayline.scenario import (
    ParseError,
    ScenarioError,
    TeuMismatch,
    TotalMismatch,
    YardTable,
    bundled_scenario_dir,
    load_config,
    load_scenario,
    load_ships,
    load_yards,
    parse_config,
    parse_ships,
    parse_yards,
    serialize_config,
    serialize_ships,
    serialize_yards,
    validate,
)

DATA = bundled_scenario_dir()
YARDS_TEXT = (DATA / "yards.csv").read_text(encoding="utf-8")
SHIPS_TEXT = (DATA / "ships.csv").read_text(encoding="utf-8")


def test_bundled_yard_file():
    table = load_yards(DATA / "yards.csv")
    assert len(table.blocks) == 15
    assert table.total == 15666
    sub = table.subtotals()
    assert [sub[c] for c in YardCategory] == [2580, 8980, 486, 500, 3120]
    assert sum(b.capacity_teu for b in table.blocks if b.category is YardCategory.EXPORT) == 1050 + 600 + 930


def test_yard_total_mismatch():
    with pytest.raises(TotalMismatch):
        parse_yards(YARDS_TEXT.replace("TOTAL,,15666", "TOTAL,,15000"))


def test_yard_parse_errors():
    with pytest.raises(ParseError):
        parse_yards("name,category,capacity_teu\nX,Garage,10\n")
    with pytest.raises(ParseError):
        parse_yards("name,category,capacity_teu\nX,Import,ten\n")
    with pytest.raises(ParseError):
        parse_yards("name,category\nX,Import\n")
    with pytest.raises(ParseError):
        parse_yards("name,category,capacity_teu\nX,Import,10\nX,Import,10\n")


def test_bundled_ship_file():
    table = load_ships(DATA / "ships.csv")
    assert len(table) == 12
    assert table.teu_total == 9531
    assert table.actual_min_total == 11353
    assert table.model_min_total == 6403
    ship10 = table.vessels[9]
    assert (ship10.discharge.twenties, ship10.discharge.forties, teu(ship10.discharge)) == (3, 43, 89)
    assert ship10.actual_minutes == 150


def test_ship_teu_mismatch_names_ship():
    rows = SHIPS_TEXT.splitlines()
    i = next(k for k, r in enumerate(rows) if r.startswith("10,"))
    cells = rows[i].split(",")
    header = rows[0].split(",")
    assert cells[header.index("d_teu_declared")] == "89"
    cells[header.index("d_teu_declared")] = "90"
    rows[i] = ",".join(cells)
    with pytest.raises(TeuMismatch) as info:
        parse_ships("\n".join(rows) + "\n")
    assert info.value.ship == "10"


@pytest.mark.parametrize("name,text,dump", [
    ("yards.csv", YARDS_TEXT, lambda t: serialize_yards(parse_yards(t))),
    ("ships.csv", SHIPS_TEXT, lambda t: serialize_ships(parse_ships(t))),
])
def test_round_trip_is_byte_identical(name, text, dump):
    assert dump(text) == text


def test_config_round_trip_and_errors():
    text = (DATA / "config.kv").read_text(encoding="utf-8")
    assert serialize_config(parse_config(text)) == text
    cfg = load_config(DATA / "config.kv")
    assert (cfg.quay_cranes, cfg.yard_cranes, cfg.trucks, cfg.quay_length_m) == (5, 8, 25, 530)
    with pytest.raises(ParseError):
        parse_config("colour = blue\n")
    with pytest.raises(ParseError):
        parse_config("trucks = many\n")


def _declared_cells(text: str, total_columns: set[str], total_ids: set[str], data_columns: set[str]):
    rows = list(csv.reader(io.StringIO(text)))
    header = rows[0]
    cells = []
    for r, row in enumerate(rows[1:], 1):
        for c, col in enumerate(header):
            is_total_row = row[0] in total_ids
            if row[c] and ((col in total_columns and is_total_row) or col in data_columns):
                cells.append((r, c))
    return rows, cells


YARD_CELLS = _declared_cells(YARDS_TEXT, {"capacity_teu"}, {"TOTAL"}, set())
SHIP_CELLS = _declared_cells(
    SHIPS_TEXT, {"paper_model_min"}, {"TOTAL"},
    {"d_teu_declared", "l_teu_declared", "d_n20_declared", "d_n40_declared", "l_n20_declared",
     "l_n40_declared", "actual_min_declared", "teu_declared"},
)


def _flip(rows, cell, pos, digit) -> str:
    r, c = cell
    value = rows[r][c]
    pos %= len(value)
    if value[pos] == str(digit):
        digit = (digit + 1) % 10
    new_rows = [list(x) for x in rows]
    new_rows[r][c] = value[:pos] + str(digit) + value[pos + 1:]
    out = io.StringIO()
    csv.writer(out, lineterminator="\n").writerows(new_rows)
    return out.getvalue()


@settings(max_examples=300, deadline=None)
@given(st.data(), st.integers(0, 9), st.integers(0, 9))
def test_any_single_digit_flip_in_a_total_is_detected(data, pos, digit):
    which = data.draw(st.sampled_from(["yards", "ships"]))
    rows, cells = YARD_CELLS if which == "yards" else SHIP_CELLS
    cell = data.draw(st.sampled_from(cells))
    text = _flip(rows, cell, pos, digit)
    parse = parse_yards if which == "yards" else parse_ships
    with pytest.raises(TotalMismatch):
        parse(text)


def test_cells_under_test_cover_all_totals():
    assert len(YARD_CELLS[1]) == 6
    # 12 ships x 7 declared cells (actual 3 and teu 0 per row) plus 3 in the TOTAL row
    assert len(SHIP_CELLS[1]) == 12 * 7 + 3


def test_missing_file_is_parse_error(tmp_path):
    shutil.copytree(DATA, tmp_path / "s")
    (tmp_path / "s" / "ships.csv").unlink()
    with pytest.raises(ParseError):
        load_scenario(tmp_path / "s")


def report_failed(bundle):
    return validate(bundle).failed()


def test_bundled_scenario_validates(alexandria):
    report = validate(alexandria)
    assert report.ok, report.render()
    assert len(report.checks) == 10


def test_zero_trucks_fails_only_equipment(alexandria):
    report = validate(alexandria.with_config(trucks=0))
    assert report.failed() == ["equipment counts positive"]


def test_missing_reefer_block_fails_coverage(alexandria):
    blocks = [b for b in alexandria.yards if b.category is not YardCategory.REEFER]
    bundle = replace(alexandria, yard_table=YardTable(blocks))
    assert report_failed(bundle) == ["category coverage"]


def test_validation_flags_late_arrivals_and_bad_service(alexandria):
    first = alexandria.ships[0].arrival
    assert "arrivals within horizon" in report_failed(alexandria.with_config(horizon=first))
    assert report_failed(alexandria.with_config(yc_cycle_s=0)) == ["service times positive"]


def test_ship_12_kept_and_horizon_covers_departures(alexandria):
    ship12 = alexandria.ships[-1]
    assert ship12.id == "12" and ship12.actual_minutes == 2625
    assert all(v.actual_end <= alexandria.horizon for v in alexandria.ships)


def test_scenario_error_hierarchy():
    assert issubclass(TeuMismatch, TotalMismatch) and issubclass(TotalMismatch, ScenarioError)
