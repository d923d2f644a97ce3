"""Scenario files: ``yards.csv``, ``ships.csv`` and ``config.kv``.

Declared totals travel with the raw rows and are re-verified on every load.
In ``yards.csv`` a row named ``TOTAL`` declares a category subtotal (category
set) or the grand total (category empty). In ``ships.csv`` a final ``TOTAL``
row declares the TEU, actual-minute and model-minute grand totals.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field, fields, replace
from importlib import resources
from pathlib import Path
from typing import Iterator

from .des import SimTime, format_time, parse_time
from .model import (
    CONTAINER_CLASSES,
    EquipmentPool,
    Manifest,
    ServiceTimes,
    Vessel,
    YardBlock,
    YardCategory,
    category_totals,
    teu,
    yard_category_for,
)

TOTAL = "TOTAL"
YARD_COLUMNS = ["name", "category", "capacity_teu"]

COUNT_COLUMNS = [f"{side}_{c.code}" for side in ("d", "l") for c in CONTAINER_CLASSES]
SHIP_REQUIRED = [
    "id", "length_m", "arrival", "actual_start", "actual_end", "paper_model_min", "paper_model_confidence",
    *COUNT_COLUMNS, "d_teu_declared", "l_teu_declared",
]
SHIP_OPTIONAL = [
    "d_n20_declared", "d_n40_declared", "l_n20_declared", "l_n40_declared", "actual_min_declared", "teu_declared",
]
SHIP_COLUMNS = SHIP_REQUIRED + SHIP_OPTIONAL

CONFIG_KEYS = [
    "seed", "horizon", "qc_cycle_s", "truck_cycle_s", "yc_cycle_s", "berth_clearance_m", "quay_length_m",
    "quay_cranes", "yard_cranes", "trucks", "policy", "mode", "calib_min_s", "calib_max_s", "calib_step_s",
]


class ScenarioError(Exception):
    pass


class ParseError(ScenarioError):
    pass


class TotalMismatch(ScenarioError):
    pass


class TeuMismatch(TotalMismatch):
    def __init__(self, ship: str, message: str) -> None:
        super().__init__(message)
        self.ship = ship


def bundled_scenario_dir() -> Path:
    return Path(str(resources.files("quayline") / "data" / "alexandria"))


def _read_text(path: str | Path) -> str:
    with open(path, encoding="utf-8", newline="") as fh:
        return fh.read()


def _write_text(path: str | Path, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _rows(text: str, required: list[str], source: str) -> Iterator[tuple[int, dict[str, str]]]:
    reader = csv.DictReader(io.StringIO(text))
    header = reader.fieldnames or []
    missing = [c for c in required if c not in header]
    if missing:
        raise ParseError(f"{source}: header lacks {', '.join(missing)}")
    for row in reader:
        if None in row or any(v is None for v in row.values()):
            raise ParseError(f"{source}:{reader.line_num}: wrong number of fields")
        yield reader.line_num, row


def _int(value: str, what: str, where: str) -> int:
    try:
        n = int(value)
    except ValueError:
        raise ParseError(f"{where}: {what} must be an integer, got {value!r}") from None
    return n


def _opt_int(value: str | None, what: str, where: str) -> int | None:
    if value is None or value == "":
        return None
    return _int(value, what, where)


def _num(value: str) -> str:
    return f"{value:g}" if isinstance(value, float) else str(value)


# -- yards -------------------------------------------------------------------


@dataclass
class YardTable:
    blocks: list[YardBlock]
    declared_subtotals: dict[YardCategory, int] = field(default_factory=dict)
    declared_total: int | None = None

    def __iter__(self) -> Iterator[YardBlock]:
        return iter(self.blocks)

    def __len__(self) -> int:
        return len(self.blocks)

    @property
    def total(self) -> int:
        return sum(b.capacity_teu for b in self.blocks)

    def subtotals(self) -> dict[YardCategory, int]:
        return category_totals(self.blocks)

    def mismatches(self) -> list[str]:
        out = []
        sub = self.subtotals()
        for cat, declared in self.declared_subtotals.items():
            if sub[cat] != declared:
                out.append(f"TotalMismatch: {cat.value} blocks sum to {sub[cat]} TEU, declared {declared}")
        if self.declared_total is not None and self.total != self.declared_total:
            out.append(f"TotalMismatch: blocks sum to {self.total} TEU, declared total {self.declared_total}")
        return out


def parse_yards(text: str, source: str = "yards.csv", verify: bool = True) -> YardTable:
    blocks: list[YardBlock] = []
    table = YardTable(blocks)
    names: set[str] = set()
    for line, row in _rows(text, YARD_COLUMNS, source):
        where = f"{source}:{line}"
        name, cat_text = row["name"].strip(), row["category"].strip()
        cap = _int(row["capacity_teu"], "capacity_teu", where)
        if name == TOTAL:
            if cat_text:
                table.declared_subtotals[_category(cat_text, where)] = cap
            else:
                table.declared_total = cap
            continue
        if not name or name in names:
            raise ParseError(f"{where}: missing or duplicate block name {name!r}")
        if cap <= 0:
            raise ParseError(f"{where}: capacity must be positive")
        names.add(name)
        blocks.append(YardBlock(name, _category(cat_text, where), cap))
    if verify:
        problems = table.mismatches()
        if problems:
            raise TotalMismatch(problems[0])
    return table


def _category(text: str, where: str) -> YardCategory:
    try:
        return YardCategory(text)
    except ValueError:
        allowed = ", ".join(c.value for c in YardCategory)
        raise ParseError(f"{where}: category {text!r} not one of {allowed}") from None


def load_yards(path: str | Path, verify: bool = True) -> YardTable:
    return parse_yards(_read_text(path), str(path), verify)


def serialize_yards(table: YardTable) -> str:
    lines = [",".join(YARD_COLUMNS)]
    for cat in YardCategory:
        group = [b for b in table.blocks if b.category is cat]
        for b in group:
            lines.append(f"{b.name},{cat.value},{b.capacity_teu}")
        if cat in table.declared_subtotals:
            lines.append(f"{TOTAL},{cat.value},{table.declared_subtotals[cat]}")
    if table.declared_total is not None:
        lines.append(f"{TOTAL},,{table.declared_total}")
    return "\n".join(lines) + "\n"


# -- ships -------------------------------------------------------------------


@dataclass
class ShipRow:
    vessel: Vessel
    declared: dict[str, int | None]


@dataclass
class ShipTable:
    rows: list[ShipRow]
    declared_teu: int | None = None
    declared_actual_min: int | None = None
    declared_model_min: int | None = None

    @property
    def vessels(self) -> list[Vessel]:
        return [r.vessel for r in self.rows]

    def __iter__(self) -> Iterator[Vessel]:
        return iter(self.vessels)

    def __len__(self) -> int:
        return len(self.rows)

    @property
    def teu_total(self) -> int:
        return sum(teu(v.discharge) + teu(v.load) for v in self.vessels)

    @property
    def actual_min_total(self) -> int:
        return sum(v.actual_minutes or 0 for v in self.vessels)

    @property
    def model_min_total(self) -> int:
        return sum(v.paper_model_min or 0 for v in self.vessels)

    def teu_mismatches(self) -> list[tuple[str, str]]:
        out = []
        for row in self.rows:
            v, d = row.vessel, row.declared
            for side, m in (("d", v.discharge), ("l", v.load)):
                label = "discharge" if side == "d" else "load"
                got = {"n20": m.twenties, "n40": m.forties, "teu": teu(m)}
                for key, value in got.items():
                    declared = d.get(f"{side}_{key}_declared")
                    if declared is not None and declared != value:
                        out.append((v.id, f"TeuMismatch: ship {v.id} {label} {key} = {value}, declared {declared}"))
        return out

    def actual_mismatches(self) -> list[str]:
        out = []
        for row in self.rows:
            v, declared = row.vessel, row.declared.get("actual_min_declared")
            if declared is not None and v.actual_minutes != declared:
                out.append(f"TotalMismatch: ship {v.id} stamps give {v.actual_minutes} min, declared {declared}")
        return out

    def total_mismatches(self) -> list[str]:
        out = []
        for what, got, declared in (
            ("TEU", self.teu_total, self.declared_teu),
            ("actual minutes", self.actual_min_total, self.declared_actual_min),
            ("model minutes", self.model_min_total, self.declared_model_min),
        ):
            if declared is not None and got != declared:
                out.append(f"TotalMismatch: ships sum to {got} {what}, declared {declared}")
        return out


def parse_ships(text: str, source: str = "ships.csv", verify: bool = True) -> ShipTable:
    table = ShipTable([])
    seen: set[str] = set()
    for line, row in _rows(text, SHIP_REQUIRED, source):
        where = f"{source}:{line}"
        sid = row["id"].strip()
        if sid == TOTAL:
            table.declared_teu = _opt_int(row.get("teu_declared"), "teu_declared", where)
            table.declared_actual_min = _opt_int(row.get("actual_min_declared"), "actual_min_declared", where)
            table.declared_model_min = _opt_int(row["paper_model_min"], "paper_model_min", where)
            continue
        if not sid or sid in seen:
            raise ParseError(f"{where}: missing or duplicate ship id {sid!r}")
        seen.add(sid)
        counts = {}
        for side in ("d", "l"):
            counts[side] = Manifest(
                {c: _opt_int(row[f"{side}_{c.code}"], f"{side}_{c.code}", where) or 0 for c in CONTAINER_CLASSES}
            )
        try:
            length = float(row["length_m"])
            arrival = parse_time(row["arrival"])
            start = parse_time(row["actual_start"]) if row["actual_start"] else None
            end = parse_time(row["actual_end"]) if row["actual_end"] else None
            vessel = Vessel(
                id=sid,
                length_m=length,
                arrival=arrival,
                discharge=counts["d"],
                load=counts["l"],
                actual_start=start,
                actual_end=end,
                paper_model_min=_opt_int(row["paper_model_min"], "paper_model_min", where),
                paper_model_confidence=_opt_int(row["paper_model_confidence"], "paper_model_confidence", where) or 0,
            )
        except ValueError as exc:
            if isinstance(exc, ParseError):
                raise
            raise ParseError(f"{where}: {exc}") from None
        declared = {
            "d_teu_declared": _opt_int(row["d_teu_declared"], "d_teu_declared", where),
            "l_teu_declared": _opt_int(row["l_teu_declared"], "l_teu_declared", where),
        }
        for key in SHIP_OPTIONAL[:5]:
            declared[key] = _opt_int(row.get(key), key, where)
        table.rows.append(ShipRow(vessel, declared))
    if verify:
        teu_problems = table.teu_mismatches()
        if teu_problems:
            ship, message = teu_problems[0]
            raise TeuMismatch(ship, message)
        problems = table.actual_mismatches() + table.total_mismatches()
        if problems:
            raise TotalMismatch(problems[0])
    return table


def load_ships(path: str | Path, verify: bool = True) -> ShipTable:
    return parse_ships(_read_text(path), str(path), verify)


def _cell(value: int | None) -> str:
    return "" if value is None else str(value)


def serialize_ships(table: ShipTable) -> str:
    out = [",".join(SHIP_COLUMNS)]
    for row in table.rows:
        v, d = row.vessel, row.declared
        cells = [
            v.id,
            _num(v.length_m),
            format_time(v.arrival),
            format_time(v.actual_start) if v.actual_start is not None else "",
            format_time(v.actual_end) if v.actual_end is not None else "",
            _cell(v.paper_model_min),
            str(v.paper_model_confidence),
        ]
        for m in (v.discharge, v.load):
            cells.extend(_cell(m[c] or None) for c in CONTAINER_CLASSES)
        cells.extend(_cell(d.get(k)) for k in ("d_teu_declared", "l_teu_declared", *SHIP_OPTIONAL[:5]))
        cells.append("")
        out.append(",".join(cells))
    if (table.declared_teu, table.declared_actual_min, table.declared_model_min) != (None, None, None):
        cells = [""] * len(SHIP_COLUMNS)
        cells[0] = TOTAL
        cells[SHIP_COLUMNS.index("paper_model_min")] = _cell(table.declared_model_min)
        cells[SHIP_COLUMNS.index("actual_min_declared")] = _cell(table.declared_actual_min)
        cells[SHIP_COLUMNS.index("teu_declared")] = _cell(table.declared_teu)
        out.append(",".join(cells))
    return "\n".join(out) + "\n"


# -- config ------------------------------------------------------------------


@dataclass
class Config:
    seed: int = 0
    horizon: SimTime | None = None
    qc_cycle_s: int = ServiceTimes.qc_cycle_s
    truck_cycle_s: int = ServiceTimes.truck_cycle_s
    yc_cycle_s: int = ServiceTimes.yc_cycle_s
    berth_clearance_m: float = ServiceTimes.berth_clearance_m
    quay_length_m: float = EquipmentPool.quay_length_m
    quay_cranes: int = EquipmentPool.quay_cranes
    yard_cranes: int = EquipmentPool.yard_cranes
    trucks: int = EquipmentPool.trucks
    policy: str = "baseline-least-occupancy"
    mode: str = "deterministic"
    calib_min_s: int = 30
    calib_max_s: int = 300
    calib_step_s: int = 30

    @property
    def service(self) -> ServiceTimes:
        return ServiceTimes(self.qc_cycle_s, self.truck_cycle_s, self.yc_cycle_s, self.berth_clearance_m)

    @property
    def equipment(self) -> EquipmentPool:
        return EquipmentPool(self.quay_cranes, self.yard_cranes, self.trucks, self.quay_length_m)


_FLOAT_KEYS = {"berth_clearance_m", "quay_length_m"}
_STR_KEYS = {"policy", "mode"}


def parse_config(text: str, source: str = "config.kv") -> Config:
    cfg = Config()
    for n, raw in enumerate(text.split("\n"), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError(f"{source}:{n}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        where = f"{source}:{n}"
        if key not in CONFIG_KEYS:
            raise ParseError(f"{where}: unknown key {key!r}")
        if key in _STR_KEYS:
            setattr(cfg, key, value)
        elif key == "horizon":
            try:
                cfg.horizon = parse_time(value)
            except ValueError as exc:
                raise ParseError(f"{where}: {exc}") from None
        elif key in _FLOAT_KEYS:
            try:
                setattr(cfg, key, float(value))
            except ValueError:
                raise ParseError(f"{where}: {key} must be a number") from None
        else:
            setattr(cfg, key, _int(value, key, where))
    if cfg.mode not in ("deterministic", "stochastic"):
        raise ParseError(f"{source}: mode must be deterministic or stochastic")
    if not 0 <= cfg.seed < 1 << 64:
        raise ParseError(f"{source}: seed must be an unsigned 64-bit integer")
    return cfg


def load_config(path: str | Path) -> Config:
    return parse_config(_read_text(path), str(path))


def serialize_config(cfg: Config) -> str:
    lines = []
    for f in fields(cfg):
        value = getattr(cfg, f.name)
        if value is None:
            continue
        if f.name == "horizon":
            value = format_time(value)
        lines.append(f"{f.name} = {_num(value)}")
    return "\n".join(lines) + "\n"


# -- bundle ------------------------------------------------------------------


@dataclass
class ScenarioBundle:
    yard_table: YardTable
    ship_table: ShipTable
    config: Config
    source: Path | None = None

    @property
    def yards(self) -> list[YardBlock]:
        return self.yard_table.blocks

    @property
    def ships(self) -> list[Vessel]:
        return self.ship_table.vessels

    @property
    def equipment(self) -> EquipmentPool:
        return self.config.equipment

    @property
    def service(self) -> ServiceTimes:
        return self.config.service

    @property
    def seed(self) -> int:
        return self.config.seed

    @property
    def policy(self) -> str:
        return self.config.policy

    @property
    def mode(self) -> str:
        return self.config.mode

    @property
    def horizon(self) -> SimTime:
        if self.config.horizon is not None:
            return self.config.horizon
        # One week past the last arrival.
        return max((v.arrival for v in self.ships), default=0) + 7 * 86400

    def with_config(self, **changes) -> "ScenarioBundle":
        return replace(self, config=replace(self.config, **changes))


def load_scenario(directory: str | Path, verify: bool = True) -> ScenarioBundle:
    d = Path(directory)
    for name in ("yards.csv", "ships.csv", "config.kv"):
        if not (d / name).is_file():
            raise ParseError(f"{d}: missing {name}")
    return ScenarioBundle(
        load_yards(d / "yards.csv", verify),
        load_ships(d / "ships.csv", verify),
        load_config(d / "config.kv"),
        source=d,
    )


def load_bundled(verify: bool = True) -> ScenarioBundle:
    return load_scenario(bundled_scenario_dir(), verify)


# -- validation --------------------------------------------------------------


@dataclass
class Check:
    name: str
    ok: bool
    messages: list[str] = field(default_factory=list)


@dataclass
class ValidationReport:
    checks: list[Check]

    @property
    def ok(self) -> bool:
        return all(c.ok for c in self.checks)

    def failed(self) -> list[str]:
        return [c.name for c in self.checks if not c.ok]

    def render(self) -> str:
        lines = []
        for c in self.checks:
            lines.append(f"{'PASS' if c.ok else 'FAIL'}  {c.name}")
            lines.extend(f"      {m}" for m in c.messages)
        return "\n".join(lines)


def _check(name: str, messages: list[str]) -> Check:
    return Check(name, not messages, messages)


def validate(bundle: ScenarioBundle) -> ValidationReport:
    ships, yards, cfg = bundle.ship_table, bundle.yard_table, bundle.config
    horizon = bundle.horizon

    stamps = [
        f"ship {v.id}: end {format_time(v.actual_end)} not after start {format_time(v.actual_start)}"
        for v in ships
        if v.actual_start is not None and v.actual_end is not None and v.actual_end <= v.actual_start
    ]
    late = [f"ship {v.id} arrives at or after horizon {format_time(horizon)}" for v in ships if v.arrival >= horizon]
    service = [] if cfg.service.positive() else [f"non-positive service time in {cfg.service}"]
    equipment = [
        f"{name} = {getattr(cfg, name)}" for name in ("quay_cranes", "yard_cranes", "trucks", "quay_length_m")
        if getattr(cfg, name) <= 0
    ]

    have = {b.category for b in yards if b.capacity_teu > 0}
    coverage = []
    for v in ships:
        needed = {yard_category_for(c, False) for c in CONTAINER_CLASSES if v.discharge[c]}
        if v.load.boxes:
            needed.add(YardCategory.EXPORT)
        for cat in sorted(needed - have, key=lambda c: c.value):
            coverage.append(f"ship {v.id} needs a {cat.value} block; yard has none")

    fit = [
        f"ship {v.id} needs {v.length_m + cfg.berth_clearance_m:g} m of quay, quay is {cfg.quay_length_m:g} m"
        for v in ships
        if v.length_m + cfg.berth_clearance_m > cfg.quay_length_m
    ]

    return ValidationReport([
        _check("yard totals", yards.mismatches()),
        _check("ship TEU triples", [m for _, m in ships.teu_mismatches()]),
        _check("actual minutes", ships.actual_mismatches()),
        _check("ship grand totals", ships.total_mismatches()),
        _check("actual stamps ordered", stamps),
        _check("arrivals within horizon", late),
        _check("service times positive", service),
        _check("equipment counts positive", equipment),
        _check("category coverage", coverage),
        _check("vessels fit quay", fit),
    ])
