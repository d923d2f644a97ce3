"""Terminal domain types: container classes, manifests, vessels, yard blocks, equipment."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Iterator, Mapping

from .des import SimTime


class Size(enum.Enum):
    S20 = 20
    S40 = 40

    @property
    def teu(self) -> int:
        return 1 if self is Size.S20 else 2


class Cargo(enum.Enum):
    FULL = "full"
    HAZARDOUS = "haz"
    REEFER = "reefer"
    EMPTY = "empty"


@dataclass(frozen=True)
class ContainerClass:
    cargo: Cargo
    size: Size

    @property
    def code(self) -> str:
        """Column stem used in ships.csv, e.g. ``full20``."""
        return f"{self.cargo.value}{self.size.value}"

    def __str__(self) -> str:
        return self.code


# Column order of the ship file: Full, Hazardous, Reefer, Empty; 20 then 40 within each.
CONTAINER_CLASSES: tuple[ContainerClass, ...] = tuple(
    ContainerClass(cargo, size) for cargo in Cargo for size in Size
)
_BY_CODE = {c.code: c for c in CONTAINER_CLASSES}


def container_class(code: str) -> ContainerClass:
    return _BY_CODE[code]


class Manifest(Mapping[ContainerClass, int]):
    """Box counts per container class; absent classes count zero."""

    def __init__(self, counts: Mapping[ContainerClass, int] | None = None) -> None:
        self._counts = {c: 0 for c in CONTAINER_CLASSES}
        for cls, n in (counts or {}).items():
            if n < 0:
                raise ValueError(f"negative count for {cls}")
            self._counts[cls] = int(n)

    @classmethod
    def of(cls, **codes: int) -> "Manifest":
        return cls({container_class(code): n for code, n in codes.items()})

    def __getitem__(self, cls: ContainerClass) -> int:
        return self._counts[cls]

    def __iter__(self) -> Iterator[ContainerClass]:
        return iter(CONTAINER_CLASSES)

    def __len__(self) -> int:
        return len(CONTAINER_CLASSES)

    def __repr__(self) -> str:
        inner = ", ".join(f"{c.code}={n}" for c, n in self._counts.items() if n)
        return f"Manifest({inner})"

    @property
    def twenties(self) -> int:
        return sum(n for c, n in self._counts.items() if c.size is Size.S20)

    @property
    def forties(self) -> int:
        return sum(n for c, n in self._counts.items() if c.size is Size.S40)

    @property
    def boxes(self) -> int:
        return sum(self._counts.values())

    def expand(self) -> list[ContainerClass]:
        """One entry per box, in class order."""
        return [c for c in CONTAINER_CLASSES for _ in range(self._counts[c])]


def teu(m: Manifest) -> int:
    return m.twenties + 2 * m.forties


@dataclass
class Vessel:
    id: str
    length_m: float
    arrival: SimTime
    discharge: Manifest = field(default_factory=Manifest)
    load: Manifest = field(default_factory=Manifest)
    actual_start: SimTime | None = None
    actual_end: SimTime | None = None
    paper_model_min: int | None = None
    paper_model_confidence: int = 0

    def __post_init__(self) -> None:
        if self.length_m <= 0:
            raise ValueError(f"vessel {self.id}: length must be positive")
        if "," in self.id or "/" in self.id or ";" in self.id:
            raise ValueError(f"vessel id {self.id!r} may not contain , / or ;")

    @property
    def actual_minutes(self) -> int | None:
        if self.actual_start is None or self.actual_end is None:
            return None
        return (self.actual_end - self.actual_start) // 60


class YardCategory(enum.Enum):
    EXPORT = "Export"
    IMPORT = "Import"
    HAZARDOUS = "Hazardous"
    REEFER = "Reefer"
    EMPTY = "Empty"


_DISCHARGE_CATEGORY = {
    Cargo.FULL: YardCategory.IMPORT,
    Cargo.HAZARDOUS: YardCategory.HAZARDOUS,
    Cargo.REEFER: YardCategory.REEFER,
    Cargo.EMPTY: YardCategory.EMPTY,
}


def yard_category_for(cls: ContainerClass, export: bool) -> YardCategory:
    """Category admitting a box: staged exports go to Export, discharges by cargo."""
    return YardCategory.EXPORT if export else _DISCHARGE_CATEGORY[cls.cargo]


@dataclass
class YardBlock:
    name: str
    category: YardCategory
    capacity_teu: int
    occupancy_teu: int = 0

    @property
    def free_teu(self) -> int:
        return self.capacity_teu - self.occupancy_teu

    @property
    def ratio(self) -> Fraction:
        return Fraction(self.occupancy_teu, self.capacity_teu)


@dataclass
class EquipmentPool:
    quay_cranes: int = 5
    yard_cranes: int = 8
    trucks: int = 25
    quay_length_m: float = 530

    def __post_init__(self) -> None:
        for name in ("quay_cranes", "yard_cranes", "trucks"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")


@dataclass(frozen=True)
class ServiceTimes:
    qc_cycle_s: int = 120
    truck_cycle_s: int = 300
    yc_cycle_s: int = 90
    berth_clearance_m: float = 15

    def positive(self) -> bool:
        return all(v > 0 for v in (self.qc_cycle_s, self.truck_cycle_s, self.yc_cycle_s, self.berth_clearance_m))


QC_SPACING_M = 90


def assign_qcs(v: Vessel, available: int) -> int:
    """Quay cranes granted at berthing: one per 90 m of hull, at least one."""
    if available < 0:
        raise ValueError("available must be non-negative")
    return min(available, max(1, int(v.length_m // QC_SPACING_M)))


def category_totals(blocks: Iterable[YardBlock]) -> dict[YardCategory, int]:
    totals = {c: 0 for c in YardCategory}
    for b in blocks:
        totals[b.category] += b.capacity_teu
    return totals
