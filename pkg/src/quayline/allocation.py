"""Berth and yard-block allocation policies.

Block policies are pure functions of a yard snapshot: they take a container
reference and the current blocks and return the chosen block, or raise
:class:`YardFull` when no admissible block has room.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING, Callable, Sequence

from .des import SimTime
from .model import ContainerClass, Vessel, YardBlock, YardCategory, assign_qcs, yard_category_for

if TYPE_CHECKING:
    from .metrics import KpiReport
    from .scenario import ScenarioBundle


class YardFull(Exception):
    def __init__(self, category: YardCategory, container: str = "") -> None:
        super().__init__(f"no {category.value} block can take {container or 'container'}")
        self.category = category
        self.container = container


class UnknownPolicy(KeyError):
    def __init__(self, name: str) -> None:
        super().__init__(name)
        self.name = name

    def __str__(self) -> str:
        return f"unknown policy {self.name!r}; registered: {', '.join(sorted(POLICIES))}"


@dataclass(frozen=True)
class ContainerRef:
    label: str
    cls: ContainerClass
    export: bool = False

    @property
    def teu(self) -> int:
        return self.cls.size.teu

    @property
    def category(self) -> YardCategory:
        return yard_category_for(self.cls, self.export)


@dataclass(frozen=True)
class PlacementDecision:
    container: str
    block: str
    time: SimTime


@dataclass(frozen=True)
class BerthPlan:
    vessel: str
    start_m: float
    end_m: float
    time: SimTime
    qcs: int


BlockPolicy = Callable[[ContainerRef, Sequence[YardBlock]], YardBlock]

POLICIES: dict[str, BlockPolicy] = {}


def register_policy(name: str) -> Callable[[BlockPolicy], BlockPolicy]:
    def deco(fn: BlockPolicy) -> BlockPolicy:
        POLICIES[name] = fn
        return fn

    return deco


def get_policy(name: str) -> BlockPolicy:
    try:
        return POLICIES[name]
    except KeyError:
        raise UnknownPolicy(name) from None


def _feasible(c: ContainerRef, blocks: Sequence[YardBlock]) -> list[YardBlock]:
    cat = c.category
    options = [b for b in blocks if b.category is cat and b.free_teu >= c.teu]
    if not options:
        raise YardFull(cat, c.label)
    return options


# Float ratios are exact for ordering here: distinct occupancy/capacity ratios
# with capacities below 1e6 differ by far more than one ulp.
@register_policy("baseline-least-occupancy")
def least_occupancy(c: ContainerRef, blocks: Sequence[YardBlock]) -> YardBlock:
    return min(_feasible(c, blocks), key=lambda b: (b.occupancy_teu / b.capacity_teu, b.name))


@register_policy("worst-fit-adversarial")
def fullest_feasible(c: ContainerRef, blocks: Sequence[YardBlock]) -> YardBlock:
    # Piles every box onto the fullest block that still fits, serialising yard-crane work.
    return min(_feasible(c, blocks), key=lambda b: (-b.occupancy_teu / b.capacity_teu, b.name))


def assign_block(
    c: ContainerRef,
    yard: Sequence[YardBlock],
    policy: BlockPolicy = least_occupancy,
    time: SimTime = 0,
) -> PlacementDecision:
    block = policy(c, yard)
    if block.category is not c.category or block.free_teu < c.teu:
        raise ValueError(f"policy chose inadmissible block {block.name} for {c.label}")
    return PlacementDecision(c.label, block.name, time)


def lowest_gap(occupied: Sequence[tuple[float, float]], need: float, quay_length: float) -> float | None:
    """Lowest quay offset where ``need`` metres fit between occupied intervals."""
    candidates = sorted({0.0, *(end for _, end in occupied)})
    for start in candidates:
        end = start + need
        if end > quay_length:
            continue
        if all(end <= a or start >= b for a, b in occupied):
            return start
    return None


def fcfs_berth(
    waiting: Sequence[Vessel],
    occupied: Sequence[tuple[float, float]],
    quay_length: float,
    clearance: float,
    now: SimTime = 0,
    available_qcs: int | None = None,
) -> list[BerthPlan]:
    """Berth vessels strictly in queue order until the head no longer fits.

    A vessel takes ``length_m + clearance`` metres at the lowest free offset.
    When ``available_qcs`` is given, a vessel also needs at least one idle
    quay crane; otherwise crane availability is ignored.
    """
    taken = list(occupied)
    qcs_left = available_qcs
    plans: list[BerthPlan] = []
    for v in waiting:
        need = v.length_m + clearance
        start = lowest_gap(taken, need, quay_length)
        if start is None:
            break
        if qcs_left is None:
            n = assign_qcs(v, 1 << 30)
        else:
            n = assign_qcs(v, qcs_left)
            if n == 0:
                break
            qcs_left -= n
        taken.append((start, start + need))
        plans.append(BerthPlan(v.id, start, start + need, now, n))
    return plans


def policy_compare(
    bundle: "ScenarioBundle",
    policies: Sequence[str],
    seed: int | None = None,
) -> dict[str, "KpiReport"]:
    """Simulate the scenario once per policy under the same seed and parameters."""
    from .metrics import build_report
    from .terminal import simulate

    if not policies:
        raise ValueError("need at least one policy")
    reports: dict[str, KpiReport] = {}
    for name in policies:
        policy = get_policy(name)
        try:
            result = simulate(bundle, policy=policy, seed=seed)
        except Exception as exc:
            exc.policy = name  # type: ignore[attr-defined]
            raise
        reports[name] = build_report(result.log, bundle)
    return reports
