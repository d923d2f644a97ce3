"""Discharge/load lifecycle of vessels at the quay, trucks, and yard blocks.

Every activity is committed when it is scheduled: the dispatcher reserves
cranes, trucks and yard capacity, then schedules the logged event that
marks the activity. Resulting event kinds:

    arrive, stage, berth, qc_lift, truck_depart, truck_arrive,
    yc_stack, yc_retrieve, qc_load, depart

Discharge box:  qc_lift (lift starts; QC + truck granted)
                -> truck_depart (+qc cycle; QC free)
                -> truck_arrive (+truck cycle; truck free, box queued at block)
                -> yc_stack (+yc cycle, once a YC and the block are free)
Load box:       stage (at vessel arrival, into an Export block; FCFS when space is short)
                -> yc_retrieve (YC + block + truck granted)
                -> truck_depart (+yc cycle; YC and block free)
                -> truck_arrive (+truck cycle; truck free, box at quay)
                -> qc_load (+qc cycle, once one of the vessel's QCs is free)

A block is worked by at most one yard crane at a time. Loading starts only
after every discharged box of the vessel is stacked.
"""

from __future__ import annotations

import logging
import re
from collections import deque
from dataclasses import dataclass, field
from typing import TYPE_CHECKING

from .allocation import POLICIES, BlockPolicy, ContainerRef, YardFull, fcfs_berth, get_policy
from .des import Engine, Event, SimTime, SimulationLog, SplitMix64
from .model import ContainerClass, EquipmentPool, ServiceTimes, Vessel, YardBlock, YardCategory

if TYPE_CHECKING:
    from .scenario import ScenarioBundle

log = logging.getLogger(__name__)


class DeadlockError(RuntimeError):
    """The event queue emptied while vessels were still unfinished."""

    def __init__(self, message: str, starved: list[str]) -> None:
        super().__init__(message)
        self.starved = starved


class HorizonExceeded(RuntimeError):
    pass


def natural_key(label: str) -> tuple:
    return tuple(int(p) if p.isdigit() else p for p in re.split(r"(\d+)", label))


@dataclass(eq=False)
class Box:
    label: str
    ship: "ShipRun"
    cls: ContainerClass
    export: bool
    block: YardBlock | None = None
    qc: str = ""
    truck: str = ""
    yc: str = ""
    dur: int = 0
    staged: bool = False

    @property
    def teu(self) -> int:
        return self.cls.size.teu

    @property
    def ref(self) -> ContainerRef:
        return ContainerRef(self.label, self.cls, self.export)


@dataclass(eq=False)
class ShipRun:
    vessel: Vessel
    discharge: deque[Box] = field(default_factory=deque)
    exports: list[Box] = field(default_factory=list)
    phase: str = "due"  # due, waiting, berthing, discharge, load, departing, done
    blocked: list[Box] = field(default_factory=list)
    blocked_version: int = -1
    unstaged: list[Box] = field(default_factory=list)
    quay_buffer: deque[Box] = field(default_factory=deque)
    interval: tuple[float, float] | None = None
    qcs: list[str] = field(default_factory=list)
    qcs_free: list[str] = field(default_factory=list)
    n_discharge: int = 0
    stacked: int = 0
    loaded: int = 0
    first_handling: SimTime | None = None
    berth_time: SimTime | None = None
    depart_time: SimTime | None = None

    @property
    def label(self) -> str:
        return self.vessel.id

    @property
    def n_load(self) -> int:
        return len(self.exports)


@dataclass
class SimResult:
    log: SimulationLog
    ships: list[ShipRun]
    blocks: list[YardBlock]
    start: SimTime
    horizon: SimTime
    equipment: EquipmentPool
    service: ServiceTimes
    policy: str
    seed: int
    mode: str
    scheduled: int
    dispatched: int


class _Pool:
    """Identical units handed out lowest-label first."""

    def __init__(self, prefix: str, n: int, width: int) -> None:
        self.labels = [f"{prefix}{i:0{width}d}" for i in range(1, n + 1)]
        self.free = list(self.labels)

    def take(self) -> str:
        return self.free.pop(0)

    def give(self, unit: str) -> None:
        self.free.append(unit)
        self.free.sort()

    @property
    def busy(self) -> int:
        return len(self.labels) - len(self.free)


@dataclass(eq=False)
class _YardJob:
    box: Box
    retrieve: bool
    ready: SimTime
    seq: int


class Terminal:
    def __init__(
        self,
        ships: list[Vessel],
        blocks: list[YardBlock],
        equipment: EquipmentPool,
        service: ServiceTimes,
        policy: BlockPolicy,
        rng: SplitMix64 | None = None,
    ) -> None:
        self.equipment = equipment
        self.service = service
        self.policy = policy
        self.rng = rng
        self.blocks = [YardBlock(b.name, b.category, b.capacity_teu, b.occupancy_teu) for b in blocks]
        self.block_by_name = {b.name: b for b in self.blocks}
        self.physical = {b.name: b.occupancy_teu for b in self.blocks}
        self.block_busy: dict[str, bool] = {b.name: False for b in self.blocks}
        self.block_queue: dict[str, deque[_YardJob]] = {b.name: deque() for b in self.blocks}
        self.yard_version = 0
        self._staging_version = 0
        self._job_seq = 0

        width = lambda n: max(1, len(str(n)))  # noqa: E731
        self.qcs = _Pool("QC", equipment.quay_cranes, 1)
        self.trucks = _Pool("T", equipment.trucks, width(equipment.trucks))
        self.ycs = _Pool("YC", equipment.yard_cranes, 1)

        ordered = sorted(ships, key=lambda v: (v.arrival, natural_key(v.id)))
        self.ships: list[ShipRun] = []
        for v in ordered:
            run = ShipRun(v)
            for i, cls in enumerate(v.discharge.expand(), 1):
                run.discharge.append(Box(f"{v.id}/D{i:04d}", run, cls, export=False))
            run.n_discharge = len(run.discharge)
            run.exports = [Box(f"{v.id}/L{i:04d}", run, cls, export=True) for i, cls in enumerate(v.load.expand(), 1)]
            self.ships.append(run)
        self.waiting: list[ShipRun] = []
        self.berthed: list[ShipRun] = []

        start = ordered[0].arrival if ordered else 0
        self.engine = Engine(start)
        for run in self.ships:
            self.engine.schedule(run.vessel.arrival, "arrive", run)

    # -- durations ---------------------------------------------------------

    def _dur(self, mean: int) -> int:
        if self.rng is None:
            return mean
        spread = mean // 4
        return max(1, self.rng.randint(mean - spread, mean + spread))

    # -- event handlers ----------------------------------------------------

    def handle(self, ev: Event) -> str:
        detail = getattr(self, f"_on_{ev.kind}")(ev)
        self._dispatch(ev.time)
        return detail

    def _on_arrive(self, ev: Event) -> str:
        run: ShipRun = ev.payload
        run.phase = "waiting"
        self.waiting.append(run)
        run.unstaged = list(run.exports)
        self._stage_pending(ev.time)
        v = run.vessel
        return f"length_m={v.length_m:g};discharge={run.n_discharge};load={run.n_load}"

    def _on_stage(self, ev: Event) -> str:
        box: Box = ev.payload
        self.physical[box.block.name] += box.teu
        box.staged = True
        if box.ship.phase == "load":
            self._enqueue(box, retrieve=True, now=ev.time)
        return f"vessel={box.ship.label};block={box.block.name};teu={box.teu}"

    def _on_berth(self, ev: Event) -> str:
        run: ShipRun = ev.payload
        run.phase = "discharge"
        run.berth_time = ev.time
        if not run.discharge:
            self._enter_load(run, ev.time)
        a, b = run.interval
        return f"start_m={a:g};end_m={b:g};qcs={'+'.join(run.qcs)}"

    def _on_qc_lift(self, ev: Event) -> str:
        box: Box = ev.payload
        self._mark_handling(box.ship, ev.time)
        self.engine.schedule(ev.time + box.dur, "truck_depart", box)
        return (
            f"vessel={box.ship.label};qc={box.qc};truck={box.truck};block={box.block.name};"
            f"class={box.cls.code};teu={box.teu};dur={box.dur}"
        )

    def _on_truck_depart(self, ev: Event) -> str:
        box: Box = ev.payload
        if box.export:
            self.ycs.give(box.yc)
            self.block_busy[box.block.name] = False
        else:
            box.ship.qcs_free.append(box.qc)
            box.ship.qcs_free.sort()
        trip = self._dur(self.service.truck_cycle_s)
        self.engine.schedule(ev.time + trip, "truck_arrive", box)
        return f"vessel={box.ship.label};truck={box.truck};dir={'L' if box.export else 'D'};dur={trip}"

    def _on_truck_arrive(self, ev: Event) -> str:
        box: Box = ev.payload
        self.trucks.give(box.truck)
        if box.export:
            box.ship.quay_buffer.append(box)
        else:
            self._enqueue(box, retrieve=False, now=ev.time)
        return f"vessel={box.ship.label};truck={box.truck};dir={'L' if box.export else 'D'}"

    def _on_yc_stack(self, ev: Event) -> str:
        box: Box = ev.payload
        name = box.block.name
        self.physical[name] += box.teu
        self.ycs.give(box.yc)
        self.block_busy[name] = False
        run = box.ship
        run.stacked += 1
        if run.stacked == run.n_discharge:
            self._enter_load(run, ev.time)
        return f"vessel={run.label};yc={box.yc};block={name};class={box.cls.code};teu={box.teu};dur={box.dur}"

    def _on_yc_retrieve(self, ev: Event) -> str:
        box: Box = ev.payload
        name = box.block.name
        self._mark_handling(box.ship, ev.time)
        self.physical[name] -= box.teu
        box.block.occupancy_teu -= box.teu
        self.yard_version += 1
        self.engine.schedule(ev.time + box.dur, "truck_depart", box)
        return (
            f"vessel={box.ship.label};yc={box.yc};truck={box.truck};block={name};"
            f"class={box.cls.code};teu={box.teu};dur={box.dur}"
        )

    def _on_qc_load(self, ev: Event) -> str:
        box: Box = ev.payload
        run = box.ship
        run.qcs_free.append(box.qc)
        run.qcs_free.sort()
        run.loaded += 1
        if run.loaded == run.n_load:
            run.phase = "departing"
            self.engine.schedule(ev.time, "depart", run)
        return f"vessel={run.label};qc={box.qc};class={box.cls.code};teu={box.teu};dur={box.dur}"

    def _on_depart(self, ev: Event) -> str:
        run: ShipRun = ev.payload
        run.phase = "done"
        run.depart_time = ev.time
        self.berthed.remove(run)
        for qc in run.qcs:
            self.qcs.give(qc)
        handled = 0 if run.first_handling is None else ev.time - run.first_handling
        return f"handled_s={handled};qcs={'+'.join(run.qcs)}"

    # -- helpers -----------------------------------------------------------

    def _mark_handling(self, run: ShipRun, t: SimTime) -> None:
        if run.first_handling is None:
            run.first_handling = t

    def _enter_load(self, run: ShipRun, now: SimTime) -> None:
        if run.n_load == 0:
            run.phase = "departing"
            self.engine.schedule(now, "depart", run)
            return
        run.phase = "load"
        for box in run.exports:
            if box.staged:
                self._enqueue(box, retrieve=True, now=now)

    def _enqueue(self, box: Box, retrieve: bool, now: SimTime) -> None:
        self.block_queue[box.block.name].append(_YardJob(box, retrieve, now, self._job_seq))
        self._job_seq += 1

    def _place(self, box: Box) -> bool:
        try:
            block = self.policy(box.ref, self.blocks)
        except YardFull:
            return False
        if block.category is not box.ref.category or block.free_teu < box.teu:
            raise ValueError(f"policy chose inadmissible block {block.name} for {box.label}")
        block.occupancy_teu += box.teu
        box.block = block
        return True

    def _stage_pending(self, now: SimTime) -> None:
        # Staging is first come first served like berthing: a vessel's exports
        # wait while an earlier vessel still has boxes to stage, otherwise later
        # arrivals could fill the export blocks and starve the vessel at the quay.
        for run in self.ships:
            if run.phase == "due" or not run.unstaged:
                continue
            while run.unstaged and self._place(run.unstaged[0]):
                self.engine.schedule(now, "stage", run.unstaged.pop(0))
            if run.unstaged:
                return

    # -- dispatcher --------------------------------------------------------

    def _dispatch(self, now: SimTime) -> None:
        self._berth(now)
        if self.yard_version != self._staging_version:
            self._staging_version = self.yard_version
            self._stage_pending(now)
        for run in list(self.berthed):
            if run.phase == "discharge":
                self._start_lifts(run, now)
            elif run.phase == "load":
                self._start_loads(run, now)
        self._start_yard(now)

    def _berth(self, now: SimTime) -> None:
        if not self.waiting:
            return
        occupied = [r.interval for r in self.berthed]
        plans = fcfs_berth(
            [r.vessel for r in self.waiting],
            occupied,
            self.equipment.quay_length_m,
            self.service.berth_clearance_m,
            now,
            available_qcs=len(self.qcs.free),
        )
        for plan in plans:
            run = self.waiting.pop(0)
            assert run.vessel.id == plan.vessel
            run.phase = "berthing"
            run.interval = (plan.start_m, plan.end_m)
            run.qcs = [self.qcs.take() for _ in range(plan.qcs)]
            run.qcs_free = list(run.qcs)
            self.berthed.append(run)
            self.engine.schedule(now, "berth", run)

    def _start_lifts(self, run: ShipRun, now: SimTime) -> None:
        if run.blocked and run.blocked_version != self.yard_version:
            run.discharge.extendleft(reversed(run.blocked))
            run.blocked = []
        while run.qcs_free and self.trucks.free and run.discharge:
            box = run.discharge.popleft()
            if not self._place(box):
                run.blocked.append(box)
                run.blocked_version = self.yard_version
                continue
            box.qc = run.qcs_free.pop(0)
            box.truck = self.trucks.take()
            box.dur = self._dur(self.service.qc_cycle_s)
            self.engine.schedule(now, "qc_lift", box)

    def _start_loads(self, run: ShipRun, now: SimTime) -> None:
        while run.qcs_free and run.quay_buffer:
            box = run.quay_buffer.popleft()
            box.qc = run.qcs_free.pop(0)
            box.dur = self._dur(self.service.qc_cycle_s)
            self.engine.schedule(now + box.dur, "qc_load", box)

    def _start_yard(self, now: SimTime) -> None:
        while self.ycs.free:
            best: _YardJob | None = None
            for name, queue in self.block_queue.items():
                if not queue or self.block_busy[name]:
                    continue
                job = queue[0]
                if job.retrieve and not self.trucks.free:
                    continue
                if best is None or (job.ready, job.seq) < (best.ready, best.seq):
                    best = job
            if best is None:
                return
            box = best.box
            self.block_queue[box.block.name].popleft()
            self.block_busy[box.block.name] = True
            box.yc = self.ycs.take()
            box.dur = self._dur(self.service.yc_cycle_s)
            if best.retrieve:
                box.truck = self.trucks.take()
                self.engine.schedule(now, "yc_retrieve", box)
            else:
                self.engine.schedule(now + box.dur, "yc_stack", box)

    # -- run ---------------------------------------------------------------

    def run(self, horizon: SimTime) -> SimulationLog:
        self.engine.run_until(max(horizon, self.engine.clock), self.handle)
        unfinished = [r for r in self.ships if r.phase != "done"]
        if unfinished:
            ids = ", ".join(r.label for r in unfinished)
            if self.engine.pending:
                raise HorizonExceeded(f"horizon reached with vessels {ids} unfinished")
            starved = self._diagnose(unfinished)
            raise DeadlockError(f"deadlock: vessels {ids} unfinished; starved: {'; '.join(starved)}", starved)
        return self.engine.log

    def _diagnose(self, unfinished: list[ShipRun]) -> list[str]:
        reasons: list[str] = []
        cats: dict[YardCategory, int] = {}
        for run in unfinished:
            for box in run.blocked:
                cat = box.ref.category
                cats[cat] = cats.get(cat, 0) + 1
            if run.unstaged:
                cats[YardCategory.EXPORT] = cats.get(YardCategory.EXPORT, 0) + len(run.unstaged)
        for cat in YardCategory:
            if cat in cats:
                reasons.append(f"{cat.value} category ({cats[cat]} boxes without yard space)")
        clearance = self.service.berth_clearance_m
        for run in unfinished:
            if run.phase == "waiting" and run.vessel.length_m + clearance > self.equipment.quay_length_m:
                reasons.append(f"quay length (vessel {run.label} needs {run.vessel.length_m + clearance:g} m)")
        for name, n in (("quay_cranes", self.equipment.quay_cranes), ("trucks", self.equipment.trucks),
                        ("yard_cranes", self.equipment.yard_cranes)):
            if n == 0:
                reasons.append(f"{name} (pool is empty)")
        return reasons or ["unknown"]


def simulate(
    bundle: "ScenarioBundle",
    policy: BlockPolicy | str | None = None,
    seed: int | None = None,
    service: ServiceTimes | None = None,
    mode: str | None = None,
) -> SimResult:
    """Run one scenario to its horizon and return the log plus final state."""
    policy = policy if policy is not None else bundle.policy
    if isinstance(policy, str):
        policy_name, policy_fn = policy, get_policy(policy)
    else:
        policy_fn = policy
        policy_name = next((k for k, v in POLICIES.items() if v is policy_fn), getattr(policy_fn, "__name__", "custom"))
    seed = bundle.seed if seed is None else seed
    mode = mode or bundle.mode
    service = service or bundle.service
    if mode not in ("deterministic", "stochastic"):
        raise ValueError(f"unknown mode {mode!r}")
    rng = SplitMix64(seed) if mode == "stochastic" else None
    term = Terminal(bundle.ships, bundle.yards, bundle.equipment, service, policy_fn, rng)
    log.debug("simulating %d vessels with %s (%s, seed %d)", len(bundle.ships), policy_name, mode, seed)
    events = term.run(bundle.horizon)
    return SimResult(
        log=events,
        ships=term.ships,
        blocks=term.blocks,
        start=term.engine.log[0].time if len(events) else bundle.horizon,
        horizon=bundle.horizon,
        equipment=bundle.equipment,
        service=service,
        policy=policy_name,
        seed=seed,
        mode=mode,
        scheduled=term.engine.scheduled,
        dispatched=term.engine.dispatched,
    )
