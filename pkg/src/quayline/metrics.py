"""KPIs from simulation logs, service-time calibration, and report files."""

from __future__ import annotations

import itertools
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from decimal import ROUND_HALF_EVEN, Decimal
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .des import LogRecord, SimulationLog
from .model import ServiceTimes, Vessel, YardBlock, YardCategory

log = logging.getLogger(__name__)

PAPER_CLAIMED_REDUCTION_PCT = 54
KPI_HEADER = "ship,actual_min,simulated_min,paper_model_min,reduction_pct"

_CENT = Decimal("0.01")


class ShipIncomplete(LookupError):
    pass


class NoConfidentTargets(ValueError):
    pass


def reduction_pct(actual_total: float, model_total: float) -> float:
    if actual_total == 0:
        raise ZeroDivisionError("actual total is zero")
    return 100.0 * (actual_total - model_total) / actual_total


def handling_seconds(log: Iterable[LogRecord]) -> dict[str, int]:
    """Seconds from each vessel's first qc_lift/yc_retrieve to its depart.

    Vessels without any handling event count zero; vessels that never
    depart are absent.
    """
    first: dict[str, int] = {}
    out: dict[str, int] = {}
    for rec in log:
        if rec.kind in ("qc_lift", "yc_retrieve"):
            ship = rec.fields()["vessel"]
            first.setdefault(ship, rec.time)
        elif rec.kind == "depart":
            out[rec.entity] = rec.time - first.get(rec.entity, rec.time)
    return out


def ship_handling_minutes(log: Iterable[LogRecord], ship: str) -> float:
    seconds = handling_seconds(log)
    if ship not in seconds:
        raise ShipIncomplete(f"vessel {ship} has no depart event")
    return seconds[ship] / 60


def actual_log(vessels: Sequence[Vessel]) -> SimulationLog:
    """Two-record log per vessel (first handling, depart) at its recorded stamps."""
    records = []
    for v in vessels:
        if v.actual_start is None or v.actual_end is None:
            continue
        records.append((v.actual_start, "qc_lift", v.id, f"vessel={v.id}"))
        records.append((v.actual_end, "depart", v.id, ""))
    records.sort(key=lambda r: r[0])
    return SimulationLog([LogRecord(t, i, kind, entity, detail) for i, (t, kind, entity, detail) in enumerate(records)])


def _round(minutes: Decimal) -> Decimal:
    return minutes.quantize(_CENT, rounding=ROUND_HALF_EVEN)


@dataclass
class ShipKpi:
    ship: str
    simulated_s: int
    actual_min: int | None
    paper_model_min: int | None = None
    confidence: int = 0

    @property
    def simulated_min(self) -> Decimal:
        return _round(Decimal(self.simulated_s) / 60)

    @property
    def reduction_pct(self) -> float | None:
        if not self.actual_min:
            return None
        return reduction_pct(self.actual_min, float(self.simulated_min))


@dataclass
class KpiReport:
    rows: list[ShipKpi]
    peak_occupancy: dict[str, int] = field(default_factory=dict)
    utilization: dict[str, float] = field(default_factory=dict)
    manifest: dict[str, str] = field(default_factory=dict)
    paper_claimed_reduction_pct: int = PAPER_CLAIMED_REDUCTION_PCT

    @property
    def simulated_total_min(self) -> Decimal:
        return sum((r.simulated_min for r in self.rows), Decimal(0))

    @property
    def actual_total_min(self) -> int:
        return sum(r.actual_min or 0 for r in self.rows)

    @property
    def paper_model_total_min(self) -> int | None:
        if any(r.paper_model_min is None for r in self.rows):
            return None
        return sum(r.paper_model_min for r in self.rows)

    @property
    def reduction_pct(self) -> float | None:
        if not self.actual_total_min:
            return None
        return reduction_pct(self.actual_total_min, float(self.simulated_total_min))

    @property
    def paper_model_reduction_pct(self) -> float | None:
        model = self.paper_model_total_min
        if model is None or not self.actual_total_min:
            return None
        return reduction_pct(self.actual_total_min, model)

    def simulated_by_ship(self) -> dict[str, Decimal]:
        return {r.ship: r.simulated_min for r in self.rows}


def peak_occupancy(log: Iterable[LogRecord], blocks: Sequence[YardBlock]) -> dict[str, int]:
    category = {b.name: b.category for b in blocks}
    level = {c: 0 for c in YardCategory}
    for b in blocks:
        level[b.category] += b.occupancy_teu
    peak = dict(level)
    for rec in log:
        sign = {"stage": 1, "yc_stack": 1, "yc_retrieve": -1}.get(rec.kind)
        if sign is None:
            continue
        f = rec.fields()
        cat = category[f["block"]]
        level[cat] += sign * int(f["teu"])
        peak[cat] = max(peak[cat], level[cat])
    return {c.value: peak[c] for c in YardCategory}


def busy_seconds(log: Iterable[LogRecord]) -> dict[str, int]:
    busy = {"qc": 0, "truck": 0, "yc": 0}
    granted: dict[str, int] = {}
    for rec in log:
        if rec.kind in ("qc_lift", "qc_load"):
            busy["qc"] += int(rec.fields()["dur"])
        if rec.kind in ("yc_stack", "yc_retrieve"):
            busy["yc"] += int(rec.fields()["dur"])
        if rec.kind in ("qc_lift", "yc_retrieve"):
            granted[rec.entity] = rec.time
        elif rec.kind == "truck_arrive":
            busy["truck"] += rec.time - granted.pop(rec.entity)
    return busy


def utilization(log: SimulationLog, pools: Mapping[str, int], start: int, horizon: int) -> dict[str, float]:
    span = horizon - start
    busy = busy_seconds(log)
    return {k: (busy[k] / (pools[k] * span) if pools[k] and span > 0 else 0.0) for k in busy}


def build_report(log: SimulationLog, bundle, manifest: Mapping[str, str] | None = None) -> KpiReport:
    """Assemble per-ship rows (scenario order), yard peaks and utilisation."""
    seconds = handling_seconds(log)
    rows = []
    for v in bundle.ships:
        if v.id not in seconds:
            raise ShipIncomplete(f"vessel {v.id} has no depart event")
        rows.append(ShipKpi(v.id, seconds[v.id], v.actual_minutes, v.paper_model_min, v.paper_model_confidence))
    eq = bundle.equipment
    start = log[0].time if len(log) else bundle.horizon
    return KpiReport(
        rows=rows,
        peak_occupancy=peak_occupancy(log, bundle.yards),
        utilization=utilization(log, {"qc": eq.quay_cranes, "truck": eq.trucks, "yc": eq.yard_cranes}, start, bundle.horizon),
        manifest=dict(manifest or {}),
    )


# -- report files -------------------------------------------------------------


def _fmt_pct(value: float | None) -> str:
    return "" if value is None else f"{value:.2f}"


def _trailer(report: KpiReport) -> list[str]:
    return [f"# {k} = {v}" for k, v in report.manifest.items()]


def kpi_csv(report: KpiReport) -> str:
    lines = [KPI_HEADER]
    for r in report.rows:
        lines.append(
            f"{r.ship},{'' if r.actual_min is None else r.actual_min},{r.simulated_min},"
            f"{'' if r.paper_model_min is None else r.paper_model_min},{_fmt_pct(r.reduction_pct)}"
        )
    model_total = report.paper_model_total_min
    lines.append(
        f"total,{report.actual_total_min},{report.simulated_total_min},"
        f"{'' if model_total is None else model_total},{_fmt_pct(report.reduction_pct)}"
    )
    lines.append(f"# paper_model_reduction_pct = {_fmt_pct(report.paper_model_reduction_pct)}")
    lines.append(f"# paper_claimed_reduction_pct = {report.paper_claimed_reduction_pct}")
    for cat, teu_ in report.peak_occupancy.items():
        lines.append(f"# peak_occupancy_teu.{cat} = {teu_}")
    for k, u in report.utilization.items():
        lines.append(f"# utilization.{k} = {u:.6f}")
    lines.extend(_trailer(report))
    return "\n".join(lines) + "\n"


def compare_dat(report: KpiReport) -> str:
    lines = ["# actual_min simulated_min (one vessel per line, scenario order)"]
    for r in report.rows:
        lines.append(f"{'' if r.actual_min is None else r.actual_min} {r.simulated_min}")
    lines.extend(_trailer(report))
    return "\n".join(lines) + "\n"


def emit_report(report: KpiReport, out_dir: str | Path) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for name, text in (("kpi.csv", kpi_csv(report)), ("compare.dat", compare_dat(report))):
        path = out / name
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        written.append(path)
    return written


# -- calibration ---------------------------------------------------------------


def lattice(lo: int, hi: int, step: int) -> list[int]:
    if step <= 0 or lo <= 0 or hi < lo:
        raise ValueError("lattice needs 0 < lo <= hi and step > 0")
    return list(range(lo, hi + 1, step))


@dataclass
class Residual:
    ship: str
    target_min: float
    simulated_min: float

    @property
    def residual_min(self) -> float:
        return self.simulated_min - self.target_min


@dataclass
class CalibrationResult:
    service: ServiceTimes
    loss: float
    residuals: list[Residual]
    evaluated: int
    grid: list[int]

    def config_fragment(self) -> str:
        s = self.service
        return f"qc_cycle_s = {s.qc_cycle_s}\ntruck_cycle_s = {s.truck_cycle_s}\nyc_cycle_s = {s.yc_cycle_s}\n"

    def residual_csv(self) -> str:
        lines = ["ship,target_min,simulated_min,residual_min"]
        for r in self.residuals:
            lines.append(f"{r.ship},{r.target_min:g},{r.simulated_min:.2f},{r.residual_min:.2f}")
        lines.append(f"# loss_min2 = {self.loss:.4f}")
        lines.append(f"# lattice_s = {self.grid[0]}..{self.grid[-1]} step {self.grid[1] - self.grid[0] if len(self.grid) > 1 else 0}")
        lines.append(f"# evaluated = {self.evaluated}")
        return "\n".join(lines) + "\n"


def confident_targets(vessels: Sequence[Vessel]) -> dict[str, int]:
    return {v.id: v.paper_model_min for v in vessels if v.paper_model_confidence and v.paper_model_min is not None}


def _evaluate(args) -> dict[str, int]:
    from .terminal import simulate

    bundle, service = args
    return handling_seconds(simulate(bundle, service=service).log)


def calibrate(
    bundle,
    targets: Mapping[str, float] | None = None,
    grid: Sequence[int] | None = None,
    workers: int = 1,
) -> CalibrationResult:
    """Grid search over (qc, truck, yc) cycle times minimising squared minute error.

    The lattice is visited in lexicographic order and only a strictly smaller
    loss replaces the incumbent, so ties resolve to the smallest triple.
    """
    if targets is None:
        targets = confident_targets(bundle.ships)
    if not targets:
        raise NoConfidentTargets("no vessel carries a confident model-time target")
    if grid is None:
        cfg = bundle.config
        grid = lattice(cfg.calib_min_s, cfg.calib_max_s, cfg.calib_step_s)
    clearance = bundle.service.berth_clearance_m
    points = [ServiceTimes(q, t, y, clearance) for q, t, y in itertools.product(grid, repeat=3)]
    jobs = [(bundle, s) for s in points]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_evaluate, jobs, chunksize=8))
    else:
        results = [_evaluate(j) for j in jobs]

    # integer seconds^2 keeps the comparison exact
    target_s = {ship: round(60 * t) for ship, t in targets.items()}
    best_i, best_loss = -1, None
    for i, seconds in enumerate(results):
        loss = sum((seconds[ship] - t) ** 2 for ship, t in target_s.items())
        if best_loss is None or loss < best_loss:
            best_i, best_loss = i, loss
    best = results[best_i]
    residuals = [Residual(ship, float(t), best[ship] / 60) for ship, t in targets.items()]
    log.info("calibration: best %s, loss %.2f min^2 over %d points", points[best_i], best_loss / 3600, len(points))
    return CalibrationResult(points[best_i], best_loss / 3600, residuals, len(points), list(grid))
