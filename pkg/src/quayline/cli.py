"""Command-line entry point: ``quayline validate|simulate|compare|calibrate``.

Exit status: 0 success, 1 domain failure, 2 usage or parse failure.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import dataclass
from pathlib import Path

from .allocation import POLICIES, UnknownPolicy, get_policy, policy_compare
from .metrics import NoConfidentTargets, build_report, calibrate, emit_report
from .scenario import (
    ParseError,
    ScenarioBundle,
    ScenarioError,
    bundled_scenario_dir,
    load_scenario,
    serialize_config,
    validate,
)
from .terminal import DeadlockError, HorizonExceeded, simulate

log = logging.getLogger("quayline")

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


@dataclass(frozen=True)
class RunManifest:
    scenario: str
    config: str
    seed: int
    policy: str
    out: str
    mode: str

    def provenance(self) -> dict[str, str]:
        """Fields embedded in report files; the output directory is left out so
        identical runs written to different directories stay byte-identical."""
        return {
            "scenario": self.scenario,
            "config": self.config,
            "seed": str(self.seed),
            "policy": self.policy,
            "mode": self.mode,
        }

    def to_kv(self, bundle: ScenarioBundle) -> str:
        head = "\n".join(f"{k} = {v}" for k, v in (*self.provenance().items(), ("out", self.out)))
        effective = serialize_config(bundle.config)
        return f"# run\n{head}\n# effective config\n{effective}"


def _write(path: Path, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _configure_logging() -> None:
    level = os.environ.get("QUAYLINE_LOG", "").lower()
    if level in ("debug", "info"):
        logging.basicConfig(level=getattr(logging, level.upper()), stream=sys.stderr,
                            format="%(levelname)s %(name)s: %(message)s")


def _load(args) -> tuple[ScenarioBundle, Path]:
    scenario = Path(args.scenario) if args.scenario else bundled_scenario_dir()
    return load_scenario(scenario, verify=False), scenario


def _resolve(args, bundle: ScenarioBundle, scenario: Path, policy: str | None = None) -> tuple[ScenarioBundle, RunManifest]:
    changes = {}
    if getattr(args, "seed", None) is not None:
        changes["seed"] = args.seed
    if getattr(args, "mode", None):
        changes["mode"] = args.mode
    if policy:
        changes["policy"] = policy
    bundle = bundle.with_config(**changes) if changes else bundle
    get_policy(bundle.policy)
    manifest = RunManifest(
        scenario=str(scenario),
        config=str(scenario / "config.kv"),
        seed=bundle.seed,
        policy=bundle.policy,
        out=str(getattr(args, "out", "") or ""),
        mode=bundle.mode,
    )
    return bundle, manifest


def _require_valid(bundle: ScenarioBundle) -> bool:
    report = validate(bundle)
    if not report.ok:
        print(report.render())
        print(f"scenario invalid: {', '.join(report.failed())}", file=sys.stderr)
    return report.ok


def _run_and_write(bundle: ScenarioBundle, manifest: RunManifest, out: Path, service=None) -> None:
    result = simulate(bundle, service=service)
    report = build_report(result.log, bundle, manifest.provenance())
    out.mkdir(parents=True, exist_ok=True)
    _write(out / "events.log", result.log.serialize())
    emit_report(report, out)
    _write(out / "run_manifest.kv", manifest.to_kv(bundle))
    reduction = "n/a" if report.reduction_pct is None else f"{report.reduction_pct:.2f}%"
    print(f"{len(result.log)} events; total handling {report.simulated_total_min} min "
          f"(actual {report.actual_total_min}); reduction {reduction}")


def cmd_validate(args) -> int:
    bundle, _ = _load(args)
    report = validate(bundle)
    print(report.render())
    return EXIT_OK if report.ok else EXIT_FAIL


def cmd_simulate(args) -> int:
    bundle, scenario = _load(args)
    bundle, manifest = _resolve(args, bundle, scenario, args.policy)
    if not _require_valid(bundle):
        return EXIT_FAIL
    _run_and_write(bundle, manifest, Path(args.out))
    return EXIT_OK


def cmd_compare(args) -> int:
    bundle, scenario = _load(args)
    names = [p.strip() for p in args.policies.split(",") if p.strip()] if args.policies else sorted(POLICIES)
    for name in names:
        get_policy(name)
    bundle, _ = _resolve(args, bundle, scenario)
    if not _require_valid(bundle):
        return EXIT_FAIL
    reports = policy_compare(bundle, names, seed=bundle.seed)
    header = ["ship", "actual_min", *names]
    lines = [",".join(header)]
    first = reports[names[0]]
    for i, row in enumerate(first.rows):
        cells = [row.ship, "" if row.actual_min is None else str(row.actual_min)]
        cells += [str(reports[n].rows[i].simulated_min) for n in names]
        lines.append(",".join(cells))
    lines.append(",".join(["total", str(first.actual_total_min), *(str(reports[n].simulated_total_min) for n in names)]))
    table = "\n".join(lines) + "\n"
    print(table, end="")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        _write(out / "compare.csv", table)
    return EXIT_OK


def cmd_calibrate(args) -> int:
    bundle, scenario = _load(args)
    bundle, manifest = _resolve(args, bundle, scenario)
    if not _require_valid(bundle):
        return EXIT_FAIL
    result = calibrate(bundle)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write(out / "calibrated.kv", result.config_fragment())
    _write(out / "residuals.csv", result.residual_csv())
    s = result.service
    calibrated = bundle.with_config(qc_cycle_s=s.qc_cycle_s, truck_cycle_s=s.truck_cycle_s, yc_cycle_s=s.yc_cycle_s)
    _run_and_write(calibrated, manifest, out)
    print(result.residual_csv(), end="")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="quayline", description="Container terminal discrete-event simulator.")
    sub = parser.add_subparsers(dest="command", required=True)

    def scenario_arg(p: argparse.ArgumentParser) -> None:
        p.add_argument("--scenario", help="directory with yards.csv, ships.csv, config.kv (default: bundled Alexandria)")

    def run_args(p: argparse.ArgumentParser) -> None:
        p.add_argument("--seed", type=int, help="unsigned 64-bit seed (overrides config)")
        p.add_argument("--mode", choices=["deterministic", "stochastic"])

    p = sub.add_parser("validate", help="check scenario files and print a report")
    scenario_arg(p)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("simulate", help="run one simulation and write log and KPI files")
    scenario_arg(p)
    run_args(p)
    p.add_argument("--policy", help="yard block policy name")
    p.add_argument("--out", default="out")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("compare", help="simulate several block policies side by side")
    scenario_arg(p)
    run_args(p)
    p.add_argument("--policies", help="comma-separated policy names (default: all registered)")
    p.add_argument("--out")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("calibrate", help="grid-search service times against model-time targets")
    scenario_arg(p)
    run_args(p)
    p.add_argument("--out", default="calibration")
    p.set_defaults(func=cmd_calibrate)
    return parser


def main(argv: list[str] | None = None) -> int:
    _configure_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    if getattr(args, "seed", None) is not None and not 0 <= args.seed < 1 << 64:
        print("error: --seed must be an unsigned 64-bit integer", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except UnknownPolicy as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ParseError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ScenarioError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except (DeadlockError, HorizonExceeded, NoConfidentTargets) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
