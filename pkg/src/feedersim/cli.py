"""Command-line front end: ``run``, ``compare`` and ``validate``."""

from __future__ import annotations

import argparse
import datetime as _dt
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from .engine import SimulationAborted, run
from .scenario import Scenario, ScenarioError, builtin_scenario_path, load_scenario, with_overrides
from .trace import TRACE_FILES, SimulationTrace, compare_runs, read_trace, write_comparison, write_trace

EXIT_OK, EXIT_INVALID, EXIT_ABORTED = 0, 1, 2

log = logging.getLogger("feedersim")


@dataclass
class RunConfig:
    scenario: Path
    out: Path
    seed: int | None = None
    duration: float | None = None
    dt: float | None = None
    plot: bool = False
    deterministic: bool = False


def resolve_scenario_path(path) -> Path:
    """Existing path as given, else a shipped scenario of the same file name."""
    path = Path(path)
    if path.exists():
        return path
    if path.parent == Path(".") or path.parent.name == "scenarios":
        candidate = builtin_scenario_path(path.name)
        if candidate.exists():
            return candidate
    return path


def _load(config: RunConfig) -> Scenario:
    scenario = load_scenario(resolve_scenario_path(config.scenario))
    return with_overrides(scenario, seed=config.seed, duration=config.duration, dt=config.dt)


def _report_invalid(exc: ScenarioError) -> int:
    where = f"{exc.path}: " if exc.path else ""
    print(f"error: invalid scenario {where}".rstrip(), file=sys.stderr)
    for p in exc.problems:
        print(f"  - {p}", file=sys.stderr)
    return EXIT_INVALID


def _write_metadata(trace: SimulationTrace, out: Path, deterministic: bool, extra=None) -> Path:
    meta = dict(trace.metadata)
    meta.update(extra or {})
    if not deterministic:
        meta["generated_at"] = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
    path = out / "metadata.json"
    path.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return path


def _plots(trace: SimulationTrace, out: Path, deterministic: bool) -> list[Path]:
    from . import plotting

    paths = [plotting.plot_head_voltage(trace, out / "head_voltage.svg", deterministic=deterministic)]
    for dev in plotting.default_devices(trace):
        name = dev.replace("/", "__")
        paths.append(plotting.plot_device(trace, dev, out / f"device_{name}.svg",
                                          deterministic=deterministic))
    return paths


def cmd_run(config: RunConfig) -> int:
    try:
        scenario = _load(config)
    except ScenarioError as exc:
        return _report_invalid(exc)
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    for w in scenario.warnings:
        print(f"warning: {w}", file=sys.stderr)
    try:
        trace = run(scenario)
    except SimulationAborted as exc:
        print(f"error: simulation aborted: {exc}", file=sys.stderr)
        if exc.trace is not None:
            write_trace(exc.trace, out, partial=True)
            _write_metadata(exc.trace, out, config.deterministic, {"aborted": str(exc)})
        return EXIT_ABORTED
    write_trace(trace, out)
    _write_metadata(trace, out, config.deterministic)
    if config.plot:
        _plots(trace, out, config.deterministic)
    print(f"{scenario.name}: {len(trace)} steps, {len(trace.events)} events -> {out}")
    return EXIT_OK


def _trace_or_run(path, seed, deterministic) -> SimulationTrace:
    path = Path(path)
    if path.is_dir() and all((path / f).exists() for f in TRACE_FILES):
        return read_trace(path)
    scenario = load_scenario(resolve_scenario_path(path))
    return run(with_overrides(scenario, seed=seed))


def cmd_compare(path_a, path_b, out, *, seed=None, window=2.0, deterministic=False) -> int:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    try:
        with ProcessPoolExecutor(max_workers=2) as pool:
            fa = pool.submit(_trace_or_run, path_a, seed, deterministic)
            fb = pool.submit(_trace_or_run, path_b, seed, deterministic)
            trace_a, trace_b = fa.result(), fb.result()
    except ScenarioError as exc:
        return _report_invalid(exc)
    except SimulationAborted as exc:
        print(f"error: simulation aborted: {exc}", file=sys.stderr)
        return EXIT_ABORTED
    try:
        report = compare_runs(trace_a, trace_b, window=window)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID

    write_comparison(report, out / "comparison.csv")
    from . import plotting

    name_a = trace_a.metadata.get("scenario", "A")
    name_b = trace_b.metadata.get("scenario", "B")
    if name_a == name_b:
        name_a, name_b = f"{name_a} (A)", f"{name_b} (B)"
    plotting.plot_overlay({name_a: trace_a, name_b: trace_b}, out / "head_voltage_overlay.svg",
                          deterministic=deterministic)
    summary = {
        "a": name_a, "b": name_b,
        "trip_counts": {"a": report.trip_counts_a, "b": report.trip_counts_b},
        "recovery_time_s": {"a": report.recovery_a, "b": report.recovery_b},
        "fault_clear_s": report.fault_clear, "window_s": report.window,
        "window_min_head_difference": report.window_min_difference,
        "window_fraction_a_higher": report.window_fraction_higher,
        "a_not_below_b_in_window": report.a_not_below_b,
    }
    (out / "comparison.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")

    print(f"{'cause':<8}{name_a:>22}{name_b:>22}")
    for cause, na, nb in report.trip_table():
        print(f"{cause:<8}{na:>22d}{nb:>22d}")
    if report.a_not_below_b is not None:
        verdict = "holds" if report.a_not_below_b else "VIOLATED"
        print(f"head voltage A >= B over the {window:g} s recovery window: {verdict} "
              f"(min difference {report.window_min_difference:+.6f} pu, "
              f"A strictly higher {100 * report.window_fraction_higher:.1f}% of steps)")
    return EXIT_OK


def cmd_validate(path) -> int:
    try:
        scenario = load_scenario(resolve_scenario_path(path))
    except ScenarioError as exc:
        return _report_invalid(exc)
    for w in scenario.warnings:
        print(f"warning: {w}", file=sys.stderr)
    print(f"{path}: valid ({len(scenario.devices())} devices, {len(scenario.feeder.nodes)} nodes)")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="feedersim", description=__doc__)
    parser.add_argument("--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="simulate a scenario and write CSV traces")
    p.add_argument("--scenario", required=True, type=Path)
    p.add_argument("--out", type=Path, default=Path("out"))
    p.add_argument("--seed", type=int)
    p.add_argument("--duration", type=float)
    p.add_argument("--dt", type=float)
    p.add_argument("--plot", action="store_true", help="also write SVG figures")
    p.add_argument("--deterministic", action="store_true",
                   help="omit wall-clock timestamps from metadata and figures")

    p = sub.add_parser("compare", help="compare two scenarios or trace directories")
    p.add_argument("a", type=Path)
    p.add_argument("b", type=Path)
    p.add_argument("--out", type=Path, default=Path("compare"))
    p.add_argument("--seed", type=int)
    p.add_argument("--window", type=float, default=2.0)
    p.add_argument("--deterministic", action="store_true")

    p = sub.add_parser("validate", help="check a scenario file and list every problem")
    p.add_argument("path", type=Path)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "run":
        return cmd_run(RunConfig(args.scenario, args.out, args.seed, args.duration, args.dt,
                                 args.plot, args.deterministic))
    if args.command == "compare":
        return cmd_compare(args.a, args.b, args.out, seed=args.seed, window=args.window,
                           deterministic=args.deterministic)
    return cmd_validate(args.path)


if __name__ == "__main__":
    sys.exit(main())
