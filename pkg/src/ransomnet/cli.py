"""Command-line entry point: single-level runs and full sweeps."""

from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

from .fsmodel import write_trace
from .harness import (
    MECHANISM_NAMES,
    CellResult,
    SweepConfig,
    aggregate,
    csv_text,
    emit_csv,
    emit_plotdata,
    run_cell,
    run_sweep,
)
from .netsim import ConfigError, ScenarioConfig, load_scenario, write_message_log


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="ransomnet",
        description="Simulate local ransomware detection with DR, ACOM and BM network mechanisms.",
    )
    level = p.add_mutually_exclusive_group()
    level.add_argument("--infected", type=int, help="run a single infected level")
    level.add_argument("--sweep", action="store_true", help="run every level 0, 10%%, ..., 100%%")
    p.add_argument("--nodes", type=int, help="number of simulated hosts (default 100)")
    p.add_argument("--mechanism", choices=("dr", "acom", "bm", "all"), default="all")
    p.add_argument("--runs", type=int, default=10, help="repetitions per cell (default 10)")
    p.add_argument("--seed", type=int, default=0, help="base seed (default 0)")
    p.add_argument("--threshold-t", type=int, help="ACOM alert threshold T")
    p.add_argument("--limit-n", type=int, help="ACOM hop limit N")
    p.add_argument("--out", type=Path, default=Path("out"), help="output directory (default ./out)")
    p.add_argument("--scenario", type=Path, help="key = value scenario file")
    p.add_argument("--export-traces", action="store_true",
                   help="write per-node filesystem traces and verdicts (single level only)")
    p.add_argument("--export-messages", action="store_true",
                   help="write per-run message logs (single level only)")
    p.add_argument("--workers", type=int, default=1, help="parallel processes for sweeps")
    return p


def _base_scenario(args: argparse.Namespace) -> ScenarioConfig:
    base = load_scenario(args.scenario) if args.scenario else ScenarioConfig()
    overrides = {}
    if args.nodes is not None:
        overrides["nodes"] = args.nodes
    if args.threshold_t is not None:
        overrides["acom.threshold_T"] = args.threshold_t
    if args.limit_n is not None:
        overrides["acom.limit_N"] = args.limit_n
    try:
        return base.with_overrides(overrides)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _sweep_config(args: argparse.Namespace, base: ScenarioConfig) -> SweepConfig:
    mechanisms = MECHANISM_NAMES if args.mechanism == "all" else (args.mechanism.upper(),)
    n = base.nodes
    if args.sweep:
        levels = tuple(sorted({round(n * k / 10) for k in range(11)}))
    else:
        levels = (base.infected if args.infected is None else args.infected,)
    base = dataclasses.replace(base, record_events=args.export_traces)
    return SweepConfig(node_count=n, infected_levels=levels, repetitions=args.runs,
                       mechanisms=mechanisms, base_seed=args.seed, base_scenario=base)


def _single_level(cfg: SweepConfig, args: argparse.Namespace) -> list[CellResult]:
    level = cfg.infected_levels[0]
    table = []
    for mechanism in cfg.mechanisms:
        runs = []
        for rep in range(cfg.repetitions):
            result, metrics = run_cell(cfg, mechanism, level, rep)
            runs.append(metrics)
            tag = f"{mechanism.lower()}_rep{rep}"
            if args.export_messages:
                write_message_log(result.messages, args.out / f"messages_{tag}.tsv")
            if args.export_traces:
                _export_traces(result, args.out / "traces" / tag)
        table.append(aggregate(mechanism, level, runs))
    return table


def _export_traces(result, directory: Path) -> None:
    directory.mkdir(parents=True, exist_ok=True)
    lines = []
    for node in result.nodes:
        lines.extend(v.format_line(node.node_id) for v in node.verdicts)
    (directory / "verdicts.tsv").write_text("".join(l + "\n" for l in lines), encoding="utf-8")
    for node_id, events in result.node_events.items():
        if events:
            write_trace(events, directory / f"node{node_id:03d}.trace")


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.runs < 1:
            raise ConfigError("--runs must be at least 1")
        base = _base_scenario(args)
        cfg = _sweep_config(args, base)
        args.out.mkdir(parents=True, exist_ok=True)
        if args.sweep:
            if args.export_messages or args.export_traces:
                raise ConfigError("--export-* options apply to single-level runs only")
            table = run_sweep(cfg, workers=args.workers)
        else:
            table = _single_level(cfg, args)
        emit_csv(table, args.out / "results.csv")
        emit_plotdata(table, args.out / "plotdata")
    except (ConfigError, ValueError, OSError) as exc:
        print(f"ransomnet: error: {exc}", file=sys.stderr)
        return 2
    sys.stdout.write(csv_text(table))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
