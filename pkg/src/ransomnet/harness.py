"""Scenario sweeps and the metrics computed from them."""

from __future__ import annotations

import csv
import dataclasses
import io
import os
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from statistics import fmean
from typing import Iterable

from .netsim import ConfigError, RunResult, ScenarioConfig, run

MECHANISM_NAMES = ("DR", "ACOM", "BM")
CSV_HEADER = ("mechanism", "infected", "accuracy", "overhead", "latency", "loss")


def stable_hash(*parts: object) -> int:
    """Process-independent 31-bit hash of ``parts``."""
    return zlib.crc32("|".join(map(str, parts)).encode()) & 0x7FFFFFFF


def round_half_up(x: float) -> int:
    return int(x + 0.5) if x >= 0 else -int(-x + 0.5)


@dataclass(frozen=True)
class SweepConfig:
    node_count: int = 100
    infected_levels: tuple[int, ...] = tuple(range(0, 101, 10))
    repetitions: int = 10
    mechanisms: tuple[str, ...] = MECHANISM_NAMES
    base_seed: int = 0
    fp_rate: float = 0.03
    base_scenario: ScenarioConfig = field(default_factory=ScenarioConfig)

    def __post_init__(self) -> None:
        if self.node_count < 1:
            raise ConfigError("node_count must be at least 1")
        if self.repetitions < 1:
            raise ConfigError("repetitions must be at least 1")
        bad = [lvl for lvl in self.infected_levels if not 0 <= lvl <= self.node_count]
        if bad:
            raise ConfigError(f"infected levels {bad} outside 0..{self.node_count}")
        unknown = [m for m in self.mechanisms if m.upper() not in MECHANISM_NAMES]
        if unknown:
            raise ConfigError(f"unknown mechanisms {unknown}")
        if not 0 <= self.fp_rate <= 1:
            raise ConfigError("fp_rate must be in [0, 1]")

    def scenario(self, mechanism: str, level: int, repetition: int) -> ScenarioConfig:
        """Layout seeds depend only on (level, repetition) so every mechanism
        sees the same infected set, workloads and false positives."""
        return dataclasses.replace(
            self.base_scenario,
            nodes=self.node_count,
            infected=level,
            mechanism=mechanism.lower(),
            seed=self.base_seed + stable_hash("layout", level, repetition),
            false_positives=round_half_up(self.fp_rate * (self.node_count - level)),
        )

    def run_seed(self, mechanism: str, level: int, repetition: int) -> int:
        return self.base_seed + stable_hash(mechanism.upper(), level, repetition)


@dataclass(frozen=True)
class Metrics:
    accuracy: float | None
    message_overhead: int
    latency_seconds: float
    mean_files_encrypted: float
    escalations: int = 0
    max_ant_hops: int = 0
    min_node_loss: int = 0
    max_node_loss: int = 0
    loss_halted: bool = True


@dataclass(frozen=True)
class CellResult:
    """Averages over the repetitions of one (mechanism, infected level) cell."""

    mechanism: str
    infected: int
    accuracy: float | None
    overhead: float
    latency: float
    loss: float
    runs: tuple[Metrics, ...] = ()


def classify(node, mechanism: str) -> bool:
    mechanism = mechanism.upper()
    if mechanism == "DR":
        return node.dr_anomalous
    if mechanism == "ACOM":
        return node.acom_report is not None and node.acom_report.alert
    raise ValueError(f"{mechanism} does not classify nodes")


def compute_metrics(result: RunResult, mechanism: str) -> Metrics:
    mechanism = mechanism.upper()
    nodes = result.nodes
    accuracy = None
    if mechanism in ("DR", "ACOM"):
        correct = sum(1 for n in nodes if classify(n, mechanism) == n.infected)
        accuracy = correct / len(nodes)
    latencies = []
    for n in nodes:
        if n.escalated_at is None:
            continue
        if mechanism == "DR":
            latencies.append(0.0)
        elif mechanism == "ACOM" and n.acom_report_at is not None:
            latencies.append(n.acom_report_at - n.escalated_at)
        elif mechanism == "BM" and n.bm_report_at is not None:
            latencies.append(n.bm_report_at - n.escalated_at)
    infected = [n for n in nodes if n.infected]
    losses = [n.files_encrypted if n.files_at_suspension is None else n.files_at_suspension
              for n in infected]
    # no infected host may lose more files once it has been frozen
    halted = all(n.files_at_suspension is not None and n.files_encrypted == n.files_at_suspension
                 for n in infected if n.escalated_at is not None)
    return Metrics(
        accuracy=accuracy,
        message_overhead=len(result.messages),
        latency_seconds=fmean(latencies) if latencies else 0.0,
        mean_files_encrypted=fmean(losses) if losses else 0.0,
        escalations=result.escalations,
        max_ant_hops=max(result.ant_hops, default=0),
        min_node_loss=min(losses, default=0),
        max_node_loss=max(losses, default=0),
        loss_halted=halted,
    )


def run_cell(config: SweepConfig, mechanism: str, level: int, repetition: int) -> tuple[RunResult, Metrics]:
    result = run(config.scenario(mechanism, level, repetition),
                 config.run_seed(mechanism, level, repetition))
    return result, compute_metrics(result, mechanism)


def _cell_metrics(args: tuple[SweepConfig, str, int, int]) -> Metrics:
    return run_cell(*args)[1]


def run_sweep(config: SweepConfig, workers: int | None = 1) -> list[CellResult]:
    """Run every (mechanism, level, repetition) and average per cell.

    ``workers`` > 1 spreads runs over processes; results do not depend on it.
    """
    jobs = [(config, m, lvl, rep)
            for m in config.mechanisms for lvl in config.infected_levels
            for rep in range(config.repetitions)]
    if workers is None:
        workers = os.cpu_count() or 1
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            metrics = list(pool.map(_cell_metrics, jobs, chunksize=4))
    else:
        metrics = [_cell_metrics(job) for job in jobs]
    return [aggregate(jobs[i][1], jobs[i][2], metrics[i:i + config.repetitions])
            for i in range(0, len(jobs), config.repetitions)]


def aggregate(mechanism: str, level: int, runs: Iterable[Metrics]) -> CellResult:
    runs = tuple(runs)
    acc = [r.accuracy for r in runs if r.accuracy is not None]
    return CellResult(
        mechanism=mechanism.upper(),
        infected=level,
        accuracy=fmean(acc) if acc else None,
        overhead=fmean(r.message_overhead for r in runs),
        latency=fmean(r.latency_seconds for r in runs),
        loss=fmean(r.mean_files_encrypted for r in runs),
        runs=runs,
    )


def csv_text(table: Iterable[CellResult]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for cell in table:
        writer.writerow([
            cell.mechanism,
            cell.infected,
            "" if cell.accuracy is None else f"{cell.accuracy:.6f}",
            f"{cell.overhead:.6f}",
            f"{cell.latency:.6f}",
            f"{cell.loss:.6f}",
        ])
    return buf.getvalue()


def _write(path: Path, text: str) -> None:
    try:
        path.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror}") from None


def emit_csv(table: Iterable[CellResult], path: str | Path) -> None:
    _write(Path(path), csv_text(table))


PLOT_METRICS = ("accuracy", "overhead", "latency", "loss")


def emit_plotdata(table: Iterable[CellResult], path: str | Path) -> list[Path]:
    """One ``<metric>_<mechanism>.dat`` file per series: ``infected value``."""
    out_dir = Path(path)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create {out_dir}: {exc.strerror}") from None
    series: dict[tuple[str, str], list[str]] = {}
    for cell in table:
        for metric in PLOT_METRICS:
            value = getattr(cell, metric)
            if value is None:
                continue
            series.setdefault((metric, cell.mechanism), []).append(f"{cell.infected} {value:.6f}")
    written = []
    for (metric, mechanism), rows in sorted(series.items()):
        target = out_dir / f"{metric}_{mechanism.lower()}.dat"
        _write(target, f"# infected {metric}\n" + "\n".join(rows) + "\n")
        written.append(target)
    return written
