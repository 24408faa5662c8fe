"""Simulated host-level ransomware detection with network-assisted confirmation."""

from .acom import AcomConfig, AcomReport, Ant, Host, create_ant, evaporate
from .bm import BmReport, BmState, bm_broadcast, bm_report
from .detector import DetectionVerdict, DetectorConfig, LocalDetector, Verdict, local_detect
from .fsmodel import FileModel, FsEvent, WorkloadClass, WorkloadSpec, compute_entropy, gen_trace
from .harness import Metrics, SweepConfig, compute_metrics, emit_csv, emit_plotdata, run_sweep
from .netsim import ConfigError, RunResult, ScenarioConfig, load_scenario, run

__version__ = "0.1.0"

__all__ = [
    "AcomConfig", "AcomReport", "Ant", "Host", "create_ant", "evaporate",
    "BmReport", "BmState", "bm_broadcast", "bm_report",
    "DetectionVerdict", "DetectorConfig", "LocalDetector", "Verdict", "local_detect",
    "FileModel", "FsEvent", "WorkloadClass", "WorkloadSpec", "compute_entropy", "gen_trace",
    "Metrics", "SweepConfig", "compute_metrics", "emit_csv", "emit_plotdata", "run_sweep",
    "ConfigError", "RunResult", "ScenarioConfig", "load_scenario", "run",
]
