"""Deterministic discrete-event simulation of a network of monitored hosts.

Each host replays a synthetic workload through its own ``LocalDetector``.  An
anomalous verdict freezes the workload, asks the (simulated) user, and on
escalation starts the configured network mechanism(s): a direct report, an
ant, or a LAN broadcast.  All state changes happen while draining one event
queue ordered by (time, sequence number), so a (scenario, seed) pair always
replays identically.
"""

from __future__ import annotations

import dataclasses
import heapq
import itertools
import random
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Iterator

from .acom import (
    AcomConfig,
    AcomReport,
    Ant,
    Continue,
    Host,
    acom_step,
    create_ant,
    exchange_information,
    first_hop,
)
from .bm import BmReport, BmState, bm_broadcast, bm_report
from .detector import (
    DetectionVerdict,
    DetectorConfig,
    EntropyThresholds,
    FrequencyConfig,
    LocalDetector,
)
from .fsmodel import EventKind, FileModel, FsEvent, WorkloadClass, WorkloadSpec, iter_trace
from .messages import MessageKind, SimMessage

MECHANISMS = ("dr", "acom", "bm")
TOPOLOGIES = ("complete", "random_k")

# Benign activity drawn for ordinary safe hosts; rates stay inside the
# observed range of everyday applications (max 342 op/s).
_BENIGN_CLASSES = (WorkloadClass.MODIFY, WorkloadClass.COMPRESS, WorkloadClass.DECOMPRESS,
                   WorkloadClass.BROWSE, WorkloadClass.IDLE)
_BENIGN_RATE = (35.0, 342.0)


class ConfigError(ValueError):
    pass


class UserPolicy(str, Enum):
    ALWAYS_ESCALATE = "always_escalate"
    GROUND_TRUTH = "ground_truth"
    LEGITIMATE_ACK = "legitimate_ack"


class PromptAnswer(str, Enum):
    LEGITIMATE = "legitimate"
    ESCALATE = "escalate"


@dataclass(frozen=True)
class BmConfig:
    window_seconds: float = 2.0


@dataclass(frozen=True)
class ScenarioConfig:
    nodes: int = 100
    infected: int = 0
    mechanism: str = "dr"
    topology: str = "complete"
    topology_k: int = 8
    seed: int = 0
    horizon_seconds: float = 120.0
    per_hop_delay: float = 0.01
    user_policy: str = "always_escalate"
    false_positives: int = 0
    fp_start_max: float = 60.0
    benign_activity: bool = True
    infection_jitter: float = 0.5
    ransomware_rate: float = 742.0
    ransomware_files: int = 200
    ransomware_file_size: int = 1024
    benign_encrypt_rate: float = 742.0
    benign_encrypt_files: int = 100
    record_events: bool = False
    acom: AcomConfig = field(default_factory=AcomConfig)
    bm: BmConfig = field(default_factory=BmConfig)
    entropy: EntropyThresholds = field(default_factory=EntropyThresholds)
    frequency: FrequencyConfig = field(default_factory=FrequencyConfig)

    @property
    def mechanisms(self) -> tuple[str, ...]:
        return MECHANISMS if self.mechanism == "all" else (self.mechanism,)

    def validate(self) -> None:
        if self.nodes < 1:
            raise ConfigError("nodes must be at least 1")
        if not 0 <= self.infected <= self.nodes:
            raise ConfigError(f"infected must be between 0 and nodes ({self.nodes})")
        if self.mechanism not in MECHANISMS + ("all",):
            raise ConfigError(f"unknown mechanism {self.mechanism!r}")
        if self.topology not in TOPOLOGIES:
            raise ConfigError(f"unknown topology {self.topology!r}")
        if self.user_policy not in {p.value for p in UserPolicy}:
            raise ConfigError(f"unknown user_policy {self.user_policy!r}")
        if not 0 <= self.false_positives <= self.nodes - self.infected:
            raise ConfigError("false_positives must fit among the safe nodes")
        if self.per_hop_delay <= 0:
            raise ConfigError("per_hop_delay must be positive")
        if self.horizon_seconds <= 0:
            raise ConfigError("horizon_seconds must be positive")

    def with_overrides(self, values: dict[str, Any]) -> "ScenarioConfig":
        """Apply ``{"acom.threshold_T": 4, "nodes": 50, ...}`` style overrides."""
        top: dict[str, Any] = {}
        nested: dict[str, dict[str, Any]] = {}
        for key, value in values.items():
            section, _, name = key.rpartition(".")
            if section:
                nested.setdefault(section, {})[name] = value
            else:
                top[name] = value
        cfg = self
        try:
            for section, items in nested.items():
                sub = getattr(cfg, section)
                cfg = dataclasses.replace(cfg, **{section: dataclasses.replace(sub, **items)})
            return dataclasses.replace(cfg, **top)
        except (AttributeError, TypeError) as exc:
            raise ConfigError(f"unknown configuration key: {exc}") from None


def _coerce(raw: str, like: Any, key: str) -> Any:
    try:
        if isinstance(like, bool):
            lowered = raw.lower()
            if lowered in {"1", "true", "yes", "on"}:
                return True
            if lowered in {"0", "false", "no", "off"}:
                return False
            raise ValueError(raw)
        if isinstance(like, int):
            return int(raw)
        if isinstance(like, float):
            return float(raw)
    except ValueError:
        raise ConfigError(f"bad value for {key}: {raw!r}") from None
    return raw


def _field_default(cfg: ScenarioConfig, key: str) -> Any:
    obj: Any = cfg
    for part in key.split("."):
        if not dataclasses.is_dataclass(obj) or part not in {f.name for f in dataclasses.fields(obj)}:
            raise ConfigError(f"unknown configuration key: {key}")
        obj = getattr(obj, part)
    return obj


def parse_scenario(text: str, base: ScenarioConfig | None = None) -> ScenarioConfig:
    """Parse flat ``key = value`` lines (``#`` starts a comment)."""
    cfg = base or ScenarioConfig()
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        sep = "=" if "=" in line else ":"
        key, found, raw = line.partition(sep)
        if not found:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key = key.strip()
        values[key] = _coerce(raw.strip(), _field_default(cfg, key), key)
    cfg = cfg.with_overrides(values)
    cfg.validate()
    return cfg


def load_scenario(path: str | Path, base: ScenarioConfig | None = None) -> ScenarioConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read scenario file {path}: {exc.strerror}") from None
    return parse_scenario(text, base)


@dataclass(frozen=True)
class Topology:
    mode: str
    peers: dict[int, tuple[int, ...]]

    @property
    def lan(self) -> tuple[int, ...]:
        return tuple(sorted(self.peers))


def build_topology(n: int, mode: str = "complete", k: int = 8,
                   rng: random.Random | None = None) -> Topology:
    if mode == "complete":
        everyone = tuple(range(n))
        return Topology(mode, {i: everyone[:i] + everyone[i + 1:] for i in range(n)})
    if mode != "random_k":
        raise ConfigError(f"unknown topology {mode!r}")
    rng = rng or random.Random(0)
    links: dict[int, set[int]] = {i: set() for i in range(n)}
    for i in range(n):
        others = [j for j in range(n) if j != i]
        for j in rng.sample(others, min(k, len(others))):
            links[i].add(j)
            links[j].add(i)
    return Topology(mode, {i: tuple(sorted(p)) for i, p in links.items()})


@dataclass(eq=False)
class Node(Host):
    ground_truth_infected: bool = False
    workload: WorkloadSpec = field(default_factory=lambda: WorkloadSpec(WorkloadClass.IDLE))
    user_policy: UserPolicy = UserPolicy.ALWAYS_ESCALATE
    suspended: bool = False
    bm_state: BmState | None = None
    detector: LocalDetector | None = None
    files: dict[str, FileModel] = field(default_factory=dict)
    files_encrypted: int = 0
    files_at_suspension: int | None = None
    suspended_at: float | None = None
    verdicts: list[DetectionVerdict] = field(default_factory=list)
    last_verdict: DetectionVerdict | None = None
    first_anomalous_at: float | None = None
    escalated_at: float | None = None
    acom_report: AcomReport | None = None
    acom_report_at: float | None = None
    bm_report: BmReport | None = None
    bm_report_at: float | None = None
    events: list[FsEvent] = field(default_factory=list)
    trace_seed: int = 0
    _trace: Iterator[tuple[FsEvent, FileModel | None]] | None = None
    _scheduled: bool = False
    _time_offset: float = 0.0
    _waiting: list[Ant] = field(default_factory=list)

    @property
    def encrypting(self) -> bool:
        return self.workload.kind in (WorkloadClass.RANSOMWARE, WorkloadClass.BENIGN_ENCRYPT)


def user_prompt(node: Node, verdict: DetectionVerdict) -> PromptAnswer:
    """Resolve the "was this you?" question according to the host's policy."""
    if not verdict.anomalous:
        raise ValueError("the user is only prompted about anomalous verdicts")
    policy = node.user_policy
    if policy is UserPolicy.ALWAYS_ESCALATE:
        return PromptAnswer.ESCALATE
    if policy is UserPolicy.GROUND_TRUTH:
        return PromptAnswer.ESCALATE if node.ground_truth_infected else PromptAnswer.LEGITIMATE
    if node.workload.kind is WorkloadClass.BENIGN_ENCRYPT:
        return PromptAnswer.LEGITIMATE
    return PromptAnswer.ESCALATE


@dataclass
class NodeResult:
    node_id: int
    infected: bool
    workload: str
    dr_anomalous: bool
    first_anomalous_at: float | None
    escalated_at: float | None
    acom_report: AcomReport | None
    acom_report_at: float | None
    bm_report: BmReport | None
    bm_report_at: float | None
    files_encrypted: int
    files_at_suspension: int | None
    verdicts: list[DetectionVerdict]


@dataclass
class RunResult:
    scenario: ScenarioConfig
    seed: int
    nodes: list[NodeResult]
    messages: list[SimMessage]
    ant_hops: list[int]
    ants_launched: int
    end_time: float
    node_events: dict[int, list[FsEvent]] = field(default_factory=dict)
    delivered: int = 0

    @property
    def escalations(self) -> int:
        return sum(1 for n in self.nodes if n.escalated_at is not None)

    def message_lines(self) -> list[str]:
        return [m.format_line() for m in self.messages]

    def to_text(self) -> str:
        """Canonical dump used for byte-level reproducibility checks."""
        lines = [f"seed\t{self.seed}", f"end\t{self.end_time:.6f}"]
        for n in self.nodes:
            acom = "-" if n.acom_report is None else f"{n.acom_report.verdict.value}:{n.acom_report.anomalous_found}"
            bm = "-" if n.bm_report is None else str(n.bm_report.percent)
            lines.append("\t".join(map(str, (
                n.node_id, int(n.infected), n.workload, int(n.dr_anomalous),
                _fmt(n.escalated_at), acom, _fmt(n.acom_report_at), bm,
                _fmt(n.bm_report_at), n.files_encrypted))))
        lines.extend(self.message_lines())
        return "\n".join(lines) + "\n"


def _fmt(value: float | None) -> str:
    return "-" if value is None else f"{value:.6f}"


# queue entry kinds
_FS, _DEADLINE, _MESSAGE, _PASS_DONE, _BM_CLOSE = range(5)


class Simulation:
    def __init__(self, scenario: ScenarioConfig, seed: int) -> None:
        scenario.validate()
        self.cfg = scenario
        self.seed = seed
        self.rng = random.Random(seed)
        self.detector_config = DetectorConfig(scenario.entropy, scenario.frequency)
        self._queue: list[tuple[float, int, int, Any]] = []
        self._seq = itertools.count()
        self.messages: list[SimMessage] = []
        self.ant_hops: list[int] = []
        self.ants_launched = 0
        self.delivered = 0
        self.now = 0.0
        self.nodes = self._layout()
        if "acom" in scenario.mechanisms and scenario.nodes > 1:
            lonely = [n.node_id for n in self.nodes if not n.peers]
            if lonely:
                raise ConfigError(f"nodes {lonely[:5]} cannot reach any peer for ant dispatch")

    # -- setup ---------------------------------------------------------------

    def _layout(self) -> list[Node]:
        cfg = self.cfg
        rng = random.Random(cfg.seed)
        topo = build_topology(cfg.nodes, cfg.topology, cfg.topology_k, rng)
        infected = set(rng.sample(range(cfg.nodes), cfg.infected))
        safe = [i for i in range(cfg.nodes) if i not in infected]
        fp = set(rng.sample(safe, cfg.false_positives))
        policy = UserPolicy(cfg.user_policy)
        nodes = []
        for i in range(cfg.nodes):
            if i in infected:
                spec = WorkloadSpec(WorkloadClass.RANSOMWARE, cfg.ransomware_rate,
                                    cfg.ransomware_files, cfg.ransomware_file_size,
                                    rng.uniform(0.0, cfg.infection_jitter))
            elif i in fp:
                spec = WorkloadSpec(WorkloadClass.BENIGN_ENCRYPT, cfg.benign_encrypt_rate,
                                    cfg.benign_encrypt_files, cfg.ransomware_file_size,
                                    rng.uniform(0.0, cfg.fp_start_max))
            elif cfg.benign_activity:
                kind = rng.choice(_BENIGN_CLASSES)
                spec = WorkloadSpec(kind, rng.uniform(*_BENIGN_RATE), rng.randint(5, 20), 4096,
                                    rng.uniform(0.0, cfg.horizon_seconds / 2))
            else:
                spec = WorkloadSpec(WorkloadClass.IDLE)
            peers = topo.peers[i]
            node = Node(
                node_id=i,
                peers=peers,
                ground_truth_infected=i in infected,
                workload=spec,
                user_policy=policy,
                bm_state=BmState(frozenset(topo.lan) - {i}, window_seconds=cfg.bm.window_seconds),
                trace_seed=rng.getrandbits(32),
            )
            node.detector = LocalDetector(self.detector_config, node.files.get)
            nodes.append(node)
        return nodes

    # -- queue helpers -------------------------------------------------------

    def _push(self, time: float, kind: int, payload: Any) -> None:
        heapq.heappush(self._queue, (time, next(self._seq), kind, payload))

    def _send(self, kind: MessageKind, src: int, dst: int, payload: Any) -> None:
        msg = SimMessage(kind, src, dst, payload, self.now, self.now + self.cfg.per_hop_delay)
        self.messages.append(msg)
        self._push(msg.deliver_time, _MESSAGE, msg)

    def _pull_next(self, node: Node) -> None:
        if node._trace is None:
            return
        item = next(node._trace, None)
        if item is None:
            node._trace = None
            return
        event, state = item
        if node._time_offset:
            event = FsEvent(event.time + node._time_offset, event.kind, event.path)
        node._scheduled = True
        self._push(event.time, _FS, (node, event, state))

    # -- main loop -----------------------------------------------------------

    def run(self) -> RunResult:
        for node in self.nodes:
            if node.workload.kind is not WorkloadClass.IDLE:
                node._trace = iter_trace(node.workload, node.trace_seed)
                self._pull_next(node)
        horizon = self.cfg.horizon_seconds
        queue = self._queue
        while queue and queue[0][0] <= horizon:
            time, _, kind, payload = heapq.heappop(queue)
            self.now = time
            if kind == _FS:
                self._on_fs(*payload)
            elif kind == _MESSAGE:
                self._deliver(payload)
            elif kind == _DEADLINE:
                verdict = payload.detector.expire(time)
                if verdict is not None:
                    self._on_verdict(payload, verdict)
            elif kind == _PASS_DONE:
                self._finish_pass(*payload)
            elif kind == _BM_CLOSE:
                self._close_bm(payload)
        return self._result()

    def _on_fs(self, node: Node, event: FsEvent, state: FileModel | None) -> None:
        node._scheduled = False
        if event.kind is EventKind.DELETE:
            node.files.pop(event.path, None)
            if node.encrypting:
                node.files_encrypted += 1
        elif state is not None:
            node.files[event.path] = state
        if self.cfg.record_events:
            node.events.append(event)
        detector = node.detector
        previous_deadline = detector.deadline
        for verdict in detector.feed(event):
            self._on_verdict(node, verdict)
        if detector.pending and detector.deadline != previous_deadline:
            self._push(detector.deadline, _DEADLINE, node)
        if not node.suspended and not node._scheduled:
            self._pull_next(node)

    def _on_verdict(self, node: Node, verdict: DetectionVerdict) -> None:
        now = self.now
        node.verdicts.append(verdict)
        node.last_verdict = verdict
        if verdict.anomalous:
            if node.first_anomalous_at is None:
                node.first_anomalous_at = verdict.decided_at
            if not node.suspended:
                node.suspended = True
                node.suspended_at = now
                if node.files_at_suspension is None:
                    node.files_at_suspension = node.files_encrypted
        if node._waiting:
            waiting, node._waiting = node._waiting, []
            for ant in waiting:
                self._exchange(ant, node, verdict.anomalous)
        if not verdict.anomalous:
            return
        if user_prompt(node, verdict) is PromptAnswer.LEGITIMATE:
            self._resume(node)
        elif node.escalated_at is None:
            self._escalate(node)

    def _resume(self, node: Node) -> None:
        if not node.suspended:
            return
        node._time_offset += self.now - node.suspended_at
        node.suspended = False
        node.suspended_at = None
        if not node._scheduled:
            self._pull_next(node)

    def _escalate(self, node: Node) -> None:
        now = self.now
        node.escalated_at = now
        node.anomalous = True
        mechanisms = self.cfg.mechanisms
        if "acom" in mechanisms:
            launched = create_ant(node, now, self.cfg.acom)
            if isinstance(launched, AcomReport):
                node.acom_report = launched
                node.acom_report_at = now
            else:
                self.ants_launched += 1
                target = first_hop(node, self.rng)
                if target is None:
                    node.acom_report = acom_step(launched, node, now, self.rng).report
                    node.acom_report_at = now
                else:
                    self._send(MessageKind.ANT_TRANSFER, node.node_id, target, launched)
        if "bm" in mechanisms:
            node.bm_state.window_start = now
            for msg in bm_broadcast(node.node_id, True, node.bm_state.lan_peers, now,
                                    self.cfg.per_hop_delay):
                self.messages.append(msg)
                self._push(msg.deliver_time, _MESSAGE, msg)
            self._push(now + node.bm_state.window_seconds, _BM_CLOSE, node)
        self._finalize(node)

    def _deliver(self, msg: SimMessage) -> None:
        self.delivered += 1
        dst = self.nodes[msg.dst]
        if msg.kind is MessageKind.ANT_TRANSFER:
            self._visit(msg.payload, dst)
        elif msg.kind is MessageKind.ANT_RETURN:
            ant, report = msg.payload
            dst.acom_report = report
            dst.acom_report_at = self.now
            self.ant_hops.append(len(ant.visited))
            self._finalize(dst)
        else:
            dst.bm_state.receive(msg.src)

    def _fresh_verdict(self, node: Node) -> DetectionVerdict | None:
        last = node.last_verdict
        if last is not None and self.now - last.decided_at <= self.cfg.acom.verdict_staleness:
            return last
        return None

    def _visit(self, ant: Ant, node: Node) -> None:
        if node.detector.pending:
            node._waiting.append(ant)
            return
        fresh = self._fresh_verdict(node)
        if fresh is not None:
            self._exchange(ant, node, fresh.anomalous)
        else:
            self._push(self.now + self.cfg.acom.detection_pass_seconds, _PASS_DONE, (ant, node))

    def _finish_pass(self, ant: Ant, node: Node) -> None:
        if node.detector.pending:
            node._waiting.append(ant)
            return
        fresh = self._fresh_verdict(node)
        self._exchange(ant, node, fresh is not None and fresh.anomalous)

    def _exchange(self, ant: Ant, node: Node, anomalous: bool) -> None:
        node.anomalous = anomalous
        exchange_information(ant, node, self.now, self.cfg.acom)
        outcome = acom_step(ant, node, self.now, self.rng)
        if isinstance(outcome, Continue):
            self._send(MessageKind.ANT_TRANSFER, node.node_id, outcome.next_node, ant)
        else:
            self._send(MessageKind.ANT_RETURN, node.node_id, ant.home, (ant, outcome.report))

    def _close_bm(self, node: Node) -> None:
        node.bm_report = bm_report(node.bm_state, True, self.cfg.nodes, self.now)
        node.bm_report_at = self.now
        self._finalize(node)

    def _finalize(self, node: Node) -> None:
        """Once every launched mechanism has reported, apply the user's final
        judgement; only a host judged safe gets its tasks back."""
        mechanisms = self.cfg.mechanisms
        if "acom" in mechanisms and node.acom_report is None:
            return
        if "bm" in mechanisms and node.bm_report is None:
            return
        in_danger = node.user_policy is not UserPolicy.GROUND_TRUTH or node.ground_truth_infected
        if not in_danger:
            self._resume(node)

    def _result(self) -> RunResult:
        nodes = [
            NodeResult(
                node_id=n.node_id,
                infected=n.ground_truth_infected,
                workload=n.workload.kind.value,
                dr_anomalous=n.first_anomalous_at is not None,
                first_anomalous_at=n.first_anomalous_at,
                escalated_at=n.escalated_at,
                acom_report=n.acom_report,
                acom_report_at=n.acom_report_at,
                bm_report=n.bm_report,
                bm_report_at=n.bm_report_at,
                files_encrypted=n.files_encrypted,
                files_at_suspension=n.files_at_suspension,
                verdicts=n.verdicts,
            )
            for n in self.nodes
        ]
        events = {n.node_id: n.events for n in self.nodes} if self.cfg.record_events else {}
        return RunResult(self.cfg, self.seed, nodes, self.messages, self.ant_hops,
                         self.ants_launched, self.now, events, self.delivered)


def run(scenario: ScenarioConfig, seed: int | None = None) -> RunResult:
    """Simulate ``scenario``; ``seed`` drives protocol randomness (ant routing)
    and defaults to the scenario's own layout seed."""
    return Simulation(scenario, scenario.seed if seed is None else seed).run()


def write_message_log(messages: list[SimMessage], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for msg in messages:
            fh.write(msg.format_line() + "\n")
