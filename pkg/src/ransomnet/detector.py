"""Three-stage local detection: read/write pattern, file entropy, op frequency.

The pattern automaton runs on every event.  A ``{read, write}`` hit whose
predecessor is neither a read nor a write hands the written path to the
entropy stage; an entropy hit opens a frequency window over the read/write
timestamps seen from the matched read onward.  Only a hit on all three stages
produces an anomalous verdict.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Iterable, Mapping

from .fsmodel import (
    KNOWN_EXTENSIONS,
    EmptyFileError,
    EventKind,
    FileCategory,
    FileModel,
    FsEvent,
    compute_entropy,
)

READ, WRITE = EventKind.READ, EventKind.WRITE


class InsufficientDataError(ValueError):
    """Fewer than two timestamps, or no elapsed time between them."""


class Verdict(str, Enum):
    SAFE = "safe"
    ANOMALOUS = "anomalous"


@dataclass
class PatternState:
    event_list: list[EventKind] = field(default_factory=list)
    time_list: list[float] = field(default_factory=list)


@dataclass(frozen=True)
class EntropyThresholds:
    text_threshold: float = 6.00
    nontext_threshold: float = 7.99
    known_extensions: frozenset[str] = KNOWN_EXTENSIONS

    def __post_init__(self) -> None:
        if not 0 < self.text_threshold < self.nontext_threshold <= 8:
            raise ValueError("need 0 < text_threshold < nontext_threshold <= 8")


@dataclass(frozen=True)
class FrequencyConfig:
    threshold_ops_per_sec: float = 500.0
    min_ops: int = 100
    max_wait_seconds: float = 1.0

    def __post_init__(self) -> None:
        if self.threshold_ops_per_sec <= 0:
            raise ValueError("threshold_ops_per_sec must be positive")
        if self.min_ops < 1 or self.max_wait_seconds <= 0:
            raise ValueError("min_ops and max_wait_seconds must be positive")


@dataclass(frozen=True)
class DetectorConfig:
    entropy: EntropyThresholds = field(default_factory=EntropyThresholds)
    frequency: FrequencyConfig = field(default_factory=FrequencyConfig)


@dataclass(frozen=True)
class DetectionVerdict:
    state: Verdict
    pattern_hit: bool = False
    entropy_value: float | None = None
    entropy_hit: bool | None = None
    frequency_value: float | None = None
    frequency_hit: bool | None = None
    trigger_path: str | None = None
    decided_at: float = 0.0

    @property
    def anomalous(self) -> bool:
        return self.state is Verdict.ANOMALOUS

    def format_line(self, node_id: int) -> str:
        def num(value: float | None, hit: bool | None) -> str:
            if hit is None:
                return "-"
            mark = "hit" if hit else "miss"
            return mark if value is None else f"{mark}:{value:.6f}"

        return "\t".join([
            str(node_id),
            f"{self.decided_at:.6f}",
            self.state.value,
            "hit" if self.pattern_hit else "miss",
            num(self.entropy_value, self.entropy_hit),
            num(self.frequency_value, self.frequency_hit),
        ])


def observe_event(state: PatternState, event: FsEvent) -> tuple[PatternState, str | None]:
    """Feed one event to the pattern automaton.

    Returns the (mutated) state and the written path when the write completes
    an anomalous ``{read, write}`` pattern, else None.
    """
    kind = event.kind
    if kind is READ or kind is WRITE:
        if state.time_list and event.time < state.time_list[-1]:
            raise ValueError("events must arrive in non-decreasing time order")
        state.time_list.append(event.time)
    if kind is not WRITE:
        state.event_list.append(kind)
        return state, None
    prior = state.event_list
    match = None
    if len(prior) >= 2 and prior[-1] is READ and prior[-2] is not READ and prior[-2] is not WRITE:
        match = event.path
    prior.clear()
    return state, match


def check_entropy(file: FileModel | None, thresholds: EntropyThresholds) -> tuple[bool, float | None]:
    """Entropy stage. Returns ``(hit, entropy_value)``.

    A missing file (already deleted) or an unrecognised extension is a hit
    without computing anything.  Empty files are treated as safe.
    """
    if file is None or file.extension not in thresholds.known_extensions:
        return True, None
    try:
        value = compute_entropy(file.byte_histogram)
    except EmptyFileError:
        return False, None
    if file.category is FileCategory.TEXT:
        limit = thresholds.text_threshold
    else:
        limit = thresholds.nontext_threshold
    return value >= limit, value


def compute_frequency(time_list: list[float]) -> float:
    """Read/write operations per second over the span of ``time_list``."""
    if len(time_list) < 2:
        raise InsufficientDataError("need at least two timestamps")
    duration = time_list[-1] - time_list[0]
    if duration <= 0:
        raise InsufficientDataError("timestamps span zero duration")
    return len(time_list) / duration


class LocalDetector:
    """Streaming form of the pipeline, one instance per monitored host.

    ``feed`` every event in time order.  While a frequency window is open,
    further pattern hits are ignored: diagnosis is already under way and
    restarting it would keep discarding the evidence gathered so far.  Call
    ``expire(deadline)`` when simulated time reaches ``deadline`` with no
    decision yet; ``feed`` also does this itself for late events.
    """

    def __init__(self, config: DetectorConfig | None = None,
                 lookup: Callable[[str], FileModel | None] | None = None) -> None:
        self.config = config or DetectorConfig()
        self.lookup = lookup or (lambda path: None)
        self.state = PatternState()
        self.window: list[float] | None = None
        self.deadline: float | None = None
        self._trigger: tuple[str, float | None] | None = None

    @property
    def pending(self) -> bool:
        return self.window is not None

    def feed(self, event: FsEvent) -> tuple[DetectionVerdict, ...]:
        out: tuple[DetectionVerdict, ...] = ()
        if self.window is not None and event.time >= self.deadline:
            out = (self._decide(self.deadline),)
        _, match = observe_event(self.state, event)
        kind = event.kind
        if self.window is not None:
            if kind is READ or kind is WRITE:
                self.window.append(event.time)
                if len(self.window) >= self.config.frequency.min_ops:
                    out += (self._decide(event.time),)
            return out
        if match is not None:
            hit, value = check_entropy(self.lookup(match), self.config.entropy)
            if not hit:
                out += (DetectionVerdict(Verdict.SAFE, True, value, False,
                                         trigger_path=match, decided_at=event.time),)
            else:
                # Frequency covers only the ops from the matched read onward.
                self.window = self.state.time_list[-2:]
                self.deadline = event.time + self.config.frequency.max_wait_seconds
                self._trigger = (match, value)
                if len(self.window) >= self.config.frequency.min_ops:
                    out += (self._decide(event.time),)
        if kind is WRITE and self.window is None:
            del self.state.time_list[:-1]
        return out

    def expire(self, now: float) -> DetectionVerdict | None:
        if self.window is None or now < self.deadline:
            return None
        return self._decide(self.deadline)

    def _decide(self, now: float) -> DetectionVerdict:
        path, entropy_value = self._trigger
        try:
            freq: float | None = compute_frequency(self.window)
        except InsufficientDataError:
            freq = None
        hit = freq is not None and freq >= self.config.frequency.threshold_ops_per_sec
        self.window = None
        self.deadline = None
        self._trigger = None
        del self.state.time_list[:-1]
        return DetectionVerdict(
            Verdict.ANOMALOUS if hit else Verdict.SAFE,
            pattern_hit=True,
            entropy_value=entropy_value,
            entropy_hit=True,
            frequency_value=freq,
            frequency_hit=hit,
            trigger_path=path,
            decided_at=now,
        )


def local_detect(event_stream: Iterable[FsEvent],
                 file_table: Mapping[str, FileModel] | Callable[[str], FileModel | None],
                 config: DetectorConfig | None = None) -> DetectionVerdict:
    """Run the pipeline over a finished event stream.

    Returns the first anomalous verdict, otherwise the last stage decision
    made (safe), otherwise the initial safe state.
    """
    lookup = file_table if callable(file_table) else file_table.get
    detector = LocalDetector(config, lookup)
    last: DetectionVerdict | None = None
    last_time = 0.0
    for event in event_stream:
        last_time = event.time
        for verdict in detector.feed(event):
            if verdict.anomalous:
                return verdict
            last = verdict
    if detector.pending:
        verdict = detector.expire(detector.deadline)
        if verdict.anomalous:
            return verdict
        last = verdict
    return last or DetectionVerdict(Verdict.SAFE, decided_at=last_time)
