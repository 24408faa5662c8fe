"""Ant-colony information gathering across reachable machines.

An anomalous host launches an ant with a goal: how many other anomalous
machines it still needs to hear about.  At every stop the ant and the host
swap knowledge (the host receives the ant's list as pheromone, the ant
learns the host's local verdict), then the host picks the next stop with
known-anomalous peers weighted double.  The ant returns home once it has met
its goal, run out of hops, or run out of unvisited peers.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction


@dataclass(frozen=True)
class AcomConfig:
    threshold_T: int = 3
    limit_N: int = 20
    evaporation_hold_seconds: float = 10.0
    evaporation_rate: float = 0.9
    verdict_staleness: float = 30.0
    detection_pass_seconds: float = 1.0

    def __post_init__(self) -> None:
        if self.threshold_T < 0 or self.limit_N < 1:
            raise ValueError("threshold_T must be >= 0 and limit_N >= 1")
        if not 0 < self.evaporation_rate <= 1:
            raise ValueError("evaporation_rate must be in (0, 1]")
        if self.detection_pass_seconds < 0 or self.verdict_staleness < 0:
            raise ValueError("durations must be non-negative")


class ContractViolation(RuntimeError):
    """An operation was called on a host in the wrong state."""


@dataclass
class PheromoneRecord:
    count: int
    deposited_at: float
    known_anomalous: frozenset[int] = frozenset()


@dataclass
class Host:
    """The ACOM-relevant view of a machine."""

    node_id: int
    peers: tuple[int, ...] = ()
    anomalous: bool = False
    pheromone: PheromoneRecord | None = None
    known_anomalous: set[int] = field(default_factory=set)


@dataclass
class Ant:
    home: int
    goal: int
    hop_limit: int = 20
    visited: list[int] = field(default_factory=list)
    collected: set[int] = field(default_factory=set)
    created_at: float = 0.0
    threshold: int = 3


class AcomVerdict(str, Enum):
    ALERT = "alert"
    LOW_RISK = "low_risk"


@dataclass(frozen=True)
class AcomReport:
    verdict: AcomVerdict
    anomalous_found: int
    inquired: int
    message_text: str

    @property
    def alert(self) -> bool:
        return self.verdict is AcomVerdict.ALERT


@dataclass(frozen=True)
class Continue:
    next_node: int


@dataclass(frozen=True)
class ReturnHome:
    report: AcomReport


def alert_text(threshold: int) -> str:
    return f"At least {threshold} users in WAN think you are in high risk"


def low_risk_text(inquired: int, anomalous: int) -> str:
    return f"We inquired {inquired} users in WAN, only {anomalous} user(s) think(s) your are in risk"


def evaporate(p: int, age_seconds: float, hold_seconds: float = 10.0, rate: float = 0.9) -> int:
    """Pheromone left after ``age_seconds``: flat during the hold period,
    then floor(rate ** (age - hold) * p).

    Whole-second exponents are evaluated in exact rational arithmetic so the
    floor never lands on the wrong side of an integer through rounding.
    """
    if p < 0 or age_seconds < 0:
        raise ValueError("p and age_seconds must be non-negative")
    if age_seconds < hold_seconds:
        return p
    exponent = age_seconds - hold_seconds
    if exponent == int(exponent):
        exact = Fraction(str(rate)) ** int(exponent) * p
        return math.floor(exact)
    return math.floor(rate ** exponent * p)


def effective_pheromone(host: Host, now: float, config: AcomConfig) -> int:
    record = host.pheromone
    if record is None:
        return 0
    return evaporate(record.count, max(0.0, now - record.deposited_at),
                     config.evaporation_hold_seconds, config.evaporation_rate)


def create_ant(host: Host, now: float, config: AcomConfig = AcomConfig()) -> Ant | AcomReport:
    """Launch an ant from an anomalous host, or alert at once if pheromone
    already accounts for the whole threshold."""
    if not host.anomalous:
        raise ContractViolation(f"node {host.node_id} is not anomalous; no ant to create")
    known = effective_pheromone(host, now, config)
    goal = max(0, config.threshold_T - known)
    if goal == 0:
        return AcomReport(AcomVerdict.ALERT, known, 0, alert_text(config.threshold_T))
    return Ant(
        home=host.node_id,
        goal=goal,
        hop_limit=config.limit_N,
        collected=set(host.known_anomalous) - {host.node_id},
        created_at=now,
        threshold=config.threshold_T,
    )


def first_hop(host: Host, rng: random.Random) -> int | None:
    """Uniform choice over everything the host can reach."""
    if not host.peers:
        return None
    return host.peers[rng.randrange(len(host.peers))]


def exchange_information(ant: Ant, host: Host, now: float,
                         config: AcomConfig = AcomConfig()) -> tuple[Ant, Host]:
    """Swap knowledge between an ant and the host it is visiting.

    ``host.anomalous`` must already hold the host's fresh local result.
    """
    if host.node_id == ant.home:
        raise ContractViolation("an ant does not exchange with its own home")
    count = len(ant.collected)
    if count > effective_pheromone(host, now, config):
        host.known_anomalous |= ant.collected
        host.pheromone = PheromoneRecord(count, now, frozenset(host.known_anomalous))
    else:
        host.known_anomalous |= ant.collected
    if host.anomalous:
        ant.collected.add(host.node_id)
    ant.visited.append(host.node_id)
    return ant, host


def decide_direction(host: Host, ant: Ant, rng: random.Random) -> int | None:
    """Pick the next stop: weight 2 for peers believed anomalous, 1 for the
    rest, 0 for home and anything already visited."""
    excluded = set(ant.visited)
    excluded.add(ant.home)
    favoured = host.known_anomalous | ant.collected
    candidates = []
    cumulative = []
    total = 0
    for peer in host.peers:
        if peer in excluded:
            continue
        total += 2 if peer in favoured else 1
        candidates.append(peer)
        cumulative.append(total)
    if not total:
        return None
    pick = rng.random() * total
    lo, hi = 0, len(cumulative) - 1
    while lo < hi:
        mid = (lo + hi) // 2
        if cumulative[mid] > pick:
            hi = mid
        else:
            lo = mid + 1
    return candidates[lo]


def acom_step(ant: Ant, host: Host, now: float, rng: random.Random) -> Continue | ReturnHome:
    """One pass of the travel loop, run right after ``exchange_information``."""
    found = len(ant.collected)
    if found >= ant.goal:
        return ReturnHome(AcomReport(AcomVerdict.ALERT, found, len(ant.visited),
                                     alert_text(ant.threshold)))
    if len(ant.visited) >= ant.hop_limit:
        return ReturnHome(AcomReport(AcomVerdict.LOW_RISK, found, len(ant.visited),
                                     low_risk_text(ant.hop_limit, found)))
    nxt = decide_direction(host, ant, rng)
    if nxt is None:
        return ReturnHome(AcomReport(AcomVerdict.LOW_RISK, found, len(ant.visited),
                                     low_risk_text(len(ant.visited), found)))
    return Continue(nxt)
