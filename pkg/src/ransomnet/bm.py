"""LAN broadcasting: anomalous hosts announce themselves to every peer and,
after a short aggregation window, report what share of the LAN is affected."""

from __future__ import annotations

from dataclasses import dataclass, field

from .acom import ContractViolation
from .messages import MessageKind, SimMessage


@dataclass
class BmState:
    lan_peers: frozenset[int]
    received_anomalous: set[int] = field(default_factory=set)
    window_start: float | None = None
    window_seconds: float = 2.0

    def receive(self, sender: int) -> None:
        if sender in self.lan_peers:
            self.received_anomalous.add(sender)


@dataclass(frozen=True)
class BmReport:
    fraction: float
    percent: int
    message_text: str


def bm_broadcast(node_id: int, anomalous: bool, lan_peers: frozenset[int] | set[int],
                 now: float, delay: float = 0.01) -> list[SimMessage]:
    if not anomalous:
        raise ContractViolation(f"node {node_id} is safe; safe nodes do not broadcast")
    return [
        SimMessage(MessageKind.BM_ANNOUNCE, node_id, peer, (node_id, "anomalous", now),
                   now, now + delay)
        for peer in sorted(lan_peers)
    ]


def bm_report(state: BmState, self_anomalous: bool, lan_size: int,
              now: float | None = None) -> BmReport:
    """Share of the LAN known to be anomalous, the reporter included."""
    if lan_size <= 0:
        raise ValueError("lan_size must be positive")
    if now is not None and state.window_start is not None:
        if now < state.window_start + state.window_seconds:
            raise ContractViolation("aggregation window has not elapsed")
    anomalous = len(state.received_anomalous) + (1 if self_anomalous else 0)
    # half-up rounding in integers: floor(100 * k / n + 1/2)
    percent = (200 * anomalous + lan_size) // (2 * lan_size)
    text = (f"{percent}% machines in LAN also experience anomalies, "
            f"so your computer is in high risk of cryptoworm attack.")
    return BmReport(anomalous / lan_size, percent, text)
