from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Any


class MessageKind(str, Enum):
    ANT_TRANSFER = "ant_transfer"
    ANT_RETURN = "ant_return"
    BM_ANNOUNCE = "bm_announce"


@dataclass(frozen=True)
class SimMessage:
    kind: MessageKind
    src: int
    dst: int
    payload: Any
    send_time: float
    deliver_time: float

    def __post_init__(self) -> None:
        if not self.deliver_time > self.send_time:
            raise ValueError("deliver_time must be strictly after send_time")

    def format_line(self) -> str:
        return (f"{self.send_time:.6f}\t{self.deliver_time:.6f}\t"
                f"{self.kind.value}\t{self.src}\t{self.dst}")
