"""File-system event model, byte entropy, and synthetic workload traces.

Every workload is reduced to the stream of open/create/read/write/close/delete
events a file-system monitor would report, plus the byte histograms of the
files involved.  Histograms are generated lazily from a per-file seed so a
trace with thousands of files stays cheap until an entropy check asks for one.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np


class EmptyFileError(ValueError):
    """Entropy was requested for a histogram with no bytes."""


class EventKind(str, Enum):
    OPEN = "open"
    CREATE = "create"
    READ = "read"
    WRITE = "write"
    CLOSE = "close"
    DELETE = "delete"


class FileCategory(str, Enum):
    TEXT = "text"
    NONTEXT = "nontext"


class WorkloadClass(str, Enum):
    RANSOMWARE = "ransomware"
    MODIFY = "modify"
    COMPRESS = "compress"
    DECOMPRESS = "decompress"
    BROWSE = "browse"
    BENIGN_ENCRYPT = "benign_encrypt"
    IDLE = "idle"


TEXT_EXTENSIONS = frozenset({"txt", "log", "conf", "html", "css", "php"})
NONTEXT_EXTENSIONS = frozenset({"png", "jpeg", "pptx", "mp3", "zip", "gz", "tar", "pdf"})
KNOWN_EXTENSIONS = TEXT_EXTENSIONS | NONTEXT_EXTENSIONS

# Output extensions of encrypting workloads; all outside KNOWN_EXTENSIONS.
RANSOM_EXTENSIONS = ("gnncry", "locked", "crypt", "enc")
BENIGN_CIPHER_EXTENSIONS = ("gpg", "aes")

# Original document types targeted by the encrypting workloads.
VICTIM_EXTENSIONS = ("txt", "log", "conf", "png", "jpeg", "pptx", "mp3")

_RW = (EventKind.READ, EventKind.WRITE)


@dataclass(frozen=True, slots=True)
class FsEvent:
    """One file-system operation at a simulated time (seconds)."""

    time: float
    kind: EventKind
    path: str

    def __post_init__(self) -> None:
        if not math.isfinite(self.time) or self.time < 0:
            raise ValueError(f"event time must be finite and non-negative, got {self.time!r}")
        if not isinstance(self.kind, EventKind):
            object.__setattr__(self, "kind", EventKind(self.kind))


def category_for(extension: str) -> FileCategory:
    return FileCategory.TEXT if extension in TEXT_EXTENSIONS else FileCategory.NONTEXT


# --- byte content profiles -------------------------------------------------

def _text_probs() -> np.ndarray:
    weights = np.zeros(256)
    letters = {
        " ": 18.0, "e": 10.0, "t": 7.0, "a": 6.5, "o": 6.0, "i": 5.7, "n": 5.7,
        "s": 5.3, "h": 5.0, "r": 5.0, "d": 3.4, "l": 3.3, "c": 2.3, "u": 2.3,
        "m": 2.0, "w": 1.8, "f": 1.8, "g": 1.6, "y": 1.6, "p": 1.5, "b": 1.2,
        "v": 0.8, "k": 0.6, "\n": 1.5, ".": 1.0, ",": 1.0, "x": 0.2, "j": 0.1,
        "q": 0.1, "z": 0.1,
    }
    for ch, w in letters.items():
        weights[ord(ch)] = w
    for ch in "ABCDEFGHIJKLMNOPQRSTUVWXYZ":
        weights[ord(ch)] = 0.15
    for ch in "0123456789":
        weights[ord(ch)] = 0.25
    return weights / weights.sum()


def _binary_probs() -> np.ndarray:
    # Mildly non-uniform, like media formats sitting just under 8 bits/byte.
    weights = 1.0 + 0.4 * np.cos(2 * np.pi * np.arange(256) / 256)
    return weights / weights.sum()


_PROFILES = {
    "text": _text_probs(),
    "binary": _binary_probs(),
    "random": np.full(256, 1 / 256),
}


@dataclass(frozen=True)
class FileModel:
    """A file as seen by the detector: name, type and byte distribution.

    ``content`` selects the byte profile ("text", "binary" or "random") the
    histogram is sampled from; pass ``histogram`` to fix it explicitly.
    """

    path: str
    extension: str
    category: FileCategory
    size_bytes: int
    encrypted: bool = False
    content: str = "text"
    content_seed: int = 0
    histogram: tuple[int, ...] | None = field(default=None, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.size_bytes < 0:
            raise ValueError("size_bytes must be non-negative")
        if self.histogram is not None:
            if len(self.histogram) != 256 or sum(self.histogram) != self.size_bytes:
                raise ValueError("histogram must have 256 buckets summing to size_bytes")
        elif self.content not in _PROFILES:
            raise ValueError(f"unknown content profile {self.content!r}")

    @cached_property
    def byte_histogram(self) -> tuple[int, ...]:
        if self.histogram is not None:
            return self.histogram
        gen = np.random.default_rng(self.content_seed)
        counts = gen.multinomial(self.size_bytes, _PROFILES[self.content])
        return tuple(int(c) for c in counts)

    @classmethod
    def from_bytes(cls, path: str, data: bytes, encrypted: bool = False) -> "FileModel":
        ext = path.rsplit(".", 1)[-1].lower() if "." in path else ""
        hist = np.bincount(np.frombuffer(data, dtype=np.uint8), minlength=256)
        return cls(path, ext, category_for(ext), len(data), encrypted,
                   histogram=tuple(int(c) for c in hist))


def compute_entropy(histogram: Sequence[int]) -> float:
    """Shannon entropy of a byte histogram, in bits per byte.

    Parameters
    ----------
    histogram:
        256 non-negative counts, one per byte value.

    Returns
    -------
    float
        A value in [0, 8]. Zero for a single repeated byte, 8 for a perfectly
        flat histogram.
    """
    if len(histogram) != 256:
        raise ValueError(f"expected 256 buckets, got {len(histogram)}")
    total = 0
    for count in histogram:
        if count < 0:
            raise ValueError("histogram counts must be non-negative")
        total += count
    if total == 0:
        raise EmptyFileError("empty file")
    entropy = 0.0
    for count in histogram:
        if count:
            freq = count / total
            entropy += freq * math.log2(freq)
    # All-equal buckets are reported exactly rather than 7.999999999999998,
    # and anything else stays strictly below the maximum.
    if len(set(histogram)) == 1:
        return 8.0
    return min(max(0.0, -entropy), math.nextafter(8.0, 0.0))


# --- workloads ---------------------------------------------------------------

@dataclass(frozen=True)
class WorkloadSpec:
    kind: WorkloadClass
    ops_per_second: float = 100.0
    file_count: int = 1
    file_size_bytes: int = 1024
    start_time: float = 0.0

    def __post_init__(self) -> None:
        if not isinstance(self.kind, WorkloadClass):
            object.__setattr__(self, "kind", WorkloadClass(self.kind))
        if self.kind is not WorkloadClass.IDLE and not self.ops_per_second > 0:
            raise ValueError("ops_per_second must be positive for non-idle workloads")
        if self.file_count < 1:
            raise ValueError("file_count must be positive")
        if self.file_size_bytes < 1:
            raise ValueError("file_size_bytes must be positive")
        if not math.isfinite(self.start_time) or self.start_time < 0:
            raise ValueError("start_time must be finite and non-negative")


@dataclass
class Trace:
    events: list[FsEvent]
    files: dict[str, FileModel]

    def rw_times(self) -> list[float]:
        return [e.time for e in self.events if e.kind in _RW]


# An operation before timing: kind, path, and the path's file state afterwards
# (None once the path has been deleted).
_Op = tuple[EventKind, str, "FileModel | None"]


def _encrypt_ops(spec: WorkloadSpec, rng: random.Random, benign: bool) -> Iterator[_Op]:
    base = "/home/user/private" if benign else "/home/user/documents"
    pool = BENIGN_CIPHER_EXTENSIONS if benign else RANSOM_EXTENSIONS
    out_ext = rng.choice(pool)
    O, C, R, W, X, D = (EventKind.OPEN, EventKind.CREATE, EventKind.READ,
                        EventKind.WRITE, EventKind.CLOSE, EventKind.DELETE)
    for i in range(spec.file_count):
        ext = rng.choice(VICTIM_EXTENSIONS)
        src = f"{base}/file{i:05d}.{ext}"
        dst = f"{base}/file{i:05d}.{out_ext}"
        original = FileModel(src, ext, category_for(ext), spec.file_size_bytes,
                             content="text" if ext in TEXT_EXTENSIONS else "binary",
                             content_seed=rng.getrandbits(63))
        cipher = FileModel(dst, out_ext, original.category, spec.file_size_bytes,
                           encrypted=True, content="random", content_seed=rng.getrandbits(63))
        yield O, src, original
        yield C, dst, cipher
        yield O, dst, cipher
        yield R, src, original
        yield W, dst, cipher
        yield X, src, original
        yield X, dst, cipher
        yield D, src, None


def _modify_ops(spec: WorkloadSpec, rng: random.Random) -> Iterator[_Op]:
    O, C, R, W, X = (EventKind.OPEN, EventKind.CREATE, EventKind.READ,
                     EventKind.WRITE, EventKind.CLOSE)
    for i in range(spec.file_count):
        ext = rng.choice(sorted(TEXT_EXTENSIONS))
        path = f"/home/user/notes/note{i:05d}.{ext}"
        swap = f"/home/user/notes/.note{i:05d}.{ext}.swp"
        before = FileModel(path, ext, FileCategory.TEXT, spec.file_size_bytes,
                           content_seed=rng.getrandbits(63))
        after = FileModel(path, ext, FileCategory.TEXT, spec.file_size_bytes,
                          content_seed=rng.getrandbits(63))
        yield O, path, before
        yield R, path, before
        yield X, path, before
        yield O, "/home/user/notes", None
        yield C, swap, None
        yield O, swap, None
        yield X, swap, None
        yield W, path, after
        yield X, path, after


def _compress_ops(spec: WorkloadSpec, rng: random.Random) -> Iterator[_Op]:
    O, C, R, W, X = (EventKind.OPEN, EventKind.CREATE, EventKind.READ,
                     EventKind.WRITE, EventKind.CLOSE)
    for i in range(spec.file_count):
        ext = rng.choice(VICTIM_EXTENSIONS)
        src = f"/home/user/archive/item{i:05d}.{ext}"
        dst = f"{src}.gz"
        original = FileModel(src, ext, category_for(ext), spec.file_size_bytes,
                             content="text" if ext in TEXT_EXTENSIONS else "binary",
                             content_seed=rng.getrandbits(63))
        packed = FileModel(dst, "gz", FileCategory.NONTEXT, max(1, spec.file_size_bytes // 2),
                           content="random", content_seed=rng.getrandbits(63))
        yield O, src, original
        yield C, dst, packed
        yield O, dst, packed
        yield R, src, original
        yield X, src, original
        yield W, dst, packed
        yield X, dst, packed


def _decompress_ops(spec: WorkloadSpec, rng: random.Random) -> Iterator[_Op]:
    for i in range(spec.file_count):
        path = f"/home/user/downloads/bundle{i:05d}.gz"
        model = FileModel(path, "gz", FileCategory.NONTEXT, spec.file_size_bytes,
                          content="random", content_seed=rng.getrandbits(63))
        yield EventKind.OPEN, path, model
        yield EventKind.READ, path, model
        yield EventKind.CLOSE, path, model


def _browse_ops(spec: WorkloadSpec, rng: random.Random) -> Iterator[_Op]:
    O, C, R, W, X = (EventKind.OPEN, EventKind.CREATE, EventKind.READ,
                     EventKind.WRITE, EventKind.CLOSE)
    for i in range(spec.file_count):
        path = f"/home/user/.cache/browser/entry{i:05d}.html"
        model = FileModel(path, "html", FileCategory.TEXT, spec.file_size_bytes,
                          content_seed=rng.getrandbits(63))
        if rng.random() < 0.5:
            # {read*, write}: cache entry written, then several reads before a write
            yield C, path, model
            yield O, path, model
            yield W, path, model
            yield X, path, model
            for _ in range(rng.randint(2, 4)):
                yield R, path, model
            yield W, path, model
            yield X, path, model
        else:
            # {read, write}*: alternating pairs after an initial write
            yield O, path, model
            yield W, path, model
            for _ in range(rng.randint(2, 4)):
                yield R, path, model
                yield W, path, model
            yield X, path, model


def _ops(spec: WorkloadSpec, rng: random.Random) -> Iterator[_Op]:
    kind = spec.kind
    if kind is WorkloadClass.RANSOMWARE:
        return _encrypt_ops(spec, rng, benign=False)
    if kind is WorkloadClass.BENIGN_ENCRYPT:
        return _encrypt_ops(spec, rng, benign=True)
    if kind is WorkloadClass.MODIFY:
        return _modify_ops(spec, rng)
    if kind is WorkloadClass.COMPRESS:
        return _compress_ops(spec, rng)
    if kind is WorkloadClass.DECOMPRESS:
        return _decompress_ops(spec, rng)
    if kind is WorkloadClass.BROWSE:
        return _browse_ops(spec, rng)
    return iter(())


def iter_trace(spec: WorkloadSpec, rng_seed: int) -> Iterator[tuple[FsEvent, FileModel | None]]:
    """Lazily yield ``(event, state)`` pairs for a workload.

    Read and write operations sit on a fixed grid, one every
    ``1 / ops_per_second`` seconds starting one tick after ``start_time``.
    Other operations are spread evenly inside the gap leading up to the next
    read or write (or the tick after the last one).  ``state`` is the model of
    ``event.path`` after the operation, None once deleted or for paths that
    never hold content.
    """
    rng = random.Random(f"{rng_seed}:{spec.kind.value}")
    if spec.kind is WorkloadClass.IDLE:
        return
    tick = 1.0 / spec.ops_per_second
    start = spec.start_time
    rw_index = 0
    pending: list[_Op] = []
    for op in _ops(spec, rng):
        if op[0] not in _RW:
            pending.append(op)
            continue
        slot_end = start + (rw_index + 1) * tick
        slot_start = start + rw_index * tick
        n = len(pending)
        for j, (kind, path, state) in enumerate(pending, 1):
            yield FsEvent(slot_start + j * tick / (n + 1), kind, path), state
        pending.clear()
        yield FsEvent(slot_end, op[0], op[1]), op[2]
        rw_index += 1
    if pending:
        slot_start = start + rw_index * tick
        n = len(pending)
        for j, (kind, path, state) in enumerate(pending, 1):
            yield FsEvent(slot_start + j * tick / (n + 1), kind, path), state


def gen_trace(spec: WorkloadSpec, rng_seed: int) -> Trace:
    """Materialise a workload's events and the resulting file table."""
    events: list[FsEvent] = []
    files: dict[str, FileModel] = {}
    for event, state in iter_trace(spec, rng_seed):
        events.append(event)
        if event.kind is EventKind.DELETE:
            files.pop(event.path, None)
        elif state is not None:
            files[event.path] = state
    return Trace(events, files)


def format_event(event: FsEvent) -> str:
    return f"{event.time:.6f}\t{event.kind.value}\t{event.path}"


def write_trace(events: Iterable[FsEvent], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for event in events:
            fh.write(format_event(event) + "\n")


def read_trace(path: str | Path) -> list[FsEvent]:
    events = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line:
                continue
            try:
                t, kind, name = line.split("\t", 2)
                events.append(FsEvent(float(t), EventKind(kind), name))
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: malformed trace line") from exc
    return events
