"""Deterministic discrete-event kernel.

Time is integer seconds since the Unix epoch (UTC, no zone conversion).
Events are ordered by ``(time, seq)`` where ``seq`` is issued at schedule
time, so simultaneous events dispatch in the order they were scheduled.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass
from datetime import datetime, timezone
from typing import Any, Callable, Iterator

SimTime = int

ISO_FORMAT = "%Y-%m-%dT%H:%M:%S"
LOG_HEADER = "time_iso,seq,kind,entity,detail"

_MASK64 = (1 << 64) - 1


class SchedulingInPast(ValueError):
    pass


def format_time(t: SimTime) -> str:
    return datetime.fromtimestamp(t, tz=timezone.utc).strftime(ISO_FORMAT)


def parse_time(text: str) -> SimTime:
    """Parse ``YYYY-MM-DDTHH:MM:SS`` or a log-sheet stamp like ``03/03/14 04:00AM``.

    Log-sheet stamps are day/month/two-digit-year.
    """
    text = text.strip()
    for fmt in (ISO_FORMAT, "%Y-%m-%dT%H:%M", "%d/%m/%y %I:%M%p", "%d/%m/%y %I:%M %p"):
        try:
            dt = datetime.strptime(text, fmt)
        except ValueError:
            continue
        return int(dt.replace(tzinfo=timezone.utc).timestamp())
    raise ValueError(f"unrecognised timestamp {text!r}")


@dataclass(frozen=True)
class Event:
    time: SimTime
    seq: int
    kind: str
    payload: Any = None


def entity_label(payload: Any) -> str:
    if payload is None:
        return ""
    label = getattr(payload, "label", None)
    return str(label) if label is not None else str(payload)


@dataclass(frozen=True)
class LogRecord:
    time: SimTime
    seq: int
    kind: str
    entity: str
    detail: str = ""

    def to_line(self) -> str:
        return f"{format_time(self.time)},{self.seq},{self.kind},{self.entity},{self.detail}"

    @classmethod
    def from_line(cls, line: str) -> "LogRecord":
        time_iso, seq, kind, entity, detail = line.split(",", 4)
        return cls(parse_time(time_iso), int(seq), kind, entity, detail)

    def fields(self) -> dict[str, str]:
        """Parse ``key=value;key=value`` detail into a dict."""
        if not self.detail:
            return {}
        return dict(part.split("=", 1) for part in self.detail.split(";"))


class SimulationLog:
    """Append-only sequence of dispatched-event records."""

    def __init__(self, records: list[LogRecord] | None = None) -> None:
        self._records: list[LogRecord] = list(records or [])

    def append(self, record: LogRecord) -> None:
        self._records.append(record)

    def __len__(self) -> int:
        return len(self._records)

    def __iter__(self) -> Iterator[LogRecord]:
        return iter(self._records)

    def __getitem__(self, i: int) -> LogRecord:
        return self._records[i]

    def of_kind(self, *kinds: str) -> list[LogRecord]:
        return [r for r in self._records if r.kind in kinds]

    def serialize(self) -> str:
        lines = [LOG_HEADER]
        lines.extend(r.to_line() for r in self._records)
        return "\n".join(lines) + "\n"

    @classmethod
    def parse(cls, text: str) -> "SimulationLog":
        lines = text.split("\n")
        if lines[0] != LOG_HEADER:
            raise ValueError("missing log header")
        return cls([LogRecord.from_line(line) for line in lines[1:] if line])


Handler = Callable[[Event], "str | None"]


class Engine:
    """Clock plus future-event list.

    The handler passed to :meth:`run_until` returns the detail string logged
    for each event; it may schedule further events at or after the clock.
    """

    def __init__(self, start: SimTime = 0) -> None:
        self.clock: SimTime = start
        self._queue: list[tuple[SimTime, int, Event]] = []
        self._next_seq = 0
        self.dispatched = 0
        self.log = SimulationLog()

    @property
    def scheduled(self) -> int:
        return self._next_seq

    @property
    def pending(self) -> int:
        return len(self._queue)

    def schedule(self, t: SimTime, kind: str, payload: Any = None) -> int:
        if t < self.clock:
            raise SchedulingInPast(f"cannot schedule {kind} at {t} < clock {self.clock}")
        seq = self._next_seq
        self._next_seq += 1
        heapq.heappush(self._queue, (t, seq, Event(t, seq, kind, payload)))
        return seq

    def peek_time(self) -> SimTime | None:
        return self._queue[0][0] if self._queue else None

    def step(self) -> tuple[SimTime, Event] | None:
        """Pop the minimum ``(time, seq)`` event, or ``None`` when exhausted."""
        if not self._queue:
            return None
        t, _, event = heapq.heappop(self._queue)
        self.clock = t
        self.dispatched += 1
        return t, event

    def run_until(self, t_end: SimTime, handler: Handler) -> SimulationLog:
        if t_end < self.clock:
            raise SchedulingInPast(f"t_end {t_end} is before clock {self.clock}")
        while self._queue and self._queue[0][0] <= t_end:
            _, event = self.step()  # type: ignore[misc]
            try:
                detail = handler(event)
            except Exception as exc:
                exc.event = event  # type: ignore[attr-defined]
                raise
            self.log.append(
                LogRecord(event.time, event.seq, event.kind, entity_label(event.payload), detail or "")
            )
        self.clock = t_end
        return self.log


class SplitMix64:
    """SplitMix64 generator (Steele, Lea & Flood 2014; constants as in Vigna's reference C).

    Every draw is defined by 64-bit integer arithmetic, so sequences are
    identical on every platform and Python version.
    """

    def __init__(self, seed: int) -> None:
        if not 0 <= seed <= _MASK64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        self.seed = seed
        self.state = seed

    def next_u64(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & _MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return z ^ (z >> 31)

    def random(self) -> float:
        """Uniform float in [0, 1) from the top 53 bits."""
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def randint(self, lo: int, hi: int) -> int:
        """Uniform integer in [lo, hi], unbiased by rejection."""
        if hi < lo:
            raise ValueError("empty range")
        span = hi - lo + 1
        limit = (1 << 64) - ((1 << 64) % span)
        while True:
            x = self.next_u64()
            if x < limit:
                return lo + x % span
