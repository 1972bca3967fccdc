"""Discrete-event engine and named random streams.

Time is kept as integer microseconds. Events are ordered by
``(fire_at, sequence_no)``; the sequence number is a plain insertion
counter, so simultaneous events fire in the order they were scheduled.
"""

from __future__ import annotations

import hashlib
import heapq
import random
from dataclasses import dataclass, field
from typing import Callable, Optional

US_PER_SECOND = 1_000_000


class SchedulingError(ValueError):
    """Raised when an event is scheduled before the current clock."""


@dataclass(order=True)
class Event:
    fire_at: int
    sequence_no: int
    kind: str = field(compare=False)
    action: Optional[Callable[[], None]] = field(compare=False, default=None, repr=False)
    cancelled: bool = field(compare=False, default=False)

    def cancel(self) -> None:
        self.cancelled = True


class Engine:
    def __init__(self, record_log: bool = False):
        self.clock = 0
        self._pending: list[Event] = []
        self._seq = 0
        self.dispatched = 0
        self.log: Optional[list[tuple[int, int, str]]] = [] if record_log else None

    def schedule(self, fire_at: int, kind: str, action: Optional[Callable[[], None]] = None) -> Event:
        fire_at = int(fire_at)
        if fire_at < self.clock:
            raise SchedulingError(
                f"cannot schedule {kind!r} at t={fire_at} us, clock is already t={self.clock} us"
            )
        self._seq += 1
        ev = Event(fire_at, self._seq, kind, action)
        heapq.heappush(self._pending, ev)
        return ev

    def schedule_in(self, delay: int, kind: str, action: Optional[Callable[[], None]] = None) -> Event:
        return self.schedule(self.clock + delay, kind, action)

    def pending(self) -> int:
        return sum(1 for ev in self._pending if not ev.cancelled)

    def peek(self) -> Optional[Event]:
        while self._pending and self._pending[0].cancelled:
            heapq.heappop(self._pending)
        return self._pending[0] if self._pending else None

    def run_until(self, end: int) -> int:
        """Dispatch every event with ``fire_at <= end`` and return the final clock.

        Events scheduled by handlers are dispatched in the same call when
        they fall inside the horizon. The clock finishes at ``end``.
        """
        pq = self._pending
        while pq and pq[0].fire_at <= end:
            ev = heapq.heappop(pq)
            if ev.cancelled:
                continue
            self.clock = ev.fire_at
            self.dispatched += 1
            if self.log is not None:
                self.log.append((ev.fire_at, ev.sequence_no, ev.kind))
            if ev.action is not None:
                ev.action()
        if end > self.clock:
            self.clock = end
        return self.clock


def derive_seed(seed: int, stream_id: str) -> int:
    # sha256 keeps streams independent of Python's hash randomization
    digest = hashlib.sha256(f"{int(seed)}/{stream_id}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


class RngStream:
    """A reproducible uniform stream identified by ``(seed, stream_id)``."""

    def __init__(self, seed: int, stream_id: str):
        self.seed = int(seed)
        self.stream_id = stream_id
        self._rng = random.Random(derive_seed(seed, stream_id))
        self.draws = 0

    def uniform(self) -> float:
        self.draws += 1
        return self._rng.random()

    def randint(self, lo: int, hi: int) -> int:
        """Uniform integer in ``[lo, hi]`` built from a single uniform draw."""
        return lo + int(self.uniform() * (hi - lo + 1))

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed}, stream_id={self.stream_id!r}, draws={self.draws})"


def draw_uniform(stream: RngStream) -> float:
    return stream.uniform()
