"""Deterministic discrete-event simulation core: clock, calendar, RNG streams."""

from __future__ import annotations

import heapq
import math
from itertools import count
from typing import Callable

import numpy as np


class SchedulingError(ValueError):
    """Raised when an event is scheduled in the simulated past."""


class Event:
    """Handle for a scheduled action; cancellation is lazy (skipped at pop time)."""

    __slots__ = ("time", "seq", "action", "cancelled")

    def __init__(self, time: float, seq: int, action: Callable[[], None]):
        self.time = time
        self.seq = seq
        self.action = action
        self.cancelled = False

    def cancel(self) -> None:
        self.cancelled = True


class Simulator:
    """Event calendar plus simulation clock.

    Events execute in (timestamp, insertion sequence) order, so ties at equal
    timestamps resolve FIFO regardless of heap internals. The clock never
    moves backwards; scheduling in the past raises instead of clamping.
    """

    def __init__(self) -> None:
        self.now = 0.0
        self._heap: list[tuple[float, int, Event]] = []
        self._seq = count()
        self.executed = 0

    def schedule(self, time: float, action: Callable[[], None]) -> Event:
        if time < self.now:
            raise SchedulingError(
                f"cannot schedule at t={time!r}: clock already at t={self.now!r}"
            )
        event = Event(time, next(self._seq), action)
        heapq.heappush(self._heap, (time, event.seq, event))
        return event

    def run_until(self, t_end: float) -> int:
        """Execute every pending event with timestamp <= t_end; clock ends at t_end."""
        if t_end < self.now:
            raise SchedulingError(
                f"cannot run until t={t_end!r}: clock already at t={self.now!r}"
            )
        executed = 0
        heap = self._heap
        while heap and heap[0][0] <= t_end:
            time, _, event = heapq.heappop(heap)
            if event.cancelled:
                continue
            self.now = time
            event.action()
            executed += 1
        self.now = t_end
        self.executed += executed
        return executed

    def run_to_exhaustion(self, t_max: float = math.inf) -> int:
        """Drain the calendar; the clock stops at the last executed event (or t_max)."""
        executed = 0
        heap = self._heap
        while heap and heap[0][0] <= t_max:
            time, _, event = heapq.heappop(heap)
            if event.cancelled:
                continue
            self.now = time
            event.action()
            executed += 1
        self.executed += executed
        return executed

    def pending(self) -> int:
        return sum(1 for _, _, ev in self._heap if not ev.cancelled)


def derive_stream(seed: int, stream_id: int) -> np.random.Generator:
    """Deterministic, statistically independent stream for (seed, stream_id)."""
    if seed < 0 or stream_id < 0:
        raise ValueError("seed and stream_id must be non-negative")
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence((seed, stream_id))))


def replication_seed(base_seed: int, replication: int) -> int:
    """Fold a replication index into a base seed without colliding with stream ids."""
    ss = np.random.SeedSequence((base_seed, 0x5EED, replication))
    return int(ss.generate_state(1, dtype=np.uint64)[0])
