"""Deterministic discrete-event core.

The clock is an integer count of simulated microseconds.  Events scheduled
for the same instant fire in the order they were scheduled, so a run is a
pure function of (scenario, seed).
"""
from __future__ import annotations

import hashlib
import heapq
import random
from dataclasses import dataclass, field
from typing import Callable

US_PER_MS = 1_000
US_PER_S = 1_000_000


def ms(n: float) -> int:
    """Milliseconds to integer microseconds."""
    return round(n * US_PER_MS)


def seconds(n: float) -> int:
    """Seconds to integer microseconds."""
    return round(n * US_PER_S)


class SchedulingInPast(Exception):
    """An event was scheduled before the current clock value."""


@dataclass(order=True)
class SimEvent:
    fire_at: int
    seq: int
    action: Callable[[], None] = field(compare=False)
    tag: str = field(default="", compare=False)
    cancelled: bool = field(default=False, compare=False)
    fired: bool = field(default=False, compare=False)


@dataclass
class SimStats:
    scheduled: int = 0
    processed: int = 0
    cancelled: int = 0

    @property
    def pending(self) -> int:
        return self.scheduled - self.processed - self.cancelled


class Simulator:
    """Event queue plus clock.  All node behaviour hangs off scheduled actions."""

    def __init__(self, seed: int = 1):
        self.now: int = 0
        self.seed = seed
        self.stats = SimStats()
        self._heap: list[SimEvent] = []
        self._seq = 0

    # ---- scheduling ----

    def schedule(self, fire_at: int, action: Callable[[], None], tag: str = "") -> SimEvent:
        if fire_at < self.now:
            raise SchedulingInPast(f"{tag or action!r} at {fire_at} < now {self.now}")
        ev = SimEvent(fire_at, self._seq, action, tag)
        self._seq += 1
        heapq.heappush(self._heap, ev)
        self.stats.scheduled += 1
        return ev

    def after(self, delay: int, action: Callable[[], None], tag: str = "") -> SimEvent:
        return self.schedule(self.now + delay, action, tag)

    def cancel(self, ev: SimEvent | None) -> bool:
        """Cancel a pending event.  False if already fired or cancelled."""
        if ev is None or ev.fired or ev.cancelled:
            return False
        ev.cancelled = True
        self.stats.cancelled += 1
        return True

    # ---- execution ----

    def run_until(self, end: int) -> SimStats:
        if end < self.now:
            raise ValueError(f"run_until({end}) before now={self.now}")
        heap = self._heap
        while heap and heap[0].fire_at <= end:
            ev = heapq.heappop(heap)
            if ev.cancelled:
                continue
            self.now = ev.fire_at
            ev.fired = True
            self.stats.processed += 1
            ev.action()
        self.now = end
        return self.stats

    # ---- reproducible randomness ----

    def stream(self, name: str) -> random.Random:
        """Independent RNG derived from the run seed and a stable name."""
        digest = hashlib.sha256(f"{self.seed}:{name}".encode()).digest()
        return random.Random(int.from_bytes(digest[:8], "big"))
