"""Static network model: nodes, links, channels, queues, traffic.

Distances are metres, rates are bits per second, times are integer
microseconds unless a name says otherwise.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional

from .engine import Simulator, US_PER_S

# 802.11b/g channel layout: 22 MHz wide on a 5 MHz raster, so two channels
# interfere unless their numbers differ by at least 5.
CHANNELS = range(1, 12)
MIN_CHANNEL_GAP = 5

CONTROL_BYTES = 128


class NodeKind(str, Enum):
    MN = "MN"
    AP = "AP"
    BS = "BS"
    AR = "AR"
    CN = "CN"


@dataclass(frozen=True)
class NodeId:
    kind: NodeKind
    index: int

    def __str__(self) -> str:
        # A lone base station is reported as "BS" in every table.
        if self.kind is NodeKind.BS and self.index == 1:
            return "BS"
        return f"{self.kind.value}{self.index}"


def mn(i: int) -> NodeId:
    return NodeId(NodeKind.MN, i)


def ap(i: int) -> NodeId:
    return NodeId(NodeKind.AP, i)


BS1 = NodeId(NodeKind.BS, 1)
AR1 = NodeId(NodeKind.AR, 1)
CN1 = NodeId(NodeKind.CN, 1)


@dataclass
class Packet:
    pkt_id: int
    flow_id: str
    size_bytes: int
    created_at: int
    src: NodeId
    dst: NodeId
    via: Optional[NodeId] = None     # attachment that carried it uplink
    emitted_at: Optional[int] = None  # when it left the sender's radio


def serialization_us(size_bytes: int, rate_bps: float) -> float:
    """Exact serialization delay in microseconds (fractional)."""
    return size_bytes * 8 * US_PER_S / rate_bps


def serialization_ticks(size_bytes: int, rate_bps: float) -> int:
    # Ceiling keeps a saturated server at or below the nominal rate.
    return math.ceil(serialization_us(size_bytes, rate_bps))


@dataclass
class WiredLink:
    a: NodeId
    b: NodeId
    bandwidth_bps: float
    delay_us: int

    def transit_us(self, size_bytes: int) -> int:
        return serialization_ticks(size_bytes, self.bandwidth_bps) + self.delay_us

    def joins(self, x: NodeId, y: NodeId) -> bool:
        return {self.a, self.b} == {x, y}


class LoadMeter:
    """Trailing-window bit counter; reads as bits per second."""

    def __init__(self, window_us: int = US_PER_S):
        self.window_us = window_us
        self._events: deque[tuple[int, int]] = deque()
        self._bits = 0

    def add(self, now: int, bits: int) -> None:
        self._events.append((now, bits))
        self._bits += bits
        self._evict(now)

    def rate_bps(self, now: int) -> float:
        self._evict(now)
        return self._bits * US_PER_S / self.window_us

    def _evict(self, now: int) -> None:
        cutoff = now - self.window_us
        ev = self._events
        while ev and ev[0][0] <= cutoff:
            self._bits -= ev.popleft()[1]


class ChannelServer:
    """Single-server drop-tail FIFO standing in for one wireless channel.

    Service time is serialization at the effective capacity plus a fixed
    per-packet overhead tick.  The offered-load meter counts every arrival,
    dropped or not, so a saturated channel still reports its true demand.
    """

    def __init__(self, sim: Simulator, owner: NodeId, capacity_bps: float,
                 overhead_us: int, queue_capacity: int,
                 on_served: Callable[[Packet], None],
                 on_drop: Optional[Callable[[Packet], None]] = None):
        self.sim = sim
        self.owner = owner
        self.capacity_bps = capacity_bps
        self.overhead_us = overhead_us
        self.queue_capacity = queue_capacity
        self.on_served = on_served
        self.on_drop = on_drop
        self.queue: deque[Packet] = deque()
        self.busy = False
        self.serving: Optional[Packet] = None
        self.meter = LoadMeter()
        self.delivered = LoadMeter()
        self.drop_count = 0
        self._drop_times: deque[int] = deque()

    def service_us(self, size_bytes: int) -> int:
        return serialization_ticks(size_bytes, self.capacity_bps) + self.overhead_us

    @property
    def queue_len(self) -> int:
        return len(self.queue)

    def offer(self, pkt: Packet) -> bool:
        """Submit a packet; False means it was tail-dropped."""
        now = self.sim.now
        self.meter.add(now, pkt.size_bytes * 8)
        if not self.busy:
            self._begin(pkt)
            return True
        if len(self.queue) >= self.queue_capacity:
            self.drop_count += 1
            self._drop_times.append(now)
            if self.on_drop:
                self.on_drop(pkt)
            return False
        self.queue.append(pkt)
        return True

    def resident(self) -> list[Packet]:
        """Packets currently held here: in service plus queued."""
        head = [self.serving] if self.serving is not None else []
        return head + list(self.queue)

    def _begin(self, pkt: Packet) -> None:
        self.busy = True
        self.serving = pkt
        self.sim.after(self.service_us(pkt.size_bytes),
                       lambda: self._done(pkt), tag="chan-serve")

    def _done(self, pkt: Packet) -> None:
        self.delivered.add(self.sim.now, pkt.size_bytes * 8)
        if self.queue:
            self._begin(self.queue.popleft())
        else:
            self.busy = False
            self.serving = None
        self.on_served(pkt)

    def overloaded(self, window_us: int = US_PER_S) -> bool:
        """True while the drop-tail is active: an arrival was discarded
        within the trailing window.  A queue that is merely draining after
        relief stops dropping at once and reads as not overloaded."""
        cutoff = self.sim.now - window_us
        dt = self._drop_times
        while dt and dt[0] <= cutoff:
            dt.popleft()
        return bool(dt)


class OutOfRange(Exception):
    """Target node is beyond radio range."""


class CoverageModel:
    """Log-distance signal-quality proxy over static positions."""

    def __init__(self, pathloss_exponent: float = 3.0, ref_db: float = 0.0,
                 noise_floor_db: float = -90.0):
        self.pathloss_exponent = pathloss_exponent
        self.ref_db = ref_db
        self.noise_floor_db = noise_floor_db
        self.positions: dict[NodeId, tuple[float, float]] = {}
        self.ranges: dict[NodeId, float] = {}

    def place(self, node: NodeId, x: float, y: float, range_m: float = 0.0) -> None:
        self.positions[node] = (x, y)
        if range_m:
            self.ranges[node] = range_m

    def distance(self, a: NodeId, b: NodeId) -> float:
        xa, ya = self.positions[a]
        xb, yb = self.positions[b]
        return math.hypot(xa - xb, ya - yb)

    def in_range(self, node: NodeId, station: NodeId) -> bool:
        return self.distance(node, station) <= self.ranges[station]

    def quality_db(self, node: NodeId, station: NodeId) -> float:
        """Received-signal quality proxy; raises OutOfRange past the radius."""
        d = self.distance(node, station)
        if d > self.ranges[station]:
            raise OutOfRange(f"{node} is {d:.1f} m from {station}")
        d = max(d, 1.0)  # clamp: inside 1 m the model is meaningless
        path_loss = 10.0 * self.pathloss_exponent * math.log10(d)
        return self.ref_db - path_loss - self.noise_floor_db


class CbrFlow:
    """Constant-bit-rate source: one packet per interval from start_at.

    The first packet leaves exactly at start_at; later emissions may carry
    a small per-packet timing jitter, which leaves the long-run rate intact.
    """

    def __init__(self, flow_id: str, src: NodeId, dst: NodeId,
                 packet_bytes: int, interval_us: int, start_at: int,
                 jitter_us: int = 0):
        self.flow_id = flow_id
        self.src = src
        self.dst = dst
        self.packet_bytes = packet_bytes
        self.interval_us = interval_us
        self.start_at = start_at
        self.jitter_us = jitter_us
        self.emitted = 0

    def emission_time(self, k: int, rng) -> int:
        """Scheduled creation time of the k-th packet (k from 0)."""
        t = self.start_at + k * self.interval_us
        if k > 0 and self.jitter_us:
            t += rng.randint(-self.jitter_us, self.jitter_us)
        return t

    def next_packet(self, created_at: int) -> Packet:
        pkt = Packet(self.emitted, self.flow_id, self.packet_bytes,
                     created_at, self.src, self.dst)
        self.emitted += 1
        return pkt

    @property
    def offered_bps(self) -> float:
        return self.packet_bytes * 8 * US_PER_S / self.interval_us
