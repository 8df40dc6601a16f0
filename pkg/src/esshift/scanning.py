"""Interleaved scanning of non-overlapping channels.

A station visits one foreign channel per timer period, dwelling just long
enough to probe, so its flows see at most a few milliseconds of extra gap
per visit instead of one long outage.  Cycle bookkeeping lives here; the
radio and timer plumbing belong to the station driving the scan.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from .messages import ApEntry
from .network import CHANNELS, MIN_CHANNEL_GAP


def build_channel_list(home_channel: int | None) -> list[int]:
    """Channels that do not overlap the home channel, ascending.

    With no home channel (unassociated radio) every channel qualifies.
    """
    if home_channel is None:
        return list(CHANNELS)
    if home_channel not in CHANNELS:
        raise ValueError(f"channel {home_channel} outside {CHANNELS}")
    return [c for c in CHANNELS if abs(c - home_channel) >= MIN_CHANNEL_GAP]


@dataclass
class OffChannelVisit:
    channel: int
    left_home_at: int
    back_home_at: int
    dwell_us: int


@dataclass
class ScanCycle:
    """Record of one full pass over the channel list."""
    mn: object
    started_at: int
    channels: tuple[int, ...]
    visits: list[OffChannelVisit] = field(default_factory=list)
    completed_at: int | None = None

    @property
    def dwell_total_us(self) -> int:
        return sum(v.dwell_us for v in self.visits)


class ScanState:
    """Progress of the current cycle: position, probed set, results."""

    def __init__(self, channel_list: list[int]):
        if not channel_list:
            raise ValueError("empty channel list")
        self.channel_list = list(channel_list)
        self.cursor = 0
        self.probed = 0
        self.ap_list: list[ApEntry] = []

    @property
    def next_channel(self) -> int:
        return self.channel_list[self.cursor]

    @property
    def complete(self) -> bool:
        return self.probed >= len(self.channel_list)

    def purge(self, channel: int) -> None:
        """Drop stale entries for a channel about to be re-probed."""
        self.ap_list = [e for e in self.ap_list if e.channel != channel]

    def advance(self) -> None:
        self.probed += 1
        self.cursor = (self.cursor + 1) % len(self.channel_list)

    def note(self, entry: ApEntry) -> None:
        self.ap_list.append(entry)
