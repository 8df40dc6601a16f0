"""Handoff arbitration rules.

The serving AP admits a move only toward APs whose measured load leaves
room for the requester's traffic plus a safety margin; among admitted
candidates the MN picks the one it heard best.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum, auto
from typing import Iterable, Optional, Sequence

from .messages import ApEntry
from .network import NodeId


def handoff_candidates(serving_load_bps: float, mn_load_bps: float,
                       peer_loads: Sequence[tuple[NodeId, float]],
                       margin_bps: float) -> list[NodeId]:
    """APs that would still be the lighter choice after taking the MN.

    An AP qualifies when the serving AP's load, less the requester's own
    traffic and less the candidate's load, exceeds the margin.  Order of
    the input is preserved.  The serving AP itself must not be offered.
    """
    out = []
    for ap_id, load in peer_loads:
        if serving_load_bps - mn_load_bps - load > margin_bps:
            out.append(ap_id)
    return out


def select_target(candidates: Iterable[NodeId],
                  ap_list: Sequence[ApEntry]) -> Optional[ApEntry]:
    """Best-heard candidate; ties resolve to the lower AP index."""
    wanted = set(candidates)
    best: Optional[ApEntry] = None
    for entry in ap_list:
        if entry.ap_id not in wanted:
            continue
        if (best is None or entry.sinr_db > best.sinr_db
                or (entry.sinr_db == best.sinr_db
                    and entry.ap_id.index < best.ap_id.index)):
            best = entry
    return best


class MnPhase(Enum):
    IDLE = auto()
    SCANNING = auto()
    REQUESTING = auto()
    HANDING_OFF = auto()
    VERTICAL_ENTRY = auto()
    ON_WMAN = auto()
    RETURNING = auto()


@dataclass
class PendingArbitration:
    """A MoveRequest under evaluation at the serving AP."""
    mn_id: NodeId
    offered_bps: float
    ap_list: tuple[ApEntry, ...]
    responses: dict[NodeId, float]
    deadline_ev: object


class ArbitrationGate:
    """Per-AP admission of MoveRequests.

    After processing one request the gate ignores every further request,
    from any MN, for the quiet window; at most one arbitration is in
    flight at a time.
    """

    def __init__(self, quiet_window_us: int):
        self.quiet_window_us = quiet_window_us
        self.ignore_until = -1
        self.pending: Optional[PendingArbitration] = None

    def admits(self, now: int) -> bool:
        return now >= self.ignore_until and self.pending is None

    def open_for(self, now: int, pending: PendingArbitration) -> None:
        self.pending = pending
        self.ignore_until = now + self.quiet_window_us
