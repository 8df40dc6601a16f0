"""Control messages exchanged by stations during scanning and handoff.

Every message is accounted with the same fixed serialized size; contents
matter only to the receiving state machine.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from .network import CONTROL_BYTES, NodeId


@dataclass(frozen=True)
class ApEntry:
    """One discovered access point with its probed signal quality."""
    ap_id: NodeId
    channel: int
    sinr_db: float


@dataclass
class ControlMessage:
    src: NodeId
    size_bytes: int = field(default=CONTROL_BYTES, init=False)


@dataclass
class DSProbe(ControlMessage):
    """Broadcast on a foreign channel; names the sender's serving AP."""
    serving_ap: NodeId | None


@dataclass
class DSProbeResponse(ControlMessage):
    """Answer to a DSProbe, relayed over the distribution system when the
    prober is associated elsewhere."""
    mn_id: NodeId
    channel: int


@dataclass
class MoveRequest(ControlMessage):
    """MN asks its AP to arbitrate a move to one of the scanned APs."""
    ap_list: tuple[ApEntry, ...]
    offered_bps: float


@dataclass
class LoadRequest(ControlMessage):
    """Serving AP queries a candidate AP for its current load."""
    reply_to: NodeId


@dataclass
class LoadResponse(ControlMessage):
    load_bps: float
    spare_bps: float


@dataclass
class HandoffTargetMessage(ControlMessage):
    """Arbitration result: APs with enough headroom, in request order.

    ``serving_overloaded`` is the arbiter's own state at decision time;
    with no candidate it tells the MN whether escaping the cell (rather
    than waiting out a draining queue) is warranted."""
    candidates: tuple[NodeId, ...]
    serving_overloaded: bool = False


@dataclass
class LoadRequestFromMN(ControlMessage):
    """Direct load query from an unassociated MN probing a way back in."""
    offered_bps: float


@dataclass
class RouteUpdate(ControlMessage):
    """Tells the access router which attachment now serves the MN."""
    mn_id: NodeId
    attachment: NodeId
