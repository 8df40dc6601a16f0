"""Scenario assembly and run-level results.

``Simulation`` builds every station from a ``ScenarioConfig``, owns the
wired plumbing between them, and runs the clock to the horizon.  What a
run produced lives in ``RunResults``: the recorder with its tables plus
protocol-level logs that the tables do not carry (episode triggers,
processed MoveRequests, scan cycles, overlay occupancy).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .config import ScenarioConfig
from .engine import US_PER_S, Simulator
from .messages import RouteUpdate
from .metrics import Recorder
from .network import (CONTROL_BYTES, CbrFlow, CoverageModel, NodeId, NodeKind,
                      Packet, WiredLink)
from .nodes import (AccessPoint, AccessRouter, BaseStation, Correspondent,
                    MobileNode)
from .scanning import ScanCycle


@dataclass
class FlowCount:
    generated: int = 0
    delivered: int = 0
    dropped: int = 0


class RunResults:
    def __init__(self, conf: ScenarioConfig, seed: int, scheme_enabled: bool):
        self.conf = conf
        self.seed = seed
        self.scheme_enabled = scheme_enabled
        self.recorder: Optional[Recorder] = None
        self.flow_counts: dict[str, FlowCount] = {}
        self.triggers: list[tuple[int, NodeId]] = []
        self.move_requests_total = 0
        self.move_processed: list[tuple[int, str]] = []
        self.scan_cycles: list[ScanCycle] = []
        self.bs_events: list[tuple[int, NodeId, int]] = []
        self.resident_by_flow: dict[str, int] = {}
        self.resident_total = 0
        self.event_stats = None

    # -- hooks used by the stations --

    def register_flow(self, flow_id: str) -> None:
        self.flow_counts.setdefault(flow_id, FlowCount())

    def count_generated(self, flow_id: str) -> None:
        self.flow_counts[flow_id].generated += 1

    def count_delivered(self, flow_id: str) -> None:
        self.flow_counts[flow_id].delivered += 1

    def count_dropped(self, flow_id: str) -> None:
        self.flow_counts[flow_id].dropped += 1

    def note_trigger(self, mn_id: NodeId, now: int) -> None:
        self.triggers.append((now, mn_id))

    # -- derived views --

    @property
    def first_trigger_us(self) -> Optional[int]:
        return self.triggers[0][0] if self.triggers else None

    def mns_on_bs_at(self, t_us: int) -> set[NodeId]:
        on: set[NodeId] = set()
        for t, mn_id, delta in self.bs_events:
            if t > t_us:
                break
            if delta > 0:
                on.add(mn_id)
            else:
                on.discard(mn_id)
        return on

    def count_on_bs_at(self, t_us: int) -> int:
        return len(self.mns_on_bs_at(t_us))

    def conservation(self) -> dict[str, tuple[int, int, int, int]]:
        """Per flow: (generated, delivered, dropped, resident at end)."""
        out = {}
        for fid, c in self.flow_counts.items():
            out[fid] = (c.generated, c.delivered, c.dropped,
                        self.resident_by_flow.get(fid, 0))
        return out

    def summary(self) -> dict:
        rec = self.recorder
        horizon = self.conf.sim.horizon_s
        kinds: dict[str, int] = {}
        for h in rec.handoffs:
            kinds[h.kind] = kinds.get(h.kind, 0) + 1
        return {
            "seed": self.seed,
            "scheme": self.scheme_enabled,
            "horizon_s": horizon,
            "delivered_bits": rec.delivered_bits_total,
            "ess_bits": rec.node_bits("ESS", 0, horizon),
            "first_drop_s": rec.first_drop_time_s(),
            "first_trigger_us": self.first_trigger_us,
            "handoffs": kinds,
            "move_requests_seen": self.move_requests_total,
            "move_requests_processed": len(self.move_processed),
            "on_bs_at_end": self.count_on_bs_at(horizon * US_PER_S),
        }


class Simulation:
    """One configured run: stations, wiring, traffic, clock."""

    def __init__(self, conf: ScenarioConfig, seed: Optional[int] = None,
                 scheme_enabled: Optional[bool] = None):
        self.conf = conf
        self.seed = conf.sim.seed if seed is None else seed
        self.scheme_enabled = (conf.scheme_enabled if scheme_enabled is None
                               else scheme_enabled)
        self.sim = Simulator(seed=self.seed)
        self.coverage = CoverageModel()
        self.results = RunResults(conf, self.seed, self.scheme_enabled)

        ap_specs = conf.by_kind(NodeKind.AP)
        bs_specs = conf.by_kind(NodeKind.BS)
        self.recorder = Recorder(conf.sim.horizon_s,
                                 [s.node for s in ap_specs],
                                 bs_specs[0].node if bs_specs else None)
        self.results.recorder = self.recorder

        for spec in conf.nodes.values():
            self.coverage.place(spec.node, spec.x, spec.y,
                                spec.range_m or 0.0)

        self.aps: dict[NodeId, AccessPoint] = {}
        for spec in ap_specs:
            self.aps[spec.node] = AccessPoint(self, spec.node, spec.channel)
        self._by_channel: dict[int, list[AccessPoint]] = {}
        for apn in self.aps.values():
            self._by_channel.setdefault(apn.channel, []).append(apn)
        for group in self._by_channel.values():
            group.sort(key=lambda a: a.node_id.index)

        self.bs: Optional[BaseStation] = None
        if bs_specs and conf.wman.enabled:
            self.bs = BaseStation(self, bs_specs[0].node)

        self.ar = AccessRouter(self, conf.by_kind(NodeKind.AR)[0].node)
        self.cn = Correspondent(self, conf.by_kind(NodeKind.CN)[0].node)
        self._sinks = {self.ar.node_id: self.ar, self.cn.node_id: self.cn}

        self.mns: dict[NodeId, MobileNode] = {}
        for spec in conf.by_kind(NodeKind.MN):
            self.mns[spec.node] = MobileNode(self, spec.node)

        self._links: dict[frozenset[NodeId], WiredLink] = {}
        for ls in conf.links:
            link = WiredLink(ls.a, ls.b, ls.bandwidth_bps, ls.delay_us)
            self._links[frozenset((ls.a, ls.b))] = link
        self._in_transit: list[Packet] = []

        self._associate_initial()

    # -- wiring helpers used by stations ------------------------------------

    def aps_on_channel(self, channel: int) -> list[AccessPoint]:
        return self._by_channel.get(channel, [])

    def _link(self, a: NodeId, b: NodeId) -> WiredLink:
        try:
            return self._links[frozenset((a, b))]
        except KeyError:
            raise KeyError(f"no wired link between {a} and {b}") from None

    def data_hop(self, pkt: Packet, frm: NodeId, to: NodeId) -> None:
        link = self._link(frm, to)
        self._in_transit.append(pkt)
        self.sim.after(link.transit_us(pkt.size_bytes),
                       lambda: self._data_arrive(pkt, to), tag="wire")

    def _data_arrive(self, pkt: Packet, to: NodeId) -> None:
        self._in_transit.remove(pkt)
        self._sinks[to].on_data(pkt)

    def ctrl_hop(self, a: NodeId, b: NodeId, deliver) -> None:
        link = self._link(a, b)
        self.sim.after(link.transit_us(CONTROL_BYTES), deliver, tag="ctrl")

    def relay_ctrl(self, a: NodeId, b: NodeId, deliver) -> None:
        """Control message between infrastructure nodes over the wired
        distribution system, store-and-forward through the router."""
        ar_id = self.ar.node_id
        if a == ar_id or b == ar_id:
            self.ctrl_hop(a, b, deliver)
        else:
            self.ctrl_hop(a, ar_id, lambda: self.ctrl_hop(ar_id, b, deliver))

    def send_route_update(self, mn_id: NodeId, attachment: NodeId) -> None:
        station = (self.bs if attachment.kind is NodeKind.BS
                   else self.aps[attachment])
        msg = RouteUpdate(src=mn_id, mn_id=mn_id, attachment=attachment)
        self.sim.after(station.ctrl_airtime(),
                       lambda: self.ctrl_hop(attachment, self.ar.node_id,
                                             lambda: self.ar.on_route_update(msg)))

    # -- setup ---------------------------------------------------------------

    def _associate_initial(self) -> None:
        for mn_id, mnode in self.mns.items():
            best = None
            best_q = None
            for apn in (self.aps[k] for k in sorted(self.aps,
                                                    key=lambda n: n.index)):
                if not self.coverage.in_range(mn_id, apn.node_id):
                    continue
                q = self.coverage.quality_db(mn_id, apn.node_id)
                if best is None or q > best_q:
                    best, best_q = apn, q
            if best is not None:
                mnode.attachment = best.node_id
                mnode.home_channel = best.channel
                best.associations.add(mn_id)

    # -- run -------------------------------------------------------------------

    def run(self) -> RunResults:
        conf = self.conf
        horizon_us = conf.sim.horizon_s * US_PER_S
        t = conf.traffic
        dst = conf.nodes[t.destination].node
        for mn_id, mnode in self.mns.items():
            start = mn_id.index * t.stagger_us
            flow = CbrFlow(f"f{mn_id.index}", mn_id, dst, t.packet_bytes,
                           t.interval_us, start, t.jitter_us)
            mnode.start(flow)
        for sec in range(conf.sim.horizon_s):
            self.sim.schedule(sec * US_PER_S + US_PER_S // 2,
                              lambda s=sec: self._census(s), tag="census")
        self.sim.run_until(horizon_us)
        for mnode in self.mns.values():
            mnode.finish_gap_measurements(horizon_us)
        self._audit_residents()
        self.results.event_stats = self.sim.stats
        return self.results

    def _census(self, sec: int) -> None:
        for apn in self.aps.values():
            self.recorder.note_mn_count(sec, apn.node_id,
                                        len(apn.associations))
        if self.bs is not None:
            self.recorder.note_mn_count(sec, self.bs.node_id,
                                        len(self.bs.entries))

    def _audit_residents(self) -> None:
        res = self.results
        held: list[Packet] = []
        for mnode in self.mns.values():
            held.extend(mnode.pending)
        for apn in self.aps.values():
            held.extend(apn.server.resident())
        if self.bs is not None:
            held.extend(self.bs.server.resident())
        held.extend(self._in_transit)
        for pkt in held:
            res.resident_by_flow[pkt.flow_id] = \
                res.resident_by_flow.get(pkt.flow_id, 0) + 1
        res.resident_total = len(held)
