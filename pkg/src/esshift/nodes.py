"""Stations that animate the model.

The mobile node owns most of the behaviour: it sources traffic, samples
its serving queue, runs degradation episodes (scan, MoveRequest, move),
and switches to the wide-area overlay when the local cells have no room.
Access points arbitrate MoveRequests behind a per-AP quiet window and
relay probe responses over the distribution system.  The base station,
access router and correspondent close the path to the sink.

Control frames ride above the data queues: they cost airtime but are
never queued behind data and are never dropped.
"""
from __future__ import annotations

from collections import deque
from typing import Optional

from .detection import DropRateTracker, EwmaTracker, ThresholdTrigger
from .handoff import (ArbitrationGate, MnPhase, PendingArbitration,
                      handoff_candidates, select_target)
from .messages import (ApEntry, DSProbe, DSProbeResponse, HandoffTargetMessage,
                       LoadRequest, LoadRequestFromMN, LoadResponse,
                       MoveRequest, RouteUpdate)
from .metrics import HandoffRecord
from .network import (CONTROL_BYTES, CbrFlow, ChannelServer, LoadMeter,
                      NodeId, NodeKind, OutOfRange, Packet)
from .scanning import OffChannelVisit, ScanCycle, ScanState, build_channel_list


class AccessPoint:
    """One 802.11 cell: a channel server, its associations, and the
    arbitration side of the handoff protocol."""

    def __init__(self, env, node_id: NodeId, channel: int):
        self.env = env
        self.sim = env.sim
        self.node_id = node_id
        self.channel = channel
        mac = env.conf.mac
        self.server = ChannelServer(env.sim, node_id,
                                    mac.effective_capacity_bps,
                                    mac.overhead_us, mac.queue_capacity,
                                    on_served=self._to_router,
                                    on_drop=self._dropped)
        self.gate = ArbitrationGate(env.conf.handoff.t_ignore_us)
        self.associations: set[NodeId] = set()

    def ctrl_airtime(self) -> int:
        return self.server.service_us(CONTROL_BYTES)

    def load_bps(self) -> float:
        return self.server.meter.rate_bps(self.sim.now)

    def spare_bps(self) -> float:
        return max(0.0, self.server.capacity_bps - self.load_bps())

    # -- data plane ----------------------------------------------------

    def _to_router(self, pkt: Packet) -> None:
        self.env.data_hop(pkt, self.node_id, self.env.ar.node_id)

    def _dropped(self, pkt: Packet) -> None:
        self.env.recorder.note_drop(self.node_id, self.sim.now)

    # -- probing over the distribution system ---------------------------

    def on_dsprobe(self, msg: DSProbe) -> None:
        resp = DSProbeResponse(src=self.node_id, mn_id=msg.src,
                               channel=self.channel)
        mnode = self.env.mns[msg.src]
        if msg.serving_ap is None:
            # Unassociated prober: answer on the probed channel while the
            # station is still dwelling there.
            self.sim.after(self.ctrl_airtime(),
                           lambda: mnode.on_probe_response(resp, direct=True))
        else:
            serving = self.env.aps[msg.serving_ap]
            self.env.relay_ctrl(
                self.node_id, serving.node_id,
                lambda: serving.deliver_downlink(
                    msg.src, lambda: mnode.on_probe_response(resp, direct=False)))

    def deliver_downlink(self, mn_id: NodeId, handler) -> None:
        """Send a control frame to an associated MN; frames for a station
        that is off-channel wait until its radio is back home."""
        mnode = self.env.mns[mn_id]
        wait = max(0, mnode.radio_busy_until - self.sim.now)
        self.sim.after(wait + self.ctrl_airtime(), handler)

    # -- MoveRequest arbitration ----------------------------------------

    def on_move_request(self, msg: MoveRequest) -> None:
        now = self.sim.now
        self.env.results.move_requests_total += 1
        if not self.gate.admits(now):
            return  # repeat or competing request inside the quiet window
        pending = PendingArbitration(msg.src, msg.offered_bps, msg.ap_list,
                                     {}, None)
        self.gate.open_for(now, pending)
        self.env.results.move_processed.append((now, str(self.node_id)))
        queried = set()
        for entry in msg.ap_list:
            peer_id = entry.ap_id
            if peer_id == self.node_id or peer_id in queried:
                continue
            queried.add(peer_id)
            peer = self.env.aps[peer_id]
            req = LoadRequest(src=self.node_id, reply_to=self.node_id)
            self.env.relay_ctrl(self.node_id, peer_id,
                                lambda peer=peer, req=req: peer.on_load_request(req))
        pending.deadline_ev = self.sim.after(
            self.env.conf.handoff.response_timeout_us, self._arbitrate)

    def on_load_request(self, msg: LoadRequest) -> None:
        resp = LoadResponse(src=self.node_id, load_bps=self.load_bps(),
                            spare_bps=self.spare_bps())
        asker = self.env.aps[msg.reply_to]
        self.env.relay_ctrl(self.node_id, asker.node_id,
                            lambda: asker.on_load_response(self.node_id, resp))

    def on_load_response(self, peer_id: NodeId, resp: LoadResponse) -> None:
        p = self.gate.pending
        if p is None:
            return  # answer landed after the deadline
        p.responses[peer_id] = resp.load_bps

    def _arbitrate(self) -> None:
        p = self.gate.pending
        if p is None:
            return
        self.gate.pending = None
        peer_loads: list[tuple[NodeId, float]] = []
        seen: set[NodeId] = set()
        for entry in p.ap_list:
            if entry.ap_id in seen or entry.ap_id == self.node_id:
                continue
            if entry.ap_id in p.responses:
                seen.add(entry.ap_id)
                peer_loads.append((entry.ap_id, p.responses[entry.ap_id]))
        hc = handoff_candidates(self.load_bps(), p.offered_bps, peer_loads,
                                self.env.conf.handoff.delta_bps)
        msg = HandoffTargetMessage(src=self.node_id, candidates=tuple(hc),
                                   serving_overloaded=self.server.overloaded())
        mnode = self.env.mns[p.mn_id]
        self.deliver_downlink(p.mn_id, lambda: mnode.on_handoff_target(msg))

    # -- direct load query from a station coming back off the overlay ----

    def on_load_request_from_mn(self, msg: LoadRequestFromMN) -> None:
        resp = LoadResponse(src=self.node_id, load_bps=self.load_bps(),
                            spare_bps=self.spare_bps())
        mnode = self.env.mns[msg.src]
        self.sim.after(self.ctrl_airtime(),
                       lambda: mnode.on_direct_load_response(self.node_id, resp))


class BaseStation:
    """Wide-area overlay cell; plain server plus an admission check."""

    def __init__(self, env, node_id: NodeId):
        self.env = env
        self.sim = env.sim
        self.node_id = node_id
        conf = env.conf
        self.server = ChannelServer(env.sim, node_id, conf.wman.capacity_bps,
                                    conf.mac.overhead_us,
                                    conf.mac.queue_capacity,
                                    on_served=self._to_router,
                                    on_drop=self._dropped)
        self.entries: set[NodeId] = set()

    def ctrl_airtime(self) -> int:
        return self.server.service_us(CONTROL_BYTES)

    def admits(self, extra_bps: float) -> bool:
        return (self.server.meter.rate_bps(self.sim.now) + extra_bps
                <= self.server.capacity_bps)

    def _to_router(self, pkt: Packet) -> None:
        self.env.data_hop(pkt, self.node_id, self.env.ar.node_id)

    def _dropped(self, pkt: Packet) -> None:
        self.env.recorder.note_drop(self.node_id, self.sim.now)


class AccessRouter:
    def __init__(self, env, node_id: NodeId):
        self.env = env
        self.node_id = node_id
        self.routes: dict[NodeId, NodeId] = {}

    def on_route_update(self, msg: RouteUpdate) -> None:
        self.routes[msg.mn_id] = msg.attachment

    def on_data(self, pkt: Packet) -> None:
        self.env.data_hop(pkt, self.node_id, pkt.dst)


class Correspondent:
    def __init__(self, env, node_id: NodeId):
        self.env = env
        self.node_id = node_id

    def on_data(self, pkt: Packet) -> None:
        self.env.recorder.note_delivery(pkt, self.env.sim.now)
        self.env.results.count_delivered(pkt.flow_id)


class MobileNode:
    """Traffic source, queue sensor, and the initiating side of every
    handoff.  One CBR flow per node; the WiFi radio is busy while the
    station is off its home channel and data created meanwhile waits in
    a pending buffer."""

    def __init__(self, env, node_id: NodeId):
        self.env = env
        self.sim = env.sim
        self.conf = env.conf
        self.node_id = node_id
        d = self.conf.detection

        self.attachment: Optional[NodeId] = None
        self.home_channel: Optional[int] = None
        self.radio_busy_until = 0
        self.off_channel: Optional[int] = None
        self.off_window_end = 0
        self.pending: deque[Packet] = deque()

        self.flow: Optional[CbrFlow] = None
        self._emit_rng = env.sim.stream(f"cbr:{node_id}")
        self._phase_rng = env.sim.stream(f"sample:{node_id}")

        self.ewma = EwmaTracker(d.alpha, d.qlength)
        self.wman_trigger = ThresholdTrigger(d.wman_qlength)
        self.drops = DropRateTracker(d.drop_threshold, d.window_us)
        self.offered = LoadMeter(d.window_us)

        self.phase = MnPhase.IDLE
        self.scan: Optional[ScanState] = None
        self.scan_purpose: Optional[str] = None
        self.cycle: Optional[ScanCycle] = None
        self.scan_timer = None
        self.requests_sent = 0
        self.retry_ev = None
        self.suppressed_until = 0
        self.recheck_ev = None
        self.known_bs: Optional[NodeId] = None
        self.discovery_pending = False
        self.return_ev = None
        self._return_entry: Optional[ApEntry] = None
        self._last_emission_at: Optional[int] = None
        self._gap_waiter: Optional[tuple[HandoffRecord, Optional[int]]] = None

    # -- traffic ---------------------------------------------------------

    def start(self, flow: CbrFlow) -> None:
        self.flow = flow
        self.env.results.register_flow(flow.flow_id)
        self._schedule_emit(0)
        period = self.conf.detection.sample_period_us
        self.sim.schedule(flow.start_at + self._phase_rng.randrange(period),
                          self._sample, tag="sample")

    def _schedule_emit(self, k: int) -> None:
        t = self.flow.emission_time(k, self._emit_rng)
        self.sim.schedule(t, lambda: self._emit(k), tag="cbr")

    def _emit(self, k: int) -> None:
        pkt = self.flow.next_packet(self.sim.now)
        self.env.results.count_generated(pkt.flow_id)
        self.offered.add(self.sim.now, pkt.size_bytes * 8)
        self.pending.append(pkt)
        self._flush_pending()
        self._schedule_emit(k + 1)

    def _can_emit_now(self) -> bool:
        att = self.attachment
        if att is None:
            return False
        if att.kind is NodeKind.BS:
            return True
        return (self.phase is not MnPhase.HANDING_OFF
                and self.sim.now >= self.radio_busy_until)

    def _flush_pending(self) -> None:
        while self.pending and self._can_emit_now():
            self._transmit(self.pending.popleft())

    def _transmit(self, pkt: Packet) -> None:
        now = self.sim.now
        att = self.attachment
        server = (self.env.bs.server if att.kind is NodeKind.BS
                  else self.env.aps[att].server)
        pkt.via = att
        pkt.emitted_at = now
        if self._gap_waiter is not None:
            rec, last_old = self._gap_waiter
            rec.gap_us = now - last_old if last_old is not None else 0
            self.env.recorder.note_handoff(rec)
            self._gap_waiter = None
        self._last_emission_at = now
        ok = server.offer(pkt)
        if not ok:
            self.env.results.count_dropped(pkt.flow_id)
        self.drops.record(now, not ok)
        if self.conf.detection.mode == "drop_rate" and self.drops.crossed():
            self._on_degradation()

    # -- sensing ---------------------------------------------------------

    def _serving_queue_len(self) -> int:
        att = self.attachment
        if att is None:
            return 0
        if att.kind is NodeKind.BS:
            return self.env.bs.server.queue_len
        return self.env.aps[att].server.queue_len

    def _sample(self) -> None:
        est = self.ewma.update(self._serving_queue_len())
        if self.conf.detection.mode == "ewma" and self.ewma.crossed():
            self._on_degradation()
        self._consider_overlay(est)
        self.sim.after(self.conf.detection.sample_period_us, self._sample,
                       tag="sample")

    def _consider_overlay(self, est: float) -> None:
        env = self.env
        if (not env.scheme_enabled or not self.conf.wman.enabled
                or env.bs is None or self.known_bs is not None
                or self.discovery_pending
                or self.ewma.samples_seen <= self.ewma.warmup):
            return
        if not self.wman_trigger.feed(est):
            return
        if not env.coverage.in_range(self.node_id, env.bs.node_id):
            return
        self.discovery_pending = True
        self.sim.after(self.conf.wman.scan_latency_us, self._bs_found)

    def _bs_found(self) -> None:
        self.discovery_pending = False
        self.known_bs = self.env.bs.node_id

    def _on_degradation(self) -> None:
        now = self.sim.now
        if not self.env.scheme_enabled or self.flow is None:
            return
        self.env.results.note_trigger(self.node_id, now)
        if self.phase is not MnPhase.IDLE or now < self.suppressed_until:
            return
        att = self.attachment
        if att is None or att.kind is not NodeKind.AP:
            return
        self.phase = MnPhase.SCANNING
        self._begin_scan("handoff")

    def _degraded_now(self) -> bool:
        if self.conf.detection.mode == "ewma":
            return self.ewma.above
        return self.drops.above(self.sim.now)

    # -- scanning ----------------------------------------------------------

    def _begin_scan(self, purpose: str) -> None:
        home = self.home_channel if purpose == "handoff" else None
        channels = build_channel_list(home)
        self.scan = ScanState(channels)
        self.scan_purpose = purpose
        self.cycle = ScanCycle(mn=str(self.node_id), started_at=self.sim.now,
                               channels=tuple(channels))
        self.env.results.scan_cycles.append(self.cycle)
        self.scan_timer = self.sim.after(self.conf.scan.period_us,
                                         self._scan_tick, tag="scan")

    def _scan_tick(self) -> None:
        self.scan_timer = None
        st = self.scan
        if st is None:
            return
        if st.complete:
            self._finish_scan()
            return
        sc = self.conf.scan
        ch = st.next_channel
        st.purge(ch)
        now = self.sim.now
        back_at = now + sc.switch_us + sc.dwell_us + sc.switch_us
        if self.attachment is not None and self.attachment.kind is NodeKind.AP:
            self.radio_busy_until = back_at
        self.off_channel = ch
        self.off_window_end = now + sc.switch_us + sc.dwell_us
        self.cycle.visits.append(OffChannelVisit(ch, now, back_at, sc.dwell_us))
        self.sim.after(sc.switch_us, lambda: self._probe(ch))
        self.sim.after(back_at - now, self._radio_home)
        st.advance()
        self.scan_timer = self.sim.after(sc.period_us, self._scan_tick,
                                         tag="scan")

    def _probe(self, channel: int) -> None:
        att = self.attachment
        serving = att if (att is not None and att.kind is NodeKind.AP) else None
        msg = DSProbe(src=self.node_id, serving_ap=serving)
        for ap in self.env.aps_on_channel(channel):
            if self.env.coverage.in_range(self.node_id, ap.node_id):
                self.sim.after(ap.ctrl_airtime(),
                               lambda ap=ap: ap.on_dsprobe(msg))

    def _radio_home(self) -> None:
        self.off_channel = None
        self._flush_pending()

    def on_probe_response(self, msg: DSProbeResponse, direct: bool) -> None:
        if self.scan is None:
            return
        if direct and (self.off_channel != msg.channel
                       or self.sim.now > self.off_window_end):
            return  # answer came after the radio left that channel
        # Static geometry stands in for the measured probe quality.
        quality = self.env.coverage.quality_db(self.node_id, msg.src)
        self.scan.note(ApEntry(msg.src, msg.channel, quality))

    def _finish_scan(self) -> None:
        self.cycle.completed_at = self.sim.now
        if self.scan_purpose == "handoff":
            self.phase = MnPhase.REQUESTING
            self.requests_sent = 0
            self._send_move_request()
        else:
            entries = list(self.scan.ap_list)
            self.scan = None
            self.scan_purpose = None
            self._try_return(entries)

    # -- MoveRequest exchange ----------------------------------------------

    def _send_move_request(self) -> None:
        if self.phase is not MnPhase.REQUESTING:
            return
        msg = MoveRequest(src=self.node_id,
                          ap_list=tuple(self.scan.ap_list),
                          offered_bps=self.offered.rate_bps(self.sim.now))
        ap = self.env.aps[self.attachment]
        self.requests_sent += 1
        self.sim.after(ap.ctrl_airtime(), lambda: ap.on_move_request(msg))
        self.retry_ev = self.sim.after(self.conf.handoff.t_repeat_us,
                                       self._retry, tag="mr-retry")

    def _retry(self) -> None:
        self.retry_ev = None
        if self.phase is not MnPhase.REQUESTING:
            return
        if self.requests_sent < self.conf.handoff.n_repeat:
            self._send_move_request()
        else:
            self._abandon_episode()

    def _abandon_episode(self) -> None:
        self.phase = MnPhase.IDLE
        self.scan = None
        self.scan_purpose = None
        self._schedule_recheck()

    def _schedule_recheck(self) -> None:
        backoff = self.conf.handoff.retry_backoff_us
        self.suppressed_until = self.sim.now + backoff
        if self.recheck_ev is not None:
            self.sim.cancel(self.recheck_ev)
        self.recheck_ev = self.sim.after(backoff, self._recheck, tag="recheck")

    def _recheck(self) -> None:
        self.recheck_ev = None
        if (self.phase is not MnPhase.IDLE or not self.env.scheme_enabled
                or self.flow is None):
            return
        att = self.attachment
        if att is None or att.kind is not NodeKind.AP:
            return
        if self._degraded_now():
            self.phase = MnPhase.SCANNING
            self._begin_scan("handoff")

    def on_handoff_target(self, msg: HandoffTargetMessage) -> None:
        if self.phase is not MnPhase.REQUESTING:
            return
        if self.retry_ev is not None:
            self.sim.cancel(self.retry_ev)
            self.retry_ev = None
        if msg.candidates:
            entry = select_target(msg.candidates, self.scan.ap_list)
            if entry is not None:
                self._execute_handoff(entry)
                return
        if (self.known_bs is not None and self.env.bs is not None
                and msg.serving_overloaded):
            self._begin_vertical()
        else:
            self._abandon_episode()

    # -- horizontal move -----------------------------------------------------

    def _execute_handoff(self, entry: ApEntry) -> None:
        try:
            self.env.coverage.quality_db(self.node_id, entry.ap_id)
        except OutOfRange:
            self._abandon_episode()
            return
        self.phase = MnPhase.HANDING_OFF
        self.scan = None
        self.scan_purpose = None
        decided = self.sim.now
        old = self.attachment
        # channel switch plus the association request/response exchange
        latency = (self.conf.scan.switch_us
                   + 2 * self.env.aps[entry.ap_id].ctrl_airtime())
        self.radio_busy_until = decided + latency
        self.sim.after(latency,
                       lambda: self._complete_association(entry, old, decided))

    def _complete_association(self, entry: ApEntry, old: NodeId,
                              decided: int) -> None:
        now = self.sim.now
        self.env.aps[old].associations.discard(self.node_id)
        self.env.aps[entry.ap_id].associations.add(self.node_id)
        self.attachment = entry.ap_id
        self.home_channel = entry.channel
        self.radio_busy_until = now
        self.phase = MnPhase.IDLE
        self._reset_detectors()
        self._arm_gap(HandoffRecord(self.node_id, old, entry.ap_id,
                                    "horizontal", decided, now, 0))
        self.env.send_route_update(self.node_id, entry.ap_id)
        self._flush_pending()

    def _reset_detectors(self) -> None:
        self.ewma.reset()
        self.drops.reset()
        self.wman_trigger.reset()

    def _arm_gap(self, rec: HandoffRecord) -> None:
        if self.flow is None or self.sim.now < self.flow.start_at:
            rec.gap_us = 0
            self.env.recorder.note_handoff(rec)
        else:
            self._gap_waiter = (rec, self._last_emission_at)

    def finish_gap_measurements(self, end_at: int) -> None:
        """Close any record still waiting for its first post-move packet."""
        if self._gap_waiter is not None:
            rec, last_old = self._gap_waiter
            rec.gap_us = end_at - last_old if last_old is not None else 0
            self.env.recorder.note_handoff(rec)
            self._gap_waiter = None

    # -- overlay entry and return ---------------------------------------------

    def _begin_vertical(self) -> None:
        self.phase = MnPhase.VERTICAL_ENTRY
        self.scan = None
        self.scan_purpose = None
        decided = self.sim.now
        old = self.attachment
        self.sim.after(self.conf.wman.entry_latency_us,
                       lambda: self._complete_entry(old, decided))

    def _complete_entry(self, old: NodeId, decided: int) -> None:
        now = self.sim.now
        bs = self.env.bs
        if not bs.admits(self.offered.rate_bps(now)):
            self.phase = MnPhase.IDLE
            self._schedule_recheck()
            return
        self.env.aps[old].associations.discard(self.node_id)
        bs.entries.add(self.node_id)
        self.attachment = bs.node_id
        self.home_channel = None
        self.radio_busy_until = now
        self.phase = MnPhase.ON_WMAN
        self._reset_detectors()
        self._arm_gap(HandoffRecord(self.node_id, old, bs.node_id,
                                    "vertical_up", decided, now, 0))
        self.env.send_route_update(self.node_id, bs.node_id)
        self.env.results.bs_events.append((now, self.node_id, 1))
        self._flush_pending()
        self._arm_return_scan()

    def _arm_return_scan(self) -> None:
        if self.return_ev is not None:
            self.sim.cancel(self.return_ev)
        self.return_ev = self.sim.after(self.conf.wman.return_scan_period_us,
                                        self._return_scan, tag="return-scan")

    def _return_scan(self) -> None:
        self.return_ev = None
        if self.phase is not MnPhase.ON_WMAN or self.scan is not None:
            return
        self._begin_scan("return")

    def _try_return(self, entries: list[ApEntry]) -> None:
        if self.phase is not MnPhase.ON_WMAN:
            return
        if not entries:
            self._arm_return_scan()
            return
        target = select_target([e.ap_id for e in entries], entries)
        self._return_entry = target
        msg = LoadRequestFromMN(src=self.node_id,
                                offered_bps=self.offered.rate_bps(self.sim.now))
        ap = self.env.aps[target.ap_id]
        self.sim.after(ap.ctrl_airtime(),
                       lambda: ap.on_load_request_from_mn(msg))

    def on_direct_load_response(self, ap_id: NodeId, resp: LoadResponse) -> None:
        if (self.phase is not MnPhase.ON_WMAN or self._return_entry is None
                or ap_id != self._return_entry.ap_id):
            return
        needed = (self.offered.rate_bps(self.sim.now)
                  + self.conf.handoff.delta_bps)
        entry = self._return_entry
        self._return_entry = None
        if resp.spare_bps >= needed:
            self._begin_return(entry)
        else:
            self._arm_return_scan()

    def _begin_return(self, entry: ApEntry) -> None:
        self.phase = MnPhase.RETURNING
        decided = self.sim.now
        latency = (self.conf.scan.switch_us
                   + 2 * self.env.aps[entry.ap_id].ctrl_airtime())
        self.sim.after(latency,
                       lambda: self._complete_return(entry, decided))

    def _complete_return(self, entry: ApEntry, decided: int) -> None:
        now = self.sim.now
        bs = self.env.bs
        old = self.attachment
        bs.entries.discard(self.node_id)
        self.env.aps[entry.ap_id].associations.add(self.node_id)
        self.attachment = entry.ap_id
        self.home_channel = entry.channel
        self.radio_busy_until = now
        self.phase = MnPhase.IDLE
        self._reset_detectors()
        self._arm_gap(HandoffRecord(self.node_id, old, entry.ap_id,
                                    "vertical_down", decided, now, 0))
        self.env.send_route_update(self.node_id, entry.ap_id)
        self.env.results.bs_events.append((now, self.node_id, -1))
        if self.return_ev is not None:
            self.sim.cancel(self.return_ev)
            self.return_ev = None
        self._flush_pending()
