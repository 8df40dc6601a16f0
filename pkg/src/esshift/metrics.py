"""Run measurement: per-second throughput, per-packet delay, handoffs, drops.

Throughput is credited to the attachment that carried the packet, at the
second of its delivery, and the ESS row aggregates the two APs exactly.
CSV output is byte-stable: UTF-8, LF newlines, integer microseconds.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional

from .engine import US_PER_S
from .network import NodeId, Packet

ESS = "ESS"


@dataclass
class HandoffRecord:
    mn_id: NodeId
    from_node: NodeId
    to_node: NodeId
    kind: str                 # horizontal | vertical_up | vertical_down
    decided_at: int
    completed_at: int
    gap_us: int


class Recorder:
    def __init__(self, horizon_s: int, ap_ids: list[NodeId],
                 bs_id: Optional[NodeId] = None):
        self.horizon_s = horizon_s
        self.ap_ids = list(ap_ids)
        self.bs_id = bs_id
        names = [str(a) for a in self.ap_ids] + ([str(bs_id)] if bs_id else [])
        self._bits = {(s, n): 0 for s in range(horizon_s) for n in names}
        self._drops = {(s, n): 0 for s in range(horizon_s) for n in names}
        self._mn_counts = dict(self._drops)
        self._node_names = names
        self.delays: list[tuple[int, str, int, int, int]] = []
        self.handoffs: list[HandoffRecord] = []
        self.delivered_bits_total = 0

    # ---- event hooks ----

    def note_delivery(self, pkt: Packet, now: int) -> None:
        # An arrival landing exactly on the horizon tick belongs to the
        # last bucket, so table totals always reconcile with flow counts.
        sec = min(now // US_PER_S, self.horizon_s - 1)
        bits = pkt.size_bytes * 8
        self.delivered_bits_total += bits
        key = (sec, str(pkt.via))
        if key in self._bits:
            self._bits[key] += bits
        self.delays.append((pkt.pkt_id, pkt.flow_id, pkt.created_at, now,
                            now - pkt.created_at))

    def note_drop(self, node: NodeId, now: int) -> None:
        key = (min(now // US_PER_S, self.horizon_s - 1), str(node))
        if key in self._drops:
            self._drops[key] += 1

    def note_mn_count(self, sec: int, node: NodeId, count: int) -> None:
        key = (sec, str(node))
        if key in self._mn_counts:
            self._mn_counts[key] = count

    def note_handoff(self, rec: HandoffRecord) -> None:
        self.handoffs.append(rec)

    # ---- derived tables ----

    def throughput_rows(self) -> list[tuple[int, str, int, int]]:
        rows = []
        ap_names = [str(a) for a in self.ap_ids]
        for sec in range(self.horizon_s):
            for name in self._node_names:
                rows.append((sec, name, self._bits[(sec, name)],
                             self._mn_counts[(sec, name)]))
            ess_bits = sum(self._bits[(sec, n)] for n in ap_names)
            ess_mns = sum(self._mn_counts[(sec, n)] for n in ap_names)
            rows.append((sec, ESS, ess_bits, ess_mns))
        return rows

    def drop_rows(self) -> list[tuple[int, str, int]]:
        return [(sec, name, self._drops[(sec, name)])
                for sec in range(self.horizon_s)
                for name in self._node_names]

    def node_bits(self, name: str, sec_from: int, sec_to: int) -> int:
        """Delivered bits credited to a node over [sec_from, sec_to)."""
        if name == ESS:
            return sum(self.node_bits(str(a), sec_from, sec_to)
                       for a in self.ap_ids)
        return sum(self._bits[(s, name)] for s in range(sec_from, sec_to))

    def first_drop_time_s(self) -> Optional[int]:
        hits = [sec for (sec, _), n in sorted(self._drops.items()) if n > 0]
        return min(hits) if hits else None

    # ---- CSV export ----

    def export_csv(self, out_dir: Path) -> list[Path]:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        written = []

        def dump(name: str, header: list[str], rows: Iterable[tuple]) -> None:
            path = out_dir / name
            with open(path, "w", encoding="utf-8", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(header)
                w.writerows(rows)
            written.append(path)

        dump("throughput.csv", ["t_sec", "node", "bits_delivered", "mn_count"],
             self.throughput_rows())
        dump("delay.csv", ["packet_id", "flow_id", "sent_us", "recv_us", "delay_us"],
             self.delays)
        dump("handoffs.csv",
             ["mn", "from", "to", "kind", "decided_us", "completed_us", "gap_us"],
             [(str(h.mn_id), str(h.from_node), str(h.to_node), h.kind,
               h.decided_at, h.completed_at, h.gap_us) for h in self.handoffs])
        dump("drops.csv", ["t_sec", "node", "drops"], self.drop_rows())
        return written
