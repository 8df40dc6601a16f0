"""Recorder tables and CSV export."""
from esshift.metrics import ESS, HandoffRecord, Recorder
from esshift.network import BS1, Packet, ap, mn


def _delivered(rec, via, at_us, pkt_id=0, created=0):
    pkt = Packet(pkt_id, "f1", 1500, created, mn(1), mn(99), via=via)
    rec.note_delivery(pkt, at_us)


def test_throughput_credits_attachment_at_delivery_second():
    rec = Recorder(3, [ap(1), ap(2)], bs_id=BS1)
    _delivered(rec, ap(1), 500_000)
    _delivered(rec, ap(1), 1_400_000)
    _delivered(rec, ap(2), 1_600_000)
    _delivered(rec, BS1, 2_100_000)
    assert rec.node_bits("AP1", 0, 1) == 12_000
    assert rec.node_bits("AP1", 1, 2) == 12_000
    assert rec.node_bits("AP2", 1, 2) == 12_000
    assert rec.node_bits("BS", 2, 3) == 12_000
    # the aggregate row sums the two APs and leaves the overlay out
    assert rec.node_bits(ESS, 0, 3) == 36_000
    assert rec.delivered_bits_total == 48_000


def test_boundary_delivery_lands_in_last_bucket():
    rec = Recorder(2, [ap(1)])
    _delivered(rec, ap(1), 2_000_000)   # exactly at the horizon
    assert rec.node_bits("AP1", 1, 2) == 12_000
    rows = rec.throughput_rows()
    assert sum(r[2] for r in rows if r[1] == "AP1") == 12_000


def test_delay_rows_record_send_and_receive():
    rec = Recorder(2, [ap(1)])
    _delivered(rec, ap(1), 350_000, pkt_id=7, created=100_000)
    assert rec.delays == [(7, "f1", 100_000, 350_000, 250_000)]


def test_drop_accounting_and_first_drop():
    rec = Recorder(5, [ap(1), ap(2)])
    assert rec.first_drop_time_s() is None
    rec.note_drop(ap(2), 3_200_000)
    rec.note_drop(ap(2), 3_300_000)
    rec.note_drop(ap(1), 4_100_000)
    assert rec.first_drop_time_s() == 3
    rows = {(r[0], r[1]): r[2] for r in rec.drop_rows()}
    assert rows[(3, "AP2")] == 2
    assert rows[(4, "AP1")] == 1
    assert rows[(3, "AP1")] == 0


def test_mn_counts_flow_into_throughput_rows():
    rec = Recorder(1, [ap(1), ap(2)], bs_id=BS1)
    rec.note_mn_count(0, ap(1), 9)
    rec.note_mn_count(0, ap(2), 6)
    rec.note_mn_count(0, BS1, 2)
    by_node = {r[1]: r for r in rec.throughput_rows()}
    assert by_node["AP1"][3] == 9
    assert by_node["BS"][3] == 2
    assert by_node[ESS][3] == 15   # AP population only


def test_csv_export_is_stable(tmp_path):
    def build():
        rec = Recorder(2, [ap(1), ap(2)], bs_id=BS1)
        _delivered(rec, ap(1), 250_000, pkt_id=1)
        _delivered(rec, ap(2), 1_250_000, pkt_id=2, created=1_000_000)
        rec.note_drop(ap(1), 1_500_000)
        rec.note_handoff(HandoffRecord(mn(3), ap(1), ap(2), "horizontal",
                                       800_000, 802_000, 2_500))
        return rec

    a, b = tmp_path / "a", tmp_path / "b"
    build().export_csv(a)
    build().export_csv(b)
    names = ["throughput.csv", "delay.csv", "handoffs.csv", "drops.csv"]
    assert sorted(p.name for p in a.iterdir()) == sorted(names)
    for name in names:
        assert (a / name).read_bytes() == (b / name).read_bytes()

    head = (a / "throughput.csv").read_text().splitlines()
    assert head[0] == "t_sec,node,bits_delivered,mn_count"
    assert (a / "handoffs.csv").read_text().splitlines()[1] == \
        "MN3,AP1,AP2,horizontal,800000,802000,2500"
    assert (a / "delay.csv").read_text().splitlines()[0] == \
        "packet_id,flow_id,sent_us,recv_us,delay_us"
    assert (a / "drops.csv").read_text().splitlines()[0] == "t_sec,node,drops"
