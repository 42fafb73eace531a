import csv
import json

from trackflow.metrics import MetricsCollector
from trackflow.model import Event, EventHeader


def _ev(event_id: int, a1: int) -> Event:
    return Event(EventHeader(event_id, a1), key="k")


def _collector() -> MetricsCollector:
    c = MetricsCollector(gamma_ms=1000)
    for eid, a1 in enumerate([100, 200, 1500, 1600]):
        c.on_generated(eid, f"cam{eid:04d}", a1)
    return c


def test_statuses_and_counts():
    c = _collector()
    c.record_drop(_ev(0, 100), "cr:0", 2)
    c.record_delivered(_ev(1, 200), 900, flagged=False)
    c.record_delivered(_ev(2, 1500), 1200, flagged=False)
    c.record_delivered(_ev(3, 1600), 1200, flagged=True)
    counts = c.counts()
    assert counts == {
        "generated": 4,
        "delivered": 1,
        "delayed": 1,
        "flagged_late": 1,
        "dropped": 1,
        "probes": 0,
        "in_flight": 0,
    }
    assert c.records[0].status == "dropped@cr:0@p2"
    assert c.records[1].t_sink == 1100


def test_first_drop_wins_but_delivery_settles_the_state():
    c = _collector()
    c.record_drop(_ev(0, 100), "cr:0", 3)
    c.record_drop(_ev(0, 100), "cr:1", 1)
    assert c.records[0].status == "dropped@cr:0@p3"
    # a copy dropped on a side branch does not undo sink delivery
    c.record_delivered(_ev(0, 100), 500, flagged=False)
    assert c.records[0].status == "delivered"


def test_probe_conversion_status_and_summary_fields():
    c = _collector()
    c.record_probe_convert(_ev(0, 100), "va:0", 1)
    c.record_would_drop(_ev(1, 200), "va:0", 1)
    c.record_delivered(_ev(2, 1500), 400, flagged=False)
    c.record_batch(2, "va:0", 6)
    s = c.summary()
    assert s["probes"] == 1
    assert s["would_drop_marks"] == 1
    assert s["in_flight"] == 2
    assert s["median_latency_ms"] == 400.0
    assert s["p99_latency_ms"] == 400.0
    assert c.records[2].batches == {"va:0": 6}


def test_timeline_rows_merge_per_second_series():
    c = _collector()
    c.note_active_sample(0, 5)
    c.note_active_sample(1000, 7)
    c.record_delivered(_ev(0, 100), 900, flagged=False)  # sink second 1
    c.record_drop(_ev(1, 200), "cr:0", 1)  # source second 0
    rows = c.timeline_rows()
    assert rows == [(0, 5, 0.0, 2, 1), (1, 7, 900.0, 2, 0)]
    assert c.peak_active == 7


def test_events_csv_round_trip(tmp_path):
    c = _collector()
    c.record_batch(1, "va:0", 4)
    c.record_batch(1, "cr:2", 25)
    c.record_delivered(_ev(1, 200), 900, flagged=False)
    path = tmp_path / "events.csv"
    c.write_events_csv(str(path))
    with open(path, newline="") as f:
        rows = list(csv.reader(f))
    assert rows[0] == ["event_id", "camera_id", "t_source", "t_sink", "status", "batches"]
    assert rows[1] == ["0", "cam0000", "100", "", "inflight", ""]
    assert rows[2] == ["1", "cam0001", "200", "1100", "delivered", "va:0=4|cr:2=25"]
    assert len(rows) == 5


def test_summary_json_is_stable(tmp_path):
    c = _collector()
    path = tmp_path / "summary.json"
    c.write_summary_json(str(path))
    text = path.read_text()
    assert text.endswith("\n")
    data = json.loads(text)
    assert list(data) == sorted(data)
    assert data["generated"] == 4
