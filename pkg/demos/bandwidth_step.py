"""
Riding out a bandwidth drop
===========================

The shared uplink falls from 1 Gbps to 30 Mbps halfway through the
run. The adaptive pipeline keeps its freshness promise by shedding the
transient excess; a rate-indexed batching table never notices, because
the arrival rate it keys on never changed.
"""

import os
import tempfile

from trackflow.bounds import nob_table
from trackflow.model import AffineExecTime
from trackflow.netgen import generate_road_network
from trackflow.scenario import ScenarioConfig, run_scenario

net, start = generate_road_network(300, 840, 84.5, seed=7)
workdir = tempfile.mkdtemp()
graph = os.path.join(workdir, "roads.txt")
net.to_file(graph)

# Rate table for the matcher stage, as the calibrate command would
# emit it: batch size by measured arrival rate, 15 s of budget.
table = nob_table(AffineExecTime(54, 67), 15_000, [1] + list(range(10, 1001, 10)))
table_path = os.path.join(workdir, "rates.txt")
with open(table_path, "w") as f:
    for rate, m in sorted(table.items()):
        f.write(f"{rate} {m}\n")

base = dict(
    graph_file=graph,
    duration=300_000,
    camera_count=120,
    gamma=15_000,
    tl_kind="base",
    frame_bytes=15_000,
    link_schedule="150000,net,30e6,0.5",
)

variants = [
    ("adaptive  ", dict(batching="dynamic", drops_enabled=True)),
    ("rate table", dict(batching=f"nob:{table_path}", drops_enabled=False)),
]
for label, kw in variants:
    scn = run_scenario(ScenarioConfig(**base, **kw))
    post = {"delayed": 0, "delivered": 0, "dropped": 0}
    for rec in scn.collector.records.values():
        if rec.t_source <= 150_000 or rec.status is None:
            continue
        if rec.status.startswith("dropped"):
            post["dropped"] += 1
        elif rec.status == "delayed":
            post["delayed"] += 1
        elif rec.status in ("delivered", "flagged_late"):
            post["delivered"] += 1
    print(
        f"{label} after the step: delivered {post['delivered']:5d}, "
        f"delayed {post['delayed']:5d}, dropped {post['dropped']:4d}"
    )
