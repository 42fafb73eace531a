"""Spotlight tracking over a road network.

The tracker keeps the entity's last-seen location and time. While the entity
is unseen, the set of plausible positions grows as a disc of graph distance
(peak entity speed x elapsed time) around the last-seen vertex; cameras on
vertices inside the disc are activated. A positive detection collapses the
active set to the detecting camera. Elapsed time is measured on frame
timestamps, never on the tracker's own clock, so delayed detections simply
widen the disc instead of corrupting it.
"""

import heapq
from dataclasses import dataclass, field, replace


class RoadNetwork:
    """Undirected graph with edge lengths in metres."""

    def __init__(self) -> None:
        self.adj: dict[int, list[tuple[int, float]]] = {}

    def add_edge(self, u: int, v: int, length_m: float) -> None:
        if u == v or length_m <= 0:
            raise ValueError(f"bad edge {u} {v} {length_m}")
        self.adj.setdefault(u, []).append((v, length_m))
        self.adj.setdefault(v, []).append((u, length_m))

    @property
    def vertices(self) -> list[int]:
        return sorted(self.adj)

    def edge_count(self) -> int:
        return sum(len(n) for n in self.adj.values()) // 2

    def mean_edge_length(self) -> float:
        total = sum(l for nbrs in self.adj.values() for _, l in nbrs)
        return total / (2 * self.edge_count())

    def neighbors(self, v: int) -> list[tuple[int, float]]:
        return self.adj.get(v, [])

    def connected_component(self, start: int) -> set[int]:
        seen = {start}
        stack = [start]
        while stack:
            v = stack.pop()
            for w, _ in self.adj.get(v, []):
                if w not in seen:
                    seen.add(w)
                    stack.append(w)
        return seen

    @classmethod
    def from_file(cls, path: str) -> "RoadNetwork":
        """Load from edge-list text: one `src dst length_m` triple per line."""
        net = cls()
        with open(path) as f:
            for line in f:
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                parts = line.split()
                if len(parts) != 3:
                    raise ValueError(f"malformed edge line: {line!r}")
                net.add_edge(int(parts[0]), int(parts[1]), float(parts[2]))
        return net

    def to_file(self, path: str) -> None:
        lines = []
        for u in sorted(self.adj):
            for v, l in sorted(self.adj[u]):
                if u < v:
                    lines.append(f"{u} {v} {l:.3f}")
        with open(path, "w") as f:
            f.write("\n".join(lines) + "\n")


def load_placement(path: str) -> dict[str, int]:
    """Load camera placement: one `camera_id vertex_id` pair per line."""
    placement: dict[str, int] = {}
    with open(path) as f:
        for line in f:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            cam, vertex = line.split()
            placement[cam] = int(vertex)
    return placement


def save_placement(placement: dict[str, int], path: str) -> None:
    with open(path, "w") as f:
        for cam in sorted(placement):
            f.write(f"{cam} {placement[cam]}\n")


def spotlight_radius(last_seen_ms: int, now_ms: int, peak_speed_mps: float) -> float:
    """Maximum distance (m) the entity can have covered since last seen."""
    return peak_speed_mps * max(0, now_ms - last_seen_ms) / 1000.0


def vertices_within(net: RoadNetwork, source: int, radius_m: float) -> set[int]:
    """Vertices within graph distance radius_m of source (uniform-cost search)."""
    dist = {source: 0.0}
    frontier = [(0.0, source)]
    while frontier:
        d, v = heapq.heappop(frontier)
        if d > dist[v]:
            continue
        for w, length in net.neighbors(v):
            nd = d + length
            if nd <= radius_m and nd < dist.get(w, float("inf")):
                dist[w] = nd
                heapq.heappush(frontier, (nd, w))
    return set(dist)


def weighted_bfs(
    net: RoadNetwork, source: int, radius_m: float, placement: dict[str, int]
) -> set[str]:
    """Cameras on vertices within true graph distance radius_m of source."""
    inside = vertices_within(net, source, radius_m)
    return {cam for cam, v in placement.items() if v in inside}


def unweighted_bfs(
    net: RoadNetwork,
    source: int,
    radius_m: float,
    fixed_len_m: float,
    placement: dict[str, int],
) -> set[str]:
    """Hop-count spotlight: every edge treated as fixed_len_m long.

    Equivalent to weighted_bfs on a copy of the network with all lengths
    replaced by fixed_len_m; vertices within floor(radius / fixed_len) hops.
    """
    hops = int(radius_m // fixed_len_m)
    inside = {source}
    frontier = [source]
    for _ in range(hops):
        nxt = []
        for v in frontier:
            for w, _ in net.neighbors(v):
                if w not in inside:
                    inside.add(w)
                    nxt.append(w)
        frontier = nxt
        if not frontier:
            break
    return {cam for cam, v in placement.items() if v in inside}


@dataclass(frozen=True)
class Detection:
    """Result of recognition on one frame."""

    camera_id: str
    frame_ts: int
    matched: bool
    confidence: float = 0.0


@dataclass
class TrackState:
    """Tracker state: last-seen location/time and the current active set."""

    last_seen_vertex: int
    last_seen_ms: int
    active: frozenset[str] = frozenset()
    latest_frame_ms: int = 0  # newest frame timestamp processed, monotone


class TrackingLogic:
    """Chooses the active camera set from a stream of detections.

    kind 'base' keeps every camera active; 'bfs' uses hop-count expansion
    with a fixed edge length; 'wbfs' uses true edge lengths.
    """

    def __init__(
        self,
        kind: str,
        net: RoadNetwork,
        placement: dict[str, int],
        peak_speed_mps: float,
        fixed_len_m: float | None = None,
    ):
        if kind not in ("base", "bfs", "wbfs"):
            raise ValueError(f"unknown tracking kind: {kind}")
        self.kind = kind
        self.net = net
        self.placement = placement
        self.peak_speed = peak_speed_mps
        self.fixed_len = fixed_len_m if fixed_len_m is not None else net.mean_edge_length()

    def initial_state(self, start_vertex: int, start_ms: int = 0) -> TrackState:
        state = TrackState(start_vertex, start_ms, frozenset(), start_ms)
        if self.kind == "base":
            return replace(state, active=frozenset(self.placement))
        return replace(state, active=frozenset(self._spotlight(state, start_ms)))

    def _spotlight(self, state: TrackState, now_ms: int) -> set[str]:
        radius = spotlight_radius(state.last_seen_ms, now_ms, self.peak_speed)
        if self.kind == "wbfs":
            return weighted_bfs(self.net, state.last_seen_vertex, radius, self.placement)
        return unweighted_bfs(
            self.net, state.last_seen_vertex, radius, self.fixed_len, self.placement
        )

    def process_detections(
        self, detections: list[Detection], state: TrackState
    ) -> tuple[TrackState, list[str], list[str]]:
        """Fold a batch of detections into the state.

        Returns (new state, cameras to activate, cameras to deactivate).
        Positives win over negatives; among simultaneous positives the latest
        frame timestamp wins, ties broken by smallest camera id. Stale
        positives (older than the current last-seen time) are ignored.
        """
        if not detections:
            return state, [], []
        latest = max(state.latest_frame_ms, max(d.frame_ts for d in detections))
        positives = [
            d for d in detections if d.matched and d.frame_ts >= state.last_seen_ms
        ]
        if self.kind == "base":
            # Every camera stays active; only the bookkeeping advances.
            new = state
            if positives:
                best = max(positives, key=lambda d: (d.frame_ts, _neg_id(d.camera_id)))
                new = replace(
                    state,
                    last_seen_vertex=self.placement[best.camera_id],
                    last_seen_ms=best.frame_ts,
                )
            return replace(new, latest_frame_ms=latest), [], []

        if positives:
            best = max(positives, key=lambda d: (d.frame_ts, _neg_id(d.camera_id)))
            target = frozenset({best.camera_id})
            new = TrackState(
                self.placement[best.camera_id], best.frame_ts, target, latest
            )
        else:
            new = replace(state, latest_frame_ms=latest)
            target = frozenset(self._spotlight(new, latest))
            new = replace(new, active=target)
        activate = sorted(target - state.active)
        deactivate = sorted(state.active - target)
        return new, activate, deactivate


def _neg_id(camera_id: str) -> tuple[int, ...]:
    # Reverse-order key so max() picks the smallest camera id on ties.
    return tuple(-ord(c) for c in camera_id)
