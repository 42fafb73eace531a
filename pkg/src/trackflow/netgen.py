"""Synthetic road networks and camera placement.

A city-scale graph is built as the Delaunay triangulation of uniform random
points, thinned by removing the longest edges that are not bridges, then
scaled so the mean edge length lands on the requested value. The result is
connected, planar, and irregular enough to have real blind spots between
junctions.
"""

import heapq
import math

import numpy as np
from scipy.spatial import Delaunay

from .tracking import RoadNetwork


def generate_road_network(
    n_vertices: int = 1000,
    n_edges: int = 2817,
    mean_length_m: float = 84.5,
    seed: int = 0,
) -> tuple[RoadNetwork, int]:
    """Build a random road graph; returns (network, central start vertex)."""
    if n_vertices < 4:
        raise ValueError("need at least 4 vertices for a triangulation")
    rng = np.random.default_rng(seed)
    pts = rng.random((n_vertices, 2))
    tri = Delaunay(pts)
    adj: dict[int, set[int]] = {i: set() for i in range(n_vertices)}
    edges: set[tuple[int, int]] = set()
    for simplex in tri.simplices:
        for a in range(3):
            u, v = int(simplex[a]), int(simplex[(a + 1) % 3])
            if u > v:
                u, v = v, u
            if (u, v) not in edges:
                edges.add((u, v))
                adj[u].add(v)
                adj[v].add(u)

    def dist(u: int, v: int) -> float:
        return float(math.hypot(pts[u, 0] - pts[v, 0], pts[u, 1] - pts[v, 1]))

    # Remove longest-first, skipping bridges so the graph stays connected.
    for u, v in sorted(edges, key=lambda e: (-dist(*e), e)):
        if len(edges) <= n_edges:
            break
        adj[u].discard(v)
        adj[v].discard(u)
        seen = {u}
        stack = [u]
        reachable = False
        while stack:
            x = stack.pop()
            if x == v:
                reachable = True
                break
            for y in adj[x]:
                if y not in seen:
                    seen.add(y)
                    stack.append(y)
        if reachable:
            edges.discard((u, v))
        else:
            adj[u].add(v)
            adj[v].add(u)

    unit_mean = sum(dist(u, v) for u, v in edges) / len(edges)
    scale = mean_length_m / unit_mean
    net = RoadNetwork()
    for u, v in sorted(edges):
        net.add_edge(u, v, round(dist(u, v) * scale, 1))
    centre = pts.mean(axis=0)
    start = int(np.argmin(((pts - centre) ** 2).sum(axis=1)))
    return net, start


def place_cameras(net: RoadNetwork, start_vertex: int, count: int) -> dict[str, int]:
    """Cameras on the count nearest vertices to start, by road distance.

    Ties broken by vertex id; camera ids are assigned in placement order, so
    cam0000 always sits on the start vertex itself.
    """
    dist: dict[int, float] = {start_vertex: 0.0}
    heap: list[tuple[float, int]] = [(0.0, start_vertex)]
    while heap:
        d, v = heapq.heappop(heap)
        if d > dist[v]:
            continue
        for w, length in net.neighbors(v):
            nd = d + length
            if nd < dist.get(w, math.inf):
                dist[w] = nd
                heapq.heappush(heap, (nd, w))
    if count > len(dist):
        raise ValueError(
            f"requested {count} cameras but only {len(dist)} reachable vertices"
        )
    order = sorted(dist.items(), key=lambda kv: (kv[1], kv[0]))
    return {f"cam{i:04d}": v for i, (v, _) in enumerate(order[:count])}
