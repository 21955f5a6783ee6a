"""Shared builders for synthetic graphs and snapshots."""

from __future__ import annotations

import random

from taburpl.cost import EdgeMetrics, NetworkSnapshot
from taburpl.topology import (
    LinkGraph,
    RadioModel,
    UNIT_DISC,
    connected_topology,
    hop_counts,
)


def make_graph(edges: dict[tuple[int, int], float], sink: int = 0, seed: int = 0) -> LinkGraph:
    """Symmetric LinkGraph from {(u, v): distance}; delivery probability 0.9."""
    dist = {}
    delivery = {}
    nodes = set()
    for (u, v), d in edges.items():
        dist[(u, v)] = d
        dist[(v, u)] = d
        delivery[(u, v)] = 0.9
        delivery[(v, u)] = 0.9
        nodes.update((u, v))
    nodes.add(sink)
    out = {n: tuple(sorted(w for (x, w) in dist if x == n)) for n in nodes}
    return LinkGraph(
        n=len(nodes), sink=sink, dist=dist, delivery_p=delivery, out=out, inc=out, seed=seed
    )


def uniform_snapshot(graph: LinkGraph, snapshot_id: int = 0, **overrides) -> NetworkSnapshot:
    """Snapshot whose only varying feature is the link distance."""
    hops = hop_counts(graph)
    metrics = {}
    for e in sorted(graph.dist):
        fields = dict(e_r=500.0, e_t=1e-3, d=graph.dist[e], h=1.0, etx=1.5, ls=0.8)
        fields.update(overrides)
        metrics[e] = EdgeMetrics(**fields)
    residual = {i: 500.0 for i in graph.out}
    return NetworkSnapshot.build(graph, metrics, residual, hops, 0.0, snapshot_id)


def random_snapshot(n: int, seed: int, area: float = 100.0, range_m: float = 60.0) -> NetworkSnapshot:
    """Random connected field with randomized per-edge metrics."""
    rng = random.Random(seed)
    _field, graph = connected_topology(
        n, (area, area), RadioModel(kind=UNIT_DISC, range_m=range_m), seed,
        redraw_until_connected=True, max_redraws=200,
    )
    hops = hop_counts(graph)
    metrics = {}
    for e in sorted(graph.dist):
        metrics[e] = EdgeMetrics(
            e_r=rng.uniform(1.0, 1000.0),
            e_t=rng.uniform(8e-4, 4e-3),
            d=graph.dist[e],
            h=float(hops[e[1]] + 1),
            etx=rng.uniform(1.0, 4.0),
            ls=rng.uniform(0.05, 1.0),
        )
    residual = {i: rng.uniform(1.0, 1000.0) for i in graph.out}
    return NetworkSnapshot.build(graph, metrics, residual, hops, 0.0, seed)


def three_path_snapshot() -> NetworkSnapshot:
    """Six-node instance with three alternative routes from node 1 to the sink.

    Distance-only costs: 1-2-3-sink sums to 15, 1-4-3-sink to 12, and
    1-2-5-sink to 13.
    """
    edges = {
        (1, 2): 5.0,
        (2, 3): 5.0,
        (3, 0): 5.0,
        (1, 4): 4.0,
        (4, 3): 3.0,
        (2, 5): 4.0,
        (5, 0): 4.0,
    }
    return uniform_snapshot(make_graph(edges))
