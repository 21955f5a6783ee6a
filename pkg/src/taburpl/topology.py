"""Node deployment, radio link model, hop counts and topology I/O.

Deployments are uniform-random over a rectangular field with the sink at a
fixed position (area center unless overridden). Links come from either a
unit-disc radio or a log-normal shadowing radio; both produce a symmetric
directed edge set with a per-edge delivery probability. Everything here is
immutable after construction and deterministic given (n, area, seed).
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import ConnectivityError, TaburplError, UndefinedCorrelationError

UNIT_DISC = "unit-disc"
LOG_NORMAL_SHADOWING = "log-normal-shadowing"

# Default delivery-probability endpoints of the unit-disc linear falloff.
P_AT_ZERO = 1.0
P_AT_RANGE = 0.7
P_FLOOR = 0.1

# Shadowing links map fade margin (dB) to delivery probability through a
# logistic of this width; margin 0 gives p=0.5, +6 dB about 0.95. Links are
# admitted down to -GREY_MARGIN_DB, so the weakest admitted links sit in the
# grey zone around p=0.2, as real LLN radios do.
MARGIN_WIDTH_DB = 2.0
GREY_MARGIN_DB = 4.0


@dataclass(frozen=True)
class NodeField:
    """Deployed node positions; node ids are 0..n-1 with the sink among them."""

    nodes: tuple[tuple[int, float, float], ...]
    sink_id: int
    area: tuple[float, float]
    seed: int

    def __post_init__(self):
        w, h = self.area
        ids = [nid for nid, _, _ in self.nodes]
        if len(set(ids)) != len(ids):
            raise TaburplError("duplicate node ids")
        if self.sink_id not in set(ids):
            raise TaburplError(f"sink id {self.sink_id} not deployed")
        for nid, x, y in self.nodes:
            if not (0.0 <= x <= w and 0.0 <= y <= h):
                raise TaburplError(f"node {nid} at ({x}, {y}) outside {w}x{h} area")

    @property
    def n(self) -> int:
        return len(self.nodes)

    def position(self, node_id: int) -> tuple[float, float]:
        for nid, x, y in self.nodes:
            if nid == node_id:
                return (x, y)
        raise KeyError(node_id)

    def positions(self) -> dict[int, tuple[float, float]]:
        return {nid: (x, y) for nid, x, y in self.nodes}


@dataclass(frozen=True)
class RadioModel:
    """Radio/link admission model.

    ``unit-disc`` admits an edge iff distance <= range; its delivery
    probability is a linear falloff from 1.0 at d=0 to 0.7 at d=range.
    ``log-normal-shadowing`` (the default) adds a per-pair Gaussian fading
    gain (dB) to the deterministic path-loss margin: an edge exists while
    the margin stays above -grey_margin_db, and its delivery probability is
    a logistic of the margin, so strong links sit near 1 and the weakest
    admitted ones in the grey zone near 0.2. With sigma 0 the shadowing
    edge set is a disc of radius range*10^(grey/(10*n_pl)).
    ``delivery_curve`` overrides the distance-to-probability mapping.
    """

    kind: str = LOG_NORMAL_SHADOWING
    range_m: float = 300.0
    shadowing_sigma_db: float = 4.0
    path_loss_exponent: float = 3.0
    grey_margin_db: float = GREY_MARGIN_DB
    delivery_curve: Callable[[float, float], float] | None = None

    def __post_init__(self):
        if self.kind not in (UNIT_DISC, LOG_NORMAL_SHADOWING):
            raise TaburplError(f"unknown radio kind {self.kind!r}")
        if self.range_m <= 0:
            raise TaburplError("radio range must be positive")
        if self.shadowing_sigma_db < 0:
            raise TaburplError("shadowing sigma must be >= 0")

    def disc_delivery_probability(self, d: float) -> float:
        if self.delivery_curve is not None:
            return self.delivery_curve(d, self.range_m)
        p = P_AT_ZERO - (P_AT_ZERO - P_AT_RANGE) * (d / self.range_m)
        return min(P_AT_ZERO, max(P_FLOOR, p))

    def margin_db(self, d: float) -> float:
        """Deterministic fade margin relative to the nominal range."""
        if d <= 0:
            return float("inf")
        return 10.0 * self.path_loss_exponent * math.log10(self.range_m / d)

    def shadowing_delivery_probability(self, total_margin_db: float, d: float) -> float:
        if self.delivery_curve is not None:
            return self.delivery_curve(d, self.range_m)
        return 1.0 / (1.0 + math.exp(-total_margin_db / MARGIN_WIDTH_DB))


@dataclass(frozen=True)
class LinkGraph:
    """Directed link set with distances and per-edge delivery probabilities.

    Adjacency is indexed both ways: ``out[u]`` lists v with an edge u->v and
    ``inc[v]`` lists u with an edge u->v. The construction used here is
    symmetric, so the two views mirror each other.
    """

    n: int
    sink: int
    dist: dict[tuple[int, int], float]
    delivery_p: dict[tuple[int, int], float]
    out: dict[int, tuple[int, ...]]
    inc: dict[int, tuple[int, ...]]
    seed: int = 0

    @property
    def edges(self) -> Iterable[tuple[int, int]]:
        return self.dist.keys()

    def degree(self, node: int) -> int:
        return len(self.out.get(node, ()))

    def mean_degree(self) -> float:
        return sum(len(v) for v in self.out.values()) / self.n


def deploy_uniform(
    n: int,
    area: tuple[float, float],
    seed: int,
    sink_position: tuple[float, float] | None = None,
) -> NodeField:
    """Deploy n nodes i.i.d. uniform over the area; node 0 is the sink.

    The sink sits at a fixed position (area center by default); the remaining
    n-1 nodes are drawn from the seeded generator, so identical inputs give a
    bit-identical field.
    """
    if n < 1:
        raise TaburplError("need at least one node")
    w, h = area
    if w <= 0 or h <= 0:
        raise TaburplError("area dimensions must be positive")
    sx, sy = sink_position if sink_position is not None else (w / 2.0, h / 2.0)
    rng = np.random.default_rng(seed)
    coords = rng.uniform(low=(0.0, 0.0), high=(w, h), size=(n - 1, 2))
    nodes = [(0, float(sx), float(sy))]
    nodes += [(i + 1, float(coords[i, 0]), float(coords[i, 1])) for i in range(n - 1)]
    return NodeField(nodes=tuple(nodes), sink_id=0, area=(float(w), float(h)), seed=seed)


def build_links(field: NodeField, radio: RadioModel, seed: int = 0) -> LinkGraph:
    """Build the directed link graph the radio model admits.

    Shadowing gains are drawn once per unordered node pair and frozen (static
    fading), so the edge set is symmetric. Raises ConnectivityError with the
    orphan set when some node has no path to the sink.
    """
    if field.n == 0:
        raise TaburplError("empty field")
    ids = [nid for nid, _, _ in field.nodes]
    pos = field.positions()
    rng = np.random.default_rng(seed)

    dist: dict[tuple[int, int], float] = {}
    delivery: dict[tuple[int, int], float] = {}
    out: dict[int, list[int]] = {nid: [] for nid in ids}

    for i, u in enumerate(ids):
        ux, uy = pos[u]
        for v in ids[i + 1 :]:
            vx, vy = pos[v]
            d = math.hypot(ux - vx, uy - vy)
            if radio.kind == UNIT_DISC:
                admit = d <= radio.range_m
                p = radio.disc_delivery_probability(d) if admit else 0.0
            else:
                # one frozen fading gain per unordered pair (static fading);
                # the edge exists while margin + gain clears the grey floor
                gain = rng.normal(0.0, radio.shadowing_sigma_db) if radio.shadowing_sigma_db > 0 else 0.0
                total = radio.margin_db(d) + gain
                admit = total >= -radio.grey_margin_db
                p = radio.shadowing_delivery_probability(total, d) if admit else 0.0
            if not admit or d == 0.0:
                continue
            dist[(u, v)] = d
            dist[(v, u)] = d
            delivery[(u, v)] = p
            delivery[(v, u)] = p
            out[u].append(v)
            out[v].append(u)

    out_t = {nid: tuple(sorted(nbrs)) for nid, nbrs in out.items()}
    graph = LinkGraph(
        n=field.n,
        sink=field.sink_id,
        dist=dist,
        delivery_p=delivery,
        out=out_t,
        inc=out_t,  # symmetric construction
        seed=field.seed,
    )
    orphans = _unreachable(graph)
    if orphans:
        raise ConnectivityError(orphans)
    return graph


def _unreachable(graph: LinkGraph) -> list[int]:
    reached = {graph.sink}
    frontier = deque([graph.sink])
    while frontier:
        x = frontier.popleft()
        for w in graph.inc.get(x, ()):
            if w not in reached:
                reached.add(w)
                frontier.append(w)
    return [v for v in graph.out.keys() if v not in reached]


def connected_topology(
    n: int,
    area: tuple[float, float],
    radio: RadioModel,
    seed: int,
    redraw_until_connected: bool = False,
    max_redraws: int = 50,
) -> tuple[NodeField, LinkGraph]:
    """Deploy and link, optionally redrawing with incremented seeds until connected."""
    attempt = 0
    while True:
        field = deploy_uniform(n, area, seed + attempt)
        try:
            return field, build_links(field, radio, seed=seed + attempt)
        except ConnectivityError:
            attempt += 1
            if not redraw_until_connected or attempt > max_redraws:
                raise


def hop_counts(graph: LinkGraph, sink: int | None = None) -> dict[int, int]:
    """Unweighted shortest-path hop distance to the sink for every node.

    h(sink) = 0; BFS over the link graph. Raises ConnectivityError if any
    node cannot reach the sink.
    """
    root = graph.sink if sink is None else sink
    h = {root: 0}
    frontier = deque([root])
    while frontier:
        x = frontier.popleft()
        for w in graph.inc.get(x, ()):
            if w not in h:
                h[w] = h[x] + 1
                frontier.append(w)
    orphans = [v for v in graph.out.keys() if v not in h]
    if orphans:
        raise ConnectivityError(orphans)
    return h


def pearson_correlation(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Sample Pearson correlation coefficient of two equal-length series."""
    if len(xs) != len(ys):
        raise UndefinedCorrelationError("series lengths differ")
    if len(xs) < 2:
        raise UndefinedCorrelationError("need at least two points")
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    dx = x - x.mean()
    dy = y - y.mean()
    sx = float(np.sqrt(np.sum(dx * dx)))
    sy = float(np.sqrt(np.sum(dy * dy)))
    if sx == 0.0 or sy == 0.0:
        raise UndefinedCorrelationError("zero variance in a series")
    rho = float(np.sum(dx * dy) / (sx * sy))
    return max(-1.0, min(1.0, rho))


def edge_sink_distance_hop_pairs(
    field: NodeField, graph: LinkGraph
) -> list[tuple[float, int]]:
    """Per-edge (transmitter distance to sink, transmitter hop count) samples.

    One sample per directed edge; this is what the per-snapshot metric logger
    records for the distance/hop-count correlation analysis.
    """
    pos = field.positions()
    sx, sy = pos[graph.sink]
    h = hop_counts(graph)
    samples = []
    for (u, _v) in graph.edges:
        ux, uy = pos[u]
        samples.append((math.hypot(ux - sx, uy - sy), h[u]))
    return samples


def export_topology(field: NodeField, graph: LinkGraph) -> str:
    """Serialize a built topology as a plain-text edge list."""
    lines = [f"# nodes={graph.n} sink={graph.sink} seed={graph.seed}"]
    for (u, v) in sorted(graph.dist.keys()):
        lines.append(f"{u} {v} {graph.dist[(u, v)]!r} {graph.delivery_p[(u, v)]!r}")
    return "\n".join(lines) + "\n"


def import_topology(text: str) -> LinkGraph:
    """Rebuild a LinkGraph from the edge-list format of export_topology."""
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("#"):
        raise TaburplError("missing topology header line")
    header = dict(tok.split("=") for tok in lines[0].lstrip("# ").split())
    n = int(header["nodes"])
    sink = int(header["sink"])
    seed = int(header.get("seed", 0))
    dist: dict[tuple[int, int], float] = {}
    delivery: dict[tuple[int, int], float] = {}
    out: dict[int, list[int]] = {i: [] for i in range(n)}
    for ln in lines[1:]:
        u_s, v_s, d_s, p_s = ln.split()
        u, v = int(u_s), int(v_s)
        dist[(u, v)] = float(d_s)
        delivery[(u, v)] = float(p_s)
        out[u].append(v)
    out_t = {nid: tuple(sorted(nbrs)) for nid, nbrs in out.items()}
    return LinkGraph(
        n=n, sink=sink, dist=dist, delivery_p=delivery, out=out_t, inc=out_t, seed=seed
    )
