"""Min-max normalization and the six-term composite cost.

An edge is scored on six features: reciprocal safe residual energy of the
transmitter, per-packet transmission energy, link distance, hop feature, ETX,
and reciprocal link stability. Features are min-max normalized over the
current topology snapshot, weighted by a unit-sum weight vector, and summed;
path and whole-assignment costs add edge costs along parent chains.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .errors import (
    ContextError,
    InvalidAssignmentError,
    InvalidPathError,
    InvalidWeightError,
)
from .linkstats import LS_FLOOR, safe_residual
from .topology import LinkGraph

WEIGHT_SUM_TOL = 1e-9
N_FEATURES = 6
FEATURE_NAMES = ("residual_energy", "tx_energy", "distance", "hop_count", "etx", "link_stability")


@dataclass(frozen=True)
class WeightVector:
    """Six non-negative weights summing to one.

    Order: residual-energy, tx-energy, distance, hop-count, ETX,
    link-stability.
    """

    residual_energy: float
    tx_energy: float
    distance: float
    hop_count: float
    etx: float
    link_stability: float

    def __post_init__(self):
        vals = self.as_tuple()
        for name, v in zip(FEATURE_NAMES, vals):
            if v < 0:
                raise InvalidWeightError(f"weight {name} is negative: {v}")
        total = sum(vals)
        if abs(total - 1.0) > WEIGHT_SUM_TOL:
            raise InvalidWeightError(f"weights sum to {total!r}, expected 1 within {WEIGHT_SUM_TOL}")

    def as_tuple(self) -> tuple[float, ...]:
        return (
            self.residual_energy,
            self.tx_energy,
            self.distance,
            self.hop_count,
            self.etx,
            self.link_stability,
        )

    @classmethod
    def from_iterable(cls, values: Iterable[float]) -> "WeightVector":
        vals = tuple(float(v) for v in values)
        if len(vals) != N_FEATURES:
            raise InvalidWeightError(f"expected {N_FEATURES} weights, got {len(vals)}")
        return cls(*vals)

    def without(self, name: str) -> "WeightVector":
        """Zero one weight and rescale the rest proportionally to sum 1."""
        if name not in FEATURE_NAMES:
            raise InvalidWeightError(f"unknown metric {name!r}")
        vals = list(self.as_tuple())
        idx = FEATURE_NAMES.index(name)
        vals[idx] = 0.0
        rest = sum(vals)
        if rest <= 0:
            raise InvalidWeightError("cannot drop the only non-zero weight")
        return WeightVector.from_iterable(v / rest for v in vals)


# Balanced default from the two-stage calibration.
DEFAULT_WEIGHTS = WeightVector(0.18, 0.22, 0.12, 0.08, 0.25, 0.15)


@dataclass(frozen=True)
class EdgeMetrics:
    """Raw metrics of one directed edge at a snapshot instant."""

    e_r: float   # transmitter residual energy, J
    e_t: float   # transmission energy per packet, J
    d: float     # link distance, m
    h: float     # hop feature of the edge
    etx: float
    ls: float    # stability in [0.05, 1]

    def __post_init__(self):
        for name in ("e_r", "e_t", "d", "h", "etx"):
            if getattr(self, name) < 0:
                raise InvalidPathError(f"negative metric {name}")
        if not LS_FLOOR <= self.ls <= 1.0:
            raise InvalidPathError(f"ls outside [{LS_FLOOR}, 1]: {self.ls}")

    def features(self) -> tuple[float, ...]:
        return (
            1.0 / safe_residual(self.e_r),
            self.e_t,
            self.d,
            self.h,
            self.etx,
            1.0 / self.ls,
        )


def normalize(value: float, lo: float, hi: float) -> float:
    """Min-max scale value into [0,1]; a degenerate range maps to 0."""
    if lo > hi:
        raise InvalidPathError(f"normalization range inverted: [{lo}, {hi}]")
    if hi == lo:
        return 0.0
    return min(1.0, max(0.0, (value - lo) / (hi - lo)))


@dataclass
class NormalizationContext:
    """Per-feature (min, max) over one snapshot's edge population.

    Never carried across snapshots. ``clamp_events`` counts values seen
    outside their stated range (then clamped), as a diagnostic.
    """

    mins: tuple[float, ...]
    maxs: tuple[float, ...]
    snapshot_id: int = 0
    clamp_events: int = 0

    def normalize_feature(self, i: int, value: float) -> float:
        lo, hi = self.mins[i], self.maxs[i]
        if value < lo or value > hi:
            self.clamp_events += 1
        return normalize(value, lo, hi)

    @classmethod
    def from_metrics(
        cls, metrics: Iterable[EdgeMetrics], snapshot_id: int = 0
    ) -> "NormalizationContext":
        rows = [m.features() for m in metrics]
        if not rows:
            raise InvalidPathError("cannot build a context from zero edges")
        mins = tuple(min(r[i] for r in rows) for i in range(N_FEATURES))
        maxs = tuple(max(r[i] for r in rows) for i in range(N_FEATURES))
        return cls(mins=mins, maxs=maxs, snapshot_id=snapshot_id)


@dataclass
class NetworkSnapshot:
    """Frozen view of topology and per-link metrics at one instant."""

    graph: LinkGraph
    edge_metrics: dict[tuple[int, int], EdgeMetrics]
    residual_energy: dict[int, float]
    hops: dict[int, int]
    context: NormalizationContext
    timestamp: float = 0.0
    snapshot_id: int = 0

    @property
    def sink(self) -> int:
        return self.graph.sink

    @classmethod
    def build(
        cls,
        graph: LinkGraph,
        edge_metrics: dict[tuple[int, int], EdgeMetrics],
        residual_energy: dict[int, float],
        hops: dict[int, int],
        timestamp: float = 0.0,
        snapshot_id: int = 0,
    ) -> "NetworkSnapshot":
        missing = [e for e in graph.edges if e not in edge_metrics]
        if missing:
            raise InvalidPathError(f"{len(missing)} edges lack metrics, e.g. {missing[0]}")
        ctx = NormalizationContext.from_metrics(edge_metrics.values(), snapshot_id=snapshot_id)
        return cls(
            graph=graph,
            edge_metrics=edge_metrics,
            residual_energy=residual_energy,
            hops=hops,
            context=ctx,
            timestamp=timestamp,
            snapshot_id=snapshot_id,
        )


def edge_cost_raw(m: EdgeMetrics, w: WeightVector) -> float:
    """Unnormalized weighted sum of the six features (baseline variant)."""
    lam = w.as_tuple()
    f = m.features()
    return sum(lam[i] * f[i] for i in range(N_FEATURES))


def edge_cost_norm(m: EdgeMetrics, ctx: NormalizationContext, w: WeightVector) -> float:
    """Normalized weighted edge cost; always in [0,1] for a valid weight vector."""
    lam = w.as_tuple()
    f = m.features()
    return sum(lam[i] * ctx.normalize_feature(i, f[i]) for i in range(N_FEATURES))


def edge_cost_table(
    snap: NetworkSnapshot, w: WeightVector, normalized: bool = True
) -> dict[tuple[int, int], float]:
    """Precompute the per-edge cost of every snapshot edge."""
    if normalized:
        return {e: edge_cost_norm(m, snap.context, w) for e, m in snap.edge_metrics.items()}
    return {e: edge_cost_raw(m, w) for e, m in snap.edge_metrics.items()}


def _check_context(snap: NetworkSnapshot, ctx: NormalizationContext | None) -> NormalizationContext:
    if ctx is None:
        return snap.context
    if ctx.snapshot_id != snap.snapshot_id:
        raise ContextError(
            f"context from snapshot {ctx.snapshot_id} used with snapshot {snap.snapshot_id}"
        )
    return ctx


def path_cost(
    path: Sequence[tuple[int, int]],
    snap: NetworkSnapshot,
    w: WeightVector,
    ctx: NormalizationContext | None = None,
    normalized: bool = True,
) -> float:
    """Sum of edge costs along a chain of edges ending at the sink."""
    ctx = _check_context(snap, ctx)
    if not path:
        return 0.0
    for (a, b), (c, _d) in zip(path, path[1:]):
        if b != c:
            raise InvalidPathError(f"broken chain: edge ends at {b}, next starts at {c}")
    if path[-1][1] != snap.sink:
        raise InvalidPathError(f"path ends at {path[-1][1]}, not the sink")
    total = 0.0
    for e in path:
        m = snap.edge_metrics.get(e)
        if m is None:
            raise InvalidPathError(f"edge {e} not in snapshot")
        total += edge_cost_norm(m, ctx, w) if normalized else edge_cost_raw(m, w)
    return total


def parent_path(parent: Mapping[int, int], node: int, sink: int) -> list[tuple[int, int]]:
    """Edge sequence from node to the sink induced by a parent map."""
    path = []
    cur = node
    seen = {node}
    while cur != sink:
        nxt = parent.get(cur)
        if nxt is None:
            raise InvalidAssignmentError(f"node {cur} has no parent")
        path.append((cur, nxt))
        cur = nxt
        if cur in seen:
            raise InvalidAssignmentError(f"cycle through node {cur}")
        seen.add(cur)
    return path


def assignment_cost(
    parent: Mapping[int, int],
    snap: NetworkSnapshot,
    w: WeightVector,
    ctx: NormalizationContext | None = None,
    normalized: bool = True,
) -> float:
    """Sum over all non-sink nodes of their path cost under the assignment.

    Memoizes per-node path costs along shared suffixes, so the total equals
    the per-edge form sum((descendants+1) * edge_cost) exactly.
    """
    ctx = _check_context(snap, ctx)
    table = edge_cost_table(snap, w, normalized=normalized)
    sink = snap.sink
    pc: dict[int, float] = {sink: 0.0}

    def node_cost(v: int) -> float:
        chain = []
        cur = v
        seen = set()
        while cur not in pc:
            if cur in seen:
                raise InvalidAssignmentError(f"cycle through node {cur}")
            seen.add(cur)
            nxt = parent.get(cur)
            if nxt is None:
                raise InvalidAssignmentError(f"node {cur} has no parent")
            if (cur, nxt) not in table:
                raise InvalidAssignmentError(f"parent edge ({cur}, {nxt}) not in snapshot")
            chain.append(cur)
            cur = nxt
        for u in reversed(chain):
            pc[u] = table[(u, parent[u])] + pc[parent[u]]
        return pc[v]

    return sum(node_cost(v) for v in parent.keys())
