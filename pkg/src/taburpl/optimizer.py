"""Tabu Search over whole-network parent assignments, plus an exact oracle.

A solution assigns every non-sink node one upstream neighbor; the induced
graph must be acyclic and sink-rooted. The search move is a single parent
reassignment, the tabu key is (node, new-parent), and candidate costs are
evaluated incrementally: switching node v from parent a to u changes the
total by subtree_size(v) * (c(v,u) + pathcost(u) - c(v,a) - pathcost(a)).
The brute-force oracle enumerates every acyclic assignment for instances of
up to 10 nodes.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Mapping, NamedTuple, Sequence

from .cost import (
    DEFAULT_WEIGHTS,
    NetworkSnapshot,
    WeightVector,
    assignment_cost,
    edge_cost_table,
)
from .errors import ConnectivityError, InvalidAssignmentError, SizeLimitError


class Move(NamedTuple):
    node: int
    new_parent: int


@dataclass(frozen=True)
class ParentAssignment:
    """Parent map for every non-sink node; treat as immutable."""

    parent: dict[int, int]

    def parent_of(self, node: int) -> int:
        return self.parent[node]

    def with_move(self, move: Move) -> "ParentAssignment":
        updated = dict(self.parent)
        updated[move.node] = move.new_parent
        return ParentAssignment(updated)

    def path_to_sink(self, node: int, sink: int) -> list[int]:
        chain = [node]
        cur = node
        while cur != sink:
            cur = self.parent[cur]
            chain.append(cur)
            if len(chain) > len(self.parent) + 2:
                raise InvalidAssignmentError(f"cycle reached from node {node}")
        return chain


@dataclass
class TabuParams:
    tenure: int = 30
    neighbourhood_cap: int = 4000
    max_iterations: int = 150
    stall_limit: int = 40
    aspiration_factor: float = 0.97
    seed: int = 0
    # optional absolute-cost stopping rule; disabled unless set
    cost_stop_threshold: float | None = None

    def __post_init__(self):
        if min(self.tenure, self.neighbourhood_cap, self.max_iterations, self.stall_limit) <= 0:
            raise ValueError("tabu parameters must be positive")
        if not 0.0 < self.aspiration_factor <= 1.0:
            raise ValueError("aspiration factor must be in (0, 1]")


class TabuList:
    """FIFO of forbidden move keys with per-entry remaining tenure."""

    def __init__(self, tenure: int):
        self.tenure = tenure
        self._remaining: dict[Move, int] = {}

    def add(self, move: Move) -> None:
        self._remaining.pop(move, None)
        self._remaining[move] = self.tenure

    def tick(self) -> None:
        """Advance one iteration: decrement tenures, drop expired entries."""
        expired = []
        for move in self._remaining:
            self._remaining[move] -= 1
            if self._remaining[move] <= 0:
                expired.append(move)
        for move in expired:
            del self._remaining[move]

    def is_tabu(self, move: Move) -> bool:
        return move in self._remaining

    def __len__(self) -> int:
        return len(self._remaining)


@dataclass
class ConvergenceTrace:
    """Per-iteration record of the search; best-cost series is non-increasing."""

    initial_cost: float = 0.0
    iterations: list[tuple[int, float, float, int]] = field(default_factory=list)
    last_improvement: int = 0
    termination: str = "max-iter"

    def record(self, iteration: int, best_cost: float, current_cost: float, tabu_len: int) -> None:
        self.iterations.append((iteration, best_cost, current_cost, tabu_len))

    @property
    def best_costs(self) -> list[float]:
        return [row[1] for row in self.iterations]

    def dump(self) -> str:
        lines = [
            f"{it} {best!r} {cur!r} {tl}" for it, best, cur, tl in self.iterations
        ]
        return "\n".join(lines) + ("\n" if lines else "")


def check_acyclic(parent: Mapping[int, int] | ParentAssignment, sink: int) -> bool:
    """True iff parent pointers from every node reach the sink without revisits."""
    pmap = parent.parent if isinstance(parent, ParentAssignment) else parent
    ok: set[int] = {sink}
    for start in pmap:
        chain = []
        cur = start
        on_chain = set()
        while cur not in ok:
            if cur in on_chain or cur not in pmap:
                return False
            on_chain.add(cur)
            chain.append(cur)
            cur = pmap[cur]
        ok.update(chain)
    return True


def validate_assignment(a: ParentAssignment, snap: NetworkSnapshot) -> None:
    sink = snap.sink
    for v, p in a.parent.items():
        if p not in snap.graph.out.get(v, ()):
            raise InvalidAssignmentError(f"parent {p} is not a neighbor of {v}")
    if not check_acyclic(a, sink):
        raise InvalidAssignmentError("assignment contains a cycle")


def initial_solution(snap: NetworkSnapshot, w: WeightVector | None = None) -> ParentAssignment:
    """Greedy min-hop start: pick the neighbor closest to the sink in hops,
    ties by lower normalized edge cost, then by lower parent id."""
    w = w or DEFAULT_WEIGHTS
    hops = snap.hops
    table = edge_cost_table(snap, w, normalized=True)
    parent: dict[int, int] = {}
    for v in sorted(snap.graph.out.keys()):
        if v == snap.sink:
            continue
        nbrs = snap.graph.out.get(v, ())
        if not nbrs:
            raise ConnectivityError([v])
        parent[v] = min(nbrs, key=lambda u: (hops[u], table[(v, u)], u))
    return ParentAssignment(parent)


def _path_costs(parent: Mapping[int, int], sink: int, table: Mapping[tuple[int, int], float]) -> dict[int, float]:
    pc = {sink: 0.0}
    for v in parent:
        chain = []
        cur = v
        while cur not in pc:
            chain.append(cur)
            cur = parent[cur]
        for u in reversed(chain):
            pc[u] = table[(u, parent[u])] + pc[parent[u]]
    return pc


def _subtree_sizes(parent: Mapping[int, int], sink: int) -> dict[int, int]:
    size = {v: 1 for v in parent}
    size[sink] = 1
    for v in parent:
        cur = parent[v]
        while cur != sink:
            size[cur] += 1
            cur = parent[cur]
    return size


def _creates_cycle(parent: Mapping[int, int], v: int, u: int, sink: int) -> bool:
    """Would re-parenting v under u route u's sink path through v?"""
    cur = u
    while cur != sink:
        if cur == v:
            return True
        cur = parent[cur]
    return False


def _enumerate_moves(
    parent: Mapping[int, int],
    snap: NetworkSnapshot,
    cap: int,
    rng: random.Random,
) -> list[Move]:
    sink = snap.sink
    moves: list[Move] = []
    for v in parent:
        current = parent[v]
        for u in snap.graph.out.get(v, ()):
            if u == current or u == v:
                continue
            if _creates_cycle(parent, v, u, sink):
                continue
            moves.append(Move(v, u))
    if len(moves) > cap:
        moves = rng.sample(moves, cap)
    return moves


def generate_neighbours(
    s: ParentAssignment,
    snap: NetworkSnapshot,
    cap: int = 4000,
    rng: random.Random | None = None,
) -> list[ParentAssignment]:
    """All feasible single-parent-switch variants of s (sampled down to cap)."""
    rng = rng or random.Random(0)
    return [s.with_move(m) for m in _enumerate_moves(s.parent, snap, cap, rng)]


def select_best_non_tabu(
    candidates: Sequence[Move],
    costs: Sequence[float],
    tabu: TabuList,
    best_cost: float,
    aspiration: float = 0.97,
) -> int:
    """Index of the cheapest admissible candidate.

    A tabu move is admissible anyway when its cost beats aspiration*best_cost.
    If everything is tabu and nothing aspires, fall back to the overall
    cheapest. Ties break on (cost, node id, parent id).
    """
    if not candidates:
        raise ValueError("no candidates")
    threshold = aspiration * best_cost
    best_idx = None
    best_key = None
    fallback_idx = None
    fallback_key = None
    for i, (move, c) in enumerate(zip(candidates, costs)):
        key = (c, move.node, move.new_parent)
        if fallback_key is None or key < fallback_key:
            fallback_key, fallback_idx = key, i
        if tabu.is_tabu(move) and not c < threshold:
            continue
        if best_key is None or key < best_key:
            best_key, best_idx = key, i
    return best_idx if best_idx is not None else fallback_idx


def tabu_search(
    snap: NetworkSnapshot,
    w: WeightVector | None = None,
    params: TabuParams | None = None,
    normalized: bool = True,
    initial: ParentAssignment | None = None,
) -> tuple[ParentAssignment, ConvergenceTrace]:
    """Run the parent-set Tabu Search and return the best assignment found."""
    w = w or DEFAULT_WEIGHTS
    params = params or TabuParams()
    rng = random.Random(params.seed)
    table = edge_cost_table(snap, w, normalized=normalized)
    sink = snap.sink

    current = initial if initial is not None else initial_solution(snap, w)
    parent = dict(current.parent)
    best_parent = dict(parent)

    pc = _path_costs(parent, sink, table)
    current_cost = sum(pc[v] for v in parent)
    best_cost = current_cost

    tabu = TabuList(params.tenure)
    trace = ConvergenceTrace(initial_cost=current_cost)
    stall = 0

    for k in range(1, params.max_iterations + 1):
        moves = _enumerate_moves(parent, snap, params.neighbourhood_cap, rng)
        if not moves:
            trace.record(k, best_cost, current_cost, len(tabu))
            trace.termination = "stall"
            break

        sizes = _subtree_sizes(parent, sink)
        costs = []
        for v, u in moves:
            delta = table[(v, u)] + pc[u] - table[(v, parent[v])] - pc[parent[v]]
            costs.append(current_cost + sizes[v] * delta)

        idx = select_best_non_tabu(moves, costs, tabu, best_cost, params.aspiration_factor)
        chosen = moves[idx]
        parent[chosen.node] = chosen.new_parent
        pc = _path_costs(parent, sink, table)
        current_cost = sum(pc[v] for v in parent)

        if current_cost < best_cost:
            best_cost = current_cost
            best_parent = dict(parent)
            trace.last_improvement = k
            stall = 0
        else:
            stall += 1

        tabu.tick()
        tabu.add(chosen)
        trace.record(k, best_cost, current_cost, len(tabu))

        if params.cost_stop_threshold is not None and best_cost < params.cost_stop_threshold:
            trace.termination = "aspiration"
            break
        if stall >= params.stall_limit:
            trace.termination = "stall"
            break
    else:
        trace.termination = "max-iter"

    return ParentAssignment(best_parent), trace


BRUTE_FORCE_MAX_NODES = 10


def brute_force_optimal(
    snap: NetworkSnapshot,
    w: WeightVector | None = None,
    normalized: bool = True,
) -> tuple[ParentAssignment, float]:
    """Exact minimum-cost assignment by exhaustive enumeration with pruning.

    Only for instances of at most 10 nodes; enumeration walks nodes in id
    order, prunes partial assignments that already contain a cycle, and
    bounds the remaining cost by each unassigned node's cheapest edge.
    """
    w = w or DEFAULT_WEIGHTS
    if snap.graph.n > BRUTE_FORCE_MAX_NODES:
        raise SizeLimitError(f"{snap.graph.n} nodes exceeds the enumeration limit")
    sink = snap.sink
    nodes = sorted(v for v in snap.graph.out.keys() if v != sink)
    table = edge_cost_table(snap, w, normalized=normalized)
    choices = {v: sorted(snap.graph.out.get(v, ())) for v in nodes}
    min_edge = {v: min(table[(v, u)] for u in choices[v]) for v in nodes}

    best: dict[str, object] = {"cost": float("inf"), "parent": None}
    parent: dict[int, int] = {}

    def partial_cycle(v: int) -> bool:
        seen = {v}
        cur = parent[v]
        while cur != sink and cur in parent:
            if cur in seen:
                return True
            seen.add(cur)
            cur = parent[cur]
        return cur in seen and cur != sink

    def lower_bound() -> float:
        bound = sum(table[(v, parent[v])] for v in parent)
        bound += sum(min_edge[v] for v in nodes if v not in parent)
        return bound

    def recurse(i: int) -> None:
        if i == len(nodes):
            total = assignment_cost(parent, snap, w, normalized=normalized)
            if total < best["cost"]:
                best["cost"] = total
                best["parent"] = dict(parent)
            return
        v = nodes[i]
        for u in choices[v]:
            parent[v] = u
            if not partial_cycle(v) and lower_bound() < best["cost"]:
                recurse(i + 1)
            del parent[v]

    recurse(0)
    if best["parent"] is None:
        raise ConnectivityError(nodes, "no acyclic sink-rooted assignment exists")
    return ParentAssignment(best["parent"]), float(best["cost"])
