"""Discrete-event simulation: CBR traffic, lossy MAC, energy, snapshots.

Every non-sink node emits fixed-rate CBR packets toward the sink over its
current parent chain. Transmissions are Bernoulli trials at the link's
delivery probability with up to retry_limit attempts; each attempt updates
the link-stability EWMA and costs transmit energy, each successful reception
costs receive energy. Every snapshot period the nodes broadcast their metric
snapshots (heard by all alive neighbors), the reports are relayed hop-by-hop
to the root, and the root re-optimizes the parent assignment under the
configured protocol. The event loop is a single priority queue ordered by
(timestamp, sequence number), so a (config, seed) pair fully determines the
trace.
"""

from __future__ import annotations

import heapq
import itertools
import random
from collections import deque
from dataclasses import dataclass, field as dc_field, replace
from typing import Iterable

from .cost import DEFAULT_WEIGHTS, EdgeMetrics, NetworkSnapshot, WeightVector
from .errors import TaburplError, TraceParseError
from .linkstats import EnergyState, INITIAL_ENERGY_J, LinkStats, ls_for_cost
from .optimizer import ParentAssignment, TabuParams, tabu_search
from .topology import (
    LinkGraph,
    RadioModel,
    connected_topology,
    edge_sink_distance_hop_pairs,
    hop_counts,
)

PROTOCOLS = ("OF0", "ETX-OF", "TABU-UNNORM", "TABURPL")

SNAPSHOT_HEADER_BYTES = 18
SNAPSHOT_PER_NEIGHBOR_BYTES = 6

HOP_FEATURE_DEPTH = "depth"
HOP_FEATURE_INCREMENT = "increment"

_EV_GEN, _EV_TXEND, _EV_SNAP = 0, 1, 2


@dataclass(frozen=True)
class RadioEnergyParams:
    """Transceiver currents and rate; per-bit energies follow from I*V/R."""

    i_tx_a: float = 17.4e-3
    i_rx_a: float = 19.7e-3
    v_bat: float = 3.0
    bit_rate_bps: float = 250_000.0

    @property
    def e_tx_per_bit(self) -> float:
        return self.i_tx_a * self.v_bat / self.bit_rate_bps

    @property
    def e_rx_per_bit(self) -> float:
        return self.i_rx_a * self.v_bat / self.bit_rate_bps


@dataclass(frozen=True)
class SnapshotAccounting:
    """Byte budget of one snapshot round.

    Snapshot origination is header_bytes plus per_neighbor_bytes per neighbor
    table entry; b_snap is the network-wide originated total per round and
    r_ctrl the resulting control bit rate.
    """

    n: int
    neighbor_entries: int
    t_snap_s: float = 90.0
    header_bytes: int = SNAPSHOT_HEADER_BYTES
    per_neighbor_bytes: int = SNAPSHOT_PER_NEIGHBOR_BYTES

    @property
    def mean_k(self) -> float:
        return self.neighbor_entries / self.n

    @property
    def b_snap_bytes(self) -> int:
        return self.n * self.header_bytes + self.per_neighbor_bytes * self.neighbor_entries

    @property
    def r_ctrl_bps(self) -> float:
        return self.b_snap_bytes * 8.0 / self.t_snap_s

    def e_ctrl_per_node_j(self, radio: RadioEnergyParams, k: float | None = None) -> float:
        """Mean per-node control energy per round: own tx plus k heard snapshots."""
        k = self.mean_k if k is None else k
        own_bits = (self.header_bytes + self.per_neighbor_bytes * k) * 8.0
        return own_bits * radio.e_tx_per_bit + k * own_bits * radio.e_rx_per_bit

    @classmethod
    def from_mean_k(cls, n: int, mean_k: float, t_snap_s: float = 90.0) -> "SnapshotAccounting":
        return cls(n=n, neighbor_entries=round(n * mean_k), t_snap_s=t_snap_s)

    @classmethod
    def from_graph(cls, graph: LinkGraph, t_snap_s: float = 90.0) -> "SnapshotAccounting":
        entries = sum(len(nbrs) for nbrs in graph.out.values())
        return cls(n=graph.n, neighbor_entries=entries, t_snap_s=t_snap_s)


def snapshot_message_bytes(neighbor_count: int) -> int:
    return SNAPSHOT_HEADER_BYTES + SNAPSHOT_PER_NEIGHBOR_BYTES * neighbor_count


def emit_snapshot(
    energy: EnergyState,
    own_neighbor_count: int,
    heard_message_bytes: Iterable[int],
    radio: RadioEnergyParams,
) -> tuple[int, int]:
    """One node's snapshot round: broadcast its own snapshot, hear neighbors'.

    Debits tx energy for the node's own message and rx energy for every heard
    message; returns (bytes transmitted, bytes received).
    """
    tx_bytes = snapshot_message_bytes(own_neighbor_count)
    rx_bytes = sum(heard_message_bytes)
    energy.debit(tx_bytes * 8 * radio.e_tx_per_bit)
    energy.debit(rx_bytes * 8 * radio.e_rx_per_bit)
    return tx_bytes, rx_bytes


def per_hop_delay(tx_start_s: float, tx_end_s: float, t_air_s: float) -> float:
    """Queueing/backoff component of one hop: window length minus airtime."""
    if tx_end_s < tx_start_s or tx_start_s < 0:
        raise TaburplError("transmission window is inverted or negative")
    return max(0.0, (tx_end_s - tx_start_s) - t_air_s)


@dataclass
class SimConfig:
    n_nodes: int = 50
    area: tuple[float, float] = (1000.0, 1000.0)
    duration_s: float = 1000.0
    rate_pps: float = 2.0
    payload_bytes: int = 512
    frame_overhead_bytes: int = 18
    protocol: str = "TABURPL"
    t_snap_s: float = 90.0
    retry_limit: int = 7
    queue_capacity: int = 8
    initial_energy_j: float = INITIAL_ENERGY_J
    radio: RadioModel = dc_field(default_factory=RadioModel)
    energy: RadioEnergyParams = dc_field(default_factory=RadioEnergyParams)
    weights: WeightVector = DEFAULT_WEIGHTS
    tabu: TabuParams = dc_field(default_factory=TabuParams)
    hop_feature: str = HOP_FEATURE_DEPTH
    control_energy_inline: bool = True
    redraw_until_connected: bool = False
    collect_edge_samples: bool = False
    # every data-frame attempt is also heard (and paid for in rx energy) by
    # all alive neighbors of the sender, as in promiscuous radio models
    overhearing: bool = True
    # lost metric reports are re-sent end to end until delivered or capped
    report_retransmissions: int = 5
    # network-formation beacon exchanges before t=0 (uncharged, like the
    # initial routing-graph construction every protocol shares)
    warmup_beacon_rounds: int = 3
    seed: int = 1

    def __post_init__(self):
        if self.duration_s <= 0:
            raise TaburplError("duration must be positive")
        if self.rate_pps < 0:
            raise TaburplError("rate must be >= 0 (0 disables traffic)")
        if self.protocol not in PROTOCOLS:
            raise TaburplError(f"unknown protocol {self.protocol!r}, expected one of {PROTOCOLS}")
        if self.hop_feature not in (HOP_FEATURE_DEPTH, HOP_FEATURE_INCREMENT):
            raise TaburplError(f"unknown hop feature {self.hop_feature!r}")

    # MAC retry timing: ACK-timeout wait after each failed attempt plus a
    # mean CSMA backoff that doubles per retry (capped two doublings)
    ack_wait_s: float = 0.00086
    backoff_unit_s: float = 0.00112
    # unicast transmit power control: per-bit tx energy scales with link
    # distance as floor + (1-floor)*(d/range)^2, capped at the nominal
    # full-power figure; broadcasts and control go at full power
    power_control: bool = True
    tx_power_floor: float = 0.5

    @property
    def frame_bits(self) -> int:
        return (self.payload_bytes + self.frame_overhead_bytes) * 8

    @property
    def airtime_s(self) -> float:
        return self.frame_bits / self.energy.bit_rate_bps

    def service_time_s(self, attempts: int) -> float:
        """Occupancy of one frame: airtime per attempt plus retry overhead."""
        t = attempts * self.airtime_s
        for retry in range(attempts - 1):
            t += self.ack_wait_s + self.backoff_unit_s * (2 ** min(retry, 2))
        return t

    def tx_power_scale(self, d: float) -> float:
        if not self.power_control:
            return 1.0
        frac = min(1.0, d / self.radio.range_m)
        return self.tx_power_floor + (1.0 - self.tx_power_floor) * frac * frac


@dataclass
class TraceLog:
    """Time-ordered event record of one run plus raw per-link counters."""

    meta: dict = dc_field(default_factory=dict)
    sends: list = dc_field(default_factory=list)      # (t, seq, node, pkt)
    recvs: list = dc_field(default_factory=list)      # (t, seq, node, pkt, hops)
    drops: list = dc_field(default_factory=list)      # (t, seq, node, pkt, reason)
    ctrls: list = dc_field(default_factory=list)      # (t, seq, node, bytes, dir, msgs)
    energies: list = dc_field(default_factory=list)   # (t, seq, node, residual)
    link_counters: dict = dc_field(default_factory=dict)  # (u,v) -> [attempts, acks]
    round_origin_bytes: list = dc_field(default_factory=list)
    edge_samples: list = dc_field(default_factory=list)
    debits: dict = dc_field(default_factory=dict)
    initial_energy: dict = dc_field(default_factory=dict)
    final_residual: dict = dc_field(default_factory=dict)
    in_flight: list = dc_field(default_factory=list)
    pkt_src: dict = dc_field(default_factory=dict)
    deaths: dict = dc_field(default_factory=dict)

    def events(self):
        """All events merged in (timestamp, sequence) order."""
        merged = []
        merged += [(t, seq, "send", {"node": n, "pkt": p}) for (t, seq, n, p) in self.sends]
        merged += [
            (t, seq, "recv", {"node": n, "pkt": p, "hop": h}) for (t, seq, n, p, h) in self.recvs
        ]
        merged += [(t, seq, "drop", {"node": n, "pkt": p}) for (t, seq, n, p, _r) in self.drops]
        merged += [
            (t, seq, "ctrl", {"node": n, "bytes": b, "dir": d, "msgs": m})
            for (t, seq, n, b, d, m) in self.ctrls
        ]
        merged += [(t, seq, "energy", {"node": n, "res": r}) for (t, seq, n, r) in self.energies]
        merged.sort(key=lambda row: (row[0], row[1]))
        return merged

    def to_text(self) -> str:
        lines = ["# taburpl-trace v1"]
        meta = " ".join(f"{k}={self.meta[k]!r}" for k in sorted(self.meta))
        lines.append(f"# meta {meta}")
        for (u, v) in sorted(self.link_counters):
            a, s = self.link_counters[(u, v)]
            lines.append(f"# link {u} {v} tx={a} ack={s}")
        for i, b in enumerate(self.round_origin_bytes):
            lines.append(f"# origin {i + 1} {b}")
        for t, _seq, kind, fields in self.events():
            parts = [f"t={t!r}", f"ev={kind}"]
            parts += [f"{k}={v!r}" if isinstance(v, float) else f"{k}={v}" for k, v in fields.items()]
            lines.append(" ".join(parts))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "TraceLog":
        trace = cls()
        seq = itertools.count()
        for line_no, line in enumerate(text.splitlines(), start=1):
            if not line.strip():
                continue
            try:
                if line.startswith("# taburpl-trace"):
                    continue
                if line.startswith("# meta "):
                    trace.meta = _parse_meta(line[len("# meta "):])
                    continue
                if line.startswith("# link "):
                    u_s, v_s, tx_s, ack_s = line[len("# link "):].split()
                    key = (int(u_s), int(v_s))
                    trace.link_counters[key] = [
                        int(tx_s.split("=")[1]),
                        int(ack_s.split("=")[1]),
                    ]
                    continue
                if line.startswith("# origin "):
                    _idx, b = line[len("# origin "):].split()
                    trace.round_origin_bytes.append(int(b))
                    continue
                if line.startswith("#"):
                    continue
                fields = dict(tok.split("=", 1) for tok in line.split())
                t = float(fields.pop("t"))
                ev = fields.pop("ev")
                s = next(seq)
                node = int(fields["node"])
                if ev == "send":
                    trace.sends.append((t, s, node, int(fields["pkt"])))
                elif ev == "recv":
                    trace.recvs.append((t, s, node, int(fields["pkt"]), int(fields["hop"])))
                elif ev == "drop":
                    trace.drops.append((t, s, node, int(fields["pkt"]), "unknown"))
                elif ev == "ctrl":
                    trace.ctrls.append(
                        (t, s, node, int(fields["bytes"]), fields["dir"].strip("'"), int(fields["msgs"]))
                    )
                elif ev == "energy":
                    trace.energies.append((t, s, node, float(fields["res"])))
                else:
                    raise ValueError(f"unknown event kind {ev!r}")
            except TraceParseError:
                raise
            except Exception as exc:
                raise TraceParseError(line_no, line, str(exc)) from exc
        trace.pkt_src = {pkt: node for (_t, _s, node, pkt) in trace.sends}
        for (_t, _s, node, res) in trace.energies:
            trace.final_residual[node] = res
        return trace


def _parse_meta(text: str) -> dict:
    meta = {}
    for tok in text.split():
        k, v = tok.split("=", 1)
        try:
            meta[k] = eval(v, {"__builtins__": {}})  # values are repr() of scalars
        except Exception:
            meta[k] = v
    return meta


@dataclass
class LinkRuntime:
    """Everything one directed link needs to carry a frame."""

    u: int
    v: int
    delivery_p: float
    stats: LinkStats
    sender: EnergyState
    receiver: EnergyState
    tx_scale: float = 1.0


def transmit(
    link: LinkRuntime,
    payload_bits: int,
    rng: random.Random,
    radio: RadioEnergyParams,
    retry_limit: int = 7,
) -> tuple[int, bool]:
    """Attempt a frame over one link: Bernoulli trials until ack or retry limit.

    Updates the link's stability/ETX statistics, debits transmit energy per
    attempt from the sender (scaled by the link's tx power setting) and
    receive energy for one successful reception.
    """
    attempts = 0
    delivered = False
    while attempts < retry_limit:
        attempts += 1
        ok = rng.random() < link.delivery_p
        link.stats.record_attempt(ok)
        if ok:
            delivered = True
            break
    tx_j = attempts * payload_bits * radio.e_tx_per_bit * link.tx_scale
    link.sender.debit(tx_j)
    link.stats.tx_energy_j += tx_j
    link.stats.packets_offered += 1
    if delivered:
        link.stats.record_delivery(attempts)
        link.receiver.debit(payload_bits * radio.e_rx_per_bit)
    return attempts, delivered


def _fail_without_receiver(
    link: LinkRuntime, payload_bits: int, radio: RadioEnergyParams, retry_limit: int
) -> tuple[int, bool]:
    """All attempts fail deterministically (dead receiver); no rng consumed."""
    for _ in range(retry_limit):
        link.stats.record_attempt(False)
    tx_j = retry_limit * payload_bits * radio.e_tx_per_bit * link.tx_scale
    link.sender.debit(tx_j)
    link.stats.tx_energy_j += tx_j
    link.stats.packets_offered += 1
    return retry_limit, False


def of0_assignment(snap: NetworkSnapshot) -> ParentAssignment:
    """Hop-count-only parent choice: min-hop neighbor, ties by lowest id."""
    parent = {}
    for v in sorted(snap.graph.out.keys()):
        if v == snap.sink:
            continue
        parent[v] = min(snap.graph.out[v], key=lambda u: (snap.hops[u], u))
    return ParentAssignment(parent)


def etx_greedy_assignment(snap: NetworkSnapshot) -> ParentAssignment:
    """Min cumulative-ETX tree (Dijkstra over per-edge ETX)."""
    dist = {snap.sink: 0.0}
    parent: dict[int, int] = {}
    pq = [(0.0, snap.sink)]
    done = set()
    while pq:
        d, x = heapq.heappop(pq)
        if x in done:
            continue
        done.add(x)
        for w in snap.graph.inc.get(x, ()):
            if w == snap.sink:
                continue
            etx = snap.edge_metrics[(w, x)].etx
            nd = d + etx
            if nd < dist.get(w, float("inf")):
                dist[w] = nd
                parent[w] = x
                heapq.heappush(pq, (nd, w))
    return ParentAssignment(parent)


def reoptimize_root(
    snap: NetworkSnapshot,
    protocol: str,
    w: WeightVector | None = None,
    tabu_params: TabuParams | None = None,
) -> ParentAssignment:
    """Root-side re-optimization under the configured objective."""
    w = w or DEFAULT_WEIGHTS
    if protocol == "TABURPL":
        return tabu_search(snap, w, tabu_params, normalized=True)[0]
    if protocol == "TABU-UNNORM":
        return tabu_search(snap, w, tabu_params, normalized=False)[0]
    if protocol == "ETX-OF":
        return etx_greedy_assignment(snap)
    if protocol == "OF0":
        return of0_assignment(snap)
    raise TaburplError(f"unknown protocol {protocol!r}")


class _Simulation:
    def __init__(self, config: SimConfig, seed: int):
        self.cfg = config
        self.seed = seed
        self.field, self.graph = connected_topology(
            config.n_nodes,
            config.area,
            config.radio,
            seed,
            redraw_until_connected=config.redraw_until_connected,
        )
        self.hops = hop_counts(self.graph)
        self.sink = self.graph.sink
        self.nodes = sorted(self.graph.out.keys())
        self.mac_rng = random.Random(seed * 1_000_003 + 101)
        self.ctrl_rng = random.Random(seed * 1_000_003 + 202)
        self.traffic_rng = random.Random(seed * 1_000_003 + 303)

        self.energy = {i: EnergyState(config.initial_energy_j, config.initial_energy_j) for i in self.nodes}
        self.dead = {i: False for i in self.nodes}
        self.queue = {i: deque() for i in self.nodes}
        self.busy = {i: False for i in self.nodes}
        self.in_service: dict[int, tuple] = {}
        self.links = {
            e: LinkRuntime(
                u=e[0],
                v=e[1],
                delivery_p=self.graph.delivery_p[e],
                stats=LinkStats(),
                sender=self.energy[e[0]],
                receiver=self.energy[e[1]],
                tx_scale=config.tx_power_scale(self.graph.dist[e]),
            )
            for e in sorted(self.graph.dist.keys())
        }

        self.trace = TraceLog()
        self.trace.meta = {
            "n": config.n_nodes,
            "seed": seed,
            "duration": config.duration_s,
            "rate": config.rate_pps,
            "payload": config.payload_bytes,
            "overhead": config.frame_overhead_bytes,
            "protocol": config.protocol,
            "t_snap": config.t_snap_s,
            "inline": int(config.control_energy_inline),
            "e_tx_bit": config.energy.e_tx_per_bit,
            "e_rx_bit": config.energy.e_rx_per_bit,
            "retry_limit": config.retry_limit,
        }
        self.seq = itertools.count()
        self.heap: list[tuple] = []
        self.pkt_count = itertools.count()
        self.snapshot_count = 0
        # death threshold: one worst-case frame (all retries) plus one reception
        self.death_threshold_j = (
            config.retry_limit * config.frame_bits * config.energy.e_tx_per_bit
            + config.frame_bits * config.energy.e_rx_per_bit
        )

    # -- event plumbing -------------------------------------------------

    def _push(self, t: float, kind: int, node: int) -> None:
        heapq.heappush(self.heap, (t, next(self.seq), kind, node))

    def _log_energy(self, t: float, node: int) -> None:
        self.trace.energies.append((t, next(self.seq), node, self.energy[node].residual_j))

    def _log_energy_all(self, t: float) -> None:
        for i in self.nodes:
            self._log_energy(t, i)

    # -- lifecycle -------------------------------------------------------

    def _die(self, node: int, t: float) -> None:
        self.dead[node] = True
        self.trace.deaths[node] = t
        while self.queue[node]:
            pkt_id, _src, _gen_t, _hops = self.queue[node].popleft()
            self.trace.drops.append((t, next(self.seq), node, pkt_id, "dead"))

    def _alive_neighbors(self, node: int) -> list[int]:
        return [v for v in self.graph.out.get(node, ()) if not self.dead[v]]

    # -- traffic ---------------------------------------------------------

    def _on_gen(self, t: float, node: int) -> None:
        if self.dead[node]:
            return
        pkt = next(self.pkt_count)
        self.trace.sends.append((t, next(self.seq), node, pkt))
        self.trace.pkt_src[pkt] = node
        frame = (pkt, node, t, 0)
        if len(self.queue[node]) >= self.cfg.queue_capacity:
            self.trace.drops.append((t, next(self.seq), node, pkt, "overflow"))
        else:
            self.queue[node].append(frame)
            self._begin_service(node, t)
        nxt = t + 1.0 / self.cfg.rate_pps
        if nxt <= self.cfg.duration_s:
            self._push(nxt, _EV_GEN, node)

    def _begin_service(self, node: int, t: float) -> None:
        if self.busy[node] or self.dead[node] or not self.queue[node]:
            return
        if self.energy[node].residual_j < self.death_threshold_j:
            self._die(node, t)
            return
        frame = self.queue[node].popleft()
        target = self.parent.get(node)
        link = self.links.get((node, target)) if target is not None else None
        if link is None or self.dead[target]:
            if link is not None:
                attempts, delivered = _fail_without_receiver(
                    link, self.cfg.frame_bits, self.cfg.energy, self.cfg.retry_limit
                )
            else:
                attempts, delivered = self.cfg.retry_limit, False
        else:
            attempts, delivered = transmit(
                link, self.cfg.frame_bits, self.mac_rng, self.cfg.energy, self.cfg.retry_limit
            )
        if self.cfg.overhearing:
            # every attempt is also decoded by the rest of the neighborhood
            rx_j = self.cfg.frame_bits * self.cfg.energy.e_rx_per_bit
            for j in self.graph.out.get(node, ()):
                if self.dead[j]:
                    continue
                heard = attempts - (1 if (delivered and j == target) else 0)
                if heard:
                    self.energy[j].debit(heard * rx_j)
        self.busy[node] = True
        self.in_service[node] = (frame, attempts, delivered, target)
        self._push(t + self.cfg.service_time_s(attempts), _EV_TXEND, node)

    def _on_txend(self, t: float, node: int) -> None:
        frame, attempts, delivered, target = self.in_service.pop(node)
        self.busy[node] = False
        pkt, src, gen_t, hops_done = frame
        if not delivered:
            self.trace.drops.append((t, next(self.seq), node, pkt, "retry"))
        elif target == self.sink:
            self.trace.recvs.append((t, next(self.seq), self.sink, pkt, hops_done + 1))
        else:
            fwd = (pkt, src, gen_t, hops_done + 1)
            if self.dead[target]:
                self.trace.drops.append((t, next(self.seq), target, pkt, "dead"))
            elif len(self.queue[target]) >= self.cfg.queue_capacity:
                self.trace.drops.append((t, next(self.seq), target, pkt, "overflow"))
            else:
                self.queue[target].append(fwd)
                self._begin_service(target, t)
        self._begin_service(node, t)

    # -- control plane ----------------------------------------------------

    def _unicast_control(
        self, sender: int, receiver: int, size: int, tx_bytes, rx_bytes, tx_msgs, rx_msgs
    ) -> bool:
        p = self.graph.delivery_p.get((sender, receiver), 0.0)
        attempts = 0
        delivered = False
        while attempts < self.cfg.retry_limit:
            attempts += 1
            if self.ctrl_rng.random() < p:
                delivered = True
                break
        tx_bytes[sender] += size * attempts
        tx_msgs[sender] += 1
        if delivered:
            rx_bytes[receiver] += size
            rx_msgs[receiver] += 1
        return delivered

    def _relay_report(
        self, origin: int, size: int, heard_broadcast, tx_bytes, rx_bytes, tx_msgs, rx_msgs
    ) -> None:
        parent = self.parent.get(origin)
        if parent is None or self.dead.get(parent, True):
            return
        for send_try in range(1 + self.cfg.report_retransmissions):
            if send_try == 0:
                # the origination broadcast doubles as the first hop
                at_parent = heard_broadcast.get((origin, parent), False)
            else:
                at_parent = self._unicast_control(
                    origin, parent, size, tx_bytes, rx_bytes, tx_msgs, rx_msgs
                )
            if not at_parent:
                continue
            hop = parent
            ok = True
            steps = 0
            while hop != self.sink:
                steps += 1
                if steps > len(self.nodes):
                    ok = False
                    break
                nxt = self.parent.get(hop)
                if nxt is None or self.dead.get(nxt, True):
                    ok = False
                    break
                if not self._unicast_control(hop, nxt, size, tx_bytes, rx_bytes, tx_msgs, rx_msgs):
                    ok = False
                    break
                hop = nxt
            if ok:
                return

    def _alive_subgraph(self) -> tuple[LinkGraph, dict[int, int]]:
        alive = [i for i in self.nodes if not self.dead[i]]
        alive_set = set(alive)
        out = {i: tuple(v for v in self.graph.out.get(i, ()) if v in alive_set) for i in alive}
        dist = {e: d for e, d in self.graph.dist.items() if e[0] in alive_set and e[1] in alive_set}
        delivery = {e: self.graph.delivery_p[e] for e in dist}
        sub = LinkGraph(
            n=len(alive), sink=self.sink, dist=dist, delivery_p=delivery,
            out=out, inc=out, seed=self.graph.seed,
        )
        reachable = {self.sink}
        frontier = deque([self.sink])
        while frontier:
            x = frontier.popleft()
            for w in sub.inc.get(x, ()):
                if w not in reachable:
                    reachable.add(w)
                    frontier.append(w)
        h = {self.sink: 0}
        frontier = deque([self.sink])
        while frontier:
            x = frontier.popleft()
            for w in sub.inc.get(x, ()):
                if w not in h:
                    h[w] = h[x] + 1
                    frontier.append(w)
        covered = {
            i: tuple(v for v in out[i] if v in reachable)
            for i in alive
            if i in reachable
        }
        cov_dist = {e: d for e, d in dist.items() if e[0] in covered and e[1] in covered}
        cov_delivery = {e: delivery[e] for e in cov_dist}
        covered_graph = LinkGraph(
            n=len(covered), sink=self.sink, dist=cov_dist, delivery_p=cov_delivery,
            out=covered, inc=covered, seed=self.graph.seed,
        )
        return covered_graph, h

    def _build_snapshot(self, t: float) -> NetworkSnapshot:
        graph, h = self._alive_subgraph()
        bit_j = self.cfg.frame_bits * self.cfg.energy.e_tx_per_bit
        metrics = {}
        for e in graph.dist:
            st = self.links[e].stats
            hop_feature = (
                float(h[e[1]] + 1) if self.cfg.hop_feature == HOP_FEATURE_DEPTH else 1.0
            )
            etx = st.etx_estimate()
            # the report tuple carries no energy field, so the root derives
            # per-packet tx energy from nominal bit energy and ETX; the
            # distance term is what accounts for amplifier cost
            metrics[e] = EdgeMetrics(
                e_r=self.energy[e[0]].residual_j,
                e_t=bit_j * etx,
                d=graph.dist[e],
                h=hop_feature,
                etx=etx,
                ls=ls_for_cost(st),
            )
        residuals = {i: self.energy[i].residual_j for i in graph.out}
        self.snapshot_count += 1
        return NetworkSnapshot.build(
            graph=graph,
            edge_metrics=metrics,
            residual_energy=residuals,
            hops={i: h[i] for i in graph.out},
            timestamp=t,
            snapshot_id=self.snapshot_count,
        )

    def _reoptimize(self, snap: NetworkSnapshot) -> None:
        params = replace(self.cfg.tabu, seed=self.seed * 1000 + self.snapshot_count)
        new_assignment = reoptimize_root(snap, self.cfg.protocol, self.cfg.weights, params)
        merged = dict(self.parent)
        merged.update(new_assignment.parent)
        self.parent = merged

    def _snapshot_round(self, t: float) -> None:
        inline = self.cfg.control_energy_inline
        e_tx = self.cfg.energy.e_tx_per_bit
        e_rx = self.cfg.energy.e_rx_per_bit
        alive = [i for i in self.nodes if not self.dead[i]]
        msg_bytes = {i: snapshot_message_bytes(len(self._alive_neighbors(i))) for i in alive}

        tx_bytes = {i: 0 for i in alive}
        rx_bytes = {i: 0 for i in alive}
        tx_msgs = {i: 0 for i in alive}
        rx_msgs = {i: 0 for i in alive}

        # local broadcast: one origination each; neighbors hear it subject to
        # link loss, and every reception outcome doubles as a passive probe
        # of that link's stability
        heard_broadcast = {}
        for i in alive:
            tx_bytes[i] += msg_bytes[i]
            tx_msgs[i] += 1
            for j in self._alive_neighbors(i):
                heard = self.ctrl_rng.random() < self.graph.delivery_p[(i, j)]
                self.links[(i, j)].stats.record_beacon(heard)
                heard_broadcast[(i, j)] = heard
                if heard:
                    rx_bytes[j] += msg_bytes[i]
                    rx_msgs[j] += 1
        self.trace.round_origin_bytes.append(sum(msg_bytes.values()))

        # each metric report is relayed hop-by-hop to the root over the
        # parent chains; a lost report is re-sent end to end (bounded), so
        # weak links on the routing tree inflate the control budget
        for i in alive:
            if i == self.sink:
                continue
            self._relay_report(i, msg_bytes[i], heard_broadcast, tx_bytes, rx_bytes, tx_msgs, rx_msgs)

        for i in alive:
            if inline:
                self.energy[i].debit(tx_bytes[i] * 8 * e_tx)
                self.energy[i].debit(rx_bytes[i] * 8 * e_rx)
            self.trace.ctrls.append((t, next(self.seq), i, tx_bytes[i], "tx", tx_msgs[i]))
            self.trace.ctrls.append((t, next(self.seq), i, rx_bytes[i], "rx", rx_msgs[i]))

        self._log_energy_all(t)

        if self.cfg.collect_edge_samples:
            self.trace.edge_samples.extend(edge_sink_distance_hop_pairs(self.field, self.graph))
        if any(not self.dead[u] and not self.dead[v] for (u, v) in self.graph.dist):
            self._reoptimize(self._build_snapshot(t))

    # -- main loop ---------------------------------------------------------

    def run(self) -> TraceLog:
        cfg = self.cfg
        for _ in range(cfg.warmup_beacon_rounds):
            for e in self.links:
                heard = self.ctrl_rng.random() < self.graph.delivery_p[e]
                self.links[e].stats.record_beacon(heard)
        self.parent = {}
        if self.graph.dist:
            self._reoptimize(self._build_snapshot(0.0))
        self._log_energy_all(0.0)

        if cfg.rate_pps > 0:
            for i in self.nodes:
                if i == self.sink:
                    continue
                offset = self.traffic_rng.random() / cfg.rate_pps
                self._push(offset, _EV_GEN, i)
        n_rounds = int(cfg.duration_s / cfg.t_snap_s)
        for m in range(1, n_rounds + 1):
            t_m = m * cfg.t_snap_s
            if t_m < cfg.duration_s:
                self._push(t_m, _EV_SNAP, self.sink)

        while self.heap:
            t, _seq, kind, node = heapq.heappop(self.heap)
            if t > cfg.duration_s:
                break
            if kind == _EV_GEN:
                self._on_gen(t, node)
            elif kind == _EV_TXEND:
                self._on_txend(t, node)
            else:
                self._snapshot_round(t)

        self._log_energy_all(cfg.duration_s)
        trace = self.trace
        for e, link in self.links.items():
            trace.link_counters[e] = [link.stats.tx_count, link.stats.ack_count]
        trace.debits = {i: self.energy[i].drawn_j for i in self.nodes}
        trace.initial_energy = {i: self.energy[i].initial_j for i in self.nodes}
        trace.final_residual = {i: self.energy[i].residual_j for i in self.nodes}
        in_flight = [f[0] for q in self.queue.values() for f in q]
        in_flight += [entry[0][0] for entry in self.in_service.values()]
        trace.in_flight = sorted(in_flight)
        return trace


def run(config: SimConfig, seed: int | None = None) -> TraceLog:
    """Simulate one scenario and return its full event trace."""
    return _Simulation(config, config.seed if seed is None else seed).run()


def correct_trace_energy(trace: TraceLog, radio: RadioEnergyParams | None = None) -> TraceLog:
    """Post-process a control-accounting-disabled trace.

    Deducts each node's control energy (recomputed from the logged control
    bytes and the per-bit energies in the trace header) from every residual
    sample at or after the corresponding snapshot timestamp. A trace that
    was produced with inline accounting is returned unchanged.
    """
    if trace.meta.get("inline", 1):
        return trace
    e_tx = trace.meta["e_tx_bit"] if radio is None else radio.e_tx_per_bit
    e_rx = trace.meta["e_rx_bit"] if radio is None else radio.e_rx_per_bit

    per_event = []  # (t, node, joules)
    for (t, _seq, node, nbytes, direction, _msgs) in trace.ctrls:
        rate = e_tx if direction == "tx" else e_rx
        per_event.append((t, node, nbytes * 8 * rate))
    per_event.sort(key=lambda row: row[0])

    corrected = TraceLog(
        meta=dict(trace.meta),
        sends=list(trace.sends),
        recvs=list(trace.recvs),
        drops=list(trace.drops),
        ctrls=list(trace.ctrls),
        link_counters=dict(trace.link_counters),
        round_origin_bytes=list(trace.round_origin_bytes),
        edge_samples=list(trace.edge_samples),
        initial_energy=dict(trace.initial_energy),
        in_flight=list(trace.in_flight),
        pkt_src=dict(trace.pkt_src),
    )
    corrected.meta["inline"] = "corrected"

    deductions: dict[int, list[tuple[float, float]]] = {}
    for t, node, joules in per_event:
        deductions.setdefault(node, []).append((t, joules))

    def correction(node: int, t: float) -> float:
        return sum(j for (tc, j) in deductions.get(node, ()) if tc <= t)

    corrected.energies = [
        (t, seq, node, max(0.0, res - correction(node, t)))
        for (t, seq, node, res) in trace.energies
    ]
    corrected.final_residual = {
        node: max(0.0, res - correction(node, trace.meta.get("duration", float("inf"))))
        for node, res in trace.final_residual.items()
    }
    corrected.debits = {
        node: trace.debits.get(node, 0.0) + correction(node, float("inf"))
        for node in set(trace.debits) | set(deductions)
    }
    return corrected
