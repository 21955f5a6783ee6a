"""KPI extraction from traces and the multi-seed statistical machinery.

Eight per-run metrics (delivery ratio, energy, path length, control
overhead, delay, loss ratio, throughput, link-stability rate) are computed
from the raw event lists; means over seeds get percentile-bootstrap
confidence intervals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .engine import TraceLog
from .errors import InsufficientDataError, PairingError, UndefinedMetricError
from .topology import pearson_correlation


@dataclass(frozen=True)
class KpiRecord:
    """The eight per-run performance metrics."""

    pdr: float
    energy_total_j: float
    energy_mean_per_node_j: float
    avg_path_length_hops: float | None
    control_bytes: int
    control_bytes_per_min: float
    control_messages: int
    e2e_delay_ms: float | None
    plr_percent: float
    throughput_bps: float
    lsr_mean: float | None
    sent: int = 0
    received: int = 0
    dropped: int = 0

    def __post_init__(self):
        if not 0.0 <= self.pdr <= 1.0:
            raise UndefinedMetricError(f"pdr out of range: {self.pdr}")
        if abs(self.plr_percent - (1.0 - self.pdr) * 100.0) > 1e-9:
            raise UndefinedMetricError("plr does not match 1 - pdr")
        if self.lsr_mean is not None and not 0.0 <= self.lsr_mean <= 1.0:
            raise UndefinedMetricError(f"lsr out of range: {self.lsr_mean}")

    KPI_FIELDS = (
        "pdr",
        "energy_total_j",
        "energy_mean_per_node_j",
        "avg_path_length_hops",
        "control_bytes",
        "control_bytes_per_min",
        "control_messages",
        "e2e_delay_ms",
        "plr_percent",
        "throughput_bps",
        "lsr_mean",
    )


@dataclass(frozen=True)
class CiEstimate:
    mean: float
    lower: float
    upper: float
    confidence: float = 0.95
    resamples: int = 10_000

    def __post_init__(self):
        if not (self.lower <= self.mean + 1e-12 and self.mean - 1e-12 <= self.upper):
            raise InsufficientDataError(
                f"inconsistent interval: [{self.lower}, {self.upper}] around {self.mean}"
            )

    def overlaps(self, other: "CiEstimate") -> bool:
        return self.lower <= other.upper and other.lower <= self.upper


def compute_kpis(trace: TraceLog, lsr_link_weighted: bool = False) -> KpiRecord:
    """All eight metrics from one trace; delay averages over received packets."""
    duration = trace.meta["duration"]
    payload_bits = trace.meta["payload"] * 8
    sent = len(trace.sends)
    received = len(trace.recvs)
    dropped = len(trace.drops)
    if sent == 0:
        raise UndefinedMetricError("no packets sent; PDR/PLR undefined")
    pdr = received / sent
    plr = (1.0 - pdr) * 100.0

    consumed = {
        node: trace.initial_energy[node] - trace.final_residual[node]
        for node in trace.initial_energy
    }
    energy_total = sum(consumed.values())
    energy_mean = energy_total / len(consumed) if consumed else 0.0

    if received:
        send_time = {pkt: t for (t, _s, _n, pkt) in trace.sends}
        delays = [t - send_time[pkt] for (t, _s, _n, pkt, _h) in trace.recvs]
        delay_ms = 1000.0 * sum(delays) / received
        path_len = sum(h for (_t, _s, _n, _p, h) in trace.recvs) / received
    else:
        delay_ms = None
        path_len = None

    ctrl_bytes = sum(b for (_t, _s, _n, b, d, _m) in trace.ctrls if d == "tx")
    ctrl_msgs = sum(m for (_t, _s, _n, _b, d, m) in trace.ctrls if d == "tx")

    throughput = received * payload_bits / duration

    attempts = sum(a for a, _k in trace.link_counters.values())
    acks = sum(k for _a, k in trace.link_counters.values())
    if lsr_link_weighted:
        ratios = [k / a for a, k in trace.link_counters.values() if a > 0]
        lsr = sum(ratios) / len(ratios) if ratios else None
    else:
        lsr = acks / attempts if attempts else None

    return KpiRecord(
        pdr=pdr,
        energy_total_j=energy_total,
        energy_mean_per_node_j=energy_mean,
        avg_path_length_hops=path_len,
        control_bytes=ctrl_bytes,
        control_bytes_per_min=ctrl_bytes * 60.0 / duration,
        control_messages=ctrl_msgs,
        e2e_delay_ms=delay_ms,
        plr_percent=plr,
        throughput_bps=throughput,
        lsr_mean=lsr,
        sent=sent,
        received=received,
        dropped=dropped,
    )


def packet_conservation(trace: TraceLog) -> dict[int, tuple[int, int, int, int]]:
    """Per-flow (sent, received, dropped, in-flight) counts from the raw trace."""
    flows: dict[int, list[int]] = {}

    def slot(src):
        return flows.setdefault(src, [0, 0, 0, 0])

    for (_t, _s, node, _p) in trace.sends:
        slot(node)[0] += 1
    for (_t, _s, _n, pkt, _h) in trace.recvs:
        slot(trace.pkt_src[pkt])[1] += 1
    for (_t, _s, _n, pkt, _r) in trace.drops:
        slot(trace.pkt_src[pkt])[2] += 1
    for pkt in trace.in_flight:
        slot(trace.pkt_src[pkt])[3] += 1
    return {src: tuple(v) for src, v in flows.items()}


def bootstrap_ci(
    samples: Sequence[float],
    resamples: int = 10_000,
    level: float = 0.95,
    seed: int = 0,
) -> CiEstimate:
    """Percentile bootstrap of the mean: resample with replacement, take the
    (1-level)/2 and (1+level)/2 percentiles of the resample means."""
    data = np.asarray(samples, dtype=float)
    if data.size < 2:
        raise InsufficientDataError("need at least two samples")
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, data.size, size=(resamples, data.size))
    means = data[idx].mean(axis=1)
    alpha = (1.0 - level) / 2.0
    lower, upper = np.percentile(means, [100.0 * alpha, 100.0 * (1.0 - alpha)])
    return CiEstimate(
        mean=float(data.mean()),
        lower=float(lower),
        upper=float(upper),
        confidence=level,
        resamples=resamples,
    )


def ablation_deltas(
    full: Mapping[int, KpiRecord],
    reduced: Mapping[int, KpiRecord],
    resamples: int = 10_000,
    seed: int = 0,
) -> dict[str, tuple[float, CiEstimate]]:
    """Relative percent change of each KPI mean, reduced vs full.

    Both mappings are keyed by seed and must cover the same seeds. The CI is
    a paired bootstrap: seeds are resampled jointly and the percent delta of
    the resampled means recomputed.
    """
    if sorted(full.keys()) != sorted(reduced.keys()):
        raise PairingError(
            f"seed lists differ: {sorted(full.keys())} vs {sorted(reduced.keys())}"
        )
    seeds = sorted(full.keys())
    out: dict[str, tuple[float, CiEstimate]] = {}
    rng = np.random.default_rng(seed)
    for name in KpiRecord.KPI_FIELDS:
        f_vals = [getattr(full[s], name) for s in seeds]
        r_vals = [getattr(reduced[s], name) for s in seeds]
        if any(v is None for v in f_vals + r_vals):
            continue
        f_arr = np.asarray(f_vals, dtype=float)
        r_arr = np.asarray(r_vals, dtype=float)
        f_mean = f_arr.mean()
        if f_mean == 0.0:
            continue
        delta = 100.0 * (r_arr.mean() - f_mean) / f_mean
        idx = rng.integers(0, len(seeds), size=(resamples, len(seeds)))
        f_means = f_arr[idx].mean(axis=1)
        r_means = r_arr[idx].mean(axis=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            deltas = 100.0 * (r_means - f_means) / f_means
        deltas = deltas[np.isfinite(deltas)]
        lo, hi = np.percentile(deltas, [2.5, 97.5])
        ci = CiEstimate(
            mean=float(delta),
            lower=float(min(lo, delta)),
            upper=float(max(hi, delta)),
            resamples=resamples,
        )
        out[name] = (float(delta), ci)
    return out


def correlation_study(
    samples: Sequence[tuple[float, float]],
    resamples: int = 10_000,
    level: float = 0.95,
    seed: int = 0,
) -> tuple[float, CiEstimate]:
    """Pooled Pearson correlation of (distance, hop) samples with bootstrap CI."""
    xs = [s[0] for s in samples]
    ys = [float(s[1]) for s in samples]
    rho = pearson_correlation(xs, ys)
    x = np.asarray(xs)
    y = np.asarray(ys)
    rng = np.random.default_rng(seed)
    boot = np.empty(resamples)
    n = x.size
    for b in range(resamples):
        idx = rng.integers(0, n, size=n)
        xb, yb = x[idx], y[idx]
        dx = xb - xb.mean()
        dy = yb - yb.mean()
        denom = math.sqrt(float(dx @ dx)) * math.sqrt(float(dy @ dy))
        boot[b] = float(dx @ dy) / denom if denom else rho
    alpha = (1.0 - level) / 2.0
    lo, hi = np.percentile(boot, [100.0 * alpha, 100.0 * (1.0 - alpha)])
    ci = CiEstimate(
        mean=rho,
        lower=float(min(lo, rho)),
        upper=float(max(hi, rho)),
        confidence=level,
        resamples=resamples,
    )
    return rho, ci
