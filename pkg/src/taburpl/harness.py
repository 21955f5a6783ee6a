"""Experiment harness: scenario matrix, ablation and calibration drivers, I/O.

A matrix is sizes x rates x protocols x seeds; every cell is one simulation
run. Results land in a per-run results CSV, a per-cell summary CSV with
bootstrap confidence bounds, and per-KPI plot-data files (x axis traffic
rate, one series per protocol). All outputs are reproducible bit-for-bit
from (config, seeds).
"""

from __future__ import annotations

import concurrent.futures
import configparser
import csv
import io
import os
from dataclasses import dataclass, field as dc_field, replace

from .analysis import KpiRecord, ablation_deltas, bootstrap_ci, compute_kpis
from .calibration import (
    CalibrationParams,
    CalibrationResult,
    ObjectivePoint,
    calibrate,
)
from .cost import FEATURE_NAMES, WeightVector
from .engine import PROTOCOLS, RadioEnergyParams, SimConfig, run
from .errors import TaburplError, UsageError
from .optimizer import TabuParams
from .topology import RadioModel

METRIC_ALIASES = {
    "d": "distance",
    "h": "hop_count",
    "distance": "distance",
    "hop_count": "hop_count",
    "etx": "etx",
    "link_stability": "link_stability",
    "residual_energy": "residual_energy",
    "tx_energy": "tx_energy",
}


@dataclass
class ExperimentMatrix:
    sizes: tuple[int, ...] = (50, 100, 200)
    rates: tuple[float, ...] = (2.0, 5.0, 10.0)
    protocols: tuple[str, ...] = PROTOCOLS
    seeds: tuple[int, ...] = tuple(range(1, 11))
    out_dir: str = "runs/matrix"

    def __post_init__(self):
        if not (self.sizes and self.rates and self.protocols and self.seeds):
            raise UsageError("matrix axes must be non-empty")
        if len(set(self.seeds)) != len(self.seeds):
            raise UsageError("seeds must be distinct")
        for p in self.protocols:
            if p not in PROTOCOLS:
                raise UsageError(f"unknown protocol {p!r}")

    def cells(self):
        for n in self.sizes:
            for rate in self.rates:
                for proto in self.protocols:
                    for seed in self.seeds:
                        yield (proto, n, rate, seed)


RESULT_COLUMNS = ("protocol", "n_nodes", "rate_pps", "seed") + KpiRecord.KPI_FIELDS + (
    "sent",
    "received",
    "dropped",
)


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def run_cell(base: SimConfig, protocol: str, n: int, rate: float, seed: int) -> KpiRecord:
    cfg = replace(base, protocol=protocol, n_nodes=n, rate_pps=rate, seed=seed)
    return compute_kpis(run(cfg))


def _run_cell_star(args):
    try:
        return "ok", run_cell(*args)
    except TaburplError as exc:
        return "err", str(exc)


@dataclass
class MatrixResult:
    rows: list = dc_field(default_factory=list)  # (proto, n, rate, seed, KpiRecord)
    failures: list = dc_field(default_factory=list)  # (cell, message)
    out_dir: str = ""


def run_matrix(
    matrix: ExperimentMatrix,
    base: SimConfig,
    workers: int = 1,
    ci_resamples: int = 10_000,
) -> MatrixResult:
    """Simulate every cell, write results/summary/plot files under out_dir."""
    os.makedirs(matrix.out_dir, exist_ok=True)
    result = MatrixResult(out_dir=matrix.out_dir)
    cells = list(matrix.cells())
    jobs = [(base, *cell) for cell in cells]

    if workers > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_run_cell_star, jobs))
    else:
        outcomes = [_run_cell_star(job) for job in jobs]
    for cell, (status, payload) in zip(cells, outcomes):
        if status == "ok":
            proto, n, rate, seed = cell
            result.rows.append((proto, n, rate, seed, payload))
        else:
            result.failures.append((cell, payload))

    _write_results_csv(result, os.path.join(matrix.out_dir, "results.csv"))
    summary = summarize(result.rows, ci_resamples=ci_resamples)
    _write_summary_csv(summary, os.path.join(matrix.out_dir, "summary.csv"))
    _write_plot_data(summary, matrix, matrix.out_dir)
    return result


def _write_results_csv(result: MatrixResult, path: str) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(RESULT_COLUMNS)
        for proto, n, rate, seed, rec in sorted(
            result.rows, key=lambda r: (r[0], r[1], r[2], r[3])
        ):
            row = [proto, n, _fmt(rate), seed]
            row += [_fmt(getattr(rec, f)) for f in KpiRecord.KPI_FIELDS]
            row += [rec.sent, rec.received, rec.dropped]
            writer.writerow(row)


def summarize(rows, ci_resamples: int = 10_000):
    """Group per-run KPIs by (protocol, n, rate): means plus bootstrap bounds."""
    groups: dict[tuple, list[KpiRecord]] = {}
    for proto, n, rate, _seed, rec in rows:
        groups.setdefault((proto, n, rate), []).append(rec)
    summary = {}
    for key in sorted(groups):
        recs = groups[key]
        cell = {}
        for name in KpiRecord.KPI_FIELDS:
            vals = [getattr(r, name) for r in recs]
            if any(v is None for v in vals):
                cell[name] = (None, None, None)
                continue
            vals = [float(v) for v in vals]
            if len(vals) >= 2:
                ci = bootstrap_ci(vals, resamples=ci_resamples, seed=0)
                cell[name] = (ci.mean, ci.lower, ci.upper)
            else:
                cell[name] = (vals[0], vals[0], vals[0])
        summary[key] = cell
    return summary


def _write_summary_csv(summary, path: str) -> None:
    header = ["protocol", "n_nodes", "rate_pps", "n_runs"]
    for name in KpiRecord.KPI_FIELDS:
        header += [f"{name}_mean", f"{name}_lo", f"{name}_hi"]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for (proto, n, rate), cell in summary.items():
            row = [proto, n, _fmt(rate), ""]
            for name in KpiRecord.KPI_FIELDS:
                mean, lo, hi = cell[name]
                row += [_fmt(mean), _fmt(lo), _fmt(hi)]
            writer.writerow(row)


def _write_plot_data(summary, matrix: ExperimentMatrix, out_dir: str) -> None:
    for name in KpiRecord.KPI_FIELDS:
        for n in matrix.sizes:
            path = os.path.join(out_dir, f"plot_{name}_n{n}.csv")
            with open(path, "w", newline="") as fh:
                writer = csv.writer(fh)
                header = ["rate_pps"]
                for proto in matrix.protocols:
                    header += [f"{proto}_mean", f"{proto}_lo", f"{proto}_hi"]
                writer.writerow(header)
                for rate in matrix.rates:
                    row = [_fmt(rate)]
                    for proto in matrix.protocols:
                        cell = summary.get((proto, n, rate))
                        mean, lo, hi = cell[name] if cell else (None, None, None)
                        row += [_fmt(mean), _fmt(lo), _fmt(hi)]
                    writer.writerow(row)


def run_ablation(
    base: SimConfig,
    drop: str,
    seeds,
    out_dir: str | None = None,
    resamples: int = 10_000,
):
    """Zero one metric weight (rescaling the rest), rerun, report KPI deltas."""
    feature = METRIC_ALIASES.get(drop)
    if feature is None:
        raise UsageError(f"unknown metric {drop!r}; expected one of {sorted(METRIC_ALIASES)}")
    reduced_weights = base.weights.without(feature)
    full_runs = {}
    reduced_runs = {}
    for seed in seeds:
        full_runs[seed] = compute_kpis(run(replace(base, seed=seed)))
        reduced_runs[seed] = compute_kpis(
            run(replace(base, weights=reduced_weights, seed=seed))
        )
    deltas = ablation_deltas(full_runs, reduced_runs, resamples=resamples)
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
        path = os.path.join(out_dir, f"ablation_drop_{feature}.csv")
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["kpi", "delta_percent", "ci_lower", "ci_upper"])
            for name, (delta, ci) in deltas.items():
                writer.writerow([name, _fmt(delta), _fmt(ci.lower), _fmt(ci.upper)])
    return deltas


def run_calibration(
    base: SimConfig,
    seeds,
    params: CalibrationParams | None = None,
    out_dir: str | None = None,
) -> CalibrationResult:
    """Drive the two-stage weight calibration with full simulations."""
    seeds = list(seeds)

    def evaluate(w: WeightVector) -> ObjectivePoint:
        pdrs, energies = [], []
        for seed in seeds:
            rec = compute_kpis(run(replace(base, weights=w, seed=seed)))
            pdrs.append(rec.pdr)
            energies.append(rec.energy_total_j)
        return ObjectivePoint(
            pdr=sum(pdrs) / len(pdrs), energy_j=sum(energies) / len(energies)
        )

    result = calibrate(evaluate, params)
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, "calibration.csv"), "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(
                ["candidate_id"] + list(FEATURE_NAMES) + ["pdr", "energy_j", "score", "stage"]
            )
            for row in result.rows:
                writer.writerow(
                    [row.candidate_id]
                    + [_fmt(v) for v in row.weights.as_tuple()]
                    + [_fmt(row.pdr), _fmt(row.energy_j), _fmt(row.score), row.stage]
                )
        with open(os.path.join(out_dir, "calibrated_weights.txt"), "w") as fh:
            fh.write(" ".join(repr(v) for v in result.best.as_tuple()) + "\n")
    return result


# -- config file I/O ---------------------------------------------------------


def config_to_text(cfg: SimConfig, matrix: ExperimentMatrix | None = None) -> str:
    parser = configparser.ConfigParser()
    parser["sim"] = {
        "n_nodes": str(cfg.n_nodes),
        "area_w": repr(cfg.area[0]),
        "area_h": repr(cfg.area[1]),
        "duration_s": repr(cfg.duration_s),
        "rate_pps": repr(cfg.rate_pps),
        "payload_bytes": str(cfg.payload_bytes),
        "frame_overhead_bytes": str(cfg.frame_overhead_bytes),
        "protocol": cfg.protocol,
        "t_snap_s": repr(cfg.t_snap_s),
        "retry_limit": str(cfg.retry_limit),
        "queue_capacity": str(cfg.queue_capacity),
        "initial_energy_j": repr(cfg.initial_energy_j),
        "hop_feature": cfg.hop_feature,
        "control_energy_inline": str(int(cfg.control_energy_inline)),
        "redraw_until_connected": str(int(cfg.redraw_until_connected)),
        "collect_edge_samples": str(int(cfg.collect_edge_samples)),
        "overhearing": str(int(cfg.overhearing)),
        "power_control": str(int(cfg.power_control)),
        "tx_power_floor": repr(cfg.tx_power_floor),
        "report_retransmissions": str(cfg.report_retransmissions),
        "warmup_beacon_rounds": str(cfg.warmup_beacon_rounds),
        "ack_wait_s": repr(cfg.ack_wait_s),
        "backoff_unit_s": repr(cfg.backoff_unit_s),
        "seed": str(cfg.seed),
    }
    parser["radio"] = {
        "kind": cfg.radio.kind,
        "range_m": repr(cfg.radio.range_m),
        "shadowing_sigma_db": repr(cfg.radio.shadowing_sigma_db),
        "path_loss_exponent": repr(cfg.radio.path_loss_exponent),
        "grey_margin_db": repr(cfg.radio.grey_margin_db),
    }
    parser["energy"] = {
        "i_tx_a": repr(cfg.energy.i_tx_a),
        "i_rx_a": repr(cfg.energy.i_rx_a),
        "v_bat": repr(cfg.energy.v_bat),
        "bit_rate_bps": repr(cfg.energy.bit_rate_bps),
    }
    parser["tabu"] = {
        "tenure": str(cfg.tabu.tenure),
        "neighbourhood_cap": str(cfg.tabu.neighbourhood_cap),
        "max_iterations": str(cfg.tabu.max_iterations),
        "stall_limit": str(cfg.tabu.stall_limit),
        "aspiration_factor": repr(cfg.tabu.aspiration_factor),
        "seed": str(cfg.tabu.seed),
    }
    parser["weights"] = {
        name: repr(w) for name, w in zip(FEATURE_NAMES, cfg.weights.as_tuple())
    }
    if matrix is not None:
        parser["matrix"] = {
            "sizes": ",".join(str(s) for s in matrix.sizes),
            "rates": ",".join(repr(r) for r in matrix.rates),
            "protocols": ",".join(matrix.protocols),
            "seeds": ",".join(str(s) for s in matrix.seeds),
            "out": matrix.out_dir,
        }
    buf = io.StringIO()
    parser.write(buf)
    return buf.getvalue()


def config_from_text(text: str) -> tuple[SimConfig, ExperimentMatrix | None]:
    parser = configparser.ConfigParser()
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise UsageError(f"bad config: {exc}") from exc

    def get(section, key, cast, default):
        if parser.has_option(section, key):
            raw = parser.get(section, key)
            try:
                return cast(raw)
            except ValueError as exc:
                raise UsageError(f"bad value for [{section}] {key}: {raw!r}") from exc
        return default

    base = SimConfig()
    radio = RadioModel(
        kind=get("radio", "kind", str, base.radio.kind),
        range_m=get("radio", "range_m", float, base.radio.range_m),
        shadowing_sigma_db=get("radio", "shadowing_sigma_db", float, base.radio.shadowing_sigma_db),
        path_loss_exponent=get("radio", "path_loss_exponent", float, base.radio.path_loss_exponent),
        grey_margin_db=get("radio", "grey_margin_db", float, base.radio.grey_margin_db),
    )
    energy = RadioEnergyParams(
        i_tx_a=get("energy", "i_tx_a", float, base.energy.i_tx_a),
        i_rx_a=get("energy", "i_rx_a", float, base.energy.i_rx_a),
        v_bat=get("energy", "v_bat", float, base.energy.v_bat),
        bit_rate_bps=get("energy", "bit_rate_bps", float, base.energy.bit_rate_bps),
    )
    tabu = TabuParams(
        tenure=get("tabu", "tenure", int, base.tabu.tenure),
        neighbourhood_cap=get("tabu", "neighbourhood_cap", int, base.tabu.neighbourhood_cap),
        max_iterations=get("tabu", "max_iterations", int, base.tabu.max_iterations),
        stall_limit=get("tabu", "stall_limit", int, base.tabu.stall_limit),
        aspiration_factor=get("tabu", "aspiration_factor", float, base.tabu.aspiration_factor),
        seed=get("tabu", "seed", int, base.tabu.seed),
    )
    if parser.has_section("weights"):
        try:
            weights = WeightVector.from_iterable(
                get("weights", name, float, w)
                for name, w in zip(FEATURE_NAMES, base.weights.as_tuple())
            )
        except TaburplError as exc:
            raise UsageError(str(exc)) from exc
    else:
        weights = base.weights

    cfg = SimConfig(
        n_nodes=get("sim", "n_nodes", int, base.n_nodes),
        area=(
            get("sim", "area_w", float, base.area[0]),
            get("sim", "area_h", float, base.area[1]),
        ),
        duration_s=get("sim", "duration_s", float, base.duration_s),
        rate_pps=get("sim", "rate_pps", float, base.rate_pps),
        payload_bytes=get("sim", "payload_bytes", int, base.payload_bytes),
        frame_overhead_bytes=get("sim", "frame_overhead_bytes", int, base.frame_overhead_bytes),
        protocol=get("sim", "protocol", str, base.protocol),
        t_snap_s=get("sim", "t_snap_s", float, base.t_snap_s),
        retry_limit=get("sim", "retry_limit", int, base.retry_limit),
        queue_capacity=get("sim", "queue_capacity", int, base.queue_capacity),
        initial_energy_j=get("sim", "initial_energy_j", float, base.initial_energy_j),
        radio=radio,
        energy=energy,
        weights=weights,
        tabu=tabu,
        hop_feature=get("sim", "hop_feature", str, base.hop_feature),
        control_energy_inline=bool(get("sim", "control_energy_inline", int, int(base.control_energy_inline))),
        redraw_until_connected=bool(get("sim", "redraw_until_connected", int, int(base.redraw_until_connected))),
        collect_edge_samples=bool(get("sim", "collect_edge_samples", int, int(base.collect_edge_samples))),
        overhearing=bool(get("sim", "overhearing", int, int(base.overhearing))),
        power_control=bool(get("sim", "power_control", int, int(base.power_control))),
        tx_power_floor=get("sim", "tx_power_floor", float, base.tx_power_floor),
        report_retransmissions=get("sim", "report_retransmissions", int, base.report_retransmissions),
        warmup_beacon_rounds=get("sim", "warmup_beacon_rounds", int, base.warmup_beacon_rounds),
        ack_wait_s=get("sim", "ack_wait_s", float, base.ack_wait_s),
        backoff_unit_s=get("sim", "backoff_unit_s", float, base.backoff_unit_s),
        seed=get("sim", "seed", int, base.seed),
    )

    matrix = None
    if parser.has_section("matrix"):
        def split(key, cast, default):
            if not parser.has_option("matrix", key):
                return default
            raw = parser.get("matrix", key)
            return tuple(cast(tok.strip()) for tok in raw.split(",") if tok.strip())

        matrix = ExperimentMatrix(
            sizes=split("sizes", int, ExperimentMatrix.sizes),
            rates=split("rates", float, ExperimentMatrix.rates),
            protocols=split("protocols", str, ExperimentMatrix.protocols),
            seeds=split("seeds", int, ExperimentMatrix.seeds),
            out_dir=get("matrix", "out", str, ExperimentMatrix.out_dir),
        )
    return cfg, matrix
