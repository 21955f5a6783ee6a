"""Command-line front end.

Subcommands: run (single scenario), matrix, calibrate, ablate,
correct-trace, topo export/import. Exit codes: 0 success, 1 usage error,
2 simulation failure, 3 connectivity failure.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace

from .analysis import KpiRecord, compute_kpis
from .calibration import CalibrationParams
from .engine import PROTOCOLS, SimConfig, TraceLog, correct_trace_energy, run
from .errors import ConnectivityError, TaburplError, UsageError
from .harness import (
    ExperimentMatrix,
    config_from_text,
    run_ablation,
    run_calibration,
    run_matrix,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_SIM = 2
EXIT_CONNECTIVITY = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="taburpl", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", help="INI config file")
        p.add_argument("--seed", type=int, help="run seed")
        p.add_argument("--protocol", choices=PROTOCOLS)
        p.add_argument("--nodes", type=int, help="node count")
        p.add_argument("--rate", type=float, help="per-node packet rate (pkt/s)")
        p.add_argument("--duration", type=float, help="simulated seconds")
        p.add_argument("--out", help="output directory")
        p.add_argument(
            "--redraw-until-connected",
            action="store_true",
            help="redraw disconnected deployments with incremented seeds",
        )

    p_run = sub.add_parser("run", help="simulate one scenario and print its KPIs")
    add_common(p_run)
    p_run.add_argument("--trace", help="also write the event trace to this file")
    p_run.add_argument(
        "--no-inline-control-energy",
        action="store_true",
        help="log control bytes but do not debit their energy inline",
    )

    p_matrix = sub.add_parser("matrix", help="run the full experiment matrix")
    add_common(p_matrix)
    p_matrix.add_argument("--sizes", help="comma list of node counts")
    p_matrix.add_argument("--rates", help="comma list of rates")
    p_matrix.add_argument("--protocols", help="comma list of protocols")
    p_matrix.add_argument("--seeds", help="comma list of seeds")
    p_matrix.add_argument("--workers", type=int, default=1)

    p_cal = sub.add_parser("calibrate", help="two-stage weight calibration")
    add_common(p_cal)
    p_cal.add_argument("--seeds", help="comma list of evaluation seeds", default="1")
    p_cal.add_argument("--coarse", type=int, default=150, help="stage-1 candidates")
    p_cal.add_argument("--fine", type=int, default=50, help="stage-2 candidates")
    p_cal.add_argument("--smoke", action="store_true", help="5 coarse + 5 fine candidates")

    p_abl = sub.add_parser("ablate", help="drop one metric weight and report deltas")
    add_common(p_abl)
    p_abl.add_argument("--drop", required=True, help="metric to drop (e.g. d or h)")
    p_abl.add_argument("--seeds", help="comma list of seeds", default="1,2,3")

    p_corr = sub.add_parser("correct-trace", help="apply control-energy post-processing")
    p_corr.add_argument("--infile", required=True)
    p_corr.add_argument("--outfile", required=True)

    p_topo = sub.add_parser("topo", help="export or import a built topology")
    topo_sub = p_topo.add_subparsers(dest="topo_command", required=True)
    p_exp = topo_sub.add_parser("export")
    add_common(p_exp)
    p_exp.add_argument("--outfile", required=True)
    p_imp = topo_sub.add_parser("import")
    p_imp.add_argument("--infile", required=True)
    return parser


def _base_config(args) -> SimConfig:
    if getattr(args, "config", None):
        with open(args.config) as fh:
            cfg, _matrix = config_from_text(fh.read())
    else:
        cfg = SimConfig()
    overrides = {}
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    if getattr(args, "protocol", None):
        overrides["protocol"] = args.protocol
    if getattr(args, "nodes", None) is not None:
        overrides["n_nodes"] = args.nodes
    if getattr(args, "rate", None) is not None:
        overrides["rate_pps"] = args.rate
    if getattr(args, "duration", None) is not None:
        overrides["duration_s"] = args.duration
    if getattr(args, "redraw_until_connected", False):
        overrides["redraw_until_connected"] = True
    return replace(cfg, **overrides) if overrides else cfg


def _matrix_from_args(args, cfg) -> ExperimentMatrix:
    matrix = None
    if args.config:
        with open(args.config) as fh:
            _cfg, matrix = config_from_text(fh.read())
    matrix = matrix or ExperimentMatrix()
    fields = {}
    if args.sizes:
        fields["sizes"] = tuple(int(s) for s in args.sizes.split(","))
    if args.rates:
        fields["rates"] = tuple(float(s) for s in args.rates.split(","))
    if args.protocols:
        fields["protocols"] = tuple(args.protocols.split(","))
    if args.seeds:
        fields["seeds"] = tuple(int(s) for s in args.seeds.split(","))
    if args.out:
        fields["out_dir"] = args.out
    return replace(matrix, **fields) if fields else matrix


def _print_kpis(rec: KpiRecord) -> None:
    for name in KpiRecord.KPI_FIELDS:
        print(f"{name}: {getattr(rec, name)}")
    print(f"sent: {rec.sent} received: {rec.received} dropped: {rec.dropped}")


def _seed_list(raw: str) -> list[int]:
    try:
        return [int(tok) for tok in raw.split(",") if tok.strip()]
    except ValueError as exc:
        raise UsageError(f"bad seed list {raw!r}") from exc


def _cmd_run(args) -> int:
    cfg = _base_config(args)
    if args.no_inline_control_energy:
        cfg = replace(cfg, control_energy_inline=False)
    trace = run(cfg)
    if args.trace:
        with open(args.trace, "w") as fh:
            fh.write(trace.to_text())
    _print_kpis(compute_kpis(trace))
    return EXIT_OK


def _cmd_matrix(args) -> int:
    cfg = _base_config(args)
    matrix = _matrix_from_args(args, cfg)
    result = run_matrix(matrix, cfg, workers=args.workers)
    print(f"wrote {len(result.rows)} rows to {matrix.out_dir}")
    if result.failures:
        for cell, msg in result.failures:
            print(f"FAILED {cell}: {msg}", file=sys.stderr)
        return EXIT_SIM
    return EXIT_OK


def _cmd_calibrate(args) -> int:
    cfg = _base_config(args)
    params = CalibrationParams(
        coarse_count=5 if args.smoke else args.coarse,
        fine_count=5 if args.smoke else args.fine,
        seed=cfg.seed,
    )
    out_dir = args.out or "runs/calibration"
    result = run_calibration(cfg, _seed_list(args.seeds), params=params, out_dir=out_dir)
    print("calibrated weights:", " ".join(repr(v) for v in result.best.as_tuple()))
    print(f"report: {os.path.join(out_dir, 'calibration.csv')}")
    return EXIT_OK


def _cmd_ablate(args) -> int:
    cfg = _base_config(args)
    deltas = run_ablation(cfg, args.drop, _seed_list(args.seeds), out_dir=args.out)
    for name, (delta, ci) in deltas.items():
        print(f"{name}: {delta:+.2f}% [{ci.lower:+.2f}, {ci.upper:+.2f}]")
    return EXIT_OK


def _cmd_correct_trace(args) -> int:
    with open(args.infile) as fh:
        trace = TraceLog.from_text(fh.read())
    corrected = correct_trace_energy(trace)
    with open(args.outfile, "w") as fh:
        fh.write(corrected.to_text())
    print(f"wrote {args.outfile}")
    return EXIT_OK


def _cmd_topo(args) -> int:
    from .topology import connected_topology, export_topology, import_topology

    if args.topo_command == "export":
        cfg = _base_config(args)
        field, graph = connected_topology(
            cfg.n_nodes, cfg.area, cfg.radio, cfg.seed,
            redraw_until_connected=cfg.redraw_until_connected,
        )
        with open(args.outfile, "w") as fh:
            fh.write(export_topology(field, graph))
        print(f"wrote {args.outfile}")
        return EXIT_OK
    with open(args.infile) as fh:
        graph = import_topology(fh.read())
    print(f"nodes={graph.n} sink={graph.sink} edges={len(graph.dist)} mean_k={graph.mean_degree():.2f}")
    return EXIT_OK


_COMMANDS = {
    "run": _cmd_run,
    "matrix": _cmd_matrix,
    "calibrate": _cmd_calibrate,
    "ablate": _cmd_ablate,
    "correct-trace": _cmd_correct_trace,
    "topo": _cmd_topo,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ConnectivityError as exc:
        print(f"connectivity error: {exc}", file=sys.stderr)
        return EXIT_CONNECTIVITY
    except TaburplError as exc:
        print(f"simulation error: {exc}", file=sys.stderr)
        return EXIT_SIM


if __name__ == "__main__":
    sys.exit(main())
