"""Discrete-event simulator for sink-rooted low-power lossy networks with a
Tabu Search parent-selection optimizer over a six-metric normalized cost."""

from .analysis import CiEstimate, KpiRecord, bootstrap_ci, compute_kpis
from .calibration import ObjectivePoint, calibrate, dirichlet_sample
from .cost import (
    DEFAULT_WEIGHTS,
    EdgeMetrics,
    NetworkSnapshot,
    NormalizationContext,
    WeightVector,
)
from .engine import (
    PROTOCOLS,
    RadioEnergyParams,
    SimConfig,
    SnapshotAccounting,
    TraceLog,
    correct_trace_energy,
    reoptimize_root,
    run,
)
from .errors import ConnectivityError, TaburplError
from .optimizer import (
    ParentAssignment,
    TabuParams,
    brute_force_optimal,
    tabu_search,
)
from .topology import (
    LinkGraph,
    NodeField,
    RadioModel,
    build_links,
    deploy_uniform,
    hop_counts,
    pearson_correlation,
)

__version__ = "0.1.0"
