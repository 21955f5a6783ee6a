"""Two-stage weight calibration.

Stage 1 samples weight vectors uniformly on the simplex (Dirichlet alpha=1),
evaluates each on the target scenario, and ranks them by exclusive
hypervolume contribution to the (PDR up, energy down) Pareto front. Stage 2
perturbs the best vector with Gaussian noise, re-normalizes, and picks the
candidate with the highest geometric mean of normalized PDR and normalized
inverse energy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .cost import WeightVector
from .errors import InvalidReferenceError, TaburplError


@dataclass(frozen=True)
class ObjectivePoint:
    """Scenario outcome for one weight vector: PDR up, energy down."""

    pdr: float
    energy_j: float
    extras: tuple[float, ...] = ()

    def __post_init__(self):
        if not (math.isfinite(self.pdr) and math.isfinite(self.energy_j)):
            raise TaburplError("objective values must be finite")
        if self.pdr < 0 or self.energy_j < 0:
            raise TaburplError("objective values must be non-negative")


def dominates(a: ObjectivePoint, b: ObjectivePoint) -> bool:
    """Weak dominance with at least one strict improvement."""
    ge = a.pdr >= b.pdr and a.energy_j <= b.energy_j
    strict = a.pdr > b.pdr or a.energy_j < b.energy_j
    return ge and strict


def pareto_front(points: Sequence[ObjectivePoint]) -> list[ObjectivePoint]:
    """Non-dominated subset, input order preserved."""
    if not points:
        raise TaburplError("empty point set")
    return [p for p in points if not any(dominates(q, p) for q in points)]


def hypervolume_2d(front: Iterable[ObjectivePoint], ref: ObjectivePoint) -> float:
    """Area dominated by the front relative to ref (exact 2-D sweep).

    Sorts by PDR descending and sums the disjoint strips each point adds
    below the best energy seen so far.
    """
    pts = sorted(front, key=lambda p: (-p.pdr, p.energy_j))
    for p in pts:
        if not dominates(p, ref):
            raise InvalidReferenceError(f"front point {p} does not dominate reference {ref}")
    volume = 0.0
    best_energy = ref.energy_j
    for p in pts:
        if p.energy_j < best_energy:
            volume += (p.pdr - ref.pdr) * (best_energy - p.energy_j)
            best_energy = p.energy_j
    return volume


def exclusive_contributions(
    points: Sequence[ObjectivePoint], ref: ObjectivePoint
) -> list[float]:
    """Per-point exclusive hypervolume contribution (0 for dominated points)."""
    front = pareto_front(points)
    total = hypervolume_2d(front, ref)
    contribs = []
    for i, p in enumerate(points):
        if p not in front:
            contribs.append(0.0)
            continue
        rest = [q for j, q in enumerate(points) if j != i]
        if rest:
            remaining = hypervolume_2d(pareto_front(rest), ref)
        else:
            remaining = 0.0
        contribs.append(total - remaining)
    return contribs


def nadir_reference(points: Sequence[ObjectivePoint], scale: float = 1.1) -> ObjectivePoint:
    """Reference just outside the worst corner of the evaluated set."""
    worst_pdr = min(p.pdr for p in points)
    worst_energy = max(p.energy_j for p in points)
    return ObjectivePoint(pdr=worst_pdr / scale, energy_j=worst_energy * scale)


def dirichlet_sample(
    count: int = 150, seed: int = 0, dim: int = 6, alpha: float = 1.0
) -> list[WeightVector]:
    """i.i.d. uniform samples on the (dim-1)-simplex; returns weight vectors."""
    if dim < 2:
        raise TaburplError("need at least two dimensions")
    if count < 1:
        raise TaburplError("need at least one sample")
    rng = np.random.default_rng(seed)
    rows = rng.dirichlet(np.full(dim, alpha), size=count)
    return [WeightVector.from_iterable(row) for row in rows]


def fine_tune(
    base: WeightVector, sigma: float = 0.03, count: int = 50, seed: int = 0
) -> list[WeightVector]:
    """Gaussian-perturbed copies of base, clamped to >= 0 and re-normalized."""
    rng = np.random.default_rng(seed)
    base_arr = np.asarray(base.as_tuple())
    out = []
    while len(out) < count:
        cand = np.maximum(base_arr + rng.normal(0.0, sigma, size=base_arr.size), 0.0)
        total = cand.sum()
        if total <= 0.0:
            continue  # pathological all-zero draw: resample
        out.append(WeightVector.from_iterable(cand / total))
    return out


@dataclass(frozen=True)
class ObjectiveNorms:
    """Min-max bounds of PDR and inverse energy over an evaluated set."""

    pdr_min: float
    pdr_max: float
    inv_e_min: float
    inv_e_max: float

    @classmethod
    def from_points(cls, points: Sequence[ObjectivePoint]) -> "ObjectiveNorms":
        pdrs = [p.pdr for p in points]
        inv_es = [1.0 / p.energy_j if p.energy_j > 0 else 0.0 for p in points]
        return cls(min(pdrs), max(pdrs), min(inv_es), max(inv_es))

    def normalized(self, p: ObjectivePoint) -> tuple[float, float]:
        def scale(v, lo, hi):
            return 0.0 if hi == lo else max(0.0, min(1.0, (v - lo) / (hi - lo)))

        inv_e = 1.0 / p.energy_j if p.energy_j > 0 else 0.0
        return scale(p.pdr, self.pdr_min, self.pdr_max), scale(inv_e, self.inv_e_min, self.inv_e_max)


def geometric_mean_score(p: ObjectivePoint, norms: ObjectiveNorms) -> float:
    """sqrt(normalized PDR * normalized inverse energy)."""
    npdr, ninv = norms.normalized(p)
    return math.sqrt(npdr * ninv)


@dataclass
class CalibrationRow:
    candidate_id: int
    weights: WeightVector
    pdr: float
    energy_j: float
    score: float
    stage: str


@dataclass
class CalibrationParams:
    coarse_count: int = 150
    fine_count: int = 50
    sigma: float = 0.03
    keep: int = 10
    seed: int = 0
    ref_scale: float = 1.1


@dataclass
class CalibrationResult:
    best: WeightVector
    rows: list[CalibrationRow] = field(default_factory=list)
    shortlist: list[WeightVector] = field(default_factory=list)


def calibrate(
    evaluate: Callable[[WeightVector], ObjectivePoint],
    params: CalibrationParams | None = None,
) -> CalibrationResult:
    """Run both calibration stages against an objective evaluator.

    The evaluator maps a weight vector to the scenario's (PDR, energy)
    outcome; the harness wires it to full simulation runs.
    """
    params = params or CalibrationParams()
    rows: list[CalibrationRow] = []

    coarse = dirichlet_sample(count=params.coarse_count, seed=params.seed)
    coarse_points = [evaluate(v) for v in coarse]
    ref = nadir_reference(coarse_points, scale=params.ref_scale)
    contribs = exclusive_contributions(coarse_points, ref)

    def own_volume(p: ObjectivePoint) -> float:
        return (p.pdr - ref.pdr) * (ref.energy_j - p.energy_j)

    order = sorted(
        range(len(coarse)),
        key=lambda i: (-contribs[i], -own_volume(coarse_points[i]), i),
    )
    shortlist = [coarse[i] for i in order[: params.keep]]
    for i, (v, p) in enumerate(zip(coarse, coarse_points)):
        rows.append(CalibrationRow(i, v, p.pdr, p.energy_j, contribs[i], "coarse"))

    base = coarse[order[0]]
    fine = [base] + fine_tune(base, sigma=params.sigma, count=params.fine_count, seed=params.seed + 1)
    fine_points = [coarse_points[order[0]]] + [evaluate(v) for v in fine[1:]]
    norms = ObjectiveNorms.from_points(fine_points)
    scores = [geometric_mean_score(p, norms) for p in fine_points]
    for j, (v, p, s) in enumerate(zip(fine, fine_points, scores)):
        rows.append(CalibrationRow(len(coarse) + j, v, p.pdr, p.energy_j, s, "fine"))
    best_j = max(range(len(fine)), key=lambda j: (scores[j], -j))
    return CalibrationResult(best=fine[best_j], rows=rows, shortlist=shortlist)
