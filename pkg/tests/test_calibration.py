import math

import numpy as np
import pytest

from taburpl.calibration import (
    CalibrationParams,
    ObjectiveNorms,
    ObjectivePoint,
    calibrate,
    dirichlet_sample,
    dominates,
    exclusive_contributions,
    fine_tune,
    geometric_mean_score,
    hypervolume_2d,
    nadir_reference,
    pareto_front,
)
from taburpl.cost import DEFAULT_WEIGHTS
from taburpl.errors import InvalidReferenceError


def grid_hypervolume(points, ref, cells=2000):
    """Independent oracle: rasterize the dominated region and sum cell areas."""
    xs = np.linspace(ref.pdr, max(p.pdr for p in points), cells, endpoint=False)
    dx = xs[1] - xs[0]
    area = 0.0
    for x in xs + dx / 2:
        # best (lowest) energy among points with pdr >= x
        es = [p.energy_j for p in points if p.pdr >= x]
        if es:
            area += dx * (ref.energy_j - min(es))
    return area


class TestDirichlet:
    def test_simplex_membership(self):
        for w in dirichlet_sample(count=20, seed=1):
            vals = w.as_tuple()
            assert all(v >= 0 for v in vals)
            assert sum(vals) == pytest.approx(1.0, abs=1e-9)

    def test_marginal_means(self):
        vs = dirichlet_sample(count=10_000, seed=2)
        arr = np.array([w.as_tuple() for w in vs])
        for mean in arr.mean(axis=0):
            assert abs(mean - 1 / 6) < 0.01

    def test_count(self):
        assert len(dirichlet_sample(count=150, seed=0)) == 150

    def test_deterministic(self):
        assert dirichlet_sample(count=5, seed=9) == dirichlet_sample(count=5, seed=9)


class TestParetoFront:
    def test_single_point(self):
        p = ObjectivePoint(0.9, 2.0)
        assert pareto_front([p]) == [p]

    def test_dominated_point_removed(self):
        a, b = ObjectivePoint(0.9, 2.0), ObjectivePoint(0.8, 3.0)
        assert pareto_front([a, b]) == [a]

    def test_incomparable_points_kept(self):
        a, b = ObjectivePoint(0.9, 3.0), ObjectivePoint(0.8, 2.0)
        assert pareto_front([a, b]) == [a, b]

    def test_adding_dominated_point_is_noop(self):
        a, b = ObjectivePoint(0.9, 3.0), ObjectivePoint(0.8, 2.0)
        worse = ObjectivePoint(0.7, 3.5)
        assert pareto_front([a, b, worse]) == pareto_front([a, b])

    def test_dominance_needs_one_strict(self):
        a = ObjectivePoint(0.9, 2.0)
        assert not dominates(a, a)


class TestHypervolume:
    def test_full_unit_square(self):
        front = [ObjectivePoint(1.0, 0.0)]
        ref = ObjectivePoint(0.0, 1.0)
        assert hypervolume_2d(front, ref) == pytest.approx(1.0)

    def test_empty_front(self):
        assert hypervolume_2d([], ObjectivePoint(0.0, 1.0)) == 0.0

    def test_two_point_front_exact_area(self):
        front = [ObjectivePoint(0.5, 0.5), ObjectivePoint(0.75, 0.75)]
        ref = ObjectivePoint(0.0, 1.0)
        value = hypervolume_2d(front, ref)
        # union of the two dominated rectangles: 0.25 + 0.1875 - 0.125 overlap
        assert value == pytest.approx(0.3125)
        assert value == pytest.approx(grid_hypervolume(front, ref), abs=2e-3)

    def test_matches_grid_oracle_on_random_fronts(self):
        rng = np.random.default_rng(7)
        for _ in range(10):
            pts = [ObjectivePoint(float(x), float(e)) for x, e in rng.uniform(0.05, 0.95, (8, 2))]
            ref = ObjectivePoint(0.0, 1.0)
            front = pareto_front(pts)
            assert hypervolume_2d(front, ref) == pytest.approx(
                grid_hypervolume(front, ref), abs=3e-3
            )

    def test_monotone_in_new_points(self):
        ref = ObjectivePoint(0.0, 1.0)
        front = [ObjectivePoint(0.5, 0.5)]
        grown = front + [ObjectivePoint(0.8, 0.8)]
        assert hypervolume_2d(pareto_front(grown), ref) >= hypervolume_2d(front, ref)

    def test_non_dominating_reference_rejected(self):
        with pytest.raises(InvalidReferenceError):
            hypervolume_2d([ObjectivePoint(0.5, 0.5)], ObjectivePoint(0.6, 1.0))


class TestFineTune:
    def test_zero_sigma_copies_base(self):
        for w in fine_tune(DEFAULT_WEIGHTS, sigma=0.0, count=50, seed=1):
            assert w.as_tuple() == pytest.approx(DEFAULT_WEIGHTS.as_tuple())

    def test_candidates_valid(self):
        for w in fine_tune(DEFAULT_WEIGHTS, sigma=0.03, count=50, seed=2):
            vals = w.as_tuple()
            assert all(v >= 0 for v in vals)
            assert sum(vals) == pytest.approx(1.0, abs=1e-9)

    def test_count(self):
        assert len(fine_tune(DEFAULT_WEIGHTS, sigma=0.03, count=50, seed=3)) == 50

    def test_survives_huge_sigma(self):
        out = fine_tune(DEFAULT_WEIGHTS, sigma=50.0, count=20, seed=4)
        assert len(out) == 20


class TestGeometricMean:
    NORMS = ObjectiveNorms(pdr_min=0.0, pdr_max=1.0, inv_e_min=0.0, inv_e_max=1.0)

    def test_perfect(self):
        assert geometric_mean_score(ObjectivePoint(1.0, 1.0), self.NORMS) == pytest.approx(1.0)

    def test_annihilator(self):
        assert geometric_mean_score(ObjectivePoint(1.0, 1e12), self.NORMS) == pytest.approx(0.0, abs=1e-5)

    def test_balanced_half(self):
        assert geometric_mean_score(ObjectivePoint(0.5, 2.0), self.NORMS) == pytest.approx(0.5)


class SyntheticObjective:
    """Deterministic stand-in for the simulator: rewards etx+stability weight."""

    def __init__(self):
        self.calls = 0

    def __call__(self, w):
        self.calls += 1
        quality = 0.5 * w.etx + 0.3 * w.link_stability + 0.2 * w.tx_energy
        pdr = 0.5 + 0.45 * quality
        energy = 10.0 - 6.0 * quality + 0.5 * w.distance
        return ObjectivePoint(pdr=pdr, energy_j=energy)


class TestCalibrate:
    def test_pipeline_counts_and_validity(self):
        objective = SyntheticObjective()
        params = CalibrationParams(coarse_count=30, fine_count=10, seed=5)
        result = calibrate(objective, params)
        # base vector's coarse evaluation is reused, not recomputed
        assert objective.calls == 30 + 10
        assert len(result.rows) == 30 + 11
        assert sum(result.best.as_tuple()) == pytest.approx(1.0, abs=1e-9)
        assert len(result.shortlist) == 10

    def test_best_scores_at_least_base(self):
        objective = SyntheticObjective()
        params = CalibrationParams(coarse_count=20, fine_count=15, seed=6)
        result = calibrate(objective, params)
        fine_rows = [r for r in result.rows if r.stage == "fine"]
        base_row = fine_rows[0]
        best_rows = [r for r in fine_rows if r.weights == result.best]
        assert best_rows[0].score >= base_row.score

    def test_improves_toward_quality_weights(self):
        objective = SyntheticObjective()
        result = calibrate(objective, CalibrationParams(coarse_count=60, fine_count=20, seed=7))
        # the synthetic objective is maximized by weight on etx/stability
        assert result.best.etx + result.best.link_stability + result.best.tx_energy > 0.5


def test_nadir_reference_dominated_by_all():
    pts = [ObjectivePoint(0.5, 4.0), ObjectivePoint(0.7, 6.0)]
    ref = nadir_reference(pts)
    for p in pts:
        assert dominates(p, ref)


def test_exclusive_contributions_zero_for_dominated():
    pts = [ObjectivePoint(0.9, 2.0), ObjectivePoint(0.5, 2.5)]
    ref = nadir_reference(pts)
    contribs = exclusive_contributions(pts, ref)
    assert contribs[1] == 0.0
    assert contribs[0] > 0.0
