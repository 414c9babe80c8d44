"""Exact solver, oracle, price certificates, and the pair-exchange polish."""

from __future__ import annotations

import itertools

import numpy as np
import pytest

from matchlab.ajtai import match_ajtai
from matchlab.assignment import (
    Matching,
    brute_force,
    improve_two_swap,
    matching_from_json,
    matching_to_json,
    solve_exact,
    solve_exact_dense,
    verify_duals,
)
from matchlab.geometry import (
    Metric,
    PointSet,
    SampleKind,
    cost_matrix,
    matching_cost,
    replication_stream,
    sample,
)


def _instance(rng, n, metric=Metric.PLANE):
    left = PointSet(rng.random((n, 2)), metric)
    right = PointSet(rng.random((n, 2)), metric)
    return left, right


class TestSolveExact:
    def test_single_pair(self):
        m = solve_exact(np.array([[0.2, 0.3]]), np.array([[0.5, 0.7]]), Metric.PLANE)
        assert m.total_cost == pytest.approx(0.25, abs=1e-15)
        assert m.permutation.tolist() == [0] and m.optimal

    def test_identical_sets_cost_zero(self, rng):
        coords = rng.random((12, 2))
        m = solve_exact(coords, coords, Metric.PLANE)
        assert m.total_cost <= 1e-12

    def test_matches_oracle_small(self, rng):
        for metric in Metric:
            for _ in range(40):
                n = int(rng.integers(2, 8))
                left, right = _instance(rng, n, metric)
                exact = solve_exact(left, right)
                oracle = brute_force(left, right)
                assert abs(exact.total_cost - oracle.total_cost) <= 1e-12

    def test_total_cost_consistent_with_permutation(self, rng):
        left, right = _instance(rng, 30, Metric.TORUS)
        m = solve_exact(left, right)
        recomputed = matching_cost(left, right, m.permutation)
        assert m.total_cost == pytest.approx(recomputed, rel=1e-9)

    def test_size_mismatch(self, rng):
        with pytest.raises(ValueError):
            solve_exact(rng.random((3, 2)), rng.random((4, 2)), Metric.PLANE)

    def test_metric_mismatch(self, rng):
        a = PointSet(rng.random((3, 2)), Metric.PLANE)
        b = PointSet(rng.random((3, 2)), Metric.TORUS)
        with pytest.raises(ValueError):
            solve_exact(a, b)

    def test_permuting_right_preserves_cost(self, rng):
        left, right = _instance(rng, 20)
        base = solve_exact(left, right).total_cost
        shuffled = PointSet(right.coords[rng.permutation(20)], Metric.PLANE)
        assert solve_exact(left, shuffled).total_cost == pytest.approx(
            base, abs=1e-12
        )

    def test_scale_covariance(self, rng):
        left, right = _instance(rng, 25)
        base = solve_exact(left, right).total_cost
        s = 3.7
        scaled = solve_exact(
            PointSet(left.coords * s), PointSet(right.coords * s)
        ).total_cost
        assert scaled == pytest.approx(s * s * base, rel=1e-9)

    def test_agrees_with_dense_matrix_form(self, rng):
        left, right = _instance(rng, 17, Metric.TORUS)
        by_points = solve_exact(left, right)
        by_matrix = solve_exact_dense(cost_matrix(left, right))
        assert by_points.total_cost == pytest.approx(by_matrix.total_cost, abs=1e-12)


class TestDuals:
    def test_certificate_on_solver_output(self, rng):
        for n in (5, 32, 128):
            left, right = _instance(rng, n, Metric.TORUS)
            m = solve_exact(left, right)
            report = verify_duals(left, right, m)
            assert report["feasible"]
            assert report["max_violation"] <= 1e-9
            assert report["slack_on_matched"] <= 1e-9

    def test_duals_normalized_to_min_zero(self, rng):
        left, right = _instance(rng, 24)
        m = solve_exact(left, right)
        assert min(m.duals_left.min(), m.duals_right.min()) == pytest.approx(
            0.0, abs=1e-12
        )

    def test_matched_price_gaps_sum_to_cost(self, rng):
        left, right = _instance(rng, 40)
        m = solve_exact(left, right)
        gaps = m.duals_right[m.permutation] - m.duals_left
        assert float(gaps.sum()) == pytest.approx(m.total_cost, rel=1e-6)

    def test_zero_duals_are_feasible(self, rng):
        left, right = _instance(rng, 6)
        m = solve_exact(left, right)
        zeroed = Matching(
            m.permutation, m.total_cost, np.zeros(6), np.zeros(6), False
        )
        report = verify_duals(left, right, zeroed)
        assert report["feasible"]
        C = cost_matrix(left, right)
        matched_max = float(C[np.arange(6), m.permutation].max())
        assert report["slack_on_matched"] == pytest.approx(matched_max, abs=1e-12)

    def test_inflated_dual_detected(self, rng):
        left, right = _instance(rng, 6)
        m = solve_exact(left, right)
        bumped = Matching(
            m.permutation,
            m.total_cost,
            m.duals_left,
            m.duals_right + 1.0,
            False,
        )
        assert not verify_duals(left, right, bumped)["feasible"]

    def test_missing_duals_rejected(self, rng):
        left, right = _instance(rng, 4)
        m = brute_force(left, right)
        with pytest.raises(ValueError):
            verify_duals(left, right, m)


class TestBruteForce:
    def test_single_point_agrees_with_solver(self):
        left = np.array([[0.2, 0.3]])
        right = np.array([[0.5, 0.7]])
        assert brute_force(left, right, Metric.PLANE).total_cost == solve_exact(
            left, right, Metric.PLANE
        ).total_cost

    def test_perfect_overlap_via_swap(self):
        left = np.array([[0.0, 0.0], [1.0, 1.0]])
        right = np.array([[1.0, 1.0], [0.0, 0.0]])
        m = brute_force(left, right, Metric.PLANE)
        assert m.total_cost == 0.0
        assert m.permutation.tolist() == [1, 0]

    def test_enumeration_is_its_own_certificate(self, rng):
        left, right = _instance(rng, 3)
        m = brute_force(left, right)
        C = cost_matrix(left, right)
        for perm in itertools.permutations(range(3)):
            assert m.total_cost <= C[np.arange(3), list(perm)].sum() + 1e-12

    def test_refuses_large_instances(self, rng):
        left, right = _instance(rng, 10)
        with pytest.raises(ValueError):
            brute_force(left, right)

    def test_carries_no_duals_but_is_optimal(self, rng):
        left, right = _instance(rng, 4)
        m = brute_force(left, right)
        assert m.duals_left is None and m.duals_right is None and m.optimal


class TestImproveTwoSwap:
    def test_optimal_input_unchanged_cost(self, rng):
        left, right = _instance(rng, 16)
        m = solve_exact(left, right)
        improved = improve_two_swap(left, right, m)
        assert improved.total_cost == pytest.approx(m.total_cost, abs=1e-12)

    def test_single_swap_reaches_optimum(self):
        left = np.array([[0.0, 0.0], [1.0, 1.0]])
        right = np.array([[1.0, 1.0], [0.0, 0.0]])
        start = Matching(np.array([0, 1]), 4.0, None, None, False)
        out = improve_two_swap(left, right, start, Metric.PLANE)
        assert out.total_cost == 0.0
        assert out.permutation.tolist() == [1, 0]

    def test_never_increases_cost(self, rng):
        for _ in range(20):
            left, right = _instance(rng, 24, Metric.TORUS)
            perm = rng.permutation(24)
            start = Matching(
                perm, matching_cost(left, right, perm), None, None, False
            )
            out = improve_two_swap(left, right, start)
            assert out.total_cost <= start.total_cost + 1e-12

    def test_result_is_two_swap_stable(self, rng):
        left, right = _instance(rng, 12)
        perm = rng.permutation(12)
        start = Matching(perm, matching_cost(left, right, perm), None, None, False)
        out = improve_two_swap(left, right, start)
        C = cost_matrix(left, right)
        p = out.permutation
        for i in range(12):
            for j in range(i + 1, 12):
                current = C[i, p[i]] + C[j, p[j]]
                swapped = C[i, p[j]] + C[j, p[i]]
                assert swapped >= current - 1e-9

    def test_lands_between_heuristic_and_exact(self):
        # Triplets heuristic >= polished >= exact per instance, and the means
        # must be strictly ordered across a batch of instances.
        rng = np.random.default_rng(99)
        ajtai_costs, improved_costs, exact_costs = [], [], []
        for _ in range(100):
            left = PointSet(rng.random((64, 2)))
            right = PointSet(rng.random((64, 2)))
            heur = match_ajtai(left, right)
            improved = improve_two_swap(left, right, heur.matching)
            exact = solve_exact(left, right)
            assert heur.total_cost >= improved.total_cost - 1e-12
            assert improved.total_cost >= exact.total_cost - 1e-12
            ajtai_costs.append(heur.total_cost)
            improved_costs.append(improved.total_cost)
            exact_costs.append(exact.total_cost)
        assert np.mean(exact_costs) < np.mean(improved_costs) < np.mean(ajtai_costs)


class TestSerialization:
    def test_round_trip_with_duals(self, rng):
        left, right = _instance(rng, 8, Metric.TORUS)
        m = solve_exact(left, right)
        text = matching_to_json(m, Metric.TORUS)
        back, metric = matching_from_json(text)
        assert metric is Metric.TORUS
        assert back.permutation.tolist() == m.permutation.tolist()
        assert back.total_cost == pytest.approx(m.total_cost, rel=1e-11)
        np.testing.assert_allclose(back.duals_left, m.duals_left, rtol=1e-11, atol=1e-12)
        assert back.optimal

    def test_oracle_serializes_empty_duals(self, rng):
        left, right = _instance(rng, 4)
        m = brute_force(left, right)
        text = matching_to_json(m, Metric.PLANE)
        assert '"duals_a": []' in text and '"duals_b": []' in text
        back, _ = matching_from_json(text)
        assert back.duals_left is None and back.duals_right is None

    def test_declared_n_checked(self):
        with pytest.raises(ValueError):
            matching_from_json(
                '{"n": 3, "metric": "plane", "total_cost": 0.0,'
                ' "permutation": [0, 1], "duals_a": [], "duals_b": [], "optimal": true}'
            )
