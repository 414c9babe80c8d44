"""Point sets, sampling, distance semantics, and coordinate transforms."""

from __future__ import annotations

import math

import numpy as np
import pytest

from matchlab.geometry import (
    Metric,
    PointSet,
    SampleKind,
    Transform,
    cost_matrix,
    euclidean_identity_residual,
    marginal_quantile_transform,
    matching_cost,
    pair_cost,
    point_set_from_json,
    point_set_to_json,
    read_point_set_csv,
    replication_stream,
    sample,
    write_point_set_csv,
)


class TestPointSet:
    def test_validates_shape(self):
        with pytest.raises(ValueError):
            PointSet(np.zeros((3, 3)))
        with pytest.raises(ValueError):
            PointSet(np.zeros(4))
        with pytest.raises(ValueError):
            PointSet(np.zeros((0, 2)))

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            PointSet(np.array([[0.1, np.nan]]))
        with pytest.raises(ValueError):
            PointSet(np.array([[np.inf, 0.2]]))

    def test_torus_domain(self):
        PointSet(np.array([[0.0, 0.999]]), Metric.TORUS)
        with pytest.raises(ValueError):
            PointSet(np.array([[1.0, 0.5]]), Metric.TORUS)
        with pytest.raises(ValueError):
            PointSet(np.array([[-0.1, 0.5]]), Metric.TORUS)

    def test_coords_read_only(self):
        ps = PointSet(np.array([[0.1, 0.2]]))
        with pytest.raises(ValueError):
            ps.coords[0, 0] = 3.0

    def test_len_and_n(self):
        ps = PointSet(np.zeros((5, 2)))
        assert ps.n == 5 and len(ps) == 5


class TestSample:
    def test_deterministic_per_stream(self):
        a = sample(SampleKind.UNIFORM, 4, replication_stream(11, 0))
        b = sample(SampleKind.UNIFORM, 4, replication_stream(11, 0))
        np.testing.assert_array_equal(a.coords, b.coords)

    def test_streams_independent_by_index(self):
        a = sample(SampleKind.UNIFORM, 4, replication_stream(11, 0))
        b = sample(SampleKind.UNIFORM, 4, replication_stream(11, 1))
        assert not np.array_equal(a.coords, b.coords)

    def test_uniform_mean_clt_bound(self):
        # 3 sigma / sqrt(n) with sigma^2 = 1/12 gives the 0.015 half-width.
        ps = sample(SampleKind.UNIFORM, 10_000, replication_stream(3, 0))
        assert abs(float(np.mean(ps.coords[:, 0])) - 0.5) <= 0.015

    def test_normal_variance_clt_bound(self):
        ps = sample(SampleKind.NORMAL, 10_000, replication_stream(3, 1))
        assert abs(float(np.var(ps.coords[:, 0])) - 1.0) <= 0.05

    def test_uniform_in_unit_square(self):
        ps = sample(SampleKind.UNIFORM, 1000, replication_stream(3, 2), Metric.TORUS)
        assert np.all(ps.coords >= 0.0) and np.all(ps.coords < 1.0)

    def test_normal_refuses_torus(self):
        with pytest.raises(ValueError):
            sample(SampleKind.NORMAL, 4, replication_stream(3, 3), Metric.TORUS)

    def test_empty_sample_rejected(self):
        with pytest.raises(ValueError):
            sample(SampleKind.UNIFORM, 0, replication_stream(3, 4))


@pytest.mark.properties
class TestCost:
    def test_plane_example(self):
        assert pair_cost((0.2, 0.3), (0.5, 0.7), Metric.PLANE) == pytest.approx(
            0.25, abs=1e-15
        )

    def test_torus_wraps(self):
        # 0.2 wrap distance per axis; 2 * 0.04.
        assert pair_cost((0.1, 0.1), (0.9, 0.9), Metric.TORUS) == pytest.approx(
            0.08, abs=1e-15
        )

    def test_identical_points(self):
        for metric in Metric:
            assert pair_cost((0.3, 0.3), (0.3, 0.3), metric) == 0.0

    def test_symmetry(self, rng):
        for _ in range(50):
            a, b = rng.random(2), rng.random(2)
            for metric in Metric:
                assert pair_cost(a, b, metric) == pair_cost(b, a, metric)

    def test_torus_never_exceeds_plane(self, rng):
        for _ in range(200):
            a, b = rng.random(2), rng.random(2)
            pt, pp = pair_cost(a, b, Metric.TORUS), pair_cost(a, b, Metric.PLANE)
            assert pt <= pp + 1e-15
            if np.all(np.abs(a - b) <= 0.5):
                assert pt == pp

    def test_torus_cost_bounded(self, rng):
        # 0.25 per axis at the antipode.
        for _ in range(200):
            assert pair_cost(rng.random(2), rng.random(2), Metric.TORUS) <= 0.5

    def test_cost_matrix_matches_pair_cost(self, rng):
        lx, rx = rng.random((4, 2)), rng.random((5, 2))
        for metric in Metric:
            C = cost_matrix(lx, rx, metric)
            assert C.shape == (4, 5)
            for i in range(4):
                for j in range(5):
                    assert C[i, j] == pytest.approx(
                        pair_cost(lx[i], rx[j], metric), abs=1e-12
                    )

    def test_cost_matrix_metric_mismatch(self, rng):
        a = PointSet(rng.random((3, 2)), Metric.PLANE)
        b = PointSet(rng.random((3, 2)), Metric.TORUS)
        with pytest.raises(ValueError):
            cost_matrix(a, b)

    def test_matching_cost_validates_permutation(self, rng):
        lx, rx = rng.random((3, 2)), rng.random((3, 2))
        with pytest.raises(ValueError):
            matching_cost(lx, rx, np.array([0, 0, 2]), Metric.PLANE)
        with pytest.raises(ValueError):
            matching_cost(lx, rx, np.array([0, 1]), Metric.PLANE)


@pytest.mark.properties
class TestFourPointIdentity:
    def test_unit_square_example(self):
        # LHS |(1,0)-(1,2)|^2 = 4; RHS 1+2+2+1-1-1 = 4.
        assert euclidean_identity_residual((0, 0), (1, 0), (0, 1), (1, 1)) == 0.0

    def test_degenerate_quadruple(self):
        p = np.array([0.5, 0.5])
        assert euclidean_identity_residual(p, p, p, p) == 0.0

    def test_random_quadruples(self, rng):
        worst = max(
            abs(euclidean_identity_residual(*rng.random((4, 2)))) for _ in range(1000)
        )
        assert worst < 1e-12

    def test_large_magnitude_contract(self, rng):
        worst = max(
            abs(euclidean_identity_residual(*rng.uniform(-1e3, 1e3, (4, 2))))
            for _ in range(300)
        )
        assert worst <= 1e-10


@pytest.mark.properties
class TestQuantileTransform:
    def test_origin_maps_to_center(self):
        ps = PointSet(np.array([[0.0, 0.0]]))
        out = marginal_quantile_transform(ps, Transform.NORMAL_TO_UNIFORM)
        np.testing.assert_allclose(out.coords, [[0.5, 0.5]], atol=1e-15)

    def test_round_trip(self, rng):
        ps = PointSet(rng.random((50, 2)) * 0.98 + 0.01)
        back = marginal_quantile_transform(
            marginal_quantile_transform(ps, Transform.UNIFORM_TO_NORMAL),
            Transform.NORMAL_TO_UNIFORM,
        )
        np.testing.assert_allclose(back.coords, ps.coords, atol=1e-10)

    def test_preserves_ranks(self, rng):
        ps = PointSet(rng.standard_normal((64, 2)))
        out = marginal_quantile_transform(ps, Transform.NORMAL_TO_UNIFORM)
        for axis in range(2):
            np.testing.assert_array_equal(
                np.argsort(ps.coords[:, axis]), np.argsort(out.coords[:, axis])
            )

    def test_rejects_boundary_coordinates(self):
        with pytest.raises(ValueError):
            marginal_quantile_transform(
                PointSet(np.array([[0.0, 0.5]])), Transform.UNIFORM_TO_NORMAL
            )
        with pytest.raises(ValueError):
            marginal_quantile_transform(
                PointSet(np.array([[0.5, 1.0]])), Transform.UNIFORM_TO_NORMAL
            )

    def test_normal_to_uniform_lands_inside_unit_square(self, rng):
        # Phi saturates to float 1.0 beyond ~8.3 sigma; standard-normal
        # magnitudes keep the image strictly interior.
        ps = PointSet(np.clip(rng.standard_normal((100, 2)), -6, 6))
        out = marginal_quantile_transform(ps, Transform.NORMAL_TO_UNIFORM)
        assert np.all(out.coords > 0.0) and np.all(out.coords < 1.0)


class TestSerialization:
    def test_csv_round_trip_is_lossless(self, rng, tmp_path):
        coords = rng.standard_normal((20, 2)) * np.array([1e-12, 1e6])
        ps = PointSet(coords)
        path = tmp_path / "points.csv"
        write_point_set_csv(ps, path)
        back = read_point_set_csv(path)
        np.testing.assert_array_equal(back.coords, ps.coords)

    def test_csv_header_and_indices(self, rng, tmp_path):
        path = tmp_path / "points.csv"
        write_point_set_csv(PointSet(rng.random((3, 2))), path)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "idx,x,y"
        assert [ln.split(",")[0] for ln in lines[1:]] == ["0", "1", "2"]

    def test_csv_rejects_bad_header(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("x,y\n0.1,0.2\n")
        with pytest.raises(ValueError):
            read_point_set_csv(path)

    def test_json_round_trip(self, rng):
        ps = PointSet(rng.random((7, 2)), Metric.TORUS)
        back = point_set_from_json(point_set_to_json(ps))
        np.testing.assert_array_equal(back.coords, ps.coords)
        assert back.metric is Metric.TORUS
