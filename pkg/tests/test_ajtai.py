"""Median bits, hierarchical labels, and the bit-word matching."""

from __future__ import annotations

import json

import numpy as np
import pytest

from matchlab.ajtai import (
    BitLabeling,
    ajtai_result_to_json,
    build_labels,
    label_expectation,
    match_ajtai,
    median_bits,
    read_labels_csv,
    write_labels_csv,
)
from matchlab.assignment import solve_exact
from matchlab.geometry import (
    Metric,
    PointSet,
    Transform,
    marginal_quantile_transform,
    replication_stream,
)


@pytest.mark.properties
class TestMedianBits:
    def test_two_largest_get_ones(self):
        assert median_bits(np.array([3.0, 1.0, 4.0, 2.0])).tolist() == [1, 0, 1, 0]

    def test_minimal_pair(self):
        assert median_bits(np.array([1.0, 2.0])).tolist() == [0, 1]

    def test_ties_resolved_by_index(self):
        assert median_bits(np.array([5.0, 5.0, 5.0, 5.0])).tolist() == [0, 0, 1, 1]

    def test_odd_length_rejected(self):
        with pytest.raises(ValueError):
            median_bits(np.array([1.0, 2.0, 3.0]))
        with pytest.raises(ValueError):
            median_bits(np.array([]))

    def test_definition_properties(self, rng):
        # Exactly half ones, and no 0-marked value exceeds a 1-marked one.
        for _ in range(200):
            s = int(rng.integers(1, 20))
            values = rng.random(2 * s)
            bits = median_bits(values)
            assert int(bits.sum()) == s
            assert values[bits == 0].max() <= values[bits == 1].min() + 1e-15


@pytest.mark.properties
class TestBuildLabels:
    def test_hand_traced_square(self):
        pts = np.array([[0.1, 0.1], [0.9, 0.1], [0.1, 0.9], [0.9, 0.9]])
        assert build_labels(pts).words() == ["00", "10", "01", "11"]

    def test_every_word_occurs_once(self, rng):
        for k in (1, 2, 3):
            labeling = build_labels(rng.random((4**k, 2)))
            words = labeling.words()
            assert len(set(words)) == 4**k
            assert all(len(w) == 2 * k for w in words)

    def test_prefix_counts(self, rng):
        # Every realized prefix of length p is shared by exactly n / 2^p points.
        labeling = build_labels(rng.random((64, 2)))
        for p in range(1, 7):
            prefixes = ["".join(map(str, row[:p])) for row in labeling.labels]
            counts = {pre: prefixes.count(pre) for pre in set(prefixes)}
            assert set(counts.values()) == {64 // 2**p}

    def test_explicit_level_checked(self, rng):
        pts = rng.random((16, 2))
        assert build_labels(pts, 2).k == 2
        with pytest.raises(ValueError):
            build_labels(pts, 3)

    def test_requires_power_of_four(self, rng):
        for n in (2, 8, 12, 32):
            with pytest.raises(ValueError):
                build_labels(rng.random((n, 2)))

    def test_invariant_under_monotone_transform(self, rng):
        ps = PointSet(rng.random((64, 2)) * 0.98 + 0.01)
        transformed = marginal_quantile_transform(ps, Transform.UNIFORM_TO_NORMAL)
        np.testing.assert_array_equal(
            build_labels(ps).labels, build_labels(transformed).labels
        )


class TestMatchAjtai:
    def test_identical_sets_match_identically(self, rng):
        coords = rng.random((16, 2))
        res = match_ajtai(coords, coords)
        assert res.total_cost == 0.0
        assert res.matching.permutation.tolist() == list(range(16))

    def test_never_beats_exact(self, rng):
        for _ in range(25):
            left, right = rng.random((16, 2)), rng.random((16, 2))
            heur = match_ajtai(left, right)
            exact = solve_exact(left, right, Metric.PLANE)
            assert heur.total_cost >= exact.total_cost - 1e-12

    def test_matched_pairs_share_labels(self, rng):
        left, right = rng.random((64, 2)), rng.random((64, 2))
        res = match_ajtai(left, right)
        lw = build_labels(left).words()
        rw = build_labels(right).words()
        for i, j in enumerate(res.matching.permutation):
            assert lw[i] == rw[j]

    def test_size_mismatch(self, rng):
        with pytest.raises(ValueError):
            match_ajtai(rng.random((16, 2)), rng.random((4, 2)))

    def test_rejects_toroidal_point_sets(self, rng):
        ps = PointSet(rng.random((16, 2)), Metric.TORUS)
        with pytest.raises(ValueError):
            match_ajtai(ps, ps)

    def test_explicit_level_checked(self, rng):
        left, right = rng.random((16, 2)), rng.random((16, 2))
        match_ajtai(left, right, 2)
        with pytest.raises(ValueError):
            match_ajtai(left, right, 1)

    def test_permutation_only_depends_on_ranks(self):
        # A normal sample and its uniform quantile image produce the same
        # pairing, which is what couples the two benchmark columns.
        rng = np.random.default_rng(7)
        left = PointSet(rng.standard_normal((64, 2)))
        right = PointSet(rng.standard_normal((64, 2)))
        res_normal = match_ajtai(left, right)
        res_uniform = match_ajtai(
            marginal_quantile_transform(left, Transform.NORMAL_TO_UNIFORM),
            marginal_quantile_transform(right, Transform.NORMAL_TO_UNIFORM),
        )
        np.testing.assert_array_equal(
            res_normal.matching.permutation, res_uniform.matching.permutation
        )

    def test_frozen_cost_statistics(self):
        # Regression pins for this construction on seeded uniform instances.
        expected = {1: 0.756294, 2: 1.349792, 3: 1.898024}
        for k, target in expected.items():
            n = 4**k
            costs = []
            for rep in range(400):
                rng = replication_stream(424242, rep)
                costs.append(
                    match_ajtai(rng.random((n, 2)), rng.random((n, 2))).total_cost
                )
            assert float(np.mean(costs)) == pytest.approx(target, abs=1e-6)

    @pytest.mark.xfail(
        strict=True,
        reason="published mean for this protocol sits far below any matching's "
        "attainable cost at these sizes; see the acceptance analysis",
    )
    def test_published_k3_mean(self):
        costs = []
        for rep in range(2000):
            rng = replication_stream(31337, rep)
            costs.append(
                match_ajtai(rng.random((64, 2)), rng.random((64, 2))).total_cost
            )
        assert abs(float(np.mean(costs)) - 1.4287) <= 0.03


class TestLabelExpectation:
    def test_k1_example(self):
        assert label_expectation(np.array([1, 0]), 1) == (pytest.approx(1 / 3), 0.0)

    def test_all_zero_word(self):
        assert label_expectation(np.zeros(4, dtype=int), 2) == (0.0, 0.0)

    def test_validates_word(self):
        with pytest.raises(ValueError):
            label_expectation(np.array([1, 0, 1]), 2)
        with pytest.raises(ValueError):
            label_expectation(np.array([1, 2]), 1)

    @pytest.mark.xfail(
        strict=True,
        reason="the nominal cell coordinate is not the conditional mean of the "
        "cell's points; see the acceptance analysis",
    )
    def test_nominal_coordinate_matches_cell_mean(self):
        # Monte Carlo mean x over points whose x-round bits are all zero.
        total, count, per_rep = 0.0, 0, []
        for rep in range(500):
            rng = replication_stream(5150, rep)
            pts = rng.random((16, 2))
            labels = build_labels(pts).labels
            mask = (labels[:, 0] == 0) & (labels[:, 2] == 0)
            total += pts[mask, 0].sum()
            count += int(mask.sum())
            per_rep.append(pts[mask, 0].mean())
        mc_mean = total / count
        se = float(np.std(per_rep, ddof=1) / np.sqrt(len(per_rep)))
        assert abs(mc_mean - 0.0) <= 3 * se


class TestSerialization:
    def test_result_json_carries_algorithm_tag(self, rng):
        res = match_ajtai(rng.random((16, 2)), rng.random((16, 2)))
        obj = json.loads(ajtai_result_to_json(res))
        assert obj["algorithm"] == "ajtai"
        assert obj["n"] == 16
        assert obj["optimal"] is False

    def test_labels_csv_round_trip(self, rng, tmp_path):
        labeling = build_labels(rng.random((16, 2)))
        path = tmp_path / "labels.csv"
        write_labels_csv(labeling, path)
        back = read_labels_csv(path)
        np.testing.assert_array_equal(back.labels, labeling.labels)
        assert back.k == labeling.k

    def test_labeling_shape_validated(self):
        with pytest.raises(ValueError):
            BitLabeling(np.zeros((4, 3), dtype=np.uint8), 2)
