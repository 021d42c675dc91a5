"""Tests for DTW distances and fault-graph construction.

The DTW oracle enumerates every monotone warping path explicitly, so the
DP implementation is checked against first principles rather than against
itself.
"""

import itertools
import json

import numpy as np
import pytest

from vibgraph import graph as gr
from vibgraph.segmentation import Segment


def enumerate_dtw(a, b):
    """Minimum path cost over all monotone warping paths, by brute force.

    Paths start at (0, 0), end at (n-1, m-1), and each step advances i, j,
    or both by one. Cost of visiting (i, j) is |a_i - b_j|.
    """
    a, b = np.asarray(a, float), np.asarray(b, float)
    n, m = a.size, b.size
    best = [np.inf]

    def walk(i, j, acc):
        acc += abs(a[i] - b[j])
        if acc >= best[0]:
            return
        if i == n - 1 and j == m - 1:
            best[0] = acc
            return
        if i + 1 < n:
            walk(i + 1, j, acc)
        if j + 1 < m:
            walk(i, j + 1, acc)
        if i + 1 < n and j + 1 < m:
            walk(i + 1, j + 1, acc)

    walk(0, 0, 0.0)
    return best[0]


def segs(arrays):
    return [Segment(values=np.asarray(v, float), start_index=0, label=0)
            for v in arrays]


class TestDtwDistance:
    def test_identical_sequences(self):
        assert gr.dtw_distance([1.0, 2.0, 3.0], [1.0, 2.0, 3.0]) == 0.0

    def test_single_elements(self):
        assert gr.dtw_distance([2.0], [5.0]) == 3.0

    def test_time_shift_absorbed(self):
        # same shape, shifted by one: warping aligns it for free
        a = [0.0, 1.0, 2.0, 1.0, 0.0]
        b = [0.0, 0.0, 1.0, 2.0, 1.0]
        assert gr.dtw_distance(a, b) <= 1.0

    def test_symmetry(self):
        rng = np.random.default_rng(0)
        for _ in range(5):
            a, b = rng.normal(size=7), rng.normal(size=5)
            assert gr.dtw_distance(a, b) == pytest.approx(gr.dtw_distance(b, a))

    def test_against_path_enumeration_random(self):
        rng = np.random.default_rng(1)
        for _ in range(30):
            a = rng.integers(0, 5, size=rng.integers(1, 7)).astype(float)
            b = rng.integers(0, 5, size=rng.integers(1, 7)).astype(float)
            assert gr.dtw_distance(a, b) == pytest.approx(enumerate_dtw(a, b))

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            gr.dtw_distance([], [1.0])


class TestBatchedDtw:
    def test_matches_scalar_implementation(self):
        rng = np.random.default_rng(2)
        A = rng.normal(size=(20, 9))
        B = rng.normal(size=(20, 9))
        batched = gr._batched_dtw_equal_length(A, B)
        for k in range(20):
            assert batched[k] == pytest.approx(gr.dtw_distance(A[k], B[k]))


class TestSimilarity:
    def test_zero_distance_is_one(self):
        assert gr.similarity(0.0) == 1.0

    def test_decreasing(self):
        assert gr.similarity(1.0) == 0.5
        assert gr.similarity(3.0) == 0.25

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            gr.similarity(-0.1)


class TestPairwiseDistances:
    def test_condensed_indexing_round_trip(self):
        arrays = [np.arange(4.0) + k for k in range(5)]
        pd = gr.pairwise_distances(segs(arrays))
        full = pd.full_matrix()
        for i, j in itertools.combinations(range(5), 2):
            assert pd.get(i, j) == full[i, j] == full[j, i]
            assert pd.get(j, i) == pd.get(i, j)

    def test_values_match_direct_dtw(self):
        rng = np.random.default_rng(3)
        arrays = [rng.normal(size=6) for _ in range(6)]
        pd = gr.pairwise_distances(segs(arrays))
        for i, j in itertools.combinations(range(6), 2):
            assert pd.get(i, j) == pytest.approx(gr.dtw_distance(arrays[i], arrays[j]))

    def test_mixed_lengths_fall_back_to_scalar(self):
        arrays = [np.arange(4.0), np.arange(6.0), np.arange(5.0)]
        pd = gr.pairwise_distances(segs(arrays))
        assert pd.get(0, 1) == pytest.approx(gr.dtw_distance(arrays[0], arrays[1]))

    def test_budget_enforced(self):
        arrays = [np.arange(4.0)] * 10   # 45 pairs
        with pytest.raises(gr.PairBudgetError):
            gr.pairwise_distances(segs(arrays), max_pairs_budget=44)

    def test_no_self_distance(self):
        pd = gr.pairwise_distances(segs([np.arange(4.0)] * 3))
        with pytest.raises(IndexError):
            pd.index(1, 1)


class TestThreshold:
    def test_median_of_known_values(self):
        assert gr.threshold_from_percentile([1.0, 2.0, 3.0], 50.0) == 2.0

    def test_percentile_range_validated(self):
        with pytest.raises(ValueError):
            gr.threshold_from_percentile([1.0], 0.0)
        with pytest.raises(ValueError):
            gr.threshold_from_percentile([1.0], 101.0)

    def test_accepts_condensed_store(self):
        pd = gr.PairwiseDistances(m=3, condensed=np.array([1.0, 2.0, 3.0]))
        assert gr.threshold_from_percentile(pd, 100.0) == 3.0


class TestBuildGraph:
    def three_cluster_fixture(self):
        # three tight value clusters; within-cluster DTW ~0, across >> 0
        arrays = [np.full(4, v) + 0.01 * k
                  for v in (0.0, 10.0, 20.0) for k in range(3)]
        labels = [0, 0, 0, 1, 1, 1, 2, 2, 2]
        features = np.asarray(arrays)
        return segs(arrays), features, labels

    def test_threshold_keeps_clusters_only(self):
        s, X, y = self.three_cluster_fixture()
        g = gr.build_graph(s, X, y, theta=1.0)
        for i, j, w in g.edges:
            assert y[i] == y[j]
            assert 0.0 < w <= 1.0
        assert g.degrees().min() >= 1

    def test_edge_weight_is_inverse_distance(self):
        s = segs([[0.0, 0.0], [1.0, 1.0]])
        g = gr.build_graph(s, np.zeros((2, 1)), [0, 0], theta=10.0)
        (i, j, w), = g.edges
        assert w == pytest.approx(gr.similarity(gr.dtw_distance([0, 0], [1, 1])))

    def test_strictly_below_theta(self):
        s = segs([[0.0], [2.0], [4.0]])   # distances 2, 2, 4
        g = gr.build_graph(s, np.zeros((3, 1)), [0, 0, 0], theta=2.0)
        # no distance < 2.0, so only nearest-neighbor fallback edges remain
        d = gr.pairwise_distances(s).full_matrix()
        for i, j, _ in g.edges:
            assert d[i, j] == 2.0

    def test_isolated_node_gets_fallback_edge(self):
        s = segs([[0.0], [0.1], [50.0]])
        g = gr.build_graph(s, np.zeros((3, 1)), [0, 0, 1], theta=1.0)
        assert g.degrees().min() >= 1
        assert any(2 in (i, j) for i, j, _ in g.edges)

    def test_neighbor_mask_self_loops(self):
        s, X, y = self.three_cluster_fixture()
        g = gr.build_graph(s, X, y, theta=1.0)
        mask = g.neighbor_mask(include_self=True)
        assert mask.diagonal().all()
        assert not g.neighbor_mask(include_self=False).diagonal().any()

    def test_edges_sorted_i_less_j(self):
        s, X, y = self.three_cluster_fixture()
        g = gr.build_graph(s, X, y, theta=1.0)
        pairs = [(i, j) for i, j, _ in g.edges]
        assert pairs == sorted(pairs)
        assert all(i < j for i, j in pairs)


class TestGraphIO:
    def test_round_trip(self, tmp_path):
        s = segs([[0.0, 1.0], [0.5, 1.5], [10.0, 11.0]])
        X = np.random.default_rng(4).normal(size=(3, 10))
        g = gr.build_graph(s, X, [0, 0, 1], theta=5.0,
                           meta={"w_star": 2, "source_id": "fixture"})
        path = tmp_path / "g.json"
        gr.save_graph(g, str(path))
        g2 = gr.load_graph(str(path))
        np.testing.assert_array_equal(g2.node_features, g.node_features)
        np.testing.assert_array_equal(g2.node_labels, g.node_labels)
        assert g2.edges == g.edges
        assert g2.meta["w_star"] == 2
        assert g2.meta["theta"] == 5.0

    def test_file_is_valid_json(self, tmp_path):
        s = segs([[0.0], [1.0]])
        g = gr.build_graph(s, np.zeros((2, 2)), [0, 1], theta=5.0)
        path = tmp_path / "g.json"
        gr.save_graph(g, str(path))
        doc = json.loads(path.read_text())
        assert set(doc) == {"meta", "features", "labels", "edges"}

    def test_atomic_write_leaves_no_temp(self, tmp_path):
        gr.atomic_write_text(str(tmp_path / "x.txt"), "hello")
        assert [p.name for p in tmp_path.iterdir()] == ["x.txt"]
