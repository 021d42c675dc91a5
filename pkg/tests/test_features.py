"""Tests for the 10-dim segment feature vector and min-max scaling.

Statistical moments are checked on closed-form cases; the periodogram
features against a direct DFT of a pure tone.
"""

import numpy as np
import pytest

from vibgraph import features as ft
from vibgraph.segmentation import Segment, shannon_entropy, default_bin_count


class TestStatFeatures:
    def test_constant_segment(self):
        mean, std, skew, kurt = ft.stat_features([3.0] * 8)
        assert (mean, std, skew, kurt) == (3.0, 0.0, 0.0, 0.0)

    def test_population_std(self):
        # population (not sample) std: sqrt(mean of squared deviations)
        _, std, _, _ = ft.stat_features([0.0, 2.0])
        assert std == pytest.approx(1.0)

    def test_symmetric_has_zero_skew(self):
        _, _, skew, _ = ft.stat_features([-2.0, -1.0, 1.0, 2.0])
        assert skew == pytest.approx(0.0, abs=1e-12)

    def test_two_point_kurtosis(self):
        # symmetric two-point distribution has kurtosis exactly 1 (non-excess)
        _, _, _, kurt = ft.stat_features([-1.0, 1.0, -1.0, 1.0])
        assert kurt == pytest.approx(1.0)

    def test_gaussian_kurtosis_near_three(self):
        vals = np.random.default_rng(0).standard_normal(200000)
        _, _, _, kurt = ft.stat_features(vals)
        assert kurt == pytest.approx(3.0, abs=0.05)

    def test_moment_oracle(self):
        vals = np.random.default_rng(1).normal(2.0, 3.0, size=100)
        mean, std, skew, kurt = ft.stat_features(vals)
        c = vals - vals.mean()
        sigma = np.sqrt((c ** 2).mean())
        assert mean == pytest.approx(vals.mean())
        assert std == pytest.approx(sigma)
        assert skew == pytest.approx((c ** 3).mean() / sigma ** 3)
        assert kurt == pytest.approx((c ** 4).mean() / sigma ** 4)


class TestTemporalFeatures:
    def test_linear_ramp(self):
        d1, d2 = ft.temporal_features([0.0, 2.0, 4.0, 6.0])
        assert d1 == pytest.approx(2.0)
        assert d2 == pytest.approx(0.0)

    def test_quadratic(self):
        vals = np.arange(6.0) ** 2
        d1, d2 = ft.temporal_features(vals)
        assert d1 == pytest.approx(np.diff(vals).mean())
        assert d2 == pytest.approx(2.0)


class TestPsdTop3:
    def test_pure_tone_amplitude(self):
        # A*sin at an exact bin: periodogram peak = (A*w/2)^2 / w = A^2 w / 4
        w, A, k = 64, 2.0, 8
        tone = A * np.sin(2 * np.pi * k * np.arange(w) / w)
        p1, p2, p3 = ft.psd_top3(tone)
        assert p1 == pytest.approx(A ** 2 * w / 4, rel=1e-9)
        assert p2 == pytest.approx(0.0, abs=1e-18)
        assert p3 == pytest.approx(0.0, abs=1e-18)

    def test_descending_order(self):
        rng = np.random.default_rng(2)
        p = ft.psd_top3(rng.normal(size=50))
        assert p[0] >= p[1] >= p[2]

    def test_dc_excluded(self):
        # huge offset must not leak into the spectral features
        w = 32
        base = np.sin(2 * np.pi * 4 * np.arange(w) / w)
        a = ft.psd_top3(base)
        b = ft.psd_top3(base + 1000.0)
        np.testing.assert_allclose(a, b, atol=1e-6)

    def test_short_segment_pads_zeros(self):
        # w=4 -> rfft gives 3 bins, 2 after dropping DC -> third amp is 0
        p = ft.psd_top3([0.0, 1.0, 0.0, -1.0])
        assert p[2] == 0.0


class TestSegmentFeatures:
    def test_layout_matches_parts(self):
        vals = np.random.default_rng(3).normal(size=40)
        row = ft.segment_features(vals)
        assert row.shape == (ft.FEATURE_DIM,)
        assert tuple(row[0:4]) == ft.stat_features(vals)
        assert row[4] == shannon_entropy(vals, default_bin_count(40))
        assert tuple(row[5:7]) == ft.temporal_features(vals)
        assert tuple(row[7:10]) == ft.psd_top3(vals)

    def test_matrix_stacks_rows(self):
        segs = [Segment(values=np.random.default_rng(i).normal(size=20),
                        start_index=0, label=0) for i in range(4)]
        M = ft.feature_matrix(segs)
        assert M.shape == (4, 10)
        np.testing.assert_array_equal(M[2], ft.segment_features(segs[2].values))


class TestMinMaxScaler:
    def test_normalizes_to_unit_interval(self):
        M = np.random.default_rng(4).normal(size=(30, 5)) * 10
        N, scaler = ft.minmax_normalize(M)
        np.testing.assert_allclose(N.min(axis=0), 0.0, atol=1e-12)
        np.testing.assert_allclose(N.max(axis=0), 1.0, atol=1e-12)

    def test_constant_column_half(self):
        M = np.column_stack([np.arange(4.0), np.full(4, 7.0)])
        N, _ = ft.minmax_normalize(M)
        np.testing.assert_array_equal(N[:, 1], 0.5)

    def test_round_trip_serialization(self):
        M = np.random.default_rng(5).normal(size=(10, 3))
        _, scaler = ft.minmax_normalize(M)
        clone = ft.MinMaxScaler.from_dict(scaler.to_dict())
        held_out = np.random.default_rng(6).normal(size=(4, 3))
        np.testing.assert_array_equal(scaler.transform(held_out),
                                      clone.transform(held_out))

    def test_held_out_can_exceed_range(self):
        _, scaler = ft.minmax_normalize(np.array([[0.0], [1.0]]))
        out = scaler.transform(np.array([[2.0]]))
        assert out[0, 0] == 2.0
