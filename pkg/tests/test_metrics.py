""" SSIM, set SSIM and Frechet distance tests """

import os
import sys
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

import numpy as np
import pytest
from scipy import linalg

from mddpm.exceptions import InvalidArgumentError
from mddpm.grid import ImageGrid, NoiseStream
from mddpm.metrics import (FeatureExtractor, GaussianStats, compare_sets, extract_stats, frechet_distance,
                           set_ssim, ssim, ssim_map, ssim_matrix)
from mddpm.phantom import WINDOW_PRESETS, make_sample, to_window

DATA = os.path.join(os.path.dirname(__file__), 'data')

def golden(name):
    return np.loadtxt(os.path.join(DATA, name))

def scalar_ssim(a, b, size=8):
    """ one window at a time with plain sums"""

    c1 = 0.01 ** 2
    c2 = 0.03 ** 2
    h, w = a.shape
    n = size * size
    total = 0.0
    count = 0
    for i in range(h - size + 1):
        for j in range(w - size + 1):
            pa = [a[i + di, j + dj] for di in range(size) for dj in range(size)]
            pb = [b[i + di, j + dj] for di in range(size) for dj in range(size)]
            ma = sum(pa) / n
            mb = sum(pb) / n
            va = sum((p - ma) ** 2 for p in pa) / (n - 1)
            vb = sum((p - mb) ** 2 for p in pb) / (n - 1)
            cov = sum((p - ma) * (q - mb) for p, q in zip(pa, pb)) / (n - 1)
            total += ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2))
            count += 1
    return total / count

def phantom_set(count, seed, shape=(32, 32)):
    return [to_window(make_sample(seed + i, seed + 1000 + i, shape).image, WINDOW_PRESETS['full']) for i in range(count)]

class TestSSIM:
    def test_self_similarity(self):
        a = golden('ssim_a.txt')
        assert ssim(a, a) == pytest.approx(1.0, abs=1e-12)

    def test_symmetric(self):
        a, b = golden('ssim_a.txt'), golden('ssim_b.txt')
        assert ssim(a, b) == pytest.approx(ssim(b, a), abs=1e-15)

    def test_golden_pair_matches_scalar(self):
        a, b = golden('ssim_a.txt'), golden('ssim_b.txt')
        assert a.shape == (16, 16)
        assert ssim(a, b) == pytest.approx(scalar_ssim(a, b), abs=1e-8)
        assert ssim(a, b) < 1.0

    def test_map_shape(self):
        a = golden('ssim_a.txt')
        assert ssim_map(a, a).shape == (9, 9)

    def test_small_image_shrinks_window(self):
        s = NoiseStream(1)
        a, b = s.uniform(size=(4, 4)), s.uniform(size=(4, 4))
        assert ssim_map(a, b).shape == (1, 1)
        assert ssim(a, b) == pytest.approx(scalar_ssim(a, b, size=4), abs=1e-12)

    def test_range(self):
        s = NoiseStream(2)
        for _ in range(20):
            v = ssim(s.uniform(size=(12, 12)), s.uniform(size=(12, 12)))
            assert -1.0 <= v <= 1.0

    def test_needs_windowed_images(self):
        with pytest.raises(InvalidArgumentError):
            ssim(ImageGrid(np.zeros((8, 8)), 'hu'), ImageGrid(np.zeros((8, 8)), 'hu'))
        with pytest.raises(InvalidArgumentError):
            ssim(np.zeros((8, 8)), np.zeros((8, 9)))

    def test_grid_and_array_agree(self):
        a, b = golden('ssim_a.txt'), golden('ssim_b.txt')
        assert ssim(ImageGrid(a, 'unit'), ImageGrid(b, 'unit')) == ssim(a, b)

class TestSetSSIM:
    def test_set_against_itself(self):
        images = phantom_set(5, 10)
        assert set_ssim(images, images) == pytest.approx(1.0, abs=1e-12)

    def test_matrix_matches_pairwise(self):
        gen, ref = phantom_set(3, 20), phantom_set(4, 30)
        m = ssim_matrix(gen, ref)
        assert m.shape == (3, 4)
        for i in range(3):
            for j in range(4):
                assert m[i, j] == pytest.approx(ssim(gen[i], ref[j]), abs=1e-12)

    def test_brute_force_max_mean(self):
        gen, ref = phantom_set(10, 100), phantom_set(50, 200)
        best = []
        for g in gen:
            best.append(max(ssim(g, r) for r in ref))
        assert set_ssim(gen, ref) == pytest.approx(sum(best) / len(best), abs=1e-8)

    def test_empty_and_mismatched_sets(self):
        with pytest.raises(InvalidArgumentError):
            set_ssim([], phantom_set(1, 1))
        with pytest.raises(InvalidArgumentError):
            ssim_matrix(phantom_set(1, 1), phantom_set(1, 2, shape=(32, 48)))

class TestFeatures:
    def test_shape_and_determinism(self):
        images = phantom_set(4, 60)
        f = FeatureExtractor(seed=3)(images)
        assert f.shape == (4, 64)
        assert np.array_equal(f, FeatureExtractor(seed=3)(images))
        assert not np.array_equal(f, FeatureExtractor(seed=4)(images))

    def test_projection_depends_on_seed_only(self):
        a = FeatureExtractor(seed=5).projection(100)
        assert np.array_equal(a, NoiseStream(5).normal((100, 64)) / 10.0)

    def test_streaming_mean(self):
        images = phantom_set(200, 300)
        extractor = FeatureExtractor(seed=0)
        stats = extract_stats(images, extractor)
        running = np.zeros(64)
        for k, img in enumerate(images, start=1):
            running += (extractor([img])[0] - running) / k
        assert np.max(np.abs(stats.mean - running)) < 1e-10
        assert stats.count == 200 and not stats.regularized

class TestStats:
    def test_duplicates_are_flagged(self):
        img = phantom_set(1, 70)[0]
        stats = extract_stats([img] * 100, FeatureExtractor(seed=0))
        assert stats.regularized
        assert np.all(stats.cov == 0.0) or np.max(np.abs(stats.cov)) < 1e-20
        assert frechet_distance(stats, stats) <= 1e-8

    def test_small_sets_are_flagged(self):
        stats = extract_stats(phantom_set(10, 80), FeatureExtractor(seed=0))
        assert stats.regularized and stats.count == 10

    def test_effective_cov(self):
        s = GaussianStats(np.zeros(2), np.eye(2), regularized=True, count=1)
        assert np.array_equal(s.effective_cov, np.eye(2) * (1.0 + 1e-6))
        assert np.array_equal(GaussianStats(np.zeros(2), np.eye(2)).effective_cov, np.eye(2))

    def test_shape_check(self):
        with pytest.raises(InvalidArgumentError):
            GaussianStats(np.zeros(3), np.eye(2))

class TestFrechet:
    def test_identical(self):
        s = GaussianStats(np.array([0.3, -1.0]), np.array([[2.0, 0.3], [0.3, 1.0]]))
        assert frechet_distance(s, s) <= 1e-8

    def test_unit_mean_shift(self):
        cov = np.array([[1.0, 0.2], [0.2, 0.5]])
        a = GaussianStats(np.zeros(2), cov)
        b = GaussianStats(np.array([0.0, 1.0]), cov)
        assert frechet_distance(a, b) == pytest.approx(1.0, abs=1e-8)

    def test_diagonal_closed_form(self):
        s1, s2 = np.array([1.0, 2.0, 0.5]), np.array([0.5, 1.0, 3.0])
        a = GaussianStats(np.zeros(3), np.diag(s1 ** 2))
        b = GaussianStats(np.ones(3), np.diag(s2 ** 2))
        assert frechet_distance(a, b) == pytest.approx(3.0 + np.sum((s1 - s2) ** 2), abs=1e-10)

    def test_random_against_sqrtm(self):
        s = NoiseStream(6)
        for _ in range(20):
            m1, m2 = s.normal((4,)), s.normal((4,))
            l1, l2 = s.normal((4, 4)), s.normal((4, 4))
            c1, c2 = l1 @ l1.T + 0.1 * np.eye(4), l2 @ l2.T + 0.1 * np.eye(4)
            expected = np.sum((m1 - m2) ** 2) + np.trace(c1 + c2 - 2.0 * linalg.sqrtm(c1 @ c2).real)
            got = frechet_distance(GaussianStats(m1, c1), GaussianStats(m2, c2))
            assert got == pytest.approx(expected, abs=1e-6)

    def test_symmetric_in_arguments(self):
        s = NoiseStream(7)
        l1, l2 = s.normal((3, 3)), s.normal((3, 3))
        a = GaussianStats(s.normal((3,)), l1 @ l1.T)
        b = GaussianStats(s.normal((3,)), l2 @ l2.T)
        assert frechet_distance(a, b) == pytest.approx(frechet_distance(b, a), abs=1e-8)

    def test_asymmetric_covariance(self):
        bad = GaussianStats(np.zeros(2), np.array([[1.0, 0.5], [0.0, 1.0]]))
        with pytest.raises(InvalidArgumentError):
            frechet_distance(bad, bad)

    def test_feature_size_mismatch(self):
        with pytest.raises(InvalidArgumentError):
            frechet_distance(GaussianStats(np.zeros(2), np.eye(2)), GaussianStats(np.zeros(3), np.eye(3)))

class TestCompareSets:
    def test_report(self):
        gen, ref = phantom_set(4, 400), phantom_set(6, 500)
        report = compare_sets(gen, ref, FeatureExtractor(seed=2))
        assert report['pairs'].shape == (4, 6)
        assert report['set_ssim'] == pytest.approx(set_ssim(gen, ref), abs=1e-12)
        assert report['mean_ssim'] <= report['set_ssim']
        assert report['frechet'] >= 0.0
        assert report['extractor_seed'] == 2
        assert report['generated_regularized'] and report['reference_regularized']
