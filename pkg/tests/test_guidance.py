""" low-pass filter, refine and guided sampling tests """

import os
import sys
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

import numpy as np
import pytest

from mddpm.denoiser import AnalyticGaussianDenoiser, ZeroDenoiser
from mddpm.diffusion import sample_unconditional
from mddpm.exceptions import InvalidArgumentError
from mddpm.formats import write_image
from mddpm.grid import ImageGrid, NoiseStream
from mddpm.guidance import (GuidanceSet, GuidanceSpec, LowPassFilter, load_guidance_manifest, lowfreq_residual,
                            lowpass, q_sample_reference, refine, sample_guided, sweep_guidance)
from mddpm.resample import box_down
from mddpm.schedule import build_schedule

def scalar_box(x, n):
    """ cell means by explicit loops (sides divisible by n)"""

    h, w = x.shape
    c = np.zeros((h // n, w // n))
    for i in range(h // n):
        for j in range(w // n):
            total = 0.0
            for di in range(n):
                for dj in range(n):
                    total += x[i * n + di, j * n + dj]
            c[i, j] = total / (n * n)
    return c

def scalar_up(c, n, size, axis):
    """ one axis: interpolate between cell centres, then restore each cell mean"""

    c = np.moveaxis(c, axis, 0)
    centres = np.arange(c.shape[0]) * n + (n - 1) / 2.0
    b = np.array([[np.interp(i, centres, c[:, j]) for j in range(c.shape[1])] for i in range(size)])
    means = np.array([b[k * n:(k + 1) * n].mean(axis=0) for k in range(c.shape[0])])
    return np.moveaxis(b + np.repeat(c - means, n, axis=0), 0, axis)

def scalar_lowpass(x, n):
    if n == 1:
        return x.copy()
    h, w = x.shape
    return scalar_up(scalar_up(scalar_box(x, n), n, h, 0), n, w, 1)

def scalar_refine(x, ys, ns, stops, t):
    """ x + sum of every active correction, each computed against the input x"""

    out = x.copy()
    for y, n, a in zip(ys, ns, stops):
        if t >= a:
            out += scalar_lowpass(y, n) - scalar_lowpass(x, n)
    return out

class TestLowPass:
    def test_identity_factor(self):
        x = NoiseStream(1).normal((8, 8))
        assert np.array_equal(lowpass(x, 1), x)

    @pytest.mark.parametrize('n', [2, 4, 8])
    def test_constant_image(self, n):
        assert np.allclose(lowpass(np.full((8, 8), 0.3), n), 0.3, atol=1e-15)

    @pytest.mark.parametrize('shape,n', [((8, 8), 2), ((16, 16), 4), ((8, 8), 8), ((10, 7), 3), ((9, 12), 4)])
    def test_idempotent(self, shape, n):
        x = NoiseStream(2).normal(shape)
        once = lowpass(x, n)
        assert np.max(np.abs(lowpass(once, n) - once)) < 1e-12
        assert np.max(np.abs(box_down(once, n) - box_down(x, n))) < 1e-12

    @pytest.mark.parametrize('n', [2, 4, 8])
    def test_matches_scalar_filter(self, n):
        x = NoiseStream(3).normal((16, 16))
        assert np.max(np.abs(lowpass(x, n) - scalar_lowpass(x, n))) < 1e-12

    def test_filter_object(self):
        f = LowPassFilter(4)
        x = NoiseStream(4).normal((8, 8))
        assert np.array_equal(f(x), lowpass(x, 4))
        assert f.down(x).shape == (2, 2)
        with pytest.raises(InvalidArgumentError):
            LowPassFilter(0)
        with pytest.raises(InvalidArgumentError):
            LowPassFilter(2, up_kernel='nearest')

    def test_factor_larger_than_image(self):
        with pytest.raises(InvalidArgumentError):
            lowpass(np.zeros((4, 4)), 8)

    def test_batched_input(self):
        x = NoiseStream(5).normal((3, 8, 8))
        out = lowpass(x, 2)
        for i in range(3):
            assert np.allclose(out[i], lowpass(x[i], 2), atol=1e-15)

class TestGuidanceSpecs:
    def test_limits(self):
        y = np.zeros((8, 8))
        five = [GuidanceSpec(y, 2, 1) for _ in range(5)]
        with pytest.raises(InvalidArgumentError):
            GuidanceSet(five)
        assert len(GuidanceSet(five, allow_many=True)) == 5
        with pytest.raises(InvalidArgumentError):
            GuidanceSet((GuidanceSpec(y, 3, 1),))
        assert GuidanceSet((GuidanceSpec(y, 3, 1),), allow_any_factor=True)[0].n == 3

    def test_bad_spec(self):
        with pytest.raises(InvalidArgumentError):
            GuidanceSpec(np.zeros((8, 8)), 2, 0)
        with pytest.raises(InvalidArgumentError):
            GuidanceSpec(np.zeros(8), 2, 1)
        with pytest.raises(InvalidArgumentError):
            GuidanceSpec(np.full((8, 8), np.nan), 2, 1)

    @pytest.mark.parametrize('n,a', [('big', 1), (None, 1), (2.5, 1), (True, 1), (float('nan'), 1),
                                     (2, 'late'), (2, None), (2, 1.5)])
    def test_non_integer_factor_or_stop(self, n, a):
        with pytest.raises(InvalidArgumentError):
            GuidanceSpec(np.zeros((8, 8)), n, a)

    def test_validate_against_run(self):
        sched = build_schedule('linear', 10)
        gs = GuidanceSet((GuidanceSpec(np.zeros((8, 8)), 2, 11, 'late'), GuidanceSpec(np.zeros((4, 4)), 2, 1, 'small')))
        with pytest.raises(InvalidArgumentError) as e:
            gs.validate(sched, (8, 8))
        assert len(e.value) == 2

    def test_count_applications(self):
        y = np.zeros((8, 8))
        gs = GuidanceSet((GuidanceSpec(y, 2, 1), GuidanceSpec(y, 4, 7)))
        assert gs.count_applications(10) == 10 + 4

class TestRefine:
    def test_identity_filter_collapse(self):
        s = NoiseStream(6)
        x, y = s.normal((8, 8)), s.normal((8, 8))
        out = refine(x, [y], [GuidanceSpec(y, 1, 1)], 5)
        assert np.array_equal(out, y)

    def test_inactive_is_identity(self):
        s = NoiseStream(7)
        x, y = s.normal((8, 8)), s.normal((8, 8))
        out = refine(x, [y], [GuidanceSpec(y, 2, 6)], 5)
        assert np.array_equal(out, x)

    def test_empty_guidance_is_identity(self):
        x = NoiseStream(8).normal((8, 8))
        assert np.array_equal(refine(x, [], [], 3), x)

    @pytest.mark.parametrize('n', [2, 4, 8])
    def test_single_condition_lock(self, n):
        s = NoiseStream(9)
        x, y = s.normal((16, 16)), s.normal((16, 16))
        out = refine(x, [y], [GuidanceSpec(y, n, 1)], 1)
        assert lowfreq_residual(out, y, n) < 1e-12
        # the high frequencies of x are untouched
        assert np.allclose(out - lowpass(out, n), x - lowpass(x, n), atol=1e-12)

    def test_two_condition_residual(self):
        s = NoiseStream(10)
        x, y1, y2 = s.normal((8, 8)), s.normal((8, 8)), s.normal((8, 8))
        specs = [GuidanceSpec(y1, 2, 1), GuidanceSpec(y2, 4, 1)]
        out = refine(x, [y1, y2], specs, 1)
        expected = box_down(lowpass(y2, 4) - lowpass(x, 4), 2)
        assert np.max(np.abs(box_down(out, 2) - box_down(y1, 2) - expected)) < 1e-6

    def test_brute_force_oracle(self):
        s = NoiseStream(11)
        for case in range(1000):
            m = 1 + case % 3
            x = s.normal((8, 8))
            ys = [s.normal((8, 8)) for _ in range(m)]
            ns = [int(2 ** k) for k in s.integers(0, 4, size=m)]
            stops = [int(a) for a in s.integers(1, 11, size=m)]
            t = int(s.integers(1, 11))
            specs = [GuidanceSpec(y, n, a) for y, n, a in zip(ys, ns, stops)]
            got = refine(x, ys, specs, t)
            assert np.max(np.abs(got - scalar_refine(x, ys, ns, stops, t))) < 1e-6

    def test_batched_chains_share_reference(self):
        s = NoiseStream(12)
        x, y = s.normal((3, 8, 8)), s.normal((8, 8))
        out = refine(x, [y], [GuidanceSpec(y, 2, 1)], 1)
        for i in range(3):
            assert np.allclose(out[i], refine(x[i], [y], [GuidanceSpec(y, 2, 1)], 1), atol=1e-15)

    def test_image_grid_in_image_grid_out(self):
        y = np.zeros((8, 8))
        out = refine(ImageGrid(np.ones((8, 8))), [y], [GuidanceSpec(y, 8, 1)], 1)
        assert isinstance(out, ImageGrid)
        assert np.allclose(out.values, 0.0, atol=1e-15)

    def test_mismatched_reference_count(self):
        y = np.zeros((8, 8))
        with pytest.raises(InvalidArgumentError):
            refine(y, [y, y], [GuidanceSpec(y, 2, 1)], 1)

class TestQSampleReference:
    def test_clean_reference_at_last_step(self):
        y = NoiseStream(13).normal((8, 8))
        sched = build_schedule('linear', 10)
        assert q_sample_reference(y, 1, 0, sched) is y

    def test_seeded(self):
        y = np.zeros((4, 4))
        sched = build_schedule('linear', 10)
        a = q_sample_reference(y, 5, 3, sched)
        assert np.array_equal(a, q_sample_reference(y, 5, 3, sched))
        assert np.allclose(a, np.sqrt(1.0 - sched.alpha_bar(4)) * NoiseStream(3).normal((4, 4)), atol=1e-15)

class TestSampleGuided:
    sched = build_schedule('cosine', 50)

    def model(self, shape=(8, 8)):
        return AnalyticGaussianDenoiser.single(0.0, 0.5, self.sched, shape)

    def test_empty_guidance_is_unconditional(self):
        for seed in range(10):
            a = sample_guided(self.model(), self.sched, GuidanceSet(), (2, 8, 8), seed)
            b = sample_unconditional(self.model(), self.sched, (2, 8, 8), seed)
            assert np.array_equal(a, b)

    def test_identity_filter_returns_reference(self):
        y = NoiseStream(14).normal((8, 8))
        for seed in range(3):
            x0 = sample_guided(self.model(), self.sched, [GuidanceSpec(y, 1, 1)], (8, 8), seed)
            assert np.max(np.abs(x0 - y)) == 0.0

    @pytest.mark.parametrize('n', [2, 4, 8])
    def test_lock_after_every_step(self, n):
        y = NoiseStream(15).normal((8, 8))
        worst = []

        def watch(t, before, after, y_noisy, active):
            if active[0]:
                worst.append(lowfreq_residual(after, y_noisy[0], n))

        sample_guided(self.model(), self.sched, [GuidanceSpec(y, n, 1)], (8, 8), 16, callback=watch)
        assert len(worst) == self.sched.T
        assert max(worst) < 1e-5

    def test_nested_coarse_lock(self):
        s = NoiseStream(17)
        fine, coarse = s.normal((16, 16)), s.normal((16, 16))
        specs = [GuidanceSpec(fine, 4, 30, 'fine'), GuidanceSpec(coarse, 8, 1, 'coarse')]
        locked = []
        offsets = []

        def watch(t, before, after, y_noisy, active):
            # the fine correction shifts the coarse cells by box_8(y_fine - x_before)
            shift = box_down(y_noisy[0] - before, 8) if active[0] else 0.0
            expected = box_down(y_noisy[1], 8) + shift
            offsets.append(float(np.max(np.abs(box_down(after, 8) - expected))))
            if not active[0]:
                locked.append(lowfreq_residual(after, y_noisy[1], 8))

        sample_guided(self.model((16, 16)), self.sched, specs, (16, 16), 18, callback=watch)
        assert len(locked) == 29
        assert max(locked) < 1e-4
        assert max(offsets) < 1e-4

    def test_application_count(self):
        y = np.zeros((8, 8))
        gs = GuidanceSet((GuidanceSpec(y, 2, 10), GuidanceSpec(y, 4, 30), GuidanceSpec(y, 8, 1)))
        applied = []
        sample_guided(self.model(), self.sched, gs, (8, 8), 19,
                      callback=lambda t, b, a, yn, active: applied.append(sum(active)))
        assert sum(applied) == gs.count_applications(self.sched.T)

    def test_deterministic(self):
        y = NoiseStream(20).normal((8, 8))
        gs = [GuidanceSpec(y, 2, 20)]
        a = sample_guided(self.model(), self.sched, gs, (2, 8, 8), 21)
        assert np.array_equal(a, sample_guided(self.model(), self.sched, gs, (2, 8, 8), 21))

    def test_guidance_pulls_towards_reference(self):
        y = np.full((8, 8), 0.8)
        x0 = sample_guided(self.model(), self.sched, [GuidanceSpec(y, 8, 1)], (64, 8, 8), 22)
        assert abs(float(box_down(x0, 8).mean()) - 0.8) < 1e-6

    def test_stop_time_beyond_schedule(self):
        with pytest.raises(InvalidArgumentError):
            sample_guided(self.model(), self.sched, [GuidanceSpec(np.zeros((8, 8)), 2, 51)], (8, 8), 0)

class TestManifest:
    def test_load(self, tmp_path):
        hu = np.full((8, 8), 500.0)
        labels = np.zeros((8, 8))
        labels[2:6, 2:6] = 3
        write_image(str(tmp_path / 'scan.imgf'), ImageGrid(hu, 'hu'))
        write_image(str(tmp_path / 'map.imgf'), ImageGrid(labels, 'labels'))
        (tmp_path / 'guide.yaml').write_text(
            'conditions:\n'
            '  - {image: scan.imgf, n: 4, a: 10, label: scan}\n'
            '  - {image: map.imgf, n: 2, a: 20}\n')
        gs = load_guidance_manifest(str(tmp_path / 'guide.yaml'), build_schedule('linear', 20), (8, 8))
        assert len(gs) == 2
        assert gs[0].label == 'scan' and gs[1].label == 'condition-1'
        assert np.allclose(gs[0].y, 0.5)
        assert gs[1].y[3, 3] == pytest.approx(0.65) and gs[1].y[0, 0] == pytest.approx(-1.0)

    def test_empty_manifest(self, tmp_path):
        (tmp_path / 'none.yaml').write_text('conditions: []\n')
        assert len(load_guidance_manifest(str(tmp_path / 'none.yaml'))) == 0

    def test_missing_fields(self, tmp_path):
        (tmp_path / 'bad.yaml').write_text('conditions:\n  - {image: x.imgf, n: 2}\n')
        with pytest.raises(InvalidArgumentError):
            load_guidance_manifest(str(tmp_path / 'bad.yaml'))

    @pytest.mark.parametrize('condition', ['{image: scan.imgf, n: big, a: 2}', '{image: scan.imgf, n: 2, a: soon}',
                                           '{image: 7, n: 2, a: 2}'])
    def test_bad_values(self, tmp_path, condition):
        write_image(str(tmp_path / 'scan.imgf'), ImageGrid(np.zeros((8, 8)), 'hu'))
        (tmp_path / 'bad.yaml').write_text('conditions:\n  - %s\n' % (condition))
        with pytest.raises(InvalidArgumentError) as e:
            load_guidance_manifest(str(tmp_path / 'bad.yaml'))
        assert 'bad.yaml' in str(e.value)

class TestSweep:
    def test_rows(self):
        sched = build_schedule('linear', 10)
        ref = NoiseStream(23).uniform(-1.0, 1.0, (8, 8))
        rows = sweep_guidance(ZeroDenoiser(), sched, ref, [1, 4], [1, 5], [0, 1])
        assert [(r['n'], r['a']) for r in rows] == [(1, 1), (1, 5), (4, 1), (4, 5)]
        assert rows[0]['mean_ssim'] == pytest.approx(1.0)
        assert all(-1.0 <= r['mean_ssim'] <= 1.0 for r in rows)
