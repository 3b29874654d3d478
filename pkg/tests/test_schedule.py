""" variance schedule tests """

import os
import sys
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

import math

import numpy as np
import pytest

from mddpm.exceptions import InvalidArgumentError, ScheduleError
from mddpm.schedule import VarianceSchedule, build_schedule

class TestBuildSchedule:
    def test_linear_endpoints(self):
        s = build_schedule('linear', 1000)
        assert s.T == 1000
        assert s.betas[0] == pytest.approx(1e-4, abs=1e-15)
        assert s.betas[999] == pytest.approx(0.02, abs=1e-15)
        assert np.all(s.alphas == 1.0 - s.betas)

    def test_linear_alpha_bars_extended_precision(self):
        s = build_schedule('linear', 1000)
        acc = np.longdouble(1.0)
        for i in range(1000):
            acc *= np.longdouble(s.alphas[i])
            assert abs(float(acc) - s.alpha_bars[i]) <= 1e-15
        assert s.alpha_bars[-1] < 0.01

    def test_linear_two_steps(self):
        s = build_schedule('linear', 2)
        assert s.alphas[0] == pytest.approx(1.0 - 1e-4, abs=1e-15)
        assert s.alphas[1] == pytest.approx(0.98, abs=1e-15)
        assert s.alpha_bars[0] == pytest.approx(0.9999, abs=1e-15)
        assert s.alpha_bars[1] == pytest.approx(0.979902, abs=1e-12)

    def test_cosine_first_alpha_bar(self):
        s = build_schedule('cosine', 1000)
        f = lambda t: math.cos(((t / 1000.0 + 0.008) / 1.008) * math.pi / 2.0) ** 2
        assert s.alpha_bars[0] == pytest.approx(f(1) / f(0), rel=1e-12)
        assert np.max(s.betas) <= 0.999

    @pytest.mark.parametrize('kind', ['linear', 'cosine'])
    @pytest.mark.parametrize('T', [2, 100, 1000])
    def test_invariants(self, kind, T):
        s = build_schedule(kind, T)
        assert np.all(s.betas > 0.0) and np.all(s.betas < 1.0)
        assert np.all(np.diff(s.alpha_bars) < 0.0)
        assert np.all(s.alpha_bars > 0.0) and np.all(s.alpha_bars < 1.0)
        assert np.allclose(s.alpha_bars[1:], s.alpha_bars[:-1] * s.alphas[1:], rtol=1e-14, atol=0.0)
        assert np.array_equal(s.sigmas, np.sqrt(s.betas))
        if T == 1000:
            assert s.alpha_bars[-1] < 0.01

    def test_small_T_rejected(self):
        with pytest.raises(InvalidArgumentError):
            build_schedule('linear', 1)
        with pytest.raises(InvalidArgumentError):
            build_schedule('linear', 0)

    def test_unknown_kind(self):
        with pytest.raises(InvalidArgumentError):
            build_schedule('sigmoid', 10)

class TestVarianceSchedule:
    def test_single_step_schedule(self):
        s = VarianceSchedule.from_betas([0.02])
        assert s.T == 1
        assert s.alpha_bar(1) == pytest.approx(0.98)

    def test_bad_beta(self):
        with pytest.raises(ScheduleError):
            VarianceSchedule.from_betas([0.1, 1.0])
        with pytest.raises(ScheduleError):
            VarianceSchedule.from_betas([0.0, 0.1])

    def test_one_indexed_lookup(self):
        s = build_schedule('linear', 10)
        assert s.beta(1) == s.betas[0]
        assert s.beta(10) == s.betas[9]
        assert np.array_equal(s.alpha_bar(np.array([1, 10])), s.alpha_bars[[0, 9]])
        with pytest.raises(InvalidArgumentError):
            s.beta(0)
        with pytest.raises(InvalidArgumentError):
            s.beta(11)

    def test_arrays_read_only(self):
        s = build_schedule('cosine', 10)
        with pytest.raises(ValueError):
            s.betas[0] = 0.5
