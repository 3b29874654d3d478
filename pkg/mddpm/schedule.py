""" variance schedules for the forward process"""

import math

import numpy as np

from .exceptions import InvalidArgumentError, ScheduleError

LINEAR_BETA_START = 1e-4
LINEAR_BETA_END = 0.02
COSINE_OFFSET = 0.008
COSINE_MAX_BETA = 0.999

# kind byte in the VSCH header
KINDS = {
    'linear': 0,
    'cosine': 1,
    'custom': 2,
}

class VarianceSchedule(object):
    """ precomputed beta, alpha, alpha-bar and sigma arrays for T steps

    Public step indices run 1..T; storage is 0-indexed, so step t lives at
    position t-1 of every array.
    """

    def __init__(self, betas, kind='custom'):
        """ variance schedules for the forward process"""

        if kind not in KINDS:
            raise InvalidArgumentError('%s: unknown schedule kind' % (kind))
        betas = np.array(betas, dtype=np.float64).reshape(-1)
        if betas.size < 1:
            raise InvalidArgumentError('schedule needs at least one step')
        if not np.all(np.isfinite(betas)) or np.any(betas <= 0.0) or np.any(betas >= 1.0):
            bad = int(np.argmax(~((betas > 0.0) & (betas < 1.0))))
            raise ScheduleError('beta at step %d is %r, outside (0, 1)' % (bad + 1, float(betas[bad])))

        alphas = 1.0 - betas
        # extended precision so the running product does not drift at T=1000
        alpha_bars = np.cumprod(alphas.astype(np.longdouble)).astype(np.float64)
        if np.any(alpha_bars <= 0.0) or np.any(np.diff(alpha_bars) >= 0.0):
            raise ScheduleError('alpha-bar is not strictly decreasing inside (0, 1)')

        self.kind = kind
        self.T = int(betas.size)
        self.betas = betas
        self.alphas = alphas
        self.alpha_bars = alpha_bars
        self.sigmas = np.sqrt(betas)
        for a in (self.betas, self.alphas, self.alpha_bars, self.sigmas):
            a.setflags(write=False)

    @classmethod
    def from_betas(cls, betas, kind='custom'):
        """ any T >= 1 - used by the VSCH reader and degenerate test schedules"""
        return cls(betas, kind)

    def check_step(self, t, low=1):
        """ t must lie in [low, T]; t may be a scalar or one index per chain"""

        tt = np.asarray(t)
        if tt.dtype.kind not in 'iu':
            if not np.all(np.equal(np.mod(tt, 1), 0)):
                raise InvalidArgumentError('%r: step index must be an integer' % (t,))
            tt = tt.astype(np.int64)
        if tt.size == 0 or np.any(tt < low) or np.any(tt > self.T):
            raise InvalidArgumentError('%r: step index outside [%d, %d]' % (t, low, self.T))
        return tt

    def _gather(self, arr, t):
        tt = self.check_step(t)
        return arr[tt - 1]

    def beta(self, t):
        return self._gather(self.betas, t)

    def alpha(self, t):
        return self._gather(self.alphas, t)

    def alpha_bar(self, t):
        return self._gather(self.alpha_bars, t)

    def sigma(self, t):
        return self._gather(self.sigmas, t)

    def __len__(self):
        return self.T

    def __eq__(self, other):
        if not isinstance(other, VarianceSchedule):
            return NotImplemented
        return self.kind == other.kind and np.array_equal(self.betas, other.betas)

    def __repr__(self):
        return 'VarianceSchedule(%s, T=%d)' % (self.kind, self.T)

def _cosine_f(t, T, s=COSINE_OFFSET):
    return math.cos(((t / T + s) / (1.0 + s)) * math.pi / 2.0) ** 2

def linear_betas(T):
    """ betas spaced uniformly from 1e-4 to 0.02"""
    return np.linspace(LINEAR_BETA_START, LINEAR_BETA_END, T, dtype=np.float64)

def cosine_betas(T, s=COSINE_OFFSET, max_beta=COSINE_MAX_BETA):
    """ betas from alpha-bar(t) = f(t)/f(0), clipped to max_beta"""

    f0 = _cosine_f(0, T, s)
    alpha_bar = np.array([_cosine_f(t, T, s) / f0 for t in range(0, T + 1)], dtype=np.float64)
    betas = 1.0 - alpha_bar[1:] / alpha_bar[:-1]
    return np.minimum(betas, max_beta)

def build_schedule(kind, T):
    """ build a linear or cosine schedule with T >= 2 steps"""

    if isinstance(T, bool) or not isinstance(T, (int, np.integer)):
        raise InvalidArgumentError('%r: T must be an integer' % (T,))
    if T < 2:
        raise InvalidArgumentError('T=%d: schedules need T >= 2' % (T))
    if kind == 'linear':
        betas = linear_betas(T)
    elif kind == 'cosine':
        betas = cosine_betas(T)
    else:
        raise InvalidArgumentError('%s: schedule kind must be linear or cosine' % (kind))
    return VarianceSchedule(betas, kind)
