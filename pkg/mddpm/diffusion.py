""" forward process, reverse mean and ancestral sampling"""

import numpy as np

from .exceptions import ContractError, InvalidArgumentError
from .grid import as_array, as_stream, check_same_shape, like

def _coef(c, ndim):
    """ broadcast a per-chain coefficient against (chains..., H, W)"""

    c = np.asarray(c, dtype=np.float64)
    if c.ndim == 0:
        return c
    return c.reshape(c.shape + (1,) * (ndim - c.ndim))

def q_sample(x0, t, eps, sched):
    """ x_t = sqrt(alpha_bar_t) * x0 + sqrt(1 - alpha_bar_t) * eps"""

    x = as_array(x0)
    e = as_array(eps)
    check_same_shape('q_sample', x, e)
    ab = _coef(sched.alpha_bar(t), x.ndim)
    return like(x0, np.sqrt(ab) * x + np.sqrt(1.0 - ab) * e)

def reverse_mean(x_t, t, eps_pred, sched):
    """ (1/sqrt(alpha_t)) * (x_t - beta_t / sqrt(1 - alpha_bar_t) * eps_pred)"""

    x = as_array(x_t)
    e = as_array(eps_pred)
    check_same_shape('reverse_mean', x, e)
    alpha = _coef(sched.alpha(t), x.ndim)
    beta = _coef(sched.beta(t), x.ndim)
    ab = _coef(sched.alpha_bar(t), x.ndim)
    return like(x_t, (x - (beta / np.sqrt(1.0 - ab)) * e) / np.sqrt(alpha))

def ddpm_step(x_t, t, model, z, sched):
    """ one ancestral step: reverse mean plus sigma_t * z

    The step applies whatever z it is given; keeping z at zero for t=1 is the
    sampler's job.
    """

    x = as_array(x_t)
    if z is None:
        zz = np.zeros_like(x)
    else:
        zz = as_array(z)
        check_same_shape('ddpm_step', x, zz)
    mean = reverse_mean(x, t, model(x, t), sched)
    sigma = _coef(sched.sigma(t), x.ndim)
    return like(x_t, mean + sigma * zz)

def step_noise(stream, t, shape):
    """ z for step t: a fresh draw for t > 1, zeros at t = 1 (nothing is drawn)"""

    if t > 1:
        return stream.normal(shape)
    return np.zeros(shape, dtype=np.float64)

def _shape(shape):
    shape = tuple(int(s) for s in shape)
    if len(shape) < 1 or any(s < 1 for s in shape):
        raise InvalidArgumentError('%r: sample shape must be positive' % (shape,))
    return shape

def run_chain(model, sched, x_T, noises):
    """ run t = T..1 on pre-drawn noise; noises[0] belongs to t = T

    Reports a contract violation when the final (t = 1) noise is nonzero.
    """

    noises = list(noises)
    if len(noises) != sched.T:
        raise InvalidArgumentError('need %d noise draws, got %d' % (sched.T, len(noises)))
    if noises[-1] is not None and np.any(as_array(noises[-1]) != 0.0):
        raise ContractError('nonzero noise supplied for the final step t=1')
    x = as_array(x_T)
    for i, t in enumerate(range(sched.T, 0, -1)):
        x = ddpm_step(x, t, model, noises[i], sched)
    return like(x_T, x)

def sample_unconditional(model, sched, shape, seed, logger=None):
    """ x_T ~ N(0, I), then ancestral steps t = T..1; returns x_0

    Stream order: x_T first, then one z per step for t > 1. Leading axes of
    shape are independent chains sharing the stream.
    """

    shape = _shape(shape)
    stream = as_stream(seed)
    x = stream.normal(shape)
    for t in range(sched.T, 0, -1):
        z = step_noise(stream, t, shape)
        x = ddpm_step(x, t, model, z, sched)
        if logger and (t % 100 == 0 or t == 1):
            logger.debug('sample: t=%d mean=%.4f std=%.4f', t, float(x.mean()), float(x.std()))
    return x
