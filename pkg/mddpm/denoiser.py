""" the noise-predictor contract and its analytic oracle"""

from abc import ABC, abstractmethod

import numpy as np
from scipy.special import logsumexp

from .exceptions import InvalidArgumentError, NumericError
from .grid import as_array, like

class DenoiserModel(ABC):
    """ eps_theta(x_t, t): predicts the noise in x_t at step t

    x_t is (chains..., H, W) and t is a scalar step or one step per leading
    chain. The output has the shape of the input.
    """

    input_shape = None

    @abstractmethod
    def evaluate(self, x_t, t):
        """ predicted noise as an array shaped like x_t"""

    @property
    def parameter_count(self):
        return 0

    @property
    def metadata(self):
        return {'input_shape': None if self.input_shape is None else list(self.input_shape),
                'parameter_count': int(self.parameter_count)}

    def __call__(self, x_t, t):
        x = as_array(x_t)
        if self.input_shape is not None and tuple(x.shape[-len(self.input_shape):]) != tuple(self.input_shape):
            raise InvalidArgumentError('model expects trailing shape %s, got %s' % (tuple(self.input_shape), x.shape))
        out = np.asarray(self.evaluate(x, t), dtype=np.float64)
        if out.shape != x.shape:
            raise InvalidArgumentError('model output shape %s differs from input %s' % (out.shape, x.shape))
        if not np.all(np.isfinite(out)):
            raise NumericError('model produced non-finite output at t=%r' % (t,), t=t)
        return like(x_t, out)

class ZeroDenoiser(DenoiserModel):
    """ predicts zero noise everywhere"""

    def __init__(self, input_shape=None):
        self.input_shape = None if input_shape is None else tuple(input_shape)

    def evaluate(self, x_t, t):
        return np.zeros_like(x_t)

def _mixture_params(means, variances, weights, dim):
    means = np.asarray(means, dtype=np.float64)
    variances = np.asarray(variances, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64).reshape(-1)
    k = weights.size
    if k < 1:
        raise InvalidArgumentError('mixture needs at least one component')
    if means.ndim == 1:
        means = means.reshape(k, -1) if means.size == k * dim else means.reshape(k, 1)
    means = means.reshape(k, -1)
    if variances.ndim <= 1:
        variances = variances.reshape(k, 1)
    variances = variances.reshape(k, -1)
    for name, a in (('means', means), ('variances', variances)):
        if a.shape[1] not in (1, dim):
            raise InvalidArgumentError('mixture %s dimensionality %d does not match grid size %d' % (name, a.shape[1], dim))
    if np.any(variances <= 0.0):
        raise InvalidArgumentError('mixture variances must be positive')
    if np.any(weights < 0.0) or abs(weights.sum() - 1.0) > 1e-12:
        raise InvalidArgumentError('mixture weights must lie on the simplex (sum %r)' % (float(weights.sum())))
    return (np.broadcast_to(means, (k, dim)),
            np.broadcast_to(variances, (k, dim)),
            weights)

def analytic_epsilon(x_t, t, means, variances, weights, sched, grid_ndim=2):
    """ closed-form E[eps | x_t] for Gaussian-mixture data under the forward process

    Per component k with mean m_k and (diagonal) variance s_k^2 the posterior
    noise is (x_t - sqrt(ab) m_k) sqrt(1 - ab) / (ab s_k^2 + 1 - ab); the mixture
    combines components by their posterior responsibilities.
    """

    x = as_array(x_t)
    grid_shape = x.shape[x.ndim - grid_ndim:]
    lead = x.shape[:x.ndim - grid_ndim]
    dim = int(np.prod(grid_shape)) if grid_shape else 1
    m, v, w = _mixture_params(means, variances, weights, dim)

    flat = x.reshape(lead + (dim,))
    ab = np.asarray(sched.alpha_bar(t), dtype=np.float64)
    ab = ab.reshape(ab.shape + (1, 1)) if ab.ndim else ab
    sab = np.sqrt(ab)

    # (lead..., K, D)
    xk = flat[..., None, :]
    var_k = ab * v + (1.0 - ab)
    diff = xk - sab * m
    eps_k = diff * np.sqrt(1.0 - ab) / var_k

    if w.size == 1:
        out = eps_k[..., 0, :]
    else:
        with np.errstate(divide='ignore'):
            logw = np.log(w)
        loglik = -0.5 * np.sum(diff * diff / var_k + np.log(2.0 * np.pi * var_k), axis=-1) + logw
        resp = np.exp(loglik - logsumexp(loglik, axis=-1, keepdims=True))
        out = np.sum(resp[..., None] * eps_k, axis=-2)

    if not np.all(np.isfinite(out)):
        raise NumericError('analytic epsilon is non-finite at t=%r' % (t,), t=t)
    return like(x_t, out.reshape(x.shape))

class AnalyticGaussianDenoiser(DenoiserModel):
    """ exact eps predictor for Gaussian / Gaussian-mixture data"""

    def __init__(self, component_means, component_variances, component_weights, sched, input_shape):
        self.input_shape = tuple(input_shape)
        self.sched = sched
        dim = int(np.prod(self.input_shape))
        m, v, w = _mixture_params(component_means, component_variances, component_weights, dim)
        self.component_means = np.array(m)
        self.component_variances = np.array(v)
        self.component_weights = np.array(w)

    @classmethod
    def single(cls, mean, variance, sched, input_shape):
        """ one Gaussian component: N(mean, variance) per pixel"""
        m = np.asarray(mean, dtype=np.float64).reshape(1, -1)
        v = np.asarray(variance, dtype=np.float64).reshape(1, -1)
        return cls(m, v, [1.0], sched, input_shape)

    def evaluate(self, x_t, t):
        return analytic_epsilon(x_t, t, self.component_means, self.component_variances,
                                self.component_weights, self.sched, grid_ndim=len(self.input_shape))

    def sample_data(self, n, stream):
        """ n draws from the data distribution, shape (n, *input_shape)"""

        k = self.component_weights.size
        comp = stream.generator.choice(k, size=n, p=self.component_weights) if k > 1 else np.zeros(n, dtype=np.int64)
        z = stream.normal((n, self.component_means.shape[1]))
        x = self.component_means[comp] + np.sqrt(self.component_variances[comp]) * z
        return x.reshape((n,) + self.input_shape)
