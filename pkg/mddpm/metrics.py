""" SSIM, set-level SSIM and a Frechet distance over seeded features"""

import functools
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import linalg

from .exceptions import InvalidArgumentError
from .grid import ImageGrid, NoiseStream
from .resample import box_down

K1 = 0.01
K2 = 0.03
WINDOW = 8
FEATURE_DIM = 64
RIDGE = 1e-6
SYMMETRY_TOL = 1e-8

def _unit(x, what):
    if isinstance(x, ImageGrid):
        if x.value_range not in ('unit', 'binary'):
            raise InvalidArgumentError('%s: %s image must be windowed to [0, 1] first' % (what, x.value_range))
        return x.values
    return np.asarray(x, dtype=np.float64)

def _stack(images, what):
    """ a set of images as one (N, H, W) array"""

    if isinstance(images, np.ndarray) and images.ndim == 3:
        out = np.asarray(images, dtype=np.float64)
    else:
        images = list(images)
        if not images:
            raise InvalidArgumentError('%s: image set is empty' % (what))
        arrays = [_unit(x, what) for x in images]
        shapes = set(a.shape for a in arrays)
        if len(shapes) != 1:
            raise InvalidArgumentError('%s: images of different shapes %s' % (what, sorted(shapes)))
        out = np.stack(arrays)
    if out.shape[0] == 0:
        raise InvalidArgumentError('%s: image set is empty' % (what))
    return out

def _window_stats(a, b, size):
    wa = sliding_window_view(a, (size, size), axis=(-2, -1))
    wb = sliding_window_view(b, (size, size), axis=(-2, -1))
    n = size * size
    ddof = 1 if n > 1 else 0
    mu_a = wa.mean(axis=(-2, -1))
    mu_b = wb.mean(axis=(-2, -1))
    da = wa - mu_a[..., None, None]
    db = wb - mu_b[..., None, None]
    var_a = (da * da).sum(axis=(-2, -1)) / (n - ddof)
    var_b = (db * db).sum(axis=(-2, -1)) / (n - ddof)
    cov = (da * db).sum(axis=(-2, -1)) / (n - ddof)
    return mu_a, mu_b, var_a, var_b, cov

def ssim_map(a, b, window=WINDOW, data_range=1.0):
    """ per-window SSIM over every valid window, stride 1"""

    a = _unit(a, 'ssim')
    b = _unit(b, 'ssim')
    if a.shape != b.shape:
        raise InvalidArgumentError('ssim: shape mismatch %s vs %s' % (a.shape, b.shape))
    size = min(window, a.shape[-2], a.shape[-1])
    c1 = (K1 * data_range) ** 2
    c2 = (K2 * data_range) ** 2
    mu_a, mu_b, var_a, var_b, cov = _window_stats(a, b, size)
    num = (2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)
    den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2)
    return num / den

def ssim(a, b, window=WINDOW, data_range=1.0):
    """ mean windowed SSIM of two [0, 1] images"""

    return float(np.mean(ssim_map(a, b, window, data_range)))

def ssim_matrix(generated, reference, window=WINDOW):
    """ (len(generated), len(reference)) matrix of pairwise SSIM"""

    gen = _stack(generated, 'generated')
    ref = _stack(reference, 'reference')
    if gen.shape[1:] != ref.shape[1:]:
        raise InvalidArgumentError('ssim: generated %s and reference %s shapes differ' % (gen.shape[1:], ref.shape[1:]))
    out = np.empty((gen.shape[0], ref.shape[0]), dtype=np.float64)
    for i in range(gen.shape[0]):
        out[i] = ssim_map(np.broadcast_to(gen[i], ref.shape), ref, window).mean(axis=(-2, -1))
    return out

def set_ssim(generated, reference, window=WINDOW):
    """ mean over the generated images of their best SSIM against the reference set"""

    return float(np.mean(ssim_matrix(generated, reference, window).max(axis=1)))

@functools.lru_cache(maxsize=32)
def _region_matrix(size, regions):
    """ (regions, size) averaging over near-equal contiguous splits"""

    regions = min(regions, size)
    edges = np.linspace(0, size, regions + 1).round().astype(int)
    m = np.zeros((regions, size), dtype=np.float64)
    for i in range(regions):
        m[i, edges[i]:edges[i + 1]] = 1.0 / (edges[i + 1] - edges[i])
    m.setflags(write=False)
    return m

class FeatureExtractor(object):
    """ fixed seeded random projection of multi-scale pooled patch statistics

    Raw features per image: at every scale, region means and standard
    deviations on a regions x regions grid; then global mean, std, min, max
    and a histogram over [0, 1]. The projection to dim features is a seeded
    Gaussian matrix that depends only on (seed, raw size).
    """

    def __init__(self, seed=0, dim=FEATURE_DIM, scales=(1, 2, 4), regions=4, bins=8):
        self.seed = int(seed)
        self.dim = int(dim)
        self.scales = tuple(int(s) for s in scales)
        self.regions = int(regions)
        self.bins = int(bins)
        self._projections = {}

    def raw_features(self, images):
        x = _stack(images, 'features')
        n, h, w = x.shape
        parts = []
        for s in self.scales:
            if s > min(h, w):
                continue
            xs = box_down(x, s) if s > 1 else x
            rows = _region_matrix(xs.shape[1], self.regions)
            cols = _region_matrix(xs.shape[2], self.regions)
            mean = rows @ xs @ cols.T
            second = rows @ (xs * xs) @ cols.T
            std = np.sqrt(np.clip(second - mean * mean, 0.0, None))
            parts += [mean.reshape(n, -1), std.reshape(n, -1)]
        flat = x.reshape(n, -1)
        parts.append(np.stack([flat.mean(axis=1), flat.std(axis=1), flat.min(axis=1), flat.max(axis=1)], axis=1))
        edges = np.linspace(0.0, 1.0, self.bins + 1)
        hist = np.stack([np.histogram(np.clip(f, 0.0, 1.0), bins=edges)[0] for f in flat]).astype(np.float64)
        parts.append(hist / flat.shape[1])
        return np.concatenate(parts, axis=1)

    def projection(self, d_in):
        if d_in not in self._projections:
            p = NoiseStream(self.seed).normal((d_in, self.dim)) / np.sqrt(d_in)
            p.setflags(write=False)
            self._projections[d_in] = p
        return self._projections[d_in]

    def __call__(self, images):
        raw = self.raw_features(images)
        return raw @ self.projection(raw.shape[1])

    def __repr__(self):
        return 'FeatureExtractor(seed=%d, dim=%d)' % (self.seed, self.dim)

@dataclass(frozen=True, eq=False)
class GaussianStats:
    """ mean and covariance of a feature set

    cov is the raw sample covariance; when the fit is flagged regularized a
    ridge of RIDGE * I is added before it is used in a distance.
    """

    mean: np.ndarray
    cov: np.ndarray
    regularized: bool = False
    count: int = 0

    def __post_init__(self):
        mean = np.atleast_1d(np.array(self.mean, dtype=np.float64))
        cov = np.atleast_2d(np.array(self.cov, dtype=np.float64))
        if cov.shape != (mean.shape[0], mean.shape[0]):
            raise InvalidArgumentError('covariance %s does not match mean %s' % (cov.shape, mean.shape))
        mean.setflags(write=False)
        cov.setflags(write=False)
        object.__setattr__(self, 'mean', mean)
        object.__setattr__(self, 'cov', cov)

    @property
    def effective_cov(self):
        if self.regularized:
            return self.cov + RIDGE * np.eye(self.cov.shape[0])
        return self.cov

    def equals(self, other):
        """ bitwise equality of every field"""
        return (np.array_equal(self.mean, other.mean) and np.array_equal(self.cov, other.cov)
                and self.regularized == other.regularized and self.count == other.count)

def extract_stats(images, extractor):
    """ Gaussian fit over extracted features; fewer than dim + 1 images or a
    rank-deficient covariance is flagged regularized"""

    feats = extractor(images)
    n, d = feats.shape
    mean = feats.mean(axis=0)
    if n > 1:
        cov = np.cov(feats, rowvar=False)
    else:
        cov = np.zeros((d, d), dtype=np.float64)
    regularized = n < d + 1 or np.linalg.matrix_rank(cov, hermitian=True) < d
    return GaussianStats(mean, cov, bool(regularized), n)

def _sqrt_psd(m):
    w, v = linalg.eigh(m)
    return (v * np.sqrt(np.clip(w, 0.0, None))) @ v.T

def frechet_distance(s1, s2):
    """ ||mu1 - mu2||^2 + tr(S1 + S2 - 2 (S1 S2)^(1/2))

    The trace of the product root comes from the eigenvalues of the symmetric
    S1^(1/2) S2 S1^(1/2); negative eigenvalues are clamped to zero.
    """

    c1 = s1.effective_cov
    c2 = s2.effective_cov
    for name, c in (('first', c1), ('second', c2)):
        if np.max(np.abs(c - c.T)) > SYMMETRY_TOL:
            raise InvalidArgumentError('%s covariance is not symmetric' % (name))
    if s1.mean.shape != s2.mean.shape:
        raise InvalidArgumentError('feature sizes differ: %s vs %s' % (s1.mean.shape, s2.mean.shape))
    root1 = _sqrt_psd((c1 + c1.T) / 2.0)
    inner = root1 @ c2 @ root1
    w = linalg.eigvalsh((inner + inner.T) / 2.0)
    tr_covmean = float(np.sum(np.sqrt(np.clip(w, 0.0, None))))
    diff = s1.mean - s2.mean
    d = float(diff.dot(diff) + np.trace(c1) + np.trace(c2) - 2.0 * tr_covmean)
    return max(d, 0.0)

def compare_sets(generated, reference, extractor):
    """ every metric of one generated vs reference comparison"""

    pairs = ssim_matrix(generated, reference)
    s_gen = extract_stats(generated, extractor)
    s_ref = extract_stats(reference, extractor)
    return {
        'pairs': pairs,
        'set_ssim': float(np.mean(pairs.max(axis=1))),
        'mean_ssim': float(np.mean(pairs)),
        'frechet': frechet_distance(s_gen, s_ref),
        'extractor_seed': extractor.seed,
        'generated_regularized': s_gen.regularized,
        'reference_regularized': s_ref.regularized,
    }
