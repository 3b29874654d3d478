""" separable box-down / bilinear-up resampling matrices"""

import functools

import numpy as np

from .exceptions import InvalidArgumentError

def _cells(size, n):
    """ (start, stop) of each coarse cell; the last cell may be partial"""
    return [(i, min(i + n, size)) for i in range(0, size, n)]

@functools.lru_cache(maxsize=64)
def box_matrix(size, n):
    """ (coarse, size) averaging matrix; partial edge cells average what they cover"""

    cells = _cells(size, n)
    m = np.zeros((len(cells), size), dtype=np.float64)
    for i, (a, b) in enumerate(cells):
        m[i, a:b] = 1.0 / (b - a)
    m.setflags(write=False)
    return m

@functools.lru_cache(maxsize=64)
def nearest_matrix(size, n):
    """ (size, coarse) piecewise-constant upsampling matrix"""

    cells = _cells(size, n)
    m = np.zeros((size, len(cells)), dtype=np.float64)
    for i, (a, b) in enumerate(cells):
        m[a:b, i] = 1.0
    m.setflags(write=False)
    return m

@functools.lru_cache(maxsize=64)
def bilinear_matrix(size, n):
    """ (size, coarse) linear interpolation between cell centres, clamped at the ends"""

    cells = _cells(size, n)
    centres = np.array([(a + b - 1) / 2.0 for a, b in cells])
    m = np.zeros((size, len(cells)), dtype=np.float64)
    if len(cells) == 1:
        m[:, 0] = 1.0
    else:
        for y in range(size):
            if y <= centres[0]:
                m[y, 0] = 1.0
            elif y >= centres[-1]:
                m[y, -1] = 1.0
            else:
                j = int(np.searchsorted(centres, y, side='right')) - 1
                w = (y - centres[j]) / (centres[j + 1] - centres[j])
                m[y, j] = 1.0 - w
                m[y, j + 1] = w
    m.setflags(write=False)
    return m

@functools.lru_cache(maxsize=64)
def upsample_matrix(size, n):
    """ mean-preserving bilinear upsampling: box(up(c)) == c for every coarse c"""

    b = bilinear_matrix(size, n)
    p = nearest_matrix(size, n)
    d = box_matrix(size, n)
    m = b + p @ (np.eye(d.shape[0]) - d @ b)
    m.setflags(write=False)
    return m

def _apply(x, rows, cols):
    """ rows @ x @ cols.T over the last two axes"""
    return np.matmul(np.matmul(rows, x), cols.T)

def is_whole(v, minimum=1):
    """ v is an integer (or integral float) >= minimum, booleans excluded"""
    if isinstance(v, bool):
        return False
    try:
        return int(v) == v and v >= minimum
    except (TypeError, ValueError, OverflowError):
        return False

def check_factor(shape, n):
    if not is_whole(n):
        raise InvalidArgumentError('%r: filter factor must be a positive integer' % (n,))
    if n > min(shape[-2], shape[-1]):
        raise InvalidArgumentError('factor %d is larger than the image %dx%d' % (n, shape[-1], shape[-2]))
    return int(n)

def box_down(x, n):
    """ box-average downsample of the last two axes by n"""

    x = np.asarray(x, dtype=np.float64)
    n = check_factor(x.shape, n)
    h, w = x.shape[-2:]
    return _apply(x, box_matrix(h, n), box_matrix(w, n))

def up(c, n, shape):
    """ mean-preserving bilinear upsample of coarse grids back to shape (H, W)"""

    h, w = shape
    return _apply(np.asarray(c, dtype=np.float64), upsample_matrix(h, n), upsample_matrix(w, n))
