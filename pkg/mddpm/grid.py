""" image grids and seeded noise streams"""

import numpy as np

from .exceptions import InvalidArgumentError, NumericError

# value-range tags; the integer is the IMGF header byte
VALUE_RANGES = {
    'normalized': 0,
    'hu': 1,
    'binary': 2,
    'unit': 3,
    'labels': 4,
}

class ImageGrid(object):
    """ single-channel 2-D raster with a value-range tag

    The values array is float64, read-only and always finite.
    """

    __slots__ = ('_values', '_value_range')

    def __init__(self, values, value_range='normalized'):
        """ image grids and seeded noise streams"""

        if value_range not in VALUE_RANGES:
            raise InvalidArgumentError('%s: unknown value range' % (value_range))
        a = np.array(values, dtype=np.float64)
        if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
            raise InvalidArgumentError('image grid must be 2-D and nonempty, got shape %s' % (a.shape,))
        if not np.all(np.isfinite(a)):
            raise NumericError('image grid holds non-finite values')
        a.setflags(write=False)
        self._values = a
        self._value_range = value_range

    @property
    def values(self):
        return self._values

    @property
    def value_range(self):
        return self._value_range

    @property
    def width(self):
        return self._values.shape[1]

    @property
    def height(self):
        return self._values.shape[0]

    @property
    def shape(self):
        return self._values.shape

    def replace(self, values, value_range=None):
        """ a new grid with the same tag unless one is given"""
        return ImageGrid(values, self._value_range if value_range is None else value_range)

    def __eq__(self, other):
        if not isinstance(other, ImageGrid):
            return NotImplemented
        return (self._value_range == other._value_range
                and self._values.shape == other._values.shape
                and np.array_equal(self._values, other._values))

    def __hash__(self):
        return hash((self._value_range, self._values.shape, self._values.tobytes()))

    def __repr__(self):
        return 'ImageGrid(%dx%d, %s)' % (self.width, self.height, self._value_range)

def as_array(x):
    """ the float64 values behind an ImageGrid, NoiseDraw or array"""

    if isinstance(x, ImageGrid):
        return x.values
    if isinstance(x, NoiseDraw):
        return x.grid.values
    return np.asarray(x, dtype=np.float64)

def like(template, values):
    """ wrap values the way template was given (ImageGrid in, ImageGrid out)"""

    if isinstance(template, ImageGrid):
        return template.replace(values)
    return values

def check_same_shape(what, a, b):
    """ shapes must match exactly"""

    if np.shape(a) != np.shape(b):
        raise InvalidArgumentError('%s: shape mismatch %s vs %s' % (what, np.shape(a), np.shape(b)))

class NoiseStream(object):
    """ counter-based seeded stream of standard normal draws

    Draws are consumed strictly in call order, so two streams built from the
    same seed and asked for the same shapes in the same order agree bit for bit.
    """

    def __init__(self, seed):
        self.seed = int(seed)
        if self.seed < 0 or self.seed >= 2**64:
            raise InvalidArgumentError('%d: seed must fit in 64 unsigned bits' % (self.seed))
        self._generator = np.random.Generator(np.random.Philox(key=self.seed))

    @property
    def generator(self):
        return self._generator

    def normal(self, shape):
        """ i.i.d. N(0,1) draws of the given shape"""
        return self._generator.standard_normal(size=tuple(shape))

    def integers(self, low, high, size=None):
        """ uniform integers in [low, high)"""
        return self._generator.integers(low, high, size=size)

    def uniform(self, low=0.0, high=1.0, size=None):
        return self._generator.uniform(low, high, size=size)

def as_stream(seed_or_stream):
    """ accept either a seed or an existing stream"""

    if isinstance(seed_or_stream, NoiseStream):
        return seed_or_stream
    return NoiseStream(seed_or_stream)

class NoiseDraw(object):
    """ a grid of standard normal draws together with the seed that made it"""

    __slots__ = ('grid', 'seed')

    def __init__(self, grid, seed):
        self.grid = grid
        self.seed = seed

    @classmethod
    def from_seed(cls, seed, shape):
        """ reproducible draw of shape (height, width)"""
        stream = NoiseStream(seed)
        return cls(ImageGrid(stream.normal(shape), 'normalized'), seed)

    @property
    def values(self):
        return self.grid.values

    @property
    def shape(self):
        return self.grid.shape
