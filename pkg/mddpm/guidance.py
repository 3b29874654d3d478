""" low-pass filters and multi-condition guided sampling"""

import os
from dataclasses import dataclass

import numpy as np
import yaml

from .diffusion import ddpm_step, q_sample, step_noise, _shape
from .exceptions import InvalidArgumentError, StorageError
from .grid import as_array, as_stream, like
from .resample import box_down, check_factor, is_whole, up

MAX_CONDITIONS = 4

class LowPassFilter(object):
    """ phi_N: box-average down by N, then bilinear back up to the input grid"""

    def __init__(self, factor, down_kernel='box', up_kernel='bilinear'):
        if down_kernel != 'box' or up_kernel != 'bilinear':
            raise InvalidArgumentError('only box down / bilinear up filters are supported')
        if isinstance(factor, bool) or int(factor) != factor or factor < 1:
            raise InvalidArgumentError('%r: filter factor must be a positive integer' % (factor,))
        self.factor = int(factor)
        self.down_kernel = down_kernel
        self.up_kernel = up_kernel

    def down(self, x):
        return box_down(as_array(x), self.factor)

    def __call__(self, x):
        return lowpass(x, self.factor)

    def __repr__(self):
        return 'LowPassFilter(%d)' % (self.factor)

def lowpass(x, N):
    """ phi_N(x); N = 1 is the identity"""

    a = as_array(x)
    n = check_factor(a.shape, N)
    if n == 1:
        return like(x, a.copy())
    return like(x, up(box_down(a, n), n, a.shape[-2:]))

def lowfreq_residual(x, y, n):
    """ max |box_n(x) - box_n(y)|"""
    return float(np.max(np.abs(box_down(as_array(x), n) - box_down(as_array(y), n))))

def _is_power_of_two(n):
    return n >= 1 and (n & (n - 1)) == 0

@dataclass(frozen=True, eq=False)
class GuidanceSpec:
    """ one conditional image y_s with filter scale n and stop-time a"""

    y: np.ndarray
    n: int
    a: int
    label: str = ''

    def __post_init__(self):
        y = np.array(as_array(self.y), dtype=np.float64)
        if y.ndim != 2:
            raise InvalidArgumentError('%s: guidance image must be 2-D' % (self.label))
        if not np.all(np.isfinite(y)):
            raise InvalidArgumentError('%s: guidance image holds non-finite values' % (self.label))
        y.setflags(write=False)
        object.__setattr__(self, 'y', y)
        object.__setattr__(self, 'n', check_factor(y.shape, self.n))
        if not is_whole(self.a):
            raise InvalidArgumentError('%s: stop-time a=%r must be a step index >= 1' % (self.label, self.a))
        object.__setattr__(self, 'a', int(self.a))

    @property
    def filter(self):
        return LowPassFilter(self.n)

    def active(self, t):
        """ guidance applies while t >= a"""
        return t >= self.a

@dataclass(frozen=True)
class GuidanceSet:
    """ ordered conditions y_1..y_M"""

    specs: tuple = ()
    allow_many: bool = False
    allow_any_factor: bool = False

    def __post_init__(self):
        object.__setattr__(self, 'specs', tuple(self.specs))
        if len(self.specs) > MAX_CONDITIONS and not self.allow_many:
            raise InvalidArgumentError('%d conditions: guidance is limited to %d unless allow_many is set'
                                       % (len(self.specs), MAX_CONDITIONS))
        if not self.allow_any_factor:
            for s in self.specs:
                if not _is_power_of_two(s.n):
                    raise InvalidArgumentError('%s: factor %d is not a power of two (set allow_any_factor)' % (s.label, s.n))

    def __len__(self):
        return len(self.specs)

    def __iter__(self):
        return iter(self.specs)

    def __getitem__(self, ii):
        return self.specs[ii]

    def validate(self, sched, grid_shape):
        """ every y matches the generation grid and every a lies in [1, T]"""

        bad = []
        for i, s in enumerate(self.specs):
            if tuple(s.y.shape) != tuple(grid_shape):
                bad.append({'code': 1002, 'message': 'condition %d (%s): shape %s vs %s' % (i, s.label, s.y.shape, tuple(grid_shape))})
            if s.a > sched.T:
                bad.append({'code': 1003, 'message': 'condition %d (%s): a=%d > T=%d' % (i, s.label, s.a, sched.T)})
        if bad:
            raise InvalidArgumentError('guidance set does not fit this run', bad)

    def count_applications(self, T):
        """ refine applications over a full chain: sum of (T - a_s + 1)"""
        return sum(T - s.a + 1 for s in self.specs)

def as_guidance_set(specs):
    if isinstance(specs, GuidanceSet):
        return specs
    return GuidanceSet(tuple(specs or ()))

def refine(x_prev, y_noisy_list, specs, t):
    """ x_prev + sum over active s of (phi_s(y_s) - phi_s(x_prev))

    Every correction is computed against the original x_prev and applied
    once. The filtered x_prev terms are removed before the references are
    added, so with one n = 1 condition the result is y bitwise.
    """

    specs = as_guidance_set(specs)
    x = as_array(x_prev)
    if len(y_noisy_list) != len(specs):
        raise InvalidArgumentError('%d noisy references for %d conditions' % (len(y_noisy_list), len(specs)))
    ys = [as_array(y) for y in y_noisy_list]
    for y in ys:
        if y.shape != x.shape and y.shape != x.shape[-2:]:
            raise InvalidArgumentError('refine: shape mismatch %s vs %s' % (y.shape, x.shape))
    active = [s for s in specs if s.active(t)]
    if not active:
        return like(x_prev, x.copy())

    out = x
    for s in active:
        out = out - lowpass(x, s.n)
    for s, y in zip(specs, ys):
        if s.active(t):
            out = out + lowpass(y, s.n)
    return like(x_prev, np.broadcast_to(out, x.shape).copy())

def q_sample_reference(y, t, seed, sched, shape=None):
    """ y_{t-1} ~ q(y_{t-1} | y); at t - 1 = 0 the clean y is returned unchanged

    seed may be an int or a shared NoiseStream; shape (default y's shape)
    lets every chain of a batch get its own noise.
    """

    if t - 1 == 0:
        return y
    ya = as_array(y)
    shape = ya.shape if shape is None else tuple(shape)
    eps = as_stream(seed).normal(shape)
    return like(y, q_sample(np.broadcast_to(ya, shape), t - 1, eps, sched))

def sample_guided(model, sched, specs, shape, seed, callback=None, logger=None):
    """ multi-condition guided ancestral sampling; returns x_0

    Stream order per step: the x noise z (skipped at t = 1), then one draw per
    condition y_1..y_M (skipped at t = 1, where the clean references are used).
    callback(t, x_before, x_after, y_noisy_list, active) runs after each refine.
    """

    shape = _shape(shape)
    specs = as_guidance_set(specs)
    specs.validate(sched, shape[-2:])
    stream = as_stream(seed)

    x = stream.normal(shape)
    applications = 0
    for t in range(sched.T, 0, -1):
        z = step_noise(stream, t, shape)
        x = ddpm_step(x, t, model, z, sched)
        if len(specs) == 0:
            continue
        y_noisy = [q_sample_reference(s.y, t, stream, sched, shape) for s in specs]
        active = [s.active(t) for s in specs]
        refined = refine(x, y_noisy, specs, t)
        applications += sum(active)
        if callback is not None:
            callback(t, x, refined, y_noisy, active)
        x = refined
    if logger:
        logger.debug('guided sample: %d refine applications over T=%d', applications, sched.T)
    return x

def load_guidance_manifest(path, sched=None, shape=None):
    """ read a guidance manifest (YAML or JSON) into a GuidanceSet

    Each condition names an image file, n, a and a label; relative image
    paths resolve against the manifest's directory. HU images are normalized
    and anatomy label maps are rendered at their base HU values first.
    """

    from .formats import read_image
    from .phantom import labels_to_hu, normalize_for_model

    try:
        with open(path, 'r') as f:
            doc = yaml.safe_load(f.read())
    except (IOError, OSError) as e:
        raise StorageError('%s: guidance manifest unreadable - %s' % (path, e), path=path)
    except yaml.YAMLError as e:
        raise InvalidArgumentError('%s: guidance manifest does not parse - %s' % (path, e))

    if doc is None:
        doc = {}
    if isinstance(doc, list):
        doc = {'conditions': doc}
    if not isinstance(doc, dict):
        raise InvalidArgumentError('%s: guidance manifest must be a mapping' % (path))
    base = os.path.dirname(os.path.abspath(path))
    specs = []
    for i, c in enumerate(doc.get('conditions') or []):
        try:
            image_path = c['image']
            n = c['n']
            a = c['a']
        except (KeyError, TypeError):
            raise InvalidArgumentError('%s: condition %d needs image, n and a' % (path, i))
        if not isinstance(image_path, str):
            raise InvalidArgumentError('%s: condition %d image must be a path' % (path, i))
        if not os.path.isabs(image_path):
            image_path = os.path.join(base, image_path)
        img = read_image(image_path)
        if img.value_range == 'labels':
            img = labels_to_hu(img)
        if img.value_range == 'hu':
            img, _ = normalize_for_model(img)
        try:
            specs.append(GuidanceSpec(img.values, n, a, str(c.get('label', 'condition-%d' % (i)))))
        except InvalidArgumentError as e:
            raise InvalidArgumentError('%s: condition %d - %s' % (path, i, e))
    gs = GuidanceSet(tuple(specs), bool(doc.get('allow_many', False)), bool(doc.get('allow_any_factor', False)))
    if sched is not None and shape is not None:
        gs.validate(sched, shape)
    return gs

def sweep_guidance(model, sched, reference, factors, stops, seeds, extra=(), logger=None):
    """ guided sampling over a grid of (n, a); mean SSIM to the reference per cell

    reference is a normalized [-1, 1] image; extra conditions are held fixed.
    Returns one row per (n, a): {'n', 'a', 'mean_ssim', 'seeds'}.
    """

    from .metrics import ssim

    ref = as_array(reference)
    ref_unit = np.clip((ref + 1.0) / 2.0, 0.0, 1.0)
    rows = []
    for n in factors:
        for a in stops:
            spec = GuidanceSpec(ref, n, a, 'sweep')
            gs = GuidanceSet((spec,) + tuple(extra))
            scores = []
            for seed in seeds:
                x0 = sample_guided(model, sched, gs, ref.shape, seed)
                scores.append(ssim(np.clip((x0 + 1.0) / 2.0, 0.0, 1.0), ref_unit))
            rows.append({'n': int(n), 'a': int(a), 'mean_ssim': float(np.mean(scores)), 'seeds': [int(s) for s in seeds]})
            if logger:
                logger.info('sweep: n=%d a=%d mean ssim %.4f', n, a, rows[-1]['mean_ssim'])
    return rows
