""" procedural chest phantoms, HU windows and the phantom dataset"""

import hashlib
import json
import os
from dataclasses import dataclass, field, asdict

import numpy as np
from scipy import ndimage

from .exceptions import ContractError, InvalidArgumentError, StorageError
from .grid import ImageGrid, NoiseStream

BACKGROUND = 0
SOFT_TISSUE = 1
LUNG = 2
BONE = 3
HEART = 4

LABEL_NAMES = {
    BACKGROUND: 'background',
    SOFT_TISSUE: 'soft-tissue',
    LUNG: 'lung',
    BONE: 'bone',
    HEART: 'heart',
}

# plausible HU band of every label
LABEL_BANDS = {
    BACKGROUND: (-1000.0, -1000.0),
    SOFT_TISSUE: (-100.0, 200.0),
    LUNG: (-950.0, -650.0),
    BONE: (300.0, 1000.0),
    HEART: (0.0, 100.0),
}

HU_MIN = -1000.0
HU_MAX = 1000.0
MIN_SIZE = 32

@dataclass(frozen=True)
class WindowPreset:
    """ display window: clamp to [center - width/2, center + width/2]"""

    name: str
    center: float
    width: float

    def __post_init__(self):
        if not self.width > 0:
            raise InvalidArgumentError('%s: window width must be positive' % (self.name))

    @property
    def low(self):
        return self.center - self.width / 2.0

    @property
    def high(self):
        return self.center + self.width / 2.0

WINDOW_PRESETS = {
    'full': WindowPreset('full', 0.0, 2000.0),
    'lung': WindowPreset('lung', -600.0, 1500.0),
    'bone': WindowPreset('bone', 400.0, 1800.0),
    'soft-tissue': WindowPreset('soft-tissue', 50.0, 350.0),
}

def window_presets(overrides=None):
    """ default presets with config overrides {name: {center, width}} applied"""

    presets = dict(WINDOW_PRESETS)
    for name, v in (overrides or {}).items():
        presets[name] = WindowPreset(name, float(v['center']), float(v['width']))
    return presets

@dataclass(frozen=True)
class PhantomConfig:
    """ per-label base HU and texture amplitude; texture off gives flat labels"""

    base_hu: dict = field(default_factory=lambda: {BACKGROUND: -1000.0, SOFT_TISSUE: 50.0, LUNG: -800.0, BONE: 650.0, HEART: 50.0})
    amplitude: dict = field(default_factory=lambda: {BACKGROUND: 0.0, SOFT_TISSUE: 140.0, LUNG: 140.0, BONE: 330.0, HEART: 45.0})
    texture: bool = True
    texture_sigma: float = 1.2
    bias_strength: float = 0.35

    def __post_init__(self):
        base = {int(k): float(v) for k, v in self.base_hu.items()}
        amp = {int(k): float(v) for k, v in self.amplitude.items()}
        object.__setattr__(self, 'base_hu', base)
        object.__setattr__(self, 'amplitude', amp)
        for label, (lo, hi) in LABEL_BANDS.items():
            if label not in base or label not in amp:
                raise InvalidArgumentError('phantom config misses label %s' % (LABEL_NAMES[label]))
            if amp[label] < 0 or base[label] - amp[label] < lo or base[label] + amp[label] > hi:
                raise InvalidArgumentError('%s: base %g +/- %g leaves the band [%g, %g]'
                                           % (LABEL_NAMES[label], base[label], amp[label], lo, hi))
        if not 0.0 <= self.bias_strength <= 1.0 or not self.texture_sigma > 0:
            raise InvalidArgumentError('phantom bias_strength must lie in [0, 1] and texture_sigma be positive')

    def to_dict(self):
        d = asdict(self)
        d['base_hu'] = {str(k): v for k, v in sorted(self.base_hu.items())}
        d['amplitude'] = {str(k): v for k, v in sorted(self.amplitude.items())}
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d or {})
        kw = {}
        for key in ('base_hu', 'amplitude'):
            if key in d:
                merged = dict(getattr(cls(), key))
                merged.update({int(k): float(v) for k, v in d[key].items()})
                kw[key] = merged
        for key in ('texture', 'texture_sigma', 'bias_strength'):
            if key in d:
                kw[key] = d[key]
        return cls(**kw)

@dataclass(frozen=True)
class AnatomySpec:
    """ geometry of one phantom, in normalized [-1, 1] image coordinates"""

    seed: int
    shape: tuple
    body: tuple
    lungs: tuple
    heart: tuple
    rib_count: int
    rib_thickness: float
    rib_radius: float
    rib_phase: float
    spine: tuple

    def to_dict(self):
        d = asdict(self)
        d['lungs'] = [{'center': list(l['center']), 'axes': list(l['axes']),
                       'controls': [float(c) for c in l['controls']]} for l in self.lungs]
        d['shape'] = list(self.shape)
        d['body'] = list(self.body)
        d['heart'] = list(self.heart)
        d['spine'] = list(self.spine)
        return d

@dataclass(frozen=True)
class PhantomSample:
    anatomy_map: ImageGrid
    image: ImageGrid
    spec: AnatomySpec
    texture_seed: int

def _check_shape(shape):
    if isinstance(shape, (int, np.integer)):
        shape = (int(shape), int(shape))
    shape = tuple(int(s) for s in shape)
    if len(shape) != 2 or shape[0] < MIN_SIZE or shape[1] < MIN_SIZE:
        raise InvalidArgumentError('%r: phantoms need at least %dx%d pixels' % (shape, MIN_SIZE, MIN_SIZE))
    return shape

def _coords(shape):
    h, w = shape
    v = (np.arange(h) + 0.5) / h * 2.0 - 1.0
    u = (np.arange(w) + 0.5) / w * 2.0 - 1.0
    return np.meshgrid(u, v)

def _ellipse_rho(u, v, cx, cy, rx, ry):
    return np.sqrt(((u - cx) / rx) ** 2 + ((v - cy) / ry) ** 2)

def _lung_radius(theta, axes, controls):
    """ polar radius of the smoothed random contour at angles theta"""

    ax, ay = axes
    base = ax * ay / np.sqrt((ay * np.cos(theta)) ** 2 + (ax * np.sin(theta)) ** 2)
    k = len(controls)
    knots = np.arange(k + 1) * (2.0 * np.pi / k)
    mult = np.interp(np.mod(theta, 2.0 * np.pi), knots, np.append(controls, controls[0]))
    return base * mult

def lung_contour(lung, points=180):
    """ closed curve (points, 2) of a lung blob"""

    theta = np.linspace(0.0, 2.0 * np.pi, points, endpoint=False)
    r = _lung_radius(theta, lung['axes'], np.asarray(lung['controls']))
    cx, cy = lung['center']
    return np.stack([cx + r * np.cos(theta), cy + r * np.sin(theta)], axis=1)

def _lung_mask(u, v, lung):
    cx, cy = lung['center']
    du, dv = u - cx, v - cy
    return np.hypot(du, dv) <= _lung_radius(np.arctan2(dv, du), lung['axes'], np.asarray(lung['controls']))

def _rasterize(spec):
    shape = spec.shape
    u, v = _coords(shape)
    labels = np.zeros(shape, dtype=np.uint8)
    bx, by, brx, bry = spec.body
    rho = _ellipse_rho(u, v, bx, by, brx, bry)
    labels[rho <= 1.0] = SOFT_TISSUE

    # ribs: angular segments of a ring just inside the body outline
    angle = np.mod(np.arctan2((v - by) / bry, (u - bx) / brx) - spec.rib_phase, 2.0 * np.pi)
    in_segment = np.mod(angle * spec.rib_count / (2.0 * np.pi), 1.0) < 0.55
    ring = (rho >= spec.rib_radius) & (rho <= spec.rib_radius + spec.rib_thickness)
    labels[ring & in_segment] = BONE

    lung_masks = [_lung_mask(u, v, l) for l in spec.lungs]
    for m in lung_masks:
        labels[m] = LUNG

    hx, hy, hrx, hry = spec.heart
    heart = _ellipse_rho(u, v, hx, hy, hrx, hry) <= 1.0
    labels[heart] = HEART

    sx, sy, sr = spec.spine
    labels[_ellipse_rho(u, v, sx, sy, sr * shape[0] / shape[1], sr) <= 1.0] = BONE
    return labels, lung_masks, heart

def gen_anatomy(seed, shape):
    """ deterministic anatomy spec and label map from a seed"""

    shape = _check_shape(shape)
    rng = NoiseStream(seed).generator
    h, w = shape

    brx = rng.uniform(0.78, 0.9)
    bry = rng.uniform(0.6, 0.75)
    bx = rng.uniform(-0.03, 0.03)
    by = rng.uniform(-0.03, 0.03)

    # ribs at least ~1.5 px thick, never outside the body
    px = 2.0 / min(brx * w, bry * h)
    rib_radius = rng.uniform(0.84, 0.88)
    rib_thickness = min(max(rng.uniform(0.05, 0.08), 1.5 * px), 0.98 - rib_radius)
    rib_count = int(rng.integers(6, 11))
    rib_phase = rng.uniform(0.0, 2.0 * np.pi)

    lungs = []
    for side in (-1.0, 1.0):
        center = (bx + side * rng.uniform(0.36, 0.42) * brx, by + rng.uniform(-0.1, 0.0) * bry)
        axes = (rng.uniform(0.26, 0.32) * brx, rng.uniform(0.38, 0.46) * bry)
        raw = rng.uniform(0.85, 1.1, size=10)
        controls = (np.roll(raw, 1) + 2.0 * raw + np.roll(raw, -1)) / 4.0
        lung = {'center': center, 'axes': axes, 'controls': controls}
        # shrink until the blob sits inside the rib cage and on its own side
        for _ in range(60):
            c = lung_contour(lung)
            inside = np.all(_ellipse_rho(c[:, 0], c[:, 1], bx, by, brx, bry) <= 0.8)
            own_side = np.all(side * (c[:, 0] - bx) > 0.0)
            if inside and own_side:
                break
            lung = dict(lung, controls=lung['controls'] * 0.95)
        lungs.append({'center': tuple(float(x) for x in lung['center']),
                      'axes': tuple(float(x) for x in lung['axes']),
                      'controls': tuple(float(x) for x in lung['controls'])})

    heart = [bx + rng.uniform(-0.02, 0.08) * brx, by + rng.uniform(0.08, 0.18) * bry,
             rng.uniform(0.24, 0.3) * brx, rng.uniform(0.22, 0.28) * bry]
    spine = (bx, by + 0.78 * bry, max(0.1 * bry, 3.2 / h))

    spec = None
    for _ in range(10):
        spec = AnatomySpec(int(seed), shape, (bx, by, brx, bry), tuple(lungs), tuple(float(x) for x in heart),
                           rib_count, float(rib_thickness), float(rib_radius), float(rib_phase), tuple(float(x) for x in spine))
        labels, lung_masks, heart_mask = _rasterize(spec)
        if all(np.any(heart_mask & m) for m in lung_masks):
            break
        # widen the heart until it reaches both medial lung borders
        heart[2] *= 1.1
    return spec, ImageGrid(labels, 'labels')

def anatomy_hash(anatomy_map):
    """ sha256 of the label map bytes and shape"""

    labels = np.asarray(anatomy_map.values if isinstance(anatomy_map, ImageGrid) else anatomy_map).astype(np.uint8)
    d = hashlib.sha256()
    d.update(('%dx%d:' % labels.shape).encode('ascii'))
    d.update(labels.tobytes())
    return d.hexdigest()

def _labels(anatomy_map):
    a = anatomy_map.values if isinstance(anatomy_map, ImageGrid) else np.asarray(anatomy_map, dtype=np.float64)
    labels = a.astype(np.int64)
    if not np.array_equal(labels, a):
        raise InvalidArgumentError('anatomy map holds non-integer labels')
    unknown = sorted(set(np.unique(labels).tolist()) - set(LABEL_BANDS))
    if unknown:
        raise InvalidArgumentError('anatomy map holds unknown labels %s' % (unknown))
    return labels

def render_phantom(anatomy_map, texture_seed, config=None):
    """ HU image: per-label base value plus band-limited texture and a smooth bias field

    Texture is mean-centred inside every label and scaled to the label's
    amplitude, so label means stay at their base values and every pixel stays
    in its band.
    """

    config = config or PhantomConfig()
    labels = _labels(anatomy_map)
    img = np.zeros(labels.shape, dtype=np.float64)
    for label in LABEL_BANDS:
        img[labels == label] = config.base_hu[label]
    if not config.texture:
        return ImageGrid(img, 'hu')

    stream = NoiseStream(texture_seed)
    tex = ndimage.gaussian_filter(stream.normal(labels.shape), sigma=config.texture_sigma, mode='reflect')
    tex /= max(np.max(np.abs(tex)), 1e-12)
    coarse = stream.normal((4, 4))
    bias = ndimage.zoom(coarse, (labels.shape[0] / 4.0, labels.shape[1] / 4.0), order=1, mode='nearest')
    bias /= max(np.max(np.abs(bias)), 1e-12)
    texture = (1.0 - config.bias_strength) * tex + config.bias_strength * bias

    for label in LABEL_BANDS:
        amp = config.amplitude[label]
        mask = labels == label
        if amp == 0.0 or not np.any(mask):
            continue
        f = texture[mask] - texture[mask].mean()
        f /= max(np.max(np.abs(f)), 1.0)
        img[mask] = config.base_hu[label] + amp * f
    return ImageGrid(img, 'hu')

def labels_to_hu(anatomy_map, config=None):
    """ label map rendered flat at the base HU values"""

    config = config or PhantomConfig()
    flat = PhantomConfig(config.base_hu, config.amplitude, False, config.texture_sigma, config.bias_strength)
    return render_phantom(anatomy_map, 0, flat)

def check_sample(sample):
    """ raise ContractError listing every violated phantom invariant"""

    bad = []
    labels = _labels(sample.anatomy_map)
    img = sample.image.values
    if sample.image.value_range != 'hu':
        bad.append('image is not tagged hu')
    if labels.shape != img.shape:
        bad.append('image %s and map %s shapes differ' % (img.shape, labels.shape))
    else:
        for label, (lo, hi) in LABEL_BANDS.items():
            vals = img[labels == label]
            if vals.size == 0:
                bad.append('label %s missing' % (LABEL_NAMES[label]))
            elif vals.min() < lo - 1e-6 or vals.max() > hi + 1e-6:
                bad.append('%s values [%g, %g] leave [%g, %g]' % (LABEL_NAMES[label], vals.min(), vals.max(), lo, hi))
        u, v = _coords(labels.shape)
        bx, by, brx, bry = sample.spec.body
        body = _ellipse_rho(u, v, bx, by, brx, bry) <= 1.0
        if np.any((labels != BACKGROUND) & ~body):
            bad.append('labels outside the body outline')
        lung_masks = [_lung_mask(u, v, l) for l in sample.spec.lungs]
        hx, hy, hrx, hry = sample.spec.heart
        heart = _ellipse_rho(u, v, hx, hy, hrx, hry) <= 1.0
        if not all(np.any(heart & m) for m in lung_masks):
            bad.append('heart does not overlap both medial lung borders')
    if bad:
        raise ContractError('phantom sample %d: %s' % (sample.spec.seed, '; '.join(bad)))
    return True

def to_window(img, preset):
    """ clamp an HU image to the window and map it affinely onto [0, 1]"""

    if not isinstance(img, ImageGrid) or img.value_range != 'hu':
        raise InvalidArgumentError('to_window needs an hu-tagged image')
    v = np.clip(img.values, preset.low, preset.high)
    return ImageGrid((v - preset.low) / preset.width, 'unit')

def normalize_for_model(img):
    """ HU [-1000, 1000] -> [-1, 1]; returns (image, number of clamped pixels)"""

    if not isinstance(img, ImageGrid) or img.value_range != 'hu':
        raise InvalidArgumentError('normalize_for_model needs an hu-tagged image')
    v = img.values
    clamped = int(np.count_nonzero((v < HU_MIN) | (v > HU_MAX)))
    return ImageGrid(np.clip(v, HU_MIN, HU_MAX) / HU_MAX, 'normalized'), clamped

def denormalize(img):
    """ [-1, 1] -> HU; the inverse of normalize_for_model"""

    if isinstance(img, ImageGrid):
        if img.value_range != 'normalized':
            raise InvalidArgumentError('denormalize needs a normalized image')
        return ImageGrid(img.values * HU_MAX, 'hu')
    return np.asarray(img, dtype=np.float64) * HU_MAX

def derive_seeds(master_seed, index):
    """ (anatomy seed, texture seed) of sample index under a master seed"""

    s = np.random.SeedSequence([int(master_seed), int(index)]).generate_state(2, dtype=np.uint64)
    return int(s[0]), int(s[1])

def make_sample(anatomy_seed, texture_seed, shape, config=None):
    spec, amap = gen_anatomy(anatomy_seed, shape)
    return PhantomSample(amap, render_phantom(amap, texture_seed, config), spec, int(texture_seed))

def build_dataset(count, shape, seed, out_dir, config=None, logger=None):
    """ write count phantoms and a manifest; returns the manifest dict

    Files are image_NNNNN.imgf (HU) and map_NNNNN.imgf (labels) plus
    manifest.json; everything follows from the master seed.
    """

    from .formats import write_image, write_text

    if isinstance(count, bool) or int(count) < 1:
        raise InvalidArgumentError('%r: dataset count must be >= 1' % (count,))
    shape = _check_shape(shape)
    config = config or PhantomConfig()
    try:
        os.makedirs(out_dir, exist_ok=True)
    except OSError as e:
        raise StorageError('%s: cannot create dataset directory - %s' % (out_dir, e), path=out_dir)

    entries = []
    for index in range(int(count)):
        anatomy_seed, texture_seed = derive_seeds(seed, index)
        sample = make_sample(anatomy_seed, texture_seed, shape, config)
        check_sample(sample)
        image_name = 'image_%05d.imgf' % (index)
        map_name = 'map_%05d.imgf' % (index)
        for name, grid in ((image_name, sample.image), (map_name, sample.anatomy_map)):
            path = os.path.join(out_dir, name)
            try:
                write_image(path, grid)
            except (IOError, OSError) as e:
                raise StorageError('%s: write failed for sample %d - %s' % (path, index, e), path=path, index=index)
        entries.append({
            'index': index,
            'anatomy_seed': anatomy_seed,
            'texture_seed': texture_seed,
            'image': image_name,
            'map': map_name,
            'anatomy_hash': anatomy_hash(sample.anatomy_map),
        })
        if logger and (index + 1) % 100 == 0:
            logger.info('phantom: %d/%d samples', index + 1, count)

    manifest = {
        'version': 1,
        'count': int(count),
        'shape': list(shape),
        'master_seed': int(seed),
        'phantom': config.to_dict(),
        'samples': entries,
    }
    write_text(os.path.join(out_dir, 'manifest.json'), json.dumps(manifest, indent=4, sort_keys=True) + '\n')
    return manifest

def load_dataset(manifest_path):
    """ (HU images (N, H, W), manifest) from a dataset manifest"""

    import yaml
    from .formats import read_image

    try:
        with open(manifest_path, 'r') as f:
            manifest = yaml.safe_load(f.read())
    except (IOError, OSError) as e:
        raise StorageError('%s: dataset manifest unreadable - %s' % (manifest_path, e), path=manifest_path)
    except yaml.YAMLError as e:
        raise InvalidArgumentError('%s: dataset manifest does not parse - %s' % (manifest_path, e))
    if not isinstance(manifest, dict) or not isinstance(manifest.get('samples') or [], list):
        raise InvalidArgumentError('%s: dataset manifest must be a mapping with a samples list' % (manifest_path))
    base = os.path.dirname(os.path.abspath(manifest_path))
    images = []
    for i, entry in enumerate(manifest.get('samples') or []):
        name = entry.get('image') if isinstance(entry, dict) else None
        if not isinstance(name, str):
            raise InvalidArgumentError('%s: sample %d names no image file' % (manifest_path, i))
        grid = read_image(os.path.join(base, name))
        if grid.value_range != 'hu':
            raise InvalidArgumentError('%s: dataset image is not tagged hu' % (name))
        if images and grid.shape != images[0].shape:
            raise InvalidArgumentError('%s: shape %s differs from %s' % (name, grid.shape, images[0].shape))
        images.append(grid.values)
    if not images:
        raise InvalidArgumentError('%s: dataset manifest lists no samples' % (manifest_path))
    return np.stack(images), manifest
