""" reading and validating the experiment config file"""

import os
import copy
from dataclasses import dataclass, field, replace

import yaml

from .exceptions import ConfigError, InvalidArgumentError
from .network import check_descriptor, DEFAULT_DESCRIPTORS
from .phantom import PhantomConfig, WindowPreset, window_presets
from .schedule import build_schedule
from .training import TrainConfig

SCHEDULE_KINDS = ('linear', 'cosine')

DEFAULTS = {
    'schedule': {'kind': 'cosine', 'T': 1000},
    'train': {
        'batch_size': 16,
        'steps': 2000,
        'learning_rate': 1e-3,
        'beta1': 0.9,
        'beta2': 0.999,
        'eps': 1e-8,
        'checkpoint_interval': 500,
        'log_interval': 200,
    },
    'eval': {'extractor_seed': 0, 'window': 'full'},
}

TOP_KEYS = ('schedule', 'model', 'train', 'guidance', 'dataset', 'seeds', 'output', 'windows', 'phantom', 'eval')
SEED_KEYS = ('master', 'train', 'sample')
PHANTOM_KEYS = ('base_hu', 'amplitude', 'texture', 'texture_sigma', 'bias_strength')

def _is_int(v):
    return isinstance(v, int) and not isinstance(v, bool)

def _is_number(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool)

@dataclass(frozen=True)
class ExperimentConfig:
    """ a fully validated experiment; paths are resolved against the config file"""

    schedule_kind: str
    T: int
    model: dict
    train: TrainConfig
    seeds: dict
    output: str
    guidance: str = None
    dataset: str = None
    windows: dict = field(default_factory=dict)
    phantom: PhantomConfig = field(default_factory=PhantomConfig)
    extractor_seed: int = 0
    eval_window: str = 'full'
    verbose: bool = False
    source: str = None
    raw: dict = field(default_factory=dict)

    def schedule(self):
        return build_schedule(self.schedule_kind, self.T)

    def to_dict(self):
        """ the structure as written (relative paths kept, defaults filled)"""
        return copy.deepcopy(self.raw)

def _section(doc, name, defaults, bad, strict):
    """ defaults overlaid with doc[name]; unknown keys become violations"""

    given = doc.get(name, {})
    if given is None:
        given = {}
    if not isinstance(given, dict):
        bad.append((name, 'must be a mapping'))
        return dict(defaults)
    if strict:
        for k in sorted(given):
            if k not in defaults:
                bad.append(('%s.%s' % (name, k), 'unknown key'))
    out = dict(defaults)
    out.update({k: v for k, v in given.items() if k in defaults})
    return out

def _resolve(base_dir, p):
    if p is None:
        return None
    p = os.path.expanduser(str(p))
    if not os.path.isabs(p):
        p = os.path.join(base_dir, p)
    return os.path.normpath(p)

def parse_config(doc, base_dir='.', strict=True, environ=None):
    """ validate a parsed document; raises one ConfigError listing every violation"""

    environ = os.environ if environ is None else environ
    bad = []
    if doc is None:
        doc = {}
    if not isinstance(doc, dict):
        raise ConfigError('config must be a mapping', [('<root>', 'not a mapping')])
    if strict:
        for k in sorted(doc):
            if k not in TOP_KEYS:
                bad.append((str(k), 'unknown key'))

    schedule = _section(doc, 'schedule', DEFAULTS['schedule'], bad, strict)
    if schedule['kind'] not in SCHEDULE_KINDS:
        bad.append(('schedule.kind', 'must be one of %s' % (', '.join(SCHEDULE_KINDS))))
    if not _is_int(schedule['T']) or schedule['T'] < 2:
        bad.append(('schedule.T', 'must be an integer >= 2, got %r' % (schedule['T'],)))

    model = doc.get('model', DEFAULT_DESCRIPTORS['unet'])
    try:
        model = check_descriptor(dict(model) if isinstance(model, dict) else model)
    except InvalidArgumentError as e:
        bad.append(('model', str(e)))
        model = dict(DEFAULT_DESCRIPTORS['unet'])
    if strict and isinstance(doc.get('model'), dict):
        for k in sorted(doc['model']):
            if k not in DEFAULT_DESCRIPTORS['unet']:
                bad.append(('model.%s' % (k), 'unknown key'))

    train = _section(doc, 'train', DEFAULTS['train'], bad, strict)
    for k in ('batch_size', 'steps', 'checkpoint_interval', 'log_interval'):
        if not _is_int(train[k]) or train[k] < 1:
            bad.append(('train.%s' % (k), 'must be a positive integer'))
    for k in ('learning_rate', 'beta1', 'beta2', 'eps'):
        if not _is_number(train[k]):
            bad.append(('train.%s' % (k), 'must be a number'))
    if _is_number(train['learning_rate']) and train['learning_rate'] < 0:
        bad.append(('train.learning_rate', 'must be >= 0'))
    for k in ('beta1', 'beta2'):
        if _is_number(train[k]) and not 0.0 < train[k] < 1.0:
            bad.append(('train.%s' % (k), 'must lie in (0, 1)'))
    if _is_number(train['eps']) and not train['eps'] > 0:
        bad.append(('train.eps', 'must be positive'))

    seeds = doc.get('seeds')
    if not isinstance(seeds, dict):
        bad.append(('seeds', 'required mapping with master, train and sample'))
        seeds = {}
    else:
        for k in SEED_KEYS:
            if k not in seeds:
                bad.append(('seeds.%s' % (k), 'required'))
            elif not _is_int(seeds[k]) or not 0 <= seeds[k] < 2**64:
                bad.append(('seeds.%s' % (k), 'must be an explicit non-negative integer'))
        if strict:
            for k in sorted(seeds):
                if k not in SEED_KEYS:
                    bad.append(('seeds.%s' % (k), 'unknown key'))

    output = environ.get('MDDPM_OUTPUT') or doc.get('output')
    if not output or not isinstance(output, str):
        bad.append(('output', 'required directory path'))

    paths = {}
    for k in ('guidance', 'dataset'):
        p = doc.get(k)
        if p is None:
            continue
        if not isinstance(p, str):
            bad.append((k, 'must be a path'))
            continue
        paths[k] = _resolve(base_dir, p)
        if not os.path.exists(paths[k]):
            bad.append((k, '%s does not exist' % (paths[k])))

    windows = {}
    wdoc = doc.get('windows') or {}
    if not isinstance(wdoc, dict):
        bad.append(('windows', 'must be a mapping'))
        wdoc = {}
    for name in sorted(wdoc):
        w = wdoc[name]
        if not isinstance(w, dict) or not _is_number(w.get('center')) or not _is_number(w.get('width')):
            bad.append(('windows.%s' % (name), 'needs numeric center and width'))
            continue
        if strict:
            for k in sorted(w):
                if k not in ('center', 'width'):
                    bad.append(('windows.%s.%s' % (name, k), 'unknown key'))
        try:
            WindowPreset(str(name), float(w['center']), float(w['width']))
        except InvalidArgumentError as e:
            bad.append(('windows.%s.width' % (name), str(e)))
    if not bad:
        windows = window_presets(wdoc)

    phantom = PhantomConfig()
    pdoc = doc.get('phantom') or {}
    if not isinstance(pdoc, dict):
        bad.append(('phantom', 'must be a mapping'))
    else:
        if strict:
            for k in sorted(pdoc):
                if k not in PHANTOM_KEYS:
                    bad.append(('phantom.%s' % (k), 'unknown key'))
        try:
            phantom = PhantomConfig.from_dict({k: v for k, v in pdoc.items() if k in PHANTOM_KEYS})
        except (InvalidArgumentError, ValueError, TypeError, AttributeError) as e:
            bad.append(('phantom', str(e)))

    ev = _section(doc, 'eval', DEFAULTS['eval'], bad, strict)
    if not _is_int(ev['extractor_seed']) or ev['extractor_seed'] < 0:
        bad.append(('eval.extractor_seed', 'must be a non-negative integer'))
    if ev['window'] not in window_presets(wdoc if not bad else None):
        bad.append(('eval.window', '%s is not a known window' % (ev['window'])))

    if bad:
        raise ConfigError('%d config violation(s): %s' % (len(bad), '; '.join('%s: %s' % b for b in bad)), bad)

    train_cfg = TrainConfig(seed=seeds['train'], **train)
    raw = {
        'schedule': schedule,
        'model': model,
        'train': train,
        'seeds': {k: seeds[k] for k in SEED_KEYS},
        'output': output,
        'eval': ev,
    }
    for k in ('guidance', 'dataset', 'windows', 'phantom'):
        if doc.get(k) is not None:
            raw[k] = copy.deepcopy(doc[k])

    verbose = str(environ.get('MDDPM_VERBOSE', '')).lower() not in ('', '0', 'false', 'no')
    return ExperimentConfig(
        schedule_kind=schedule['kind'],
        T=schedule['T'],
        model=model,
        train=train_cfg,
        seeds={k: seeds[k] for k in SEED_KEYS},
        output=_resolve(base_dir, output),
        guidance=paths.get('guidance'),
        dataset=paths.get('dataset'),
        windows=windows,
        phantom=phantom,
        extractor_seed=ev['extractor_seed'],
        eval_window=ev['window'],
        verbose=verbose,
        raw=raw,
    )

def validate_config(path, strict=True, environ=None):
    """ read a YAML (or JSON) experiment config and validate every key"""

    try:
        with open(path, 'r') as f:
            text = f.read()
    except (IOError, OSError) as e:
        raise ConfigError('%s: config unreadable - %s' % (path, e), [('<file>', str(e))])
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as e:
        raise ConfigError('%s: config does not parse - %s' % (path, e), [('<file>', 'parse error')])
    cfg = parse_config(doc, os.path.dirname(os.path.abspath(path)), strict, environ)
    return replace(cfg, source=os.path.abspath(path))

def dump_config(cfg):
    """ YAML text of a config; parsing it again gives the same structure"""

    return yaml.safe_dump(cfg.to_dict(), default_flow_style=False, sort_keys=True)
