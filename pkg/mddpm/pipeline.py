""" the MDDPM object - every command the CLI offers, as library calls"""

import csv
import io
import os
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .exceptions import InvalidArgumentError, StorageError
from .formats import read_image, write_schedule, save_model, load_model, write_text, dumps_image, write_pgm
from .grid import ImageGrid
from .guidance import load_guidance_manifest, sample_guided, sweep_guidance
from .diffusion import sample_unconditional
from .logging_helper import MDlogger
from .metrics import FeatureExtractor, compare_sets
from .network import SmallDenoiserNet
from .phantom import (PhantomConfig, build_dataset, load_dataset, normalize_for_model, denormalize,
                      labels_to_hu, to_window, window_presets, HU_MIN, HU_MAX)
from .read_configs import validate_config
from .training import train as train_loop
from .utils import RunRecord, atomic_write, config_hash, dumps_json, sha256_file

CHECKPOINT_NAME = 'checkpoint.dnsr'
SCHEDULE_NAME = 'schedule.vsch'
LOSS_NAME = 'loss.csv'

def _csv_text(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator='\n')
    w.writerow(header)
    for row in rows:
        w.writerow(row)
    return buf.getvalue()

def _mkdir(path):
    try:
        os.makedirs(path, exist_ok=True)
    except OSError as e:
        raise StorageError('%s: cannot create directory - %s' % (path, e), path=path)

def read_image_set(directory, window='full', presets=None):
    """ (names, (N, H, W) [0, 1] images) of every hu- or unit-tagged IMGF file in a directory"""

    presets = presets or window_presets()
    if window not in presets:
        raise InvalidArgumentError('%s: unknown window' % (window))
    try:
        names = sorted(n for n in os.listdir(directory) if n.endswith('.imgf'))
    except OSError as e:
        raise StorageError('%s: cannot list directory - %s' % (directory, e), path=directory)
    kept = []
    images = []
    for name in names:
        img = read_image(os.path.join(directory, name))
        if img.value_range == 'hu':
            images.append(to_window(img, presets[window]).values)
        elif img.value_range == 'unit':
            images.append(img.values)
        else:
            continue
        kept.append(name)
    if not images:
        raise InvalidArgumentError('%s: no hu or unit images found' % (directory))
    return kept, np.stack(images)

def load_condition_image(path):
    """ a normalized [-1, 1] image from an IMGF file (hu, labels or normalized)"""

    img = read_image(path)
    if img.value_range == 'labels':
        img = labels_to_hu(img)
    if img.value_range == 'hu':
        img, _ = normalize_for_model(img)
    if img.value_range != 'normalized':
        raise InvalidArgumentError('%s: %s images cannot condition sampling' % (path, img.value_range))
    return img

class MDDPM(object):
    """ phantom generation, training, sampling, evaluation and export"""

    def __init__(self, config=None, debug=False):
        """ config is an ExperimentConfig (or None for commands that need none)"""

        self.config = config
        verbose = debug or (config is not None and config.verbose)
        self.logger = MDlogger(verbose).getLogger() if verbose else None

    @classmethod
    def from_config_file(cls, path, debug=False):
        return cls(validate_config(path), debug=debug)

    def _need_config(self, what):
        if self.config is None:
            raise InvalidArgumentError('%s needs an experiment config' % (what))
        return self.config

    def phantom_gen(self, count, size, seed, out_dir, config=None):
        """ write a phantom dataset; returns a summary"""

        if config is None:
            config = self.config.phantom if self.config is not None else PhantomConfig()
        started = time.perf_counter()
        manifest = build_dataset(count, size, seed, out_dir, config, self.logger)
        if self.logger:
            self.logger.info('phantom: %d samples in %.2fs', count, time.perf_counter() - started)
        return {
            'command': 'phantom gen',
            'count': manifest['count'],
            'shape': manifest['shape'],
            'seed': manifest['master_seed'],
            'manifest': os.path.join(out_dir, 'manifest.json'),
        }

    def _dataset_images(self, cfg):
        if cfg.dataset is None:
            raise InvalidArgumentError('train needs a dataset manifest in the config')
        path = cfg.dataset
        if os.path.isdir(path):
            path = os.path.join(path, 'manifest.json')
        images, _ = load_dataset(path)
        normalized = np.stack([normalize_for_model(ImageGrid(v, 'hu'))[0].values for v in images])
        return normalized, path

    def train(self):
        """ train the configured model on the configured dataset

        Writes checkpoint.dnsr, intermediate checkpoint_NNNNNN.dnsr files,
        schedule.vsch, loss.csv and run_train.json into the output directory.
        """

        cfg = self._need_config('train')
        _mkdir(cfg.output)
        started = time.perf_counter()
        dataset, dataset_path = self._dataset_images(cfg)
        sched = cfg.schedule()
        net = SmallDenoiserNet(cfg.model, seed=cfg.seeds['master'])
        if self.logger:
            self.logger.info('train: %r on %d images, T=%d %s', net, dataset.shape[0], sched.T, sched.kind)

        def checkpoint_fn(step, model):
            save_model(os.path.join(cfg.output, 'checkpoint_%06d.dnsr' % (step)), model, step=step)

        net, trace = train_loop(net, dataset, cfg.train, sched, self.logger, checkpoint_fn)

        checkpoint = os.path.join(cfg.output, CHECKPOINT_NAME)
        save_model(checkpoint, net, step=cfg.train.steps)
        schedule_path = os.path.join(cfg.output, SCHEDULE_NAME)
        write_schedule(schedule_path, sched)
        loss_path = os.path.join(cfg.output, LOSS_NAME)
        write_text(loss_path, _csv_text(['step', 'loss'], [(s, '%.17g' % (v)) for s, v in trace]))

        record = RunRecord('train', config_hash(cfg.source) if cfg.source else None)
        record.add_artifact('checkpoint', checkpoint)
        record.add_artifact('schedule', schedule_path)
        record.add_artifact('loss', loss_path)
        record.add_artifact('dataset', dataset_path)
        record.metrics = {'final_loss': trace[-1][1], 'steps': cfg.train.steps, 'parameters': net.parameter_count}
        record.timings = {'train_seconds': time.perf_counter() - started}
        record.write(os.path.join(cfg.output, 'run_train.json'))
        return {
            'command': 'train',
            'checkpoint': checkpoint,
            'loss_csv': loss_path,
            'final_loss': trace[-1][1],
            'steps': cfg.train.steps,
            'parameters': net.parameter_count,
        }

    def load_checkpoint(self, checkpoint=None):
        cfg = self._need_config('sampling')
        path = checkpoint or os.path.join(cfg.output, CHECKPOINT_NAME)
        return load_model(path), path

    def _sample_one(self, net, sched, shape, seed, guidance_set):
        if guidance_set is None:
            x = sample_unconditional(net, sched, shape, seed, self.logger)
        else:
            x = sample_guided(net, sched, guidance_set, shape, seed, logger=self.logger)
        hu = np.clip(denormalize(np.asarray(x)), HU_MIN, HU_MAX)
        return ImageGrid(hu, 'hu')

    def sample(self, count, seed=None, guidance=None, out_dir=None, checkpoint=None, jobs=1):
        """ count chains with seeds seed, seed+1, ...; each image is stored in HU
        next to a provenance record; chains may run on a thread pool

        seed defaults to seeds.sample and guidance to the config's guidance
        manifest; guidance=False samples unguided regardless.
        """

        cfg = self._need_config('sample')
        if seed is None:
            seed = cfg.seeds['sample']
        if guidance is None:
            guidance = cfg.guidance
        elif guidance is False:
            guidance = None
        if isinstance(count, bool) or int(count) < 1:
            raise InvalidArgumentError('%r: sample count must be >= 1' % (count,))
        net, checkpoint = self.load_checkpoint(checkpoint)
        sched = cfg.schedule()
        shape = net.input_shape
        guidance_set = None
        guidance_hash = None
        if guidance is not None:
            guidance_set = load_guidance_manifest(guidance, sched, shape)
            guidance_hash = sha256_file(guidance)
        out_dir = out_dir or os.path.join(cfg.output, 'samples')
        _mkdir(out_dir)
        checkpoint_hash = sha256_file(checkpoint)

        def run(index):
            chain_seed = int(seed) + index
            img = self._sample_one(net, sched, shape, chain_seed, guidance_set)
            name = 'sample_%05d' % (index)
            atomic_write(os.path.join(out_dir, name + '.imgf'), dumps_image(img))
            provenance = {
                'index': index,
                'seed': chain_seed,
                'guidance': os.path.basename(guidance) if guidance else None,
                'guidance_sha256': guidance_hash,
                'checkpoint_sha256': checkpoint_hash,
                'schedule': {'kind': sched.kind, 'T': sched.T},
            }
            atomic_write(os.path.join(out_dir, name + '.json'), dumps_json(provenance).encode('utf-8'))
            if self.logger:
                self.logger.info('sample: chain %d (seed %d) done', index, chain_seed)
            return name + '.imgf'

        started = time.perf_counter()
        if jobs and jobs > 1:
            with ThreadPoolExecutor(max_workers=int(jobs)) as pool:
                names = list(pool.map(run, range(int(count))))
        else:
            names = [run(i) for i in range(int(count))]

        record = RunRecord('sample', config_hash(cfg.source) if cfg.source else None)
        for name in names:
            record.add_artifact(name, os.path.join(out_dir, name))
        record.metrics = {'count': int(count), 'seed': int(seed), 'guided': guidance is not None}
        record.timings = {'sample_seconds': time.perf_counter() - started}
        record.write(os.path.join(out_dir, 'run_sample.json'))
        return {
            'command': 'sample',
            'count': int(count),
            'seed': int(seed),
            'guidance_sha256': guidance_hash,
            'out': out_dir,
            'images': names,
        }

    def evaluate(self, generated_dir, reference_dir, out, extractor_seed=None, window=None):
        """ SSIM matrix, set-SSIM and Frechet distance; writes out.json and out.csv"""

        presets = self.config.windows if self.config is not None and self.config.windows else window_presets()
        if extractor_seed is None:
            extractor_seed = self.config.extractor_seed if self.config is not None else 0
        if window is None:
            window = self.config.eval_window if self.config is not None else 'full'
        gen_names, gen = read_image_set(generated_dir, window, presets)
        ref_names, ref = read_image_set(reference_dir, window, presets)
        result = compare_sets(gen, ref, FeatureExtractor(extractor_seed))

        report = {
            'set_ssim': result['set_ssim'],
            'mean_ssim': result['mean_ssim'],
            'frechet': result['frechet'],
            'extractor_seed': int(extractor_seed),
            'window': window,
            'generated': gen_names,
            'reference': ref_names,
            'generated_regularized': result['generated_regularized'],
            'reference_regularized': result['reference_regularized'],
        }
        base = out[:-5] if out.endswith('.json') else out
        parent = os.path.dirname(os.path.abspath(base))
        _mkdir(parent)
        write_text(base + '.json', dumps_json(report))
        rows = [(g, r, '%.17g' % (result['pairs'][i, j])) for i, g in enumerate(gen_names) for j, r in enumerate(ref_names)]
        write_text(base + '.csv', _csv_text(['generated', 'reference', 'ssim'], rows))
        if self.logger:
            self.logger.info('eval: set ssim %.4f frechet %.6g', report['set_ssim'], report['frechet'])
        return dict(report, command='eval', json=base + '.json', csv=base + '.csv')

    def export(self, image_path, windows, out_dir):
        """ one 8-bit PGM per requested window, named <stem>_<window>.pgm"""

        presets = self.config.windows if self.config is not None and self.config.windows else window_presets()
        unknown = [w for w in windows if w not in presets]
        if unknown:
            raise InvalidArgumentError('unknown window(s): %s' % (', '.join(unknown)))
        img = read_image(image_path)
        if img.value_range == 'labels':
            img = labels_to_hu(img)
        elif img.value_range == 'normalized':
            img = denormalize(img)
        _mkdir(out_dir)
        stem = os.path.splitext(os.path.basename(image_path))[0]
        written = []
        for w in windows:
            path = os.path.join(out_dir, '%s_%s.pgm' % (stem, w))
            write_pgm(path, to_window(img, presets[w]))
            written.append(path)
        return {'command': 'export', 'image': image_path, 'files': written}

    def sweep(self, reference_path, factors, stops, seeds, checkpoint=None, out=None):
        """ guided sampling over (n, a); mean SSIM to the reference per cell"""

        cfg = self._need_config('sweep')
        net, _ = self.load_checkpoint(checkpoint)
        sched = cfg.schedule()
        ref = load_condition_image(reference_path)
        bad = [a for a in stops if not 1 <= a <= sched.T]
        if bad:
            raise InvalidArgumentError('stop-times %s lie outside [1, %d]' % (bad, sched.T))
        rows = sweep_guidance(net, sched, ref.values, factors, stops, seeds, logger=self.logger)
        if out:
            base = out[:-5] if out.endswith('.json') else out
            _mkdir(os.path.dirname(os.path.abspath(base)))
            write_text(base + '.json', dumps_json({'rows': rows, 'reference': os.path.basename(reference_path)}))
            write_text(base + '.csv', _csv_text(['n', 'a', 'mean_ssim'], [(r['n'], r['a'], '%.17g' % (r['mean_ssim'])) for r in rows]))
        return {'command': 'sweep', 'rows': rows}
