""" binary artifact formats: IMGF images, VSCH schedules, DNSR checkpoints

All formats are little-endian, start with four magic bytes and a u32 format
version, and are documented byte by byte in FORMATS.md. Every format has
bytes-level dumps_*/loads_* and file-level write_*/read_* functions; writers
hold an exclusive advisory lock on the target file while writing.
"""

import fcntl
import json
import os
import struct

import numpy as np

from .exceptions import (FormatError, BadMagicError, UnsupportedVersionError, TruncatedFileError,
                         ShapeOverflowError, InvalidArgumentError, NumericError, StorageError)
from .grid import ImageGrid, VALUE_RANGES
from .schedule import KINDS, VarianceSchedule

VERSION = 1

IMGF_MAGIC = b'IMGF'
VSCH_MAGIC = b'VSCH'
DNSR_MAGIC = b'DNSR'

IMGF_HEADER = struct.Struct('<4sIIIB')
VSCH_HEADER = struct.Struct('<4sIIB')
DNSR_HEADER = struct.Struct('<4sII')
U32 = struct.Struct('<I')

MAX_SIDE = 1 << 16
MAX_PIXELS = 1 << 28
MAX_STEPS = 1 << 24
MAX_DESCRIPTOR = 1 << 20
MAX_PARAMS = 1 << 30

_TAGS = {v: k for k, v in VALUE_RANGES.items()}
_KINDS = {v: k for k, v in KINDS.items()}

def _header(data, header, magic, what):
    if len(data) < 4 or data[:4] != magic:
        raise BadMagicError('%s: bad magic %r (expected %r)' % (what, bytes(data[:4]), magic))
    if len(data) < header.size:
        raise TruncatedFileError('%s: header needs %d bytes, got %d' % (what, header.size, len(data)))
    fields = header.unpack_from(data, 0)
    version = fields[1]
    if version < 1 or version > VERSION:
        raise UnsupportedVersionError('%s: format version %d is not supported (this reader handles %d)' % (what, version, VERSION))
    return fields

def _payload(data, offset, count, itemsize, what):
    need = offset + count * itemsize
    if len(data) < need:
        raise TruncatedFileError('%s: payload needs %d bytes, got %d' % (what, need, len(data)))
    if len(data) > need:
        raise FormatError('%s: %d trailing bytes after the payload' % (what, len(data) - need))

def _f32(values, what):
    a = np.asarray(values, dtype=np.float64)
    with np.errstate(over='ignore'):
        f = a.astype('<f4')
    if not np.all(np.isfinite(f)):
        raise NumericError('%s: values do not fit in f32' % (what))
    return f

def dumps_image(img):
    """ IMGF bytes of an ImageGrid; pixels are stored as f32"""

    pixels = _f32(img.values, 'imgf')
    return IMGF_HEADER.pack(IMGF_MAGIC, VERSION, img.width, img.height, VALUE_RANGES[img.value_range]) + pixels.tobytes()

def loads_image(data):
    _, _, width, height, tag = _header(data, IMGF_HEADER, IMGF_MAGIC, 'imgf')
    if width < 1 or height < 1 or width > MAX_SIDE or height > MAX_SIDE or width * height > MAX_PIXELS:
        raise ShapeOverflowError('imgf: impossible shape %dx%d' % (width, height))
    if tag not in _TAGS:
        raise FormatError('imgf: unknown value-range tag %d' % (tag))
    _payload(data, IMGF_HEADER.size, width * height, 4, 'imgf')
    pixels = np.frombuffer(data, dtype='<f4', count=width * height, offset=IMGF_HEADER.size)
    return ImageGrid(pixels.astype(np.float64).reshape(height, width), _TAGS[tag])

def dumps_schedule(sched):
    """ VSCH bytes: the betas as f64; derived arrays are recomputed on load"""

    return VSCH_HEADER.pack(VSCH_MAGIC, VERSION, sched.T, KINDS[sched.kind]) + np.asarray(sched.betas, dtype='<f8').tobytes()

def loads_schedule(data):
    _, _, T, kind = _header(data, VSCH_HEADER, VSCH_MAGIC, 'vsch')
    if T < 1 or T > MAX_STEPS:
        raise ShapeOverflowError('vsch: impossible step count %d' % (T))
    if kind not in _KINDS:
        raise FormatError('vsch: unknown schedule kind %d' % (kind))
    _payload(data, VSCH_HEADER.size, T, 8, 'vsch')
    betas = np.frombuffer(data, dtype='<f8', count=T, offset=VSCH_HEADER.size)
    return VarianceSchedule.from_betas(betas.astype(np.float64), _KINDS[kind])

def dumps_checkpoint(descriptor, params):
    """ DNSR bytes: JSON architecture descriptor, then f32 parameters"""

    desc = json.dumps(descriptor, sort_keys=True, separators=(',', ':')).encode('utf-8')
    p = _f32(np.asarray(params).reshape(-1), 'dnsr')
    return DNSR_HEADER.pack(DNSR_MAGIC, VERSION, len(desc)) + desc + U32.pack(p.size) + p.tobytes()

def loads_checkpoint(data):
    """ (descriptor dict, f32 parameter vector)"""

    _, _, desc_len = _header(data, DNSR_HEADER, DNSR_MAGIC, 'dnsr')
    if desc_len > MAX_DESCRIPTOR:
        raise ShapeOverflowError('dnsr: descriptor length %d is impossible' % (desc_len))
    offset = DNSR_HEADER.size
    if len(data) < offset + desc_len + U32.size:
        raise TruncatedFileError('dnsr: descriptor cut short')
    try:
        descriptor = json.loads(bytes(data[offset:offset + desc_len]).decode('utf-8'))
    except ValueError as e:
        raise FormatError('dnsr: descriptor does not decode - %s' % (e))
    if not isinstance(descriptor, dict):
        raise FormatError('dnsr: descriptor must be a JSON object')
    offset += desc_len
    (count,) = U32.unpack_from(data, offset)
    offset += U32.size
    if count > MAX_PARAMS:
        raise ShapeOverflowError('dnsr: parameter count %d is impossible' % (count))
    _payload(data, offset, count, 4, 'dnsr')
    params = np.frombuffer(data, dtype='<f4', count=count, offset=offset).copy()
    return descriptor, params

def _lock_write(path, data):
    fd = os.open(path, os.O_WRONLY | os.O_CREAT, 0o644)
    try:
        fcntl.flock(fd, fcntl.LOCK_EX)
        os.ftruncate(fd, 0)
        view = memoryview(data)
        while view:
            n = os.write(fd, view)
            view = view[n:]
        fcntl.flock(fd, fcntl.LOCK_UN)
    finally:
        os.close(fd)

def write_bytes(path, data):
    try:
        _lock_write(path, data)
    except (IOError, OSError) as e:
        raise StorageError('%s: write failed - %s' % (path, e), path=path)

def write_text(path, text):
    write_bytes(path, text.encode('utf-8'))

def read_bytes(path):
    try:
        with open(path, 'rb') as f:
            fcntl.flock(f.fileno(), fcntl.LOCK_SH)
            try:
                return f.read()
            finally:
                fcntl.flock(f.fileno(), fcntl.LOCK_UN)
    except (IOError, OSError) as e:
        raise StorageError('%s: read failed - %s' % (path, e), path=path)

def _read(path, loads):
    data = read_bytes(path)
    try:
        return loads(data)
    except FormatError as e:
        raise type(e)('%s: %s' % (path, e))

def write_image(path, img):
    write_bytes(path, dumps_image(img))

def read_image(path):
    return _read(path, loads_image)

def write_schedule(path, sched):
    write_bytes(path, dumps_schedule(sched))

def read_schedule(path):
    return _read(path, loads_schedule)

def write_checkpoint(path, descriptor, params):
    write_bytes(path, dumps_checkpoint(descriptor, params))

def read_checkpoint(path):
    return _read(path, loads_checkpoint)

def save_model(path, net, **extra):
    """ checkpoint a SmallDenoiserNet; extra keys land in the descriptor"""

    descriptor = dict(net.descriptor)
    descriptor['seed'] = net.seed
    descriptor.update(extra)
    write_checkpoint(path, descriptor, net.get_parameters())

def load_model(path):
    """ rebuild a SmallDenoiserNet from a DNSR checkpoint"""

    from .network import SmallDenoiserNet

    descriptor, params = read_checkpoint(path)
    arch = {k: descriptor[k] for k in ('kind', 'shape', 'widths', 'time_dim', 'activation') if k in descriptor}
    try:
        net = SmallDenoiserNet(arch, seed=int(descriptor.get('seed', 0)))
        net.set_parameters(params)
    except (InvalidArgumentError, TypeError, ValueError, OverflowError) as e:
        raise FormatError('%s: checkpoint does not describe a usable model - %s' % (path, e))
    return net

def dumps_pgm(img):
    """ 8-bit binary PGM (P5) of a [0, 1] image"""

    if img.value_range not in ('unit', 'binary'):
        raise FormatError('pgm export needs a [0, 1] image, got %s' % (img.value_range))
    pixels = np.rint(np.clip(img.values, 0.0, 1.0) * 255.0).astype(np.uint8)
    return ('P5\n%d %d\n255\n' % (img.width, img.height)).encode('ascii') + pixels.tobytes()

def write_pgm(path, img):
    write_bytes(path, dumps_pgm(img))
