""" misc utilities for mddpm - hashes, run records and atomic finalize"""

import hashlib
import json
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .exceptions import StorageError
from .formats import read_bytes, write_bytes, write_text

TIMINGS_SUFFIX = '.timings.json'

def version_string():
    """ misc utilities for mddpm"""
    return ('mddpm/' + __version__ + '/' +
            'numpy/' + np.__version__ + '/' +
            'python/' + '.'.join(map(str, sys.version_info[:3]))
           )

def sha256_bytes(data):
    return hashlib.sha256(data).hexdigest()

def sha256_file(path):
    return sha256_bytes(read_bytes(path))

def tree_hash(root):
    """ sha256 over every file under root (relative path + contents), timings sidecars excluded"""

    d = hashlib.sha256()
    for dirpath, dirnames, filenames in os.walk(root):
        dirnames.sort()
        for name in sorted(filenames):
            if name.endswith(TIMINGS_SUFFIX):
                continue
            path = os.path.join(dirpath, name)
            rel = os.path.relpath(path, root).replace(os.sep, '/')
            d.update(rel.encode('utf-8') + b'\0')
            d.update(sha256_file(path).encode('ascii') + b'\n')
    return d.hexdigest()

def atomic_write(path, data):
    """ write under a temporary name in the same directory, then rename into place"""

    tmp = '%s.tmp.%d' % (path, os.getpid())
    write_bytes(tmp, data)
    try:
        os.replace(tmp, path)
    except OSError as e:
        raise StorageError('%s: rename failed - %s' % (path, e), path=path)

def dumps_json(doc):
    """ stable JSON text for manifests and reports"""
    return json.dumps(doc, indent=4, sort_keys=True) + '\n'

@dataclass
class RunRecord:
    """ what a command produced: config hash, artifacts with digests, metric summary

    Wall-clock timings are kept out of the record and written to a sidecar
    file so that records of identical runs are byte-identical.
    """

    command: str
    config_hash: str = None
    artifacts: dict = field(default_factory=dict)
    metrics: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)

    def add_artifact(self, name, path):
        self.artifacts[name] = {'path': os.path.basename(path), 'sha256': sha256_file(path)}

    def to_dict(self):
        return {
            'command': self.command,
            'config_hash': self.config_hash,
            'artifacts': self.artifacts,
            'metrics': self.metrics,
            'version': __version__,
        }

    def write(self, path):
        write_text(path, dumps_json(self.to_dict()))
        if self.timings:
            base = path[:-5] if path.endswith('.json') else path
            write_text(base + TIMINGS_SUFFIX, dumps_json(self.timings))
        return path

def config_hash(path):
    """ sha256 of the config file bytes exactly as stored"""
    return sha256_file(path)
