#!/usr/bin/env python
"""mddpm via command line"""

import sys
import getopt
import json

import numpy as np

my_yaml = None
my_jsonlines = None

import mddpm
from mddpm.exceptions import MDDPMError, EXIT_CONFIG
from mddpm.phantom import window_presets
from mddpm.utils import version_string
from .dump import dump_commands
from . import converters

# command -> flags it takes; flags listed in required must be given
COMMANDS = {
    'phantom gen': {
        'flags': ['count=', 'size=', 'seed=', 'out='],
        'required': ['count', 'size', 'seed', 'out'],
        'help': 'generate a procedural phantom dataset (HU images, label maps, manifest)',
    },
    'train': {
        'flags': ['config='],
        'required': ['config'],
        'help': 'train the configured denoiser; writes checkpoint, loss CSV and run record',
    },
    'sample': {
        'flags': ['config=', 'guidance=', 'count=', 'seed=', 'out=', 'checkpoint=', 'jobs='],
        'required': ['config', 'count'],
        'help': 'unconditional or guided sampling; chain i uses seed K+i (default K and guidance from the config)',
    },
    'eval': {
        'flags': ['generated=', 'reference=', 'out=', 'config=', 'extractor-seed=', 'window='],
        'required': ['generated', 'reference', 'out'],
        'help': 'SSIM matrix, set-level SSIM and Frechet distance; writes REPORT.json and REPORT.csv',
    },
    'export': {
        'flags': ['image=', 'windows=', 'out=', 'config='],
        'required': ['image', 'out'],
        'help': 'one 8-bit PGM per HU window',
    },
    'sweep': {
        'flags': ['config=', 'reference=', 'factors=', 'stops=', 'seeds=', 'checkpoint=', 'out='],
        'required': ['config', 'reference', 'factors', 'stops', 'seeds'],
        'help': 'guided sampling over filter factors and stop-times; mean SSIM per cell',
    },
    'reference': {
        'flags': [],
        'required': [],
        'help': 'print the Markdown reference of every command and flag',
    },
}

USAGE = ('usage: mddpm '
         + '[-V|--version] [-h|--help] [-v|--verbose] [-q|--quiet] '
         + '[-j|--json] [-y|--yaml] [-n|--ndjson] '
         + 'command [--flag value ...]\n'
         + 'commands: ' + ', '.join(sorted(COMMANDS)))

def load_and_check_yaml():
    """ load_and_check_yaml() """
    from . import myyaml
    global my_yaml
    my_yaml = myyaml.myyaml()
    if not my_yaml.available():
        sys.exit('mddpm: install yaml support')

def plain(results):
    """ numpy scalars and arrays to plain python, for every output format"""
    if isinstance(results, dict):
        return {str(k): plain(v) for k, v in results.items()}
    if isinstance(results, (list, tuple)):
        return [plain(v) for v in results]
    if isinstance(results, np.ndarray):
        return results.tolist()
    if isinstance(results, np.generic):
        return results.item()
    return results

def write_results(results, output):
    """dump the results"""

    if output is None:
        return

    results = plain(results)
    if output == 'json':
        results = json.dumps(results, indent=4, sort_keys=True, ensure_ascii=False)
    elif output == 'yaml':
        results = my_yaml.safe_dump(results)
    elif output == 'ndjson':
        try:
            writer = my_jsonlines.Writer(sys.stdout)
            writer.write_all(results if isinstance(results, list) else [results])
            writer.close()
        except (BrokenPipeError, IOError):
            pass
        return

    if results:
        try:
            sys.stdout.write(results)
            if not results.endswith('\n'):
                sys.stdout.write('\n')
        except (BrokenPipeError, IOError):
            pass

def split_command(args):
    """ the command words and what follows them"""
    if len(args) >= 2 and ' '.join(args[:2]) in COMMANDS:
        return ' '.join(args[:2]), args[2:]
    if len(args) >= 1 and args[0] in COMMANDS:
        return args[0], args[1:]
    return None, args

def parse_flags(command, args):
    """ --flag value pairs of one command, checked against its table entry"""

    spec = COMMANDS[command]
    try:
        opts, rest = getopt.getopt(args, '', spec['flags'])
    except getopt.GetoptError as e:
        raise converters.ConverterError('%s: %s' % (command, e))
    if rest:
        raise converters.ConverterError('%s: unexpected arguments %s' % (command, ' '.join(rest)))
    flags = {opt[2:]: arg for opt, arg in opts}
    missing = [f for f in spec['required'] if f not in flags]
    if missing:
        raise converters.ConverterError('%s: missing --%s' % (command, ' --'.join(missing)))
    return flags

def _facade(flags, verbose):
    if 'config' in flags:
        return mddpm.MDDPM.from_config_file(flags['config'], debug=verbose)
    return mddpm.MDDPM(debug=verbose)

def run_command(command, args, verbose=False):
    """run one command; returns its machine-readable summary"""

    flags = parse_flags(command, args)
    if command == 'reference':
        return dump_commands(COMMANDS, USAGE)

    md = _facade(flags, verbose)
    if command == 'phantom gen':
        size = converters.convert_size('--size', flags['size'])
        return md.phantom_gen(converters.convert_int('--count', flags['count'], 1), size,
                              converters.convert_seed('--seed', flags['seed']), flags['out'])
    if command == 'train':
        return md.train()
    if command == 'sample':
        seed = flags.get('seed')
        return md.sample(converters.convert_int('--count', flags['count'], 1),
                         None if seed is None else converters.convert_seed('--seed', seed),
                         guidance=flags.get('guidance'),
                         out_dir=flags.get('out'),
                         checkpoint=flags.get('checkpoint'),
                         jobs=converters.convert_int('--jobs', flags.get('jobs', '1'), 1))
    if command == 'eval':
        seed = flags.get('extractor-seed')
        return md.evaluate(flags['generated'], flags['reference'], flags['out'],
                           extractor_seed=None if seed is None else converters.convert_seed('--extractor-seed', seed),
                           window=flags.get('window'))
    if command == 'export':
        presets = md.config.windows if md.config is not None and md.config.windows else window_presets()
        windows = converters.convert_windows('--windows', flags.get('windows', 'full,lung,bone,soft-tissue'), presets)
        return md.export(flags['image'], windows, flags['out'])
    if command == 'sweep':
        return md.sweep(flags['reference'],
                        converters.convert_int_list('--factors', flags['factors'], 1),
                        converters.convert_int_list('--stops', flags['stops'], 1),
                        converters.convert_seed_range('--seeds', flags['seeds']),
                        checkpoint=flags.get('checkpoint'),
                        out=flags.get('out'))
    raise converters.ConverterError('%s: unknown command' % (command))

def do_it(args):
    """mddpm via command line; returns the exit code"""

    verbose = False
    output = 'json'

    try:
        opts, args = getopt.getopt(args,
                                   'Vhvqjyn',
                                   [
                                       'version',
                                       'help', 'verbose', 'quiet', 'json', 'yaml', 'ndjson',
                                   ])
    except getopt.GetoptError:
        sys.stderr.write(USAGE + '\n')
        return EXIT_CONFIG
    for opt, _ in opts:
        if opt in ('-V', '--version'):
            sys.stdout.write('mddpm library version: %s\n' % (version_string()))
            return 0
        if opt in ('-h', '--help'):
            sys.stdout.write(USAGE + '\n')
            return 0
        elif opt in ('-v', '--verbose'):
            verbose = True
        elif opt in ('-q', '--quiet'):
            output = None
        elif opt in ('-j', '--json'):
            output = 'json'
        elif opt in ('-y', '--yaml'):
            load_and_check_yaml()
            output = 'yaml'
        elif opt in ('-n', '--ndjson'):
            from . import myjsonlines
            global my_jsonlines
            my_jsonlines = myjsonlines.myjsonlines()
            if not my_jsonlines.available():
                sys.exit('mddpm: install jsonlines support')
            output = 'ndjson'

    command, rest = split_command(args)
    if command is None:
        sys.stderr.write(USAGE + '\n')
        return EXIT_CONFIG

    try:
        results = run_command(command, rest, verbose)
    except converters.ConverterError as e:
        sys.stderr.write('mddpm: %s\n' % (e))
        return EXIT_CONFIG
    except MDDPMError as e:
        sys.stderr.write('mddpm: %s - %d %s\n' % (command, int(e), e))
        for evalue in e:
            sys.stderr.write('mddpm:     %d %s\n' % (int(evalue), evalue))
        return e.exit_code
    except KeyboardInterrupt:
        sys.stderr.write('mddpm: %s - Interrupted\n' % (command))
        return 1

    if command == 'reference':
        if output is not None:
            sys.stdout.write(results)
        return 0
    write_results(results, output)
    return 0

def mddpm_cli(args):
    """mddpm via command line"""

    sys.exit(do_it(args))
