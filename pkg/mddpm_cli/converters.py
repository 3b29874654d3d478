"""mddpm via command line - flag value converters"""

class ConverterError(Exception):
    """ errors for converters"""

def convert_int(flag, value, minimum=None):
    """a flag value to an integer, optionally bounded below"""
    try:
        n = int(value)
    except (TypeError, ValueError):
        raise ConverterError('%s=%s: not an integer' % (flag, value))
    if minimum is not None and n < minimum:
        raise ConverterError('%s=%s: must be >= %d' % (flag, value, minimum))
    return n

def convert_seed(flag, value):
    """seeds are explicit non-negative 64-bit integers"""
    n = convert_int(flag, value, 0)
    if n >= 2**64:
        raise ConverterError('%s=%s: seed must fit in 64 bits' % (flag, value))
    return n

def convert_int_list(flag, value, minimum=None):
    """'4,8,16' to [4, 8, 16]"""
    items = [v.strip() for v in str(value).split(',') if v.strip() != '']
    if not items:
        raise ConverterError('%s: empty list' % (flag))
    return [convert_int(flag, v, minimum) for v in items]

def convert_seed_range(flag, value):
    """'K' is one seed, 'K:N' is N seeds K..K+N-1, 'a,b,c' is a list"""
    s = str(value)
    if ':' in s:
        first, count = s.split(':', 1)
        first = convert_seed(flag, first)
        return [first + i for i in range(convert_int(flag, count, 1))]
    return [convert_seed(flag, v) for v in convert_int_list(flag, s)]

def convert_size(flag, value):
    """'64' or '64x48' (width x height) to (height, width)"""
    s = str(value).lower()
    if 'x' in s:
        w, h = s.split('x', 1)
        return (convert_int(flag, h, 1), convert_int(flag, w, 1))
    n = convert_int(flag, s, 1)
    return (n, n)

def convert_windows(flag, value, presets):
    """comma separated window names, each a known preset"""
    names = [v.strip() for v in str(value).split(',') if v.strip() != '']
    if not names:
        raise ConverterError('%s: no windows given' % (flag))
    for name in names:
        if name not in presets:
            raise ConverterError('%s=%s: unknown window (known: %s)' % (flag, name, ', '.join(sorted(presets))))
    return names
