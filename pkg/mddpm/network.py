""" Network for mddpm - small trainable noise predictors"""

import math

import numpy as np
import torch
from torch import nn

from .denoiser import DenoiserModel
from .exceptions import InvalidArgumentError

ACTIVATIONS = {
    'silu': nn.SiLU,
    'relu': nn.ReLU,
    'tanh': nn.Tanh,
}

DEFAULT_DESCRIPTORS = {
    'unet': {'kind': 'unet', 'shape': [64, 64], 'widths': [12, 24, 48], 'time_dim': 64, 'activation': 'silu'},
    'mlp': {'kind': 'mlp', 'shape': [1, 1], 'widths': [64, 64], 'time_dim': 64, 'activation': 'silu'},
}

def sinusoidal_embedding(t, dim):
    """ standard sinusoidal embedding of (float) step indices, shape (B, dim)"""

    half = dim // 2
    freqs = torch.exp(-math.log(10000.0) * torch.arange(half, dtype=t.dtype) / half)
    args = t.reshape(-1, 1) * freqs.reshape(1, -1)
    emb = torch.cat([torch.sin(args), torch.cos(args)], dim=1)
    if dim % 2:
        emb = torch.cat([emb, torch.zeros_like(emb[:, :1])], dim=1)
    return emb

class _Block(nn.Module):
    """ two 3x3 convolutions with the time embedding added in between"""

    def __init__(self, c_in, c_out, time_dim, activation):
        super().__init__()
        self.conv1 = nn.Conv2d(c_in, c_out, 3, padding=1)
        self.conv2 = nn.Conv2d(c_out, c_out, 3, padding=1)
        self.time = nn.Linear(time_dim, c_out)
        self.act = ACTIVATIONS[activation]()

    def forward(self, x, emb):
        h = self.act(self.conv1(x))
        h = h + self.time(emb)[:, :, None, None]
        return self.act(self.conv2(h))

class UNetEps(nn.Module):
    """ 3-level convolutional encoder-decoder with skip connections"""

    def __init__(self, widths=(12, 24, 48), time_dim=64, activation='silu'):
        super().__init__()
        c1, c2, c3 = widths
        self.time_dim = time_dim
        self.time_mlp = nn.Sequential(nn.Linear(time_dim, time_dim), ACTIVATIONS[activation]())
        self.inc = nn.Conv2d(1, c1, 3, padding=1)
        self.enc1 = _Block(c1, c1, time_dim, activation)
        self.down1 = nn.Conv2d(c1, c2, 3, stride=2, padding=1)
        self.enc2 = _Block(c2, c2, time_dim, activation)
        self.down2 = nn.Conv2d(c2, c3, 3, stride=2, padding=1)
        self.mid = _Block(c3, c3, time_dim, activation)
        self.up2 = nn.ConvTranspose2d(c3, c2, 2, stride=2)
        self.dec2 = _Block(2 * c2, c2, time_dim, activation)
        self.up1 = nn.ConvTranspose2d(c2, c1, 2, stride=2)
        self.dec1 = _Block(2 * c1, c1, time_dim, activation)
        self.out = nn.Conv2d(c1, 1, 3, padding=1)

    def forward(self, x, t):
        emb = self.time_mlp(sinusoidal_embedding(t, self.time_dim))
        h0 = self.inc(x[:, None])
        h1 = self.enc1(h0, emb)
        h2 = self.enc2(self.down1(h1), emb)
        h3 = self.mid(self.down2(h2), emb)
        u2 = self.dec2(torch.cat([self.up2(h3), h2], dim=1), emb)
        u1 = self.dec1(torch.cat([self.up1(u2), h1], dim=1), emb)
        return self.out(u1)[:, 0]

class MLPEps(nn.Module):
    """ multilayer perceptron on the flattened grid plus the time embedding"""

    def __init__(self, dim, widths=(64, 64), time_dim=64, activation='silu'):
        super().__init__()
        self.time_dim = time_dim
        layers = []
        c = dim + time_dim
        for w in widths:
            layers += [nn.Linear(c, w), ACTIVATIONS[activation]()]
            c = w
        layers.append(nn.Linear(c, dim))
        self.net = nn.Sequential(*layers)

    def forward(self, x, t):
        b = x.shape[0]
        emb = sinusoidal_embedding(t, self.time_dim)
        return self.net(torch.cat([x.reshape(b, -1), emb], dim=1)).reshape(x.shape)

def check_descriptor(descriptor):
    """ fill defaults and validate an architecture descriptor"""

    if not isinstance(descriptor, dict) or str(descriptor.get('kind')) not in DEFAULT_DESCRIPTORS:
        raise InvalidArgumentError('architecture descriptor needs kind unet or mlp')
    d = dict(DEFAULT_DESCRIPTORS[descriptor['kind']])
    d.update(descriptor)
    try:
        d['shape'] = [int(s) for s in d['shape']]
        d['widths'] = [int(w) for w in d['widths']]
        d['time_dim'] = int(d['time_dim'])
    except (TypeError, ValueError, OverflowError):
        raise InvalidArgumentError('shape %r, widths %r and time_dim %r must be integers'
                                   % (d['shape'], d['widths'], d['time_dim']))
    if len(d['shape']) != 2 or min(d['shape']) < 1:
        raise InvalidArgumentError('%r: shape must be [height, width]' % (d['shape'],))
    if str(d['activation']) not in ACTIVATIONS:
        raise InvalidArgumentError('%s: unknown activation' % (d['activation']))
    if d['time_dim'] < 2 or min(d['widths'] or [0]) < 1:
        raise InvalidArgumentError('widths and time_dim must be positive')
    if d['kind'] == 'unet':
        if len(d['widths']) != 3:
            raise InvalidArgumentError('unet needs exactly three widths')
        if d['shape'][0] % 4 or d['shape'][1] % 4:
            raise InvalidArgumentError('%r: unet shape must be divisible by 4' % (d['shape'],))
    return d

class SmallDenoiserNet(DenoiserModel):
    """ trainable eps predictor; float64 torch module behind the model contract"""

    def __init__(self, descriptor, seed=0):
        self.descriptor = check_descriptor(descriptor)
        self.input_shape = tuple(self.descriptor['shape'])
        self.seed = int(seed)
        d = self.descriptor
        with torch.random.fork_rng(devices=[]):
            torch.manual_seed(self.seed)
            if d['kind'] == 'unet':
                module = UNetEps(d['widths'], d['time_dim'], d['activation'])
            else:
                module = MLPEps(int(np.prod(self.input_shape)), d['widths'], d['time_dim'], d['activation'])
        self.module = module.double()

    @property
    def parameter_count(self):
        return sum(p.numel() for p in self.module.parameters())

    def forward(self, x, t):
        """ torch forward for (B, H, W) inputs and (B,) steps"""
        return self.module(x, t.to(x.dtype))

    def evaluate(self, x_t, t):
        x = np.asarray(x_t, dtype=np.float64)
        lead = x.shape[:-2]
        batch = x.reshape((-1,) + x.shape[-2:])
        tt = np.broadcast_to(np.asarray(t, dtype=np.float64), lead).reshape(-1) if lead else np.asarray(t, dtype=np.float64).reshape(1)
        with torch.no_grad():
            out = self.forward(torch.from_numpy(np.ascontiguousarray(batch)), torch.from_numpy(np.ascontiguousarray(tt)))
        return out.numpy().reshape(x.shape)

    def get_parameters(self):
        """ flat float64 copy of every parameter, in module order"""
        with torch.no_grad():
            return torch.cat([p.reshape(-1) for p in self.module.parameters()]).numpy().copy()

    def set_parameters(self, vector):
        """ load a flat parameter vector (any float dtype)"""

        vector = np.asarray(vector, dtype=np.float64).reshape(-1)
        if vector.size != self.parameter_count:
            raise InvalidArgumentError('parameter vector has %d entries, architecture needs %d' % (vector.size, self.parameter_count))
        offset = 0
        with torch.no_grad():
            for p in self.module.parameters():
                n = p.numel()
                p.copy_(torch.from_numpy(vector[offset:offset + n].copy()).reshape(p.shape))
                offset += n

    def __repr__(self):
        return 'SmallDenoiserNet(%s, %s, %d params)' % (self.descriptor['kind'], self.input_shape, self.parameter_count)
