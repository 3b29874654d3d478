""" the simple eps loss and the training loop"""

from dataclasses import dataclass, asdict

import numpy as np
import torch

from .exceptions import InvalidArgumentError, NumericError
from .grid import NoiseStream, as_array, check_same_shape
from .diffusion import q_sample

@dataclass(frozen=True)
class TrainConfig:
    """ training hyper-parameters; all pinned so runs are reproducible"""

    batch_size: int = 16
    steps: int = 2000
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0
    checkpoint_interval: int = 500
    log_interval: int = 200

    def __post_init__(self):
        bad = []
        for name in ('batch_size', 'steps', 'checkpoint_interval', 'log_interval'):
            if int(getattr(self, name)) < 1:
                bad.append((name, 'must be positive'))
        # zero is allowed
        if not self.learning_rate >= 0.0:
            bad.append(('learning_rate', 'must be >= 0'))
        for name in ('beta1', 'beta2'):
            if not 0.0 < getattr(self, name) < 1.0:
                bad.append((name, 'must lie in (0, 1)'))
        if not self.eps > 0.0:
            bad.append(('eps', 'must be positive'))
        if self.seed < 0:
            bad.append(('seed', 'must be explicit and non-negative'))
        if bad:
            raise InvalidArgumentError('invalid train config: %s' % (', '.join('%s %s' % b for b in bad)),
                                       [{'code': 1001, 'message': '%s %s' % b} for b in bad])

    def to_dict(self):
        return asdict(self)

def _per_sample_sq_norm(diff):
    return diff.reshape(diff.shape[0], -1).pow(2).sum(dim=1) if isinstance(diff, torch.Tensor) \
        else np.sum(diff.reshape(diff.shape[0], -1) ** 2, axis=1)

def loss_terms(model, x0, t, eps, sched):
    """ per-sample squared L2 distance between eps and the model's prediction"""

    x0 = as_array(x0)
    eps = as_array(eps)
    check_same_shape('loss_simple', x0, eps)
    t = np.asarray(t)
    if t.ndim != 1 or t.shape[0] != x0.shape[0]:
        raise InvalidArgumentError('t batch has shape %s, expected (%d,)' % (t.shape, x0.shape[0]))
    x_t = q_sample(x0, t, eps, sched)
    pred = as_array(model(x_t, t))
    return _per_sample_sq_norm(eps - pred)

def loss_simple(model, x0, t, eps, sched):
    """ mean over the batch of ||eps - eps_theta(x_t, t)||^2"""

    return float(np.mean(loss_terms(model, x0, t, eps, sched)))

def loss_simple_torch(net, x0, t, eps, sched):
    """ differentiable loss for a SmallDenoiserNet; inputs are numpy batches"""

    x0 = as_array(x0)
    eps = as_array(eps)
    check_same_shape('loss_simple', x0, eps)
    x_t = q_sample(x0, np.asarray(t), eps, sched)
    pred = net.forward(torch.from_numpy(np.ascontiguousarray(x_t)), torch.from_numpy(np.asarray(t, dtype=np.float64)))
    return _per_sample_sq_norm(torch.from_numpy(np.ascontiguousarray(eps)) - pred).mean()

def draw_batch(stream, dataset, batch_size, T):
    """ one training batch: indices, then steps uniform in 1..T, then eps"""

    idx = stream.integers(0, dataset.shape[0], size=batch_size)
    t = stream.integers(1, T + 1, size=batch_size)
    eps = stream.normal((batch_size,) + dataset.shape[1:])
    return dataset[idx], t, eps

def train(model, dataset, cfg, sched, logger=None, checkpoint_fn=None):
    """ standard DDPM training: batch, uniform t, eps, Adam on the simple loss

    Returns (model, trace) where trace is a list of (step, mean loss) pairs,
    one per log interval. checkpoint_fn(step, model) is called every
    checkpoint_interval steps.
    """

    dataset = np.asarray(dataset, dtype=np.float64)
    if dataset.ndim < 2 or dataset.shape[0] < 1:
        raise InvalidArgumentError('training dataset is empty')
    if tuple(dataset.shape[1:]) != tuple(model.input_shape):
        raise InvalidArgumentError('dataset images %s do not match model shape %s' % (dataset.shape[1:], model.input_shape))

    stream = NoiseStream(cfg.seed)
    optimizer = torch.optim.Adam(model.module.parameters(), lr=cfg.learning_rate,
                                 betas=(cfg.beta1, cfg.beta2), eps=cfg.eps)
    trace = []
    window = []
    model.module.train()
    for step in range(1, cfg.steps + 1):
        x0, t, eps = draw_batch(stream, dataset, cfg.batch_size, sched.T)
        loss = loss_simple_torch(model, x0, t, eps, sched)
        value = float(loss.item())
        if not np.isfinite(value):
            raise NumericError('training diverged at step %d (loss %r)' % (step, value), step=step)
        optimizer.zero_grad()
        loss.backward()
        optimizer.step()
        window.append(value)

        if step % cfg.log_interval == 0 or step == cfg.steps:
            mean = float(np.mean(window))
            trace.append((step, mean))
            window = []
            if logger:
                logger.info('train: step %d/%d loss %.6f', step, cfg.steps, mean)
        if checkpoint_fn is not None and step % cfg.checkpoint_interval == 0:
            checkpoint_fn(step, model)
    model.module.eval()
    return model, trace

def gradient_check(net, x0, t, eps, sched, count=100, seed=0, h=1e-5):
    """ autograd gradients of the simple loss vs central finite differences

    Returns (max relative error, rows) with one (index, analytic, numeric)
    row per checked parameter. Relative error is |a - n| / max(|a|, |n|, 1e-6).
    """

    net.module.zero_grad()
    loss = loss_simple_torch(net, x0, t, eps, sched)
    loss.backward()
    analytic = torch.cat([p.grad.reshape(-1) for p in net.module.parameters()]).numpy().copy()
    net.module.zero_grad()

    base = net.get_parameters()
    picks = NoiseStream(seed).generator.choice(base.size, size=min(count, base.size), replace=False)
    rows = []
    worst = 0.0
    try:
        for i in sorted(int(p) for p in picks):
            plus = base.copy()
            plus[i] += h
            net.set_parameters(plus)
            with torch.no_grad():
                lp = float(loss_simple_torch(net, x0, t, eps, sched))
            minus = base.copy()
            minus[i] -= h
            net.set_parameters(minus)
            with torch.no_grad():
                lm = float(loss_simple_torch(net, x0, t, eps, sched))
            numeric = (lp - lm) / (2.0 * h)
            rel = abs(analytic[i] - numeric) / max(abs(analytic[i]), abs(numeric), 1e-6)
            worst = max(worst, rel)
            rows.append((i, float(analytic[i]), numeric))
    finally:
        net.set_parameters(base)
    return worst, rows
