# arionet - self-supervised birdsong representation toolkit
# temporal Library
# Copyright(C) 2026 arionet contributors
#
# Released under the MIT License - https://opensource.org/licenses/MIT
#

""" temporal

    Future-frame prediction on chromagrams. A context of t frames goes
    through a small transformer; the last k hidden states are mapped by a
    linear head to the k frames that follow the context. Trained with a
    batch-mean squared error and early stopping on a held-out share of
    the segments.
"""

import logging
from collections import OrderedDict
from dataclasses import dataclass

import numpy as np
import pandas as pd
from tqdm import tqdm

from arionet import tensorengine as te
from arionet.dspcore import Chromagram
from arionet.encoder import (as_batch, init_block, init_linear, linear,
                             positional_encoding, transformer_block)
from arionet.errors import ConfigError, DataError
from arionet.evaltools import cosine_similarity
from arionet.mlutils import split_indices
from arionet.tensorengine import Tensor

log = logging.getLogger(__name__)


@dataclass
class TemporalConfig:
    blocks: int = 2
    heads: int = 2
    d_model: int = 64
    ffn_dim: int = 256
    dropout: float = 0.1
    context_len: int = 12
    horizon: int = 1
    lr: float = 1e-4
    batch_size: int = 32
    epochs: int = 300
    patience: int = 20
    min_delta: float = 1e-5
    val_fraction: float = 0.1
    stride: int = 0
    dtype: str = 'float32'

    def validate(self):
        for name in ('blocks', 'heads', 'd_model', 'ffn_dim', 'context_len',
                     'horizon', 'batch_size', 'patience'):
            if getattr(self, name) < 1:
                raise ConfigError(f'{name} must be positive, '
                                  f'got {getattr(self, name)}')
        if self.d_model % self.heads:
            raise ConfigError(f'd_model {self.d_model} is not divisible by '
                              f'{self.heads} heads')
        if self.horizon > self.context_len:
            raise ConfigError(f'horizon {self.horizon} exceeds context '
                              f'length {self.context_len}')
        return self


def split_context_target(c, t: int, k: int, start: int = 0):
    """ Context columns [start, start+t) and target columns
        [start+t, start+t+k) of a 12 x T chromagram.

        Raise DataError when T < start+t+k.

        Usage
        -----
        >>> ctx, tgt = split_context_target(np.zeros((12, 25)), 12, 1)
        >>> ctx.shape, tgt.shape
        ((12, 12), (12, 1))
    """
    e = c.energies if isinstance(c, Chromagram) else np.asarray(c)
    if t < 1 or k < 1:
        raise DataError(f'context length and horizon must be >= 1, '
                        f'got t={t}, k={k}')
    frames = e.shape[1]
    if frames < start + t + k:
        raise DataError(f'chromagram has T={frames} frames, needs '
                        f't+k={t + k} (t={t}, k={k}) from frame {start}')
    return e[:, start:start + t], e[:, start + t:start + t + k]


def training_pairs(chromas, t: int, k: int, stride: int = 0):
    """ Context/target stacks from a list of chromagrams. stride 0 takes
        one pair at the start of every chromagram; a positive stride
        slides the pair along each one.

        return: tuple (N x 12 x t, N x 12 x k) arrays
    """
    contexts, targets = [], []
    for c in chromas:
        frames = np.asarray(c).shape[1]
        starts = [0] if stride <= 0 else range(0, frames - t - k + 1, stride)
        for s in starts:
            ctx, tgt = split_context_target(c, t, k, s)
            contexts.append(ctx)
            targets.append(tgt)
    if not contexts:
        return np.zeros((0, 12, t)), np.zeros((0, 12, k))
    return np.stack(contexts), np.stack(targets)


class TemporalPredictor:
    """ Small transformer with a linear 12-way prediction head.
        Parameter names are prefixed 'tmp.'.
    """

    def __init__(self, cfg: TemporalConfig = None, seed: int = 0):
        self.cfg = (cfg or TemporalConfig()).validate()
        rng = np.random.default_rng(seed)
        dtype = self.cfg.dtype
        self.params = OrderedDict()
        init_linear(self.params, 'tmp.embed', 12, self.cfg.d_model, rng, dtype)
        for i in range(self.cfg.blocks):
            init_block(self.params, f'tmp.block{i}', self.cfg.d_model,
                       self.cfg.ffn_dim, rng, dtype)
        init_linear(self.params, 'tmp.head', self.cfg.d_model, 12, rng, dtype)

    def forward(self, context, training: bool = False, rng=None) -> Tensor:
        """ B x 12 x k predictions as a differentiable Tensor """
        batch = as_batch(context)
        t = batch.shape[2]
        k = self.cfg.horizon
        if t < k:
            raise DataError(f'context of {t} frames is shorter than '
                            f'horizon {k}')
        x = Tensor(np.transpose(batch, (0, 2, 1)).astype(self.cfg.dtype))
        x = linear(x, self.params, 'tmp.embed')
        x = x + Tensor(positional_encoding(t, self.cfg.d_model).astype(
            self.cfg.dtype))
        for i in range(self.cfg.blocks):
            x = transformer_block(x, self.params, f'tmp.block{i}',
                                  self.cfg.heads, self.cfg.dropout, rng,
                                  training)
        last = x[:, t - k:, :]
        return linear(last, self.params, 'tmp.head').transpose(0, 2, 1)

    def predict(self, context) -> np.ndarray:
        """ Eval-mode prediction clamped to [0, 1]; 12 x k for a single
            context, B x 12 x k for a batch.
        """
        single = np.asarray(context).ndim == 2
        out = np.clip(self.forward(context, training=False).data, 0.0, 1.0)
        return out[0] if single else out

    def save(self, path):
        te.save_checkpoint(self.params, path)

    @classmethod
    def load(cls, path, cfg: TemporalConfig = None):
        model = cls(cfg)
        te.load_into(model.params, te.load_checkpoint(path), strict=True)
        return model


def mse(pred, target) -> Tensor:
    """ Sum of squared errors divided by the batch size """
    pred = te.as_tensor(pred)
    diff = pred - te.as_tensor(target)
    return (diff * diff).sum() * (1.0 / pred.shape[0])


def _val_metrics(model, contexts, targets):
    pred = model.predict(contexts)
    diff = pred - targets
    frames_pred = np.transpose(pred, (0, 2, 1)).reshape(-1, 12)
    frames_true = np.transpose(targets, (0, 2, 1)).reshape(-1, 12)
    cos = np.mean([cosine_similarity(a, b)
                   for a, b in zip(frames_pred, frames_true)])
    return (float((diff ** 2).sum() / pred.shape[0]), float(cos),
            float(np.abs(diff).mean()))


def _snapshot(params):
    return {name: p.data.copy() for name, p in params.items()}


def train_temporal(store, cfg, progress: bool = True):
    """ Trains a TemporalPredictor on the store's chromagrams.

        store: FeatureStore

        cfg: RunConfig

        return: tuple (TemporalPredictor holding the best-validation
            weights, trace DataFrame with epoch, train_mse, val_mse,
            val_cosine, val_mae)
    """
    tcfg = cfg.temporal_config().validate()
    rng = np.random.default_rng(cfg.seed)
    chromas = [np.asarray(c, dtype=np.float64) for c in store.chromas()]
    if not chromas:
        raise DataError('feature store has no records')
    train_idx, val_idx = split_indices(len(chromas), tcfg.val_fraction, rng)
    t, k = tcfg.context_len, tcfg.horizon
    x_train, y_train = training_pairs([chromas[i] for i in train_idx], t, k,
                                      tcfg.stride)
    x_val, y_val = training_pairs([chromas[i] for i in val_idx], t, k,
                                  tcfg.stride)
    model = TemporalPredictor(tcfg, seed=cfg.seed)
    count = x_train.shape[0]
    batch_size = tcfg.batch_size
    if batch_size > count:
        log.warning('batch size %d exceeds %d training pairs, using %d',
                    batch_size, count, count)
        batch_size = count
    state = te.OptimState(lr=tcfg.lr, gamma=1.0)
    params = model.params
    best, best_weights, stale = np.inf, None, 0
    rows = []
    epochs = tqdm(range(1, tcfg.epochs + 1), desc='temporal',
                  disable=not progress)
    for epoch in epochs:
        order = rng.permutation(count)
        total = 0.0
        for start in range(0, count, batch_size):
            idx = order[start:start + batch_size]
            loss = mse(model.forward(x_train[idx], training=True, rng=rng),
                       y_train[idx])
            te.zero_grads(params)
            loss.backward()
            te.adam_step(params, state)
            total += float(loss.data) * len(idx)
        train_mse = total / count
        if x_val.shape[0]:
            val_mse, val_cos, val_mae = _val_metrics(model, x_val, y_val)
            monitored = val_mse
        else:
            val_mse = val_cos = val_mae = np.nan
            monitored = train_mse
        rows.append((epoch, train_mse, val_mse, val_cos, val_mae))
        epochs.set_postfix(val_mse=f'{monitored:.5f}')
        # any improvement is kept; only one beyond min_delta resets patience
        stale = 0 if monitored < best - tcfg.min_delta else stale + 1
        if monitored < best:
            best, best_weights = monitored, _snapshot(params)
        if stale >= tcfg.patience:
            log.info('early stop at epoch %d, best monitored mse %.6f',
                     epoch, best)
            break
    if best_weights is not None:
        for name, data in best_weights.items():
            params[name].data = data
    te.zero_grads(params)
    trace = pd.DataFrame(rows, columns=['epoch', 'train_mse', 'val_mse',
                                        'val_cosine', 'val_mae'])
    return model, trace


def predict_store(model: TemporalPredictor, store):
    """ Predicts the frames after the first context of every segment.

        return: tuple (originals, predictions), both N x 12 x k
    """
    cfg = model.cfg
    contexts, targets = training_pairs(
        [np.asarray(c, dtype=np.float64) for c in store.chromas()],
        cfg.context_len, cfg.horizon)
    return targets, model.predict(contexts)
