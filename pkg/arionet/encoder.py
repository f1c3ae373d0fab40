# arionet - self-supervised birdsong representation toolkit
# encoder Library
# Copyright(C) 2026 arionet contributors
#
# Released under the MIT License - https://opensource.org/licenses/MIT
#

""" encoder

    Transformer encoder over chromagram sequences with a projection head.

        chroma (12 x T) -> transpose -> linear 12->d_model
            -> + sinusoidal positions -> N post-norm blocks
            -> mean over time (h) -> d_model->d_model->proj_dim head (u)
            -> unit length (u_unit)

    Every block is multi-head self-attention, residual, layer norm, then a
    ReLU feed-forward layer, residual, layer norm. Dropout acts on the
    attention output and the feed-forward output during training only.

    The block helpers are shared with the temporal predictor.
"""

import logging
from collections import OrderedDict
from dataclasses import dataclass

import numpy as np

from arionet import tensorengine as te
from arionet.errors import ConfigError, ShapeError
from arionet.tensorengine import Tensor

log = logging.getLogger(__name__)


@dataclass
class EncoderConfig:
    blocks: int = 4
    heads: int = 4
    d_model: int = 128
    ffn_dim: int = 512
    proj_dim: int = 256
    dropout: float = 0.2
    input_dim: int = 12
    use_positional: bool = True
    dtype: str = 'float32'

    def validate(self):
        for name in ('blocks', 'heads', 'd_model', 'ffn_dim', 'proj_dim',
                     'input_dim'):
            if getattr(self, name) < 1:
                raise ConfigError(f'{name} must be positive, '
                                  f'got {getattr(self, name)}')
        if self.d_model % self.heads:
            raise ConfigError(f'd_model {self.d_model} is not divisible by '
                              f'{self.heads} heads')
        if not 0 <= self.dropout < 1:
            raise ConfigError(f'dropout must be in [0, 1), got {self.dropout}')
        return self


@dataclass(eq=False)
class EncoderOutput:
    """ Pooled embedding h, projection u and its unit-length version """
    h: np.ndarray
    u: np.ndarray
    u_unit: np.ndarray


def positional_encoding(length: int, d_model: int) -> np.ndarray:
    """ Sinusoidal position table, length x d_model.
        PE(t, 2i) = sin(t / 10000^(2i/d)), PE(t, 2i+1) = cos(same angle)

        Usage
        -----
        >>> positional_encoding(1, 4)
        array([[0., 1., 0., 1.]])
    """
    pos = np.arange(length)[:, None]
    rates = 10000.0 ** (np.arange(0, d_model, 2) / d_model)
    angles = pos / rates
    pe = np.zeros((length, d_model))
    pe[:, 0::2] = np.sin(angles)
    pe[:, 1::2] = np.cos(angles[:, :d_model // 2])
    return pe


def init_linear(params: OrderedDict, prefix: str, fan_in: int, fan_out: int,
                rng: np.random.Generator, dtype='float64'):
    """ Xavier-uniform weight <prefix>.w and zero bias <prefix>.b """
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    params[f'{prefix}.w'] = te.parameter(
        rng.uniform(-limit, limit, (fan_in, fan_out)).astype(dtype),
        f'{prefix}.w')
    params[f'{prefix}.b'] = te.parameter(np.zeros(fan_out, dtype=dtype),
                                         f'{prefix}.b')


def init_norm(params: OrderedDict, prefix: str, size: int, dtype='float64'):
    params[f'{prefix}.g'] = te.parameter(np.ones(size, dtype=dtype),
                                         f'{prefix}.g')
    params[f'{prefix}.b'] = te.parameter(np.zeros(size, dtype=dtype),
                                         f'{prefix}.b')


def init_block(params: OrderedDict, prefix: str, d_model: int, ffn_dim: int,
               rng: np.random.Generator, dtype='float64'):
    for proj in ('q', 'k', 'v', 'o'):
        init_linear(params, f'{prefix}.attn.{proj}', d_model, d_model, rng,
                    dtype)
    init_norm(params, f'{prefix}.ln1', d_model, dtype)
    init_linear(params, f'{prefix}.ff1', d_model, ffn_dim, rng, dtype)
    init_linear(params, f'{prefix}.ff2', ffn_dim, d_model, rng, dtype)
    init_norm(params, f'{prefix}.ln2', d_model, dtype)


def linear(x, params, prefix: str) -> Tensor:
    return x @ params[f'{prefix}.w'] + params[f'{prefix}.b']


def norm(x, params, prefix: str) -> Tensor:
    return te.layer_norm(x, params[f'{prefix}.g'], params[f'{prefix}.b'])


def multi_head_attention(x, params, prefix: str, heads: int,
                         return_weights: bool = False):
    """ Scaled dot-product self-attention with `heads` heads.

        x: Tensor, T x d_model or B x T x d_model

        params: dict holding <prefix>.{q,k,v,o}.{w,b}

        return: Tensor shaped like x, plus the B x heads x T x T weights
            array when return_weights is set
    """
    x = te.as_tensor(x)
    single = x.ndim == 2
    if single:
        x = x.reshape(1, *x.shape)
    if x.ndim != 3:
        raise ShapeError(f'attention input must be T x d or B x T x d, '
                         f'got {x.shape}')
    batch, length, d_model = x.shape
    if params[f'{prefix}.q.w'].shape[0] != d_model:
        raise ShapeError(f'attention input {x.shape} does not match '
                         f'projection {params[f"{prefix}.q.w"].shape}')
    if d_model % heads:
        raise ShapeError(f'd_model {d_model} not divisible by {heads} heads')
    d_head = d_model // heads

    def split(t):
        return t.reshape(batch, length, heads, d_head).transpose(0, 2, 1, 3)

    q = split(linear(x, params, f'{prefix}.q'))
    k = split(linear(x, params, f'{prefix}.k'))
    v = split(linear(x, params, f'{prefix}.v'))
    scores = (q @ te.swap_last(k)) * (1.0 / np.sqrt(d_head))
    weights = te.softmax(scores)
    context = (weights @ v).transpose(0, 2, 1, 3).reshape(batch, length,
                                                           d_model)
    out = linear(context, params, f'{prefix}.o')
    if single:
        out = out.reshape(length, d_model)
    if return_weights:
        return out, weights.data
    return out


def transformer_block(x, params, prefix: str, heads: int, dropout: float,
                      rng=None, training: bool = False) -> Tensor:
    """ Post-norm attention and feed-forward sublayers """
    attn = te.dropout(multi_head_attention(x, params, f'{prefix}.attn', heads),
                      dropout, rng, training)
    x = norm(x + attn, params, f'{prefix}.ln1')
    ff = linear(te.relu(linear(x, params, f'{prefix}.ff1')), params,
                f'{prefix}.ff2')
    ff = te.dropout(ff, dropout, rng, training)
    return norm(x + ff, params, f'{prefix}.ln2')


def as_batch(chroma, rows: int = 12) -> np.ndarray:
    """ rows x T or B x rows x T array as B x rows x T """
    arr = np.asarray(chroma)
    if arr.ndim == 2:
        arr = arr[None]
    if arr.ndim != 3 or arr.shape[1] != rows:
        raise ShapeError(f'expected {rows} x T or B x {rows} x T chroma, '
                         f'got {arr.shape}')
    if arr.shape[2] == 0:
        raise ShapeError('chromagram has no frames')
    return arr


class Encoder:
    """ Chromagram encoder plus projection head.

        cfg: EncoderConfig

        seed: int, weight initialisation seed

        Usage
        -----
        >>> enc = Encoder(EncoderConfig(), seed=7)
        >>> out = enc.encode(chroma)
        >>> out.h.shape, out.u_unit.shape
        ((128,), (256,))
    """

    def __init__(self, cfg: EncoderConfig = None, seed: int = 0):
        self.cfg = (cfg or EncoderConfig()).validate()
        rng = np.random.default_rng(seed)
        dtype = self.cfg.dtype
        self.params = OrderedDict()
        init_linear(self.params, 'enc.embed', self.cfg.input_dim,
                    self.cfg.d_model, rng, dtype)
        for i in range(self.cfg.blocks):
            init_block(self.params, f'enc.block{i}', self.cfg.d_model,
                       self.cfg.ffn_dim, rng, dtype)
        init_linear(self.params, 'proj.fc1', self.cfg.d_model,
                    self.cfg.d_model, rng, dtype)
        init_linear(self.params, 'proj.fc2', self.cfg.d_model,
                    self.cfg.proj_dim, rng, dtype)

    def forward(self, chroma, training: bool = False, rng=None):
        """ Differentiable pass over a batch.

            chroma: np.ndarray, B x 12 x T (or 12 x T)

            return: tuple of Tensors (h, u, u_unit), each with a leading
                batch axis
        """
        batch = as_batch(chroma, self.cfg.input_dim)
        x = Tensor(np.transpose(batch, (0, 2, 1)).astype(self.cfg.dtype))
        x = linear(x, self.params, 'enc.embed')
        if self.cfg.use_positional:
            pe = positional_encoding(batch.shape[2], self.cfg.d_model)
            x = x + Tensor(pe.astype(self.cfg.dtype))
        for i in range(self.cfg.blocks):
            x = transformer_block(x, self.params, f'enc.block{i}',
                                  self.cfg.heads, self.cfg.dropout, rng,
                                  training)
        h = x.mean(axis=1)
        u = linear(te.relu(linear(h, self.params, 'proj.fc1')), self.params,
                   'proj.fc2')
        return h, u, te.l2_normalize(u)

    def encode(self, chroma) -> EncoderOutput:
        """ Eval-mode embedding of one chromagram (12 x T) or a batch """
        single = np.asarray(chroma).ndim == 2
        h, u, u_unit = self.forward(chroma, training=False)
        if single:
            return EncoderOutput(h.data[0], u.data[0], u_unit.data[0])
        return EncoderOutput(h.data, u.data, u_unit.data)

    def save(self, path):
        te.save_checkpoint(self.params, path)

    @classmethod
    def load(cls, path, cfg: EncoderConfig = None):
        """ Encoder of the given shape holding the weights stored at path.
            Raise CheckpointMismatchError when cfg does not match them.
        """
        enc = cls(cfg)
        te.load_into(enc.params, te.load_checkpoint(path), strict=True)
        return enc
