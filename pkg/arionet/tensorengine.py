# arionet - self-supervised birdsong representation toolkit
# tensorengine Library
# Copyright(C) 2026 arionet contributors
#
# Released under the MIT License - https://opensource.org/licenses/MIT
#

""" tensorengine

    Dense numpy tensors with reverse-mode differentiation, the Adam
    optimizer with exponential learning rate decay, and the ARCK
    checkpoint format.

    Every op returns a new Tensor that remembers its inputs and a rule
    mapping the output gradient to input gradients. backward() on a
    scalar walks that graph once in reverse topological order and adds
    the result into the .grad of every leaf created with
    requires_grad=True.

    A graph belongs to the thread that built it.

    Usage
    -----
    >>> w = Tensor(np.ones((2, 2)), requires_grad=True, name='w')
    >>> loss = (w * w).sum() * 0.5
    >>> loss.backward()
    >>> w.grad
    array([[1., 1.],
           [1., 1.]])
"""

import logging
from collections import OrderedDict
from dataclasses import dataclass, field

import numpy as np

from arionet.binfmt import BinaryReader, BinaryWriter, atomic_write
from arionet.errors import (CheckpointMismatchError, ShapeError,
                            UnsupportedVersionError, FormatError)

log = logging.getLogger(__name__)

CHECKPOINT_MAGIC = b'ARCK'
CHECKPOINT_VERSION = 1


class Tensor:
    """ n-dimensional array node of a differentiation graph

        data: array-like, stored as np.ndarray (float64 unless an
            ndarray of another float type is given)

        requires_grad: bool, leaves only. Non-leaf tensors require a
            gradient when any input does.

        name: str, optional parameter name used by checkpoints
    """

    __array_priority__ = 100

    def __init__(self, data, requires_grad=False, name=None,
                 _parents=(), _backward=None):
        if isinstance(data, np.ndarray) and np.issubdtype(data.dtype,
                                                          np.floating):
            self.data = data
        else:
            self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.name = name
        self._parents = tuple(_parents)
        self._backward = _backward
        self.requires_grad = bool(requires_grad) or any(
            p.requires_grad for p in self._parents)

    def __repr__(self):
        label = f' {self.name!r}' if self.name else ''
        return f'Tensor{label}(shape={self.shape}, dtype={self.data.dtype})'

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def is_leaf(self):
        return not self._parents

    def numpy(self):
        return self.data

    def zero_grad(self):
        self.grad = None

    def backward(self):
        """ Accumulates d(self)/d(leaf) into every leaf that requires a
            gradient. self must hold exactly one value.
        """
        if self.data.size != 1:
            raise ShapeError(
                f'backward needs a scalar loss, got shape {self.shape}')
        order = _topological_order(self)
        grads = {id(self): np.ones_like(self.data)}
        for node in reversed(order):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node.is_leaf:
                if node.requires_grad:
                    node.grad = g.copy() if node.grad is None \
                        else node.grad + g
                continue
            for parent, pg in zip(node._parents, node._backward(g)):
                if pg is None or not parent.requires_grad:
                    continue
                key = id(parent)
                grads[key] = pg if key not in grads else grads[key] + pg

    # operator sugar
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(as_tensor(other, self.data.dtype), self)

    def __mul__(self, other):
        if np.isscalar(other):
            return mul_scalar(self, other)
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if not np.isscalar(other):
            raise TypeError('only division by a scalar is supported')
        return mul_scalar(self, 1.0 / other)

    def __neg__(self):
        return mul_scalar(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, index):
        return take(self, index)

    def sum(self, axis=None, keepdims=False):
        return sum_(self, axis, keepdims)

    def mean(self, axis=None, keepdims=False):
        return mean(self, axis, keepdims)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self, *axes):
        return transpose(self, axes or None)


def _topological_order(root):
    order, seen = [], set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if id(parent) not in seen:
                stack.append((parent, False))
    return order


def as_tensor(x, dtype=None):
    if isinstance(x, Tensor):
        return x
    return Tensor(np.asarray(x, dtype=dtype or np.float64))


def _result(data, parents, backward):
    live = [p for p in parents if p.requires_grad]
    if not live:
        return Tensor(data)
    return Tensor(data, _parents=parents, _backward=backward)


def unbroadcast(grad: np.ndarray, shape) -> np.ndarray:
    """ Sums grad down to shape, undoing numpy broadcasting """
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _check_broadcast(op, a, b):
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(
            f'{op}: shapes {a.shape} and {b.shape} do not broadcast') from None


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast('add', a, b)

    def backward(g):
        return unbroadcast(g, a.shape), unbroadcast(g, b.shape)
    return _result(a.data + b.data, (a, b), backward)


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast('sub', a, b)

    def backward(g):
        return unbroadcast(g, a.shape), unbroadcast(-g, b.shape)
    return _result(a.data - b.data, (a, b), backward)


def mul(a, b) -> Tensor:
    """ Elementwise product with broadcasting """
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast('mul', a, b)

    def backward(g):
        return unbroadcast(g * b.data, a.shape), unbroadcast(g * a.data,
                                                             b.shape)
    return _result(a.data * b.data, (a, b), backward)


def mul_scalar(a, s: float) -> Tensor:
    a = as_tensor(a)
    s = float(s)
    return _result(a.data * s, (a,), lambda g: (g * s,))


def matmul(a, b) -> Tensor:
    """ Batched matrix product over the last two axes; b may be 2-D and
        shared across the batch.
    """
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise ShapeError(f'matmul: shapes {a.shape} and {b.shape} '
                         f'are not aligned')

    def backward(g):
        ga = g @ np.swapaxes(b.data, -1, -2)
        gb = np.swapaxes(a.data, -1, -2) @ g
        return unbroadcast(ga, a.shape), unbroadcast(gb, b.shape)
    return _result(a.data @ b.data, (a, b), backward)


def relu(a) -> Tensor:
    a = as_tensor(a)
    live = a.data > 0
    return _result(np.where(live, a.data, 0.0).astype(a.data.dtype), (a,),
                   lambda g: (g * live,))


def exp(a) -> Tensor:
    a = as_tensor(a)
    out = np.exp(a.data)
    return _result(out, (a,), lambda g: (g * out,))


def log_(a) -> Tensor:
    a = as_tensor(a)
    return _result(np.log(a.data), (a,), lambda g: (g / a.data,))


def softmax(a) -> Tensor:
    """ Softmax over the last axis """
    a = as_tensor(a)
    shifted = a.data - a.data.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=-1, keepdims=True)

    def backward(g):
        return (out * (g - (g * out).sum(axis=-1, keepdims=True)),)
    return _result(out, (a,), backward)


def layer_norm(x, gamma=None, beta=None, eps: float = 1e-5) -> Tensor:
    """ Normalizes the last axis to zero mean and unit variance, then
        scales by gamma and shifts by beta when given. A constant row
        maps to beta (zeros without beta).
    """
    x = as_tensor(x)
    n = x.shape[-1]
    mu = x.data.mean(axis=-1, keepdims=True)
    centred = x.data - mu
    var = (centred ** 2).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = centred * inv
    out = xhat
    parents = [x]
    if gamma is not None:
        gamma = as_tensor(gamma)
        if gamma.shape != (n,):
            raise ShapeError(f'layer_norm: gamma {gamma.shape} does not '
                             f'match input {x.shape}')
        out = out * gamma.data
        parents.append(gamma)
    if beta is not None:
        beta = as_tensor(beta)
        if beta.shape != (n,):
            raise ShapeError(f'layer_norm: beta {beta.shape} does not '
                             f'match input {x.shape}')
        out = out + beta.data
        parents.append(beta)

    def backward(g):
        dxhat = g * gamma.data if gamma is not None else g
        dx = inv / n * (n * dxhat - dxhat.sum(axis=-1, keepdims=True)
                        - xhat * (dxhat * xhat).sum(axis=-1, keepdims=True))
        grads = [dx]
        lead = tuple(range(g.ndim - 1))
        if gamma is not None:
            grads.append((g * xhat).sum(axis=lead))
        if beta is not None:
            grads.append(g.sum(axis=lead))
        return grads
    return _result(out, tuple(parents), backward)


def sum_(a, axis=None, keepdims=False) -> Tensor:
    a = as_tensor(a)
    out = a.data.sum(axis=axis, keepdims=keepdims)

    def backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, a.shape).copy(),)
    return _result(np.asarray(out), (a,), backward)


def mean(a, axis=None, keepdims=False) -> Tensor:
    a = as_tensor(a)
    count = a.data.size if axis is None else np.prod(
        [a.shape[i] for i in np.atleast_1d(axis)])
    return mul_scalar(sum_(a, axis, keepdims), 1.0 / count)


def concat(tensors, axis: int = 0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    try:
        out = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError:
        raise ShapeError('concat: shapes ' + ', '.join(
            str(t.shape) for t in tensors) + f' differ off axis {axis}') \
            from None
    bounds = np.cumsum([t.shape[axis] for t in tensors])[:-1]

    def backward(g):
        return np.split(g, bounds, axis=axis)
    return _result(out, tuple(tensors), backward)


def take(a, index) -> Tensor:
    """ a[index] for basic or integer-array indexing """
    a = as_tensor(a)

    def backward(g):
        full = np.zeros_like(a.data)
        np.add.at(full, index, g)
        return (full,)
    return _result(np.asarray(a.data[index]), (a,), backward)


def transpose(a, axes=None) -> Tensor:
    a = as_tensor(a)
    axes = tuple(axes) if axes is not None else tuple(reversed(range(a.ndim)))
    inverse = tuple(np.argsort(axes))
    return _result(np.transpose(a.data, axes), (a,),
                   lambda g: (np.transpose(g, inverse),))


def swap_last(a) -> Tensor:
    """ Exchange the last two axes """
    a = as_tensor(a)
    axes = list(range(a.ndim))
    axes[-1], axes[-2] = axes[-2], axes[-1]
    return transpose(a, axes)


def reshape(a, shape) -> Tensor:
    a = as_tensor(a)
    try:
        out = a.data.reshape(shape)
    except ValueError:
        raise ShapeError(f'reshape: cannot view {a.shape} as {tuple(shape)}') \
            from None
    return _result(out, (a,), lambda g: (g.reshape(a.shape),))


def l2_normalize(a) -> Tensor:
    """ Rows of unit Euclidean norm along the last axis; zero rows stay
        zero and pass no gradient.
    """
    a = as_tensor(a)
    norm = np.sqrt((a.data ** 2).sum(axis=-1, keepdims=True))
    live = norm > 0
    safe = np.where(live, norm, 1.0)
    out = np.where(live, a.data / safe, 0.0)

    def backward(g):
        proj = (g * out).sum(axis=-1, keepdims=True)
        return (np.where(live, (g - out * proj) / safe, 0.0),)
    return _result(out, (a,), backward)


def dropout(a, rate: float, rng: np.random.Generator = None,
            training: bool = True) -> Tensor:
    """ Inverted dropout. Identity when rate is 0 or outside training. """
    a = as_tensor(a)
    if not training or rate <= 0:
        return a
    if rate >= 1:
        raise ValueError(f'dropout rate must be below 1, got {rate}')
    if rng is None:
        rng = np.random.default_rng()
    scale = (rng.random(a.shape) >= rate) / (1.0 - rate)
    return _result(a.data * scale, (a,), lambda g: (g * scale,))


def parameter(data, name: str) -> Tensor:
    return Tensor(data, requires_grad=True, name=name)


def zero_grads(params):
    for p in _values(params):
        p.grad = None


def _values(params):
    return params.values() if isinstance(params, dict) else params


@dataclass
class OptimState:
    """ Adam moments, step counter and learning rate schedule """
    lr: float = 1e-3
    gamma: float = 0.95
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_step(params, state: OptimState):
    """ One bias-corrected Adam update of every parameter holding a
        gradient; parameters without one are left alone.

        params: dict name -> Tensor

        state: OptimState, updated in place

        return: params
    """
    state.step += 1
    t = state.step
    for name, p in params.items():
        if p.grad is None:
            continue
        g = p.grad
        m = state.m.get(name)
        v = state.v.get(name)
        if m is None:
            m = np.zeros_like(p.data, dtype=np.float64)
            v = np.zeros_like(p.data, dtype=np.float64)
        m = state.beta1 * m + (1 - state.beta1) * g
        v = state.beta2 * v + (1 - state.beta2) * g * g
        state.m[name], state.v[name] = m, v
        mhat = m / (1 - state.beta1 ** t)
        vhat = v / (1 - state.beta2 ** t)
        p.data = (p.data - state.lr * mhat / (np.sqrt(vhat) + state.eps)
                  ).astype(p.data.dtype)
    return params


def lr_decay(state: OptimState) -> OptimState:
    """ lr <- lr * gamma, called once per epoch """
    state.lr *= state.gamma
    return state


def encode_checkpoint(params) -> bytes:
    out = BinaryWriter()
    out.magic(CHECKPOINT_MAGIC)
    out.u32(CHECKPOINT_VERSION)
    out.u32(len(params))
    for name, p in params.items():
        data = p.data if isinstance(p, Tensor) else np.asarray(p)
        out.text(name)
        out.u8(data.ndim)
        for dim in data.shape:
            out.u32(dim)
        out.f32_array(data)
    return out.getvalue()


def decode_checkpoint(data: bytes, source='checkpoint') -> OrderedDict:
    src = BinaryReader(data, source)
    src.expect_magic(CHECKPOINT_MAGIC)
    version = src.u32('version')
    if version != CHECKPOINT_VERSION:
        raise UnsupportedVersionError(
            f'{source}: checkpoint version {version} is not supported '
            f'(expected {CHECKPOINT_VERSION})')
    arrays = OrderedDict()
    for i in range(src.u32('tensor count')):
        name = src.text(f'tensor {i} name')
        rank = src.u8(f'{name} rank')
        shape = tuple(src.u32(f'{name} dim') for _ in range(rank))
        arrays[name] = src.f32_array(int(np.prod(shape)),
                                     f'{name} data').reshape(shape)
    if src.remaining:
        raise FormatError(f'{source}: {src.remaining} trailing bytes')
    return arrays


def save_checkpoint(params, path):
    """ Writes named tensors as f32 in an ARCK file, atomically """
    with atomic_write(path) as fh:
        fh.write(encode_checkpoint(params))
    log.info('saved %d tensors to %s', len(params), path)


def load_checkpoint(path) -> OrderedDict:
    """ Reads an ARCK file into an ordered dict of float32 arrays """
    with open(path, 'rb') as fh:
        return decode_checkpoint(fh.read(), str(path))


def load_into(params, arrays, strict: bool = True):
    """ Copies checkpoint arrays into existing parameters.

        strict: bool, unknown or missing names are errors. Shape
            mismatches are always errors.
    """
    unknown = [n for n in arrays if n not in params]
    missing = [n for n in params if n not in arrays]
    if strict and (unknown or missing):
        parts = []
        if unknown:
            parts.append('unknown tensor(s): ' + ', '.join(unknown))
        if missing:
            parts.append('missing tensor(s): ' + ', '.join(missing))
        raise CheckpointMismatchError('; '.join(parts))
    for name, arr in arrays.items():
        if name not in params:
            log.warning('ignoring checkpoint tensor %s', name)
            continue
        p = params[name]
        if p.shape != arr.shape:
            raise CheckpointMismatchError(
                f'{name}: checkpoint shape {arr.shape} does not match '
                f'model shape {p.shape}')
        p.data = arr.astype(p.data.dtype)
    return params
