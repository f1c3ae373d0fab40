# arionet - self-supervised birdsong representation toolkit
# sslcontrastive Library
# Copyright(C) 2026 arionet contributors
#
# Released under the MIT License - https://opensource.org/licenses/MIT
#

""" sslcontrastive

    Two-view contrastive pretraining of the chromagram encoder.

    Augmentations act on chromagrams: circular pitch shift of the 12
    rows, masking a run of frames, masking a few pitch-class rows.

    The loss for anchor i of view a against view b is

        l_i = -log( exp(s(a_i, b_i)/tau)
                    / (sum_j exp(s(a_i, b_j)/tau)
                       + sum_{j != i} exp(s(a_i, a_j)/tau)) )

    with the positive pair kept inside the first denominator sum, and the
    batch loss is (sum l_i + sum l'_i) / 2B where l' swaps a and b.
"""

import logging
from dataclasses import dataclass, field, replace

import numpy as np
import pandas as pd
from tqdm import tqdm

from arionet import tensorengine as te
from arionet.dspcore import Chromagram
from arionet.encoder import Encoder
from arionet.errors import ConfigError, DataError

log = logging.getLogger(__name__)

UNIT_TOLERANCE = 1e-6


@dataclass
class AugmentationSpec:
    pitch_shift_range: int = 2
    time_mask_max: float = 0.2
    chroma_mask_max_rows: int = 2
    pitch_shift: bool = True
    time_mask: bool = True
    chroma_mask: bool = True

    def validate(self):
        if self.pitch_shift_range < 0:
            raise ConfigError('pitch_shift_range must be >= 0')
        if not 0 <= self.time_mask_max <= 1:
            raise ConfigError('time_mask_max must be in [0, 1]')
        if not 0 <= self.chroma_mask_max_rows <= 12:
            raise ConfigError('chroma_mask_max_rows must be in [0, 12]')
        return self

    @classmethod
    def disabled(cls):
        return cls(pitch_shift=False, time_mask=False, chroma_mask=False)


def _rewrap(template, energies):
    if isinstance(template, Chromagram):
        return template.with_energies(energies)
    return energies


def _energies(c):
    return c.energies if isinstance(c, Chromagram) else np.asarray(c)


def pitch_shift(c, k: int):
    """ Rotates the pitch-class rows by k: row p moves to row (p+k) mod 12

        c: Chromagram or 12 x T array, the same type is returned
    """
    return _rewrap(c, np.roll(_energies(c), int(k), axis=0))


def time_mask(c, width: int, start: int):
    """ Zeroes columns [start, start+width) """
    e = _energies(c).copy()
    e[:, start:start + width] = 0
    return _rewrap(c, e)


def chroma_mask(c, rows):
    """ Zeroes the given pitch-class rows """
    e = _energies(c).copy()
    e[np.asarray(list(rows), dtype=int)] = 0
    return _rewrap(c, e)


def augment(c, spec: AugmentationSpec, rng: np.random.Generator):
    """ One random composition: pitch shift, then time mask, then
        chroma mask, each only when enabled.
    """
    frames = _energies(c).shape[1]
    if spec.pitch_shift and spec.pitch_shift_range:
        c = pitch_shift(c, rng.integers(-spec.pitch_shift_range,
                                        spec.pitch_shift_range + 1))
    if spec.time_mask:
        width = int(rng.integers(0, int(spec.time_mask_max * frames) + 1))
        start = int(rng.integers(0, frames - width + 1))
        c = time_mask(c, width, start)
    if spec.chroma_mask:
        count = int(rng.integers(0, spec.chroma_mask_max_rows + 1))
        c = chroma_mask(c, rng.choice(12, size=count, replace=False))
    return c


def make_views(c, spec: AugmentationSpec, rng: np.random.Generator):
    """ Two independently augmented views of one chromagram """
    return augment(c, spec, rng), augment(c, spec, rng)


@dataclass(eq=False)
class ContrastiveBatch:
    """ B paired unit embeddings of two views.

        views_a, views_b: Tensor or array, B x d

        temperature: float > 0

        Rows that are not unit length are normalized again and counted
        in `renormalized`.
    """
    views_a: object
    views_b: object
    temperature: float = 0.07
    renormalized: int = field(default=0, init=False)

    def __post_init__(self):
        if not self.temperature > 0:
            raise ConfigError(
                f'temperature must be positive, got {self.temperature}')
        self.views_a = self._unit(te.as_tensor(self.views_a))
        self.views_b = self._unit(te.as_tensor(self.views_b))
        if self.views_a.ndim != 2 or self.views_a.shape != self.views_b.shape:
            raise DataError(f'views must both be B x d, got '
                            f'{self.views_a.shape} and {self.views_b.shape}')

    def _unit(self, t):
        norms = np.sqrt((t.data ** 2).sum(axis=-1))
        off = int(np.count_nonzero(np.abs(norms - 1) > UNIT_TOLERANCE))
        if off:
            self.renormalized += off
            log.warning('%d embedding(s) were not unit length and have been '
                        'normalized', off)
            return te.l2_normalize(t)
        return t

    @property
    def size(self) -> int:
        return self.views_a.shape[0]


def _anchor_terms(anchors, positives, tau):
    """ l_i for every anchor as a (B,) Tensor """
    size = anchors.shape[0]
    cross = (anchors @ te.swap_last(positives)) * (1.0 / tau)
    same = (anchors @ te.swap_last(anchors)) * (1.0 / tau)
    others = 1.0 - np.eye(size)
    shift = np.maximum(cross.data.max(axis=1),
                       np.where(others > 0, same.data, -np.inf).max(axis=1))
    shift = shift[:, None]
    denom = (te.exp(cross - shift).sum(axis=1)
             + (te.exp(same - shift) * others).sum(axis=1))
    diag = np.arange(size)
    return te.log_(denom) + shift[:, 0] - cross[diag, diag]


def anchor_losses(batch: ContrastiveBatch):
    """ Per-anchor losses (l, l') as arrays """
    tau = batch.temperature
    return (_anchor_terms(batch.views_a, batch.views_b, tau).data,
            _anchor_terms(batch.views_b, batch.views_a, tau).data)


def nt_xent(batch: ContrastiveBatch) -> te.Tensor:
    """ Symmetrized contrastive loss as a differentiable scalar.
        A batch of one gives exactly 0.
    """
    tau = batch.temperature
    la = _anchor_terms(batch.views_a, batch.views_b, tau)
    lb = _anchor_terms(batch.views_b, batch.views_a, tau)
    return (la.sum() + lb.sum()) * (1.0 / (2 * batch.size))


def positive_cosine(batch: ContrastiveBatch) -> float:
    """ Mean cosine similarity of the positive pairs """
    return float((batch.views_a.data * batch.views_b.data).sum(axis=1).mean())


def training_chromas(store) -> np.ndarray:
    """ N x 12 x T stack of the store's chromagrams cropped to the
        shortest one.
    """
    if not len(store):
        raise DataError('feature store has no records')
    frames = store.min_chroma_frames()
    return np.stack([c[:, :frames] for c in store.chromas()]).astype(
        np.float64)


def pretrain(store, cfg, progress: bool = True, encoder: Encoder = None):
    """ Contrastive pretraining of a fresh (or given) encoder.

        store: FeatureStore

        cfg: RunConfig

        progress: bool, show a tqdm bar over epochs

        return: tuple (Encoder, trace DataFrame with epoch, mean_loss,
            pos_cosine)
    """
    chromas = training_chromas(store)
    count = chromas.shape[0]
    rng = np.random.default_rng(cfg.seed)
    spec = cfg.augmentation_spec().validate()
    if encoder is None:
        encoder = Encoder(cfg.encoder_config(), seed=cfg.seed)
    batch_size = cfg.batch_size
    if batch_size > count:
        log.warning('batch size %d exceeds %d segments, using %d',
                    batch_size, count, count)
        batch_size = count
    state = te.OptimState(lr=cfg.lr, gamma=cfg.gamma)
    params = encoder.params
    rows = []
    epochs = tqdm(range(1, cfg.epochs + 1), desc='pretrain',
                  disable=not progress)
    for epoch in epochs:
        losses, cosines = [], []
        order = rng.permutation(count)
        for start in range(0, count, batch_size):
            idx = order[start:start + batch_size]
            if len(idx) < 2 <= count:
                continue  # a lone anchor has no negatives
            views = [make_views(chromas[i], spec, rng) for i in idx]
            stacked = np.concatenate([np.stack([v[0] for v in views]),
                                      np.stack([v[1] for v in views])])
            _, _, unit = encoder.forward(stacked, training=True, rng=rng)
            half = len(idx)
            batch = ContrastiveBatch(unit[:half], unit[half:],
                                     cfg.temperature)
            loss = nt_xent(batch)
            te.zero_grads(params)
            loss.backward()
            te.adam_step(params, state)
            losses.append(float(loss.data))
            cosines.append(positive_cosine(batch))
        te.lr_decay(state)
        mean_loss = float(np.mean(losses)) if losses else 0.0
        rows.append((epoch, mean_loss,
                     float(np.mean(cosines)) if cosines else 0.0))
        epochs.set_postfix(loss=f'{mean_loss:.4f}')
        log.debug('epoch %d mean loss %.6f', epoch, mean_loss)
    te.zero_grads(params)
    trace = pd.DataFrame(rows, columns=['epoch', 'mean_loss', 'pos_cosine'])
    return encoder, trace


def augmented_loss(encoder: Encoder, store, cfg) -> float:
    """ Mean eval-mode contrastive loss over the store, every segment seen
        through two views with all augmentations on.

        The views are drawn from a generator seeded by cfg.seed alone, so
        encoders pretrained under different settings are scored on the
        same pairs. Batches follow store order; nan when the store holds
        fewer than two segments.
    """
    chromas = training_chromas(store)
    count = chromas.shape[0]
    if count < 2:
        return np.nan
    spec = replace(cfg.augmentation_spec(), pitch_shift=True, time_mask=True,
                   chroma_mask=True).validate()
    rng = np.random.default_rng([cfg.seed, 1])
    batch_size = min(cfg.batch_size, count)
    losses, sizes = [], []
    for start in range(0, count, batch_size):
        idx = np.arange(start, min(start + batch_size, count))
        if len(idx) < 2:
            continue
        views = [make_views(chromas[i], spec, rng) for i in idx]
        stacked = np.concatenate([np.stack([v[0] for v in views]),
                                  np.stack([v[1] for v in views])])
        unit = encoder.forward(stacked, training=False)[2]
        half = len(idx)
        batch = ContrastiveBatch(unit[:half].data, unit[half:].data,
                                 cfg.temperature)
        losses.append(float(nt_xent(batch).data))
        sizes.append(half)
    return float(np.average(losses, weights=sizes))


ABLATION_SETTINGS = (
    (True, True, True),
    (False, True, True),
    (True, False, True),
    (True, True, False),
    (True, False, False),
    (False, False, False),
)


def ablate_augmentations(store, cfg, progress: bool = True) -> pd.DataFrame:
    """ Pretrains once per augmentation setting (all, each one removed,
        pitch shift only, none) with the same seed.

        final_loss is the last epoch's training loss, which is not
        comparable across settings: without augmentation both views are
        the same chromagram. eval_loss scores every encoder on the same
        augmented views (see augmented_loss) and is the column to rank
        settings by.

        return: DataFrame with pitch_shift, time_mask, chroma_mask,
            final_loss, pos_cosine, eval_loss
    """
    rows = []
    for pitch, tmask, cmask in ABLATION_SETTINGS:
        run_cfg = replace(cfg, aug_pitch_shift=pitch, aug_time_mask=tmask,
                          aug_chroma_mask=cmask)
        encoder, trace = pretrain(store, run_cfg, progress=progress)
        last = trace.iloc[-1] if len(trace) else None
        rows.append((pitch, tmask, cmask,
                     float(last.mean_loss) if last is not None else np.nan,
                     float(last.pos_cosine) if last is not None else np.nan,
                     augmented_loss(encoder, store, cfg)))
        log.info('ablation pitch=%s time=%s chroma=%s eval loss %.4f',
                 pitch, tmask, cmask, rows[-1][5])
    return pd.DataFrame(rows, columns=['pitch_shift', 'time_mask',
                                       'chroma_mask', 'final_loss',
                                       'pos_cosine', 'eval_loss'])
