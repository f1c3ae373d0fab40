# arionet - self-supervised birdsong representation toolkit
# runconfig Library
# Copyright(C) 2026 arionet contributors
#
# Released under the MIT License - https://opensource.org/licenses/MIT
#

""" Run configuration.

    RunConfig holds every tunable of a run. Values come from the
    defaults, then a `key = value` file, then command line overrides.

    Each field may have a validate_<field>(field_name, value) method
    returning a ValidationResult; validate(field_name, value) dispatches
    to it and validate_all() runs every field check plus the cross-field
    rules, raising one ConfigError that lists every failure.

    Usage
    -----
    >>> cfg = RunConfig.from_sources('run.cfg', {'epochs': '50'})
    >>> cfg.validate_all()
"""

import logging
import math
import typing
from collections import namedtuple
from dataclasses import asdict, dataclass, fields
from typing import Optional

from arionet.encoder import EncoderConfig
from arionet.errors import ConfigError
from arionet.sslcontrastive import AugmentationSpec
from arionet.temporal import TemporalConfig

log = logging.getLogger(__name__)

ValidationResult = namedtuple(
    'ValidationResult', 'result,errormsg,title',
    defaults=(None, '', ''))

_TRUE = {'1', 'true', 'yes', 'on'}
_FALSE = {'0', 'false', 'no', 'off'}
_NONE = {'', 'none', 'inf', 'unlimited'}


def _ok():
    return ValidationResult(True)


def _fail(field_name, msg):
    return ValidationResult(False, f'{field_name}: {msg}', 'Config Error')


def _positive(field_name, value):
    if value is None or value <= 0:
        return _fail(field_name, f'must be positive, got {value}')
    return _ok()


def _non_negative(field_name, value):
    if value is None or value < 0:
        return _fail(field_name, f'must be >= 0, got {value}')
    return _ok()


def _fraction(field_name, value):
    """ value in [0, 1) """
    if not 0 <= value < 1:
        return _fail(field_name, f'must be in [0, 1), got {value}')
    return _ok()


def _positive_or_none(field_name, value):
    if value is None:
        return _ok()
    return _positive(field_name, value)


@dataclass
class RunConfig:
    # signal processing
    sample_rate: int = 22050
    n_fft: int = 2048
    hop: int = 512
    n_mels: int = 128
    energy_ratio: float = 0.05
    chroma_min_frames: int = 13
    window_override: Optional[int] = None
    cap_per_species: Optional[int] = None
    rolloff_ratio: float = 0.85
    ref_a4: float = 440.0
    # contrastive pretraining
    temperature: float = 0.07
    lr: float = 1e-3
    batch_size: int = 64
    epochs: int = 300
    gamma: float = 0.95
    blocks: int = 4
    heads: int = 4
    d_model: int = 128
    ffn_dim: int = 512
    proj_dim: int = 256
    dropout: float = 0.2
    use_positional: bool = True
    pitch_shift_range: int = 2
    time_mask_max: float = 0.2
    chroma_mask_max_rows: int = 2
    aug_pitch_shift: bool = True
    aug_time_mask: bool = True
    aug_chroma_mask: bool = True
    # future-frame prediction
    temporal_blocks: int = 2
    temporal_heads: int = 2
    temporal_d_model: int = 64
    temporal_ffn_dim: int = 256
    temporal_dropout: float = 0.1
    temporal_lr: float = 1e-4
    temporal_batch_size: int = 32
    temporal_epochs: int = 300
    context_len: int = 12
    horizon: int = 1
    patience: int = 20
    min_delta: float = 1e-5
    val_fraction: float = 0.1
    temporal_stride: int = 0
    # downstream classification
    classifier: str = 'forest'
    forest_trees: int = 100
    knn_k: int = 5
    test_fraction: float = 0.2
    # run
    seed: int = 0
    threads: Optional[int] = None
    dtype: str = 'float32'

    validate_sample_rate = staticmethod(_positive)
    validate_hop = staticmethod(_positive)
    validate_n_mels = staticmethod(_positive)
    validate_chroma_min_frames = staticmethod(_positive)
    validate_window_override = staticmethod(_positive_or_none)
    validate_cap_per_species = staticmethod(_positive_or_none)
    validate_ref_a4 = staticmethod(_positive)
    validate_temperature = staticmethod(_positive)
    validate_lr = staticmethod(_positive)
    validate_batch_size = staticmethod(_positive)
    validate_epochs = staticmethod(_non_negative)
    validate_blocks = staticmethod(_positive)
    validate_heads = staticmethod(_positive)
    validate_d_model = staticmethod(_positive)
    validate_ffn_dim = staticmethod(_positive)
    validate_proj_dim = staticmethod(_positive)
    validate_dropout = staticmethod(_fraction)
    validate_pitch_shift_range = staticmethod(_non_negative)
    validate_temporal_blocks = staticmethod(_positive)
    validate_temporal_heads = staticmethod(_positive)
    validate_temporal_d_model = staticmethod(_positive)
    validate_temporal_ffn_dim = staticmethod(_positive)
    validate_temporal_dropout = staticmethod(_fraction)
    validate_temporal_lr = staticmethod(_positive)
    validate_temporal_batch_size = staticmethod(_positive)
    validate_temporal_epochs = staticmethod(_non_negative)
    validate_context_len = staticmethod(_positive)
    validate_horizon = staticmethod(_positive)
    validate_patience = staticmethod(_positive)
    validate_min_delta = staticmethod(_non_negative)
    validate_val_fraction = staticmethod(_fraction)
    validate_temporal_stride = staticmethod(_non_negative)
    validate_forest_trees = staticmethod(_positive)
    validate_knn_k = staticmethod(_positive)
    validate_seed = staticmethod(_non_negative)
    validate_threads = staticmethod(_positive_or_none)

    def validate_n_fft(self, field_name, value):
        if value < 2 or value & (value - 1):
            return _fail(field_name, f'must be a power of two, got {value}')
        return _ok()

    def validate_energy_ratio(self, field_name, value):
        if not 0 <= value <= 1:
            return _fail(field_name, f'must be in [0, 1], got {value}')
        return _ok()

    def validate_rolloff_ratio(self, field_name, value):
        if not 0 < value <= 1:
            return _fail(field_name, f'must be in (0, 1], got {value}')
        return _ok()

    def validate_gamma(self, field_name, value):
        if not 0 < value <= 1:
            return _fail(field_name, f'must be in (0, 1], got {value}')
        return _ok()

    def validate_time_mask_max(self, field_name, value):
        if not 0 <= value <= 1:
            return _fail(field_name, f'must be in [0, 1], got {value}')
        return _ok()

    def validate_chroma_mask_max_rows(self, field_name, value):
        if not 0 <= value <= 12:
            return _fail(field_name, f'must be in [0, 12], got {value}')
        return _ok()

    def validate_test_fraction(self, field_name, value):
        if not 0 < value < 1:
            return _fail(field_name, f'must be in (0, 1), got {value}')
        return _ok()

    def validate_classifier(self, field_name, value):
        if value not in ('forest', 'knn'):
            return _fail(field_name, f"must be 'forest' or 'knn', got {value!r}")
        return _ok()

    def validate_dtype(self, field_name, value):
        if value not in ('float32', 'float64'):
            return _fail(field_name,
                         f"must be 'float32' or 'float64', got {value!r}")
        return _ok()

    def validate(self, field_name, new_value):
        """ Dispatches to validate_<field_name>. Fields without a check
            give ValidationResult(None, ...).
        """
        vfunc = getattr(
            self, f'validate_{field_name}',
            lambda field_name, new_value: ValidationResult(
                None, f'No validation function for {field_name}',
                'Config Error'))
        return vfunc(field_name, new_value)

    def cross_check(self) -> list:
        """ Error messages of rules spanning several fields """
        errors = []
        if self.heads > 0 and self.d_model % self.heads:
            errors.append(f'heads: {self.heads} does not divide d_model '
                          f'{self.d_model}')
        if self.temporal_heads > 0 and \
                self.temporal_d_model % self.temporal_heads:
            errors.append(f'temporal_heads: {self.temporal_heads} does not '
                          f'divide temporal_d_model {self.temporal_d_model}')
        if self.context_len + self.horizon > self.chroma_min_frames:
            errors.append(
                f'context_len + horizon = {self.context_len + self.horizon} '
                f'exceeds chroma_min_frames {self.chroma_min_frames}')
        if self.horizon > self.context_len:
            errors.append(f'horizon {self.horizon} exceeds context_len '
                          f'{self.context_len}')
        return errors

    def validate_all(self):
        """ Raise ConfigError listing every failed check """
        errors = []
        for f in fields(self):
            res = self.validate(f.name, getattr(self, f.name))
            if res.result is False:
                errors.append(res.errormsg)
        errors.extend(self.cross_check())
        if errors:
            raise ConfigError('invalid configuration:\n  '
                              + '\n  '.join(errors))
        return self

    def encoder_config(self) -> EncoderConfig:
        return EncoderConfig(self.blocks, self.heads, self.d_model,
                             self.ffn_dim, self.proj_dim, self.dropout,
                             12, self.use_positional, self.dtype)

    def temporal_config(self) -> TemporalConfig:
        return TemporalConfig(
            self.temporal_blocks, self.temporal_heads, self.temporal_d_model,
            self.temporal_ffn_dim, self.temporal_dropout, self.context_len,
            self.horizon, self.temporal_lr, self.temporal_batch_size,
            self.temporal_epochs, self.patience, self.min_delta,
            self.val_fraction, self.temporal_stride, self.dtype)

    def augmentation_spec(self) -> AugmentationSpec:
        return AugmentationSpec(self.pitch_shift_range, self.time_mask_max,
                                self.chroma_mask_max_rows,
                                self.aug_pitch_shift, self.aug_time_mask,
                                self.aug_chroma_mask)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def field_names(cls) -> list:
        return [f.name for f in fields(cls)]

    @classmethod
    def coerce(cls, key: str, text: str):
        """ Converts the text of a config value to the field's type.
            Optional int fields accept none, inf or unlimited.
        """
        types = {f.name: f.type for f in fields(cls)}
        if key not in types:
            raise ConfigError(f'unknown configuration key {key!r}')
        kind = types[key]
        text = str(text).strip()
        optional = typing.get_origin(kind) is typing.Union
        if optional:
            if text.lower() in _NONE:
                return None
            kind = [t for t in typing.get_args(kind) if t is not type(None)][0]
        try:
            if kind is bool:
                low = text.lower()
                if low in _TRUE:
                    return True
                if low in _FALSE:
                    return False
                raise ValueError(text)
            if kind is int:
                value = float(text)
                if not value.is_integer() or math.isinf(value):
                    raise ValueError(text)
                return int(value)
            if kind is float:
                return float(text)
            return text
        except ValueError:
            raise ConfigError(f'{key}: cannot read {text!r} as '
                              f'{kind.__name__}') from None

    @classmethod
    def from_sources(cls, path=None, overrides: dict = None):
        """ Defaults, then the config file at path, then overrides.
            Values are coerced but not validated.
        """
        values = {}
        if path is not None:
            values.update(read_config_file(path))
        if overrides:
            values.update({k: v for k, v in overrides.items()
                           if v is not None})
        cfg = cls()
        for key, text in values.items():
            value = text if not isinstance(text, str) else cls.coerce(key,
                                                                      text)
            if key not in cls.field_names():
                raise ConfigError(f'unknown configuration key {key!r}')
            setattr(cfg, key, value)
        return cfg


def read_config_file(path) -> dict:
    """ `key = value` lines, `#` starts a comment, blank lines ignored

        return: dict of str to str
    """
    values = {}
    with open(path, encoding='utf-8') as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split('#', 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition('=')
            if not sep or not key.strip():
                raise ConfigError(f'{path}:{lineno}: expected key = value')
            values[key.strip()] = value.strip()
    log.debug('read %d settings from %s', len(values), path)
    return values
