# arionet - self-supervised birdsong representation toolkit
# wavio Library
# Copyright(C) 2026 arionet contributors
#
# Released under the MIT License - https://opensource.org/licenses/MIT
#

""" WAV input and output.

    Only RIFF/WAVE files with 16-bit PCM or 32-bit float samples and one
    or two channels are read. FLAC or MP3 recordings must be converted to
    WAV beforehand. The RIFF chunk layout is checked before the samples
    are handed to scipy.io.wavfile so that malformed files fail with an
    error naming the offending chunk.
"""

import logging
import os
import struct
import warnings

import numpy as np
import scipy.io.wavfile

from arionet.binfmt import atomic_write
from arionet.dspcore import Waveform
from arionet.errors import WavDecodeError

log = logging.getLogger(__name__)

WAVE_FORMAT_PCM = 0x0001
WAVE_FORMAT_IEEE_FLOAT = 0x0003
WAVE_FORMAT_EXTENSIBLE = 0xFFFE


def check_riff_layout(path) -> dict:
    """ Walks the RIFF chunks of a WAV file and validates the fmt chunk.

        path: str or Path

        return: dict with format_tag, channels, sample_rate, bits

        Raise WavDecodeError naming the chunk that is missing, truncated
        or unsupported.
    """
    with open(path, 'rb') as fh:
        data = fh.read()
    name = os.path.basename(os.fspath(path))
    if len(data) < 12 or data[:4] != b'RIFF' or data[8:12] != b'WAVE':
        raise WavDecodeError(f'{name}: missing RIFF/WAVE header')
    pos = 12
    fmt = None
    have_data = False
    while pos + 8 <= len(data):
        chunk_id = data[pos:pos + 4]
        size = struct.unpack('<I', data[pos + 4:pos + 8])[0]
        label = chunk_id.decode('ascii', errors='replace')
        if pos + 8 + size > len(data):
            raise WavDecodeError(
                f"{name}: '{label}' chunk truncated (declares {size} bytes, "
                f'{len(data) - pos - 8} present)')
        body = data[pos + 8:pos + 8 + size]
        if chunk_id == b'fmt ':
            if size < 16:
                raise WavDecodeError(f"{name}: 'fmt ' chunk too short")
            tag, channels, rate, _, _, bits = struct.unpack(
                '<HHIIHH', body[:16])
            if tag == WAVE_FORMAT_EXTENSIBLE and size >= 26:
                tag = struct.unpack('<H', body[24:26])[0]
            fmt = {'format_tag': tag, 'channels': channels,
                   'sample_rate': rate, 'bits': bits}
        elif chunk_id == b'data':
            have_data = True
        pos += 8 + size + (size & 1)  # chunks are word aligned
    if fmt is None:
        raise WavDecodeError(f"{name}: no 'fmt ' chunk")
    if not have_data:
        raise WavDecodeError(f"{name}: no 'data' chunk")
    supported = ((fmt['format_tag'] == WAVE_FORMAT_PCM and fmt['bits'] == 16)
                 or (fmt['format_tag'] == WAVE_FORMAT_IEEE_FLOAT
                     and fmt['bits'] == 32))
    if not supported:
        raise WavDecodeError(
            f"{name}: 'fmt ' chunk declares format tag "
            f"{fmt['format_tag']:#06x} with {fmt['bits']} bits; only 16-bit "
            f'PCM and 32-bit float are supported')
    if fmt['channels'] not in (1, 2):
        raise WavDecodeError(
            f"{name}: 'fmt ' chunk declares {fmt['channels']} channels; "
            f'only mono and stereo are supported')
    return fmt


def resample_linear(samples: np.ndarray, from_rate: int, to_rate: int):
    """ Linear interpolation onto the target sample grid """
    if from_rate == to_rate or samples.shape[0] == 0:
        return samples
    count = int(round(samples.shape[0] * to_rate / from_rate))
    src_t = np.arange(samples.shape[0]) / from_rate
    dst_t = np.arange(count) / to_rate
    return np.interp(dst_t, src_t, samples)


def decode_wav(path, target_sr: int = None) -> Waveform:
    """ Reads a WAV file into a mono Waveform.

        path: str or Path

        target_sr: int, optional. Resample linearly to this rate.

        return: Waveform with samples in [-1, 1]; 16-bit PCM is scaled by
        1/32768 and stereo is averaged to mono.
    """
    check_riff_layout(path)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter('ignore', scipy.io.wavfile.WavFileWarning)
            rate, data = scipy.io.wavfile.read(path)
    except ValueError as ex:
        raise WavDecodeError(f'{os.fspath(path)}: {ex}') from ex
    if data.dtype == np.int16:
        samples = data.astype(np.float64) / 32768.0
    else:
        samples = data.astype(np.float64)
    if samples.ndim == 2:
        samples = samples.mean(axis=1)
    if target_sr is not None and target_sr != rate:
        log.debug('resampling %s from %d Hz to %d Hz', path, rate, target_sr)
        samples = resample_linear(samples, rate, target_sr)
        rate = target_sr
    return Waveform(samples, int(rate))


def write_wav(path, w: Waveform):
    """ Writes a Waveform as 16-bit mono PCM, replacing path atomically.
        Samples are clipped to [-1, 1).
    """
    pcm = np.clip(np.round(w.samples * 32768.0), -32768, 32767)
    with atomic_write(path) as fh:
        scipy.io.wavfile.write(fh, int(w.sample_rate), pcm.astype(np.int16))
