# arionet - self-supervised birdsong representation toolkit
# dspcore Library
# Copyright(C) 2026 arionet contributors
#
# Released under the MIT License - https://opensource.org/licenses/MIT
#

""" dspcore

    Pure signal processing kernels used to describe a birdsong segment:

        radix-2 FFT and its inverse

        Hann-windowed STFT magnitude spectrogram (no centre padding)

        HTK mel filterbank and mel spectrogram

        MFCCs (orthonormal DCT-II of the log-mel spectrum) with deltas

        spectral centroid, bandwidth and roll-off

        RMS energy and zero-crossing rate

        12 pitch-class chromagram

    All functions are deterministic and keep no state, so they may be
    called from any number of threads.
"""

from dataclasses import dataclass, field, replace

import numpy as np
import scipy.fft
import scipy.signal
from numpy.lib.stride_tricks import sliding_window_view

from arionet.errors import ShapeError, SignalError

PITCH_CLASSES = ('C', 'C#', 'D', 'D#', 'E', 'F',
                 'F#', 'G', 'G#', 'A', 'A#', 'B')

LOG_FLOOR = 1e-10
MIN_PITCH_HZ = 20.0


@dataclass(frozen=True, eq=False)
class Waveform:
    """ Mono PCM samples at a known sample rate.
        An empty Waveform is allowed (energy masking can remove every
        sample) but every kernel below rejects it.
    """
    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        if int(self.sample_rate) <= 0:
            raise SignalError(
                f'sample_rate must be positive, got {self.sample_rate}')
        object.__setattr__(self, 'samples',
                           np.asarray(self.samples, dtype=np.float64))

    def __len__(self):
        return self.samples.shape[0]

    @property
    def duration(self) -> float:
        """ Duration in seconds """
        return len(self) / self.sample_rate


@dataclass(frozen=True, eq=False)
class AudioSegment(Waveform):
    """ One fixed-length window of one recording """
    recording_id: int = 0
    index: int = 0


@dataclass(frozen=True, eq=False)
class Spectrogram:
    """ F x T magnitude spectrogram with its bin frequencies (Hz) and
        frame centre times (s). F = n_fft/2 + 1.
    """
    magnitudes: np.ndarray
    bin_freqs: np.ndarray
    frame_times: np.ndarray

    def __post_init__(self):
        if self.magnitudes.shape[0] != self.bin_freqs.shape[0]:
            raise ShapeError(
                f'magnitudes {self.magnitudes.shape} do not match '
                f'{self.bin_freqs.shape[0]} bin frequencies')

    @property
    def n_fft(self) -> int:
        return 2 * (self.bin_freqs.shape[0] - 1)

    @property
    def sample_rate(self) -> int:
        return int(round(2 * self.bin_freqs[-1]))

    @property
    def n_frames(self) -> int:
        return self.magnitudes.shape[1]


@dataclass(frozen=True, eq=False)
class MfccMatrix:
    """ 13 x T MFCCs with first and second deltas """
    coeffs: np.ndarray
    delta: np.ndarray
    delta2: np.ndarray

    @classmethod
    def from_coeffs(cls, coeffs):
        """ Constructor computing both delta orders from the coefficients

            coeffs: np.ndarray, K x T
        """
        coeffs = np.asarray(coeffs, dtype=np.float64)
        d1 = delta(coeffs)
        return cls(coeffs, d1, delta(d1))


@dataclass(frozen=True, eq=False)
class Chromagram:
    """ 12 x T pitch-class energies """
    energies: np.ndarray
    normalized: bool = field(default=False)

    def __post_init__(self):
        if self.energies.ndim != 2 or self.energies.shape[0] != 12:
            raise ShapeError(
                f'chromagram must have 12 rows, got {self.energies.shape}')

    @property
    def n_frames(self) -> int:
        return self.energies.shape[1]

    def with_energies(self, energies):
        """ Copy of this chromagram holding new energies """
        return replace(self, energies=energies)


def is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


def _bit_reverse_indices(n: int) -> np.ndarray:
    bits = n.bit_length() - 1
    idx = np.arange(n)
    rev = np.zeros(n, dtype=np.int64)
    for b in range(bits):
        rev |= ((idx >> b) & 1) << (bits - 1 - b)
    return rev


def fft(x) -> np.ndarray:
    """ Iterative radix-2 Cooley-Tukey DFT along the last axis.

        x: array-like of complex, last axis length a power of two

        return: np.ndarray of complex, same shape as x

        Raise SignalError if the length is not a power of two; callers
        zero-pad.

        Usage
        -----
        >>> fft([1, 0, 0, 0])
        array([1.+0.j, 1.+0.j, 1.+0.j, 1.+0.j])
        >>> fft([1, 1, 1, 1])
        array([4.+0.j, 0.+0.j, 0.+0.j, 0.+0.j])
    """
    a = np.asarray(x, dtype=np.complex128)
    n = a.shape[-1] if a.ndim else 0
    if not is_power_of_two(n):
        raise SignalError(f'fft length must be a power of two, got {n}')
    a = a[..., _bit_reverse_indices(n)]
    lead = a.shape[:-1]
    size = 2
    while size <= n:
        half = size // 2
        twiddle = np.exp(-2j * np.pi * np.arange(half) / size)
        blocks = a.reshape(lead + (n // size, size))
        even = blocks[..., :half]
        odd = blocks[..., half:] * twiddle
        a = np.concatenate([even + odd, even - odd], axis=-1)
        a = a.reshape(lead + (n,))
        size *= 2
    return a


def ifft(x) -> np.ndarray:
    """ Inverse of fft along the last axis """
    a = np.asarray(x, dtype=np.complex128)
    return np.conj(fft(np.conj(a))) / a.shape[-1]


def _frames(samples: np.ndarray, n_fft: int, hop: int) -> np.ndarray:
    """ T x n_fft frame matrix, T = 1 + (len - n_fft)//hop. A signal
        shorter than n_fft becomes one zero-padded frame.
    """
    if samples.shape[0] == 0:
        raise SignalError('cannot frame an empty waveform')
    if hop < 1:
        raise SignalError(f'hop must be >= 1, got {hop}')
    if samples.shape[0] < n_fft:
        samples = np.pad(samples, (0, n_fft - samples.shape[0]))
    return sliding_window_view(samples, n_fft)[::hop]


def stft(w: Waveform, n_fft: int = 2048, hop: int = 512) -> Spectrogram:
    """ Hann-windowed magnitude STFT without centre padding.

        w: Waveform

        n_fft: int, power of two frame length

        hop: int, frame advance in samples

        return: Spectrogram with F = n_fft/2 + 1 bins and
        T = 1 + (len - n_fft)//hop frames
    """
    if not is_power_of_two(n_fft):
        raise SignalError(f'n_fft must be a power of two, got {n_fft}')
    frames = _frames(w.samples, n_fft, hop)
    window = scipy.signal.get_window('hann', n_fft)
    spectrum = fft(frames * window)[:, :n_fft // 2 + 1]
    bin_freqs = np.arange(n_fft // 2 + 1) * w.sample_rate / n_fft
    starts = np.arange(frames.shape[0]) * hop
    frame_times = (starts + n_fft / 2) / w.sample_rate
    return Spectrogram(np.abs(spectrum).T, bin_freqs, frame_times)


def hz_to_mel(freq):
    """ HTK mel scale: 2595 log10(1 + f/700) """
    return 2595.0 * np.log10(1.0 + np.asarray(freq, dtype=float) / 700.0)


def mel_to_hz(mel):
    return 700.0 * (10.0 ** (np.asarray(mel, dtype=float) / 2595.0) - 1.0)


def mel_filterbank(bin_freqs: np.ndarray, n_mels: int = 128,
                   fmin: float = 0.0, fmax: float = None) -> np.ndarray:
    """ Triangular HTK mel filters over the given FFT bin frequencies.

        bin_freqs: np.ndarray, ascending bin frequencies in Hz

        n_mels: int, number of bands

        fmin, fmax: float, band edges in Hz. fmax defaults to the last
        bin frequency (Nyquist).

        return: np.ndarray, n_mels x F non-negative weights

        Raise SignalError if a band catches no FFT bin.
    """
    if n_mels < 1:
        raise SignalError(f'n_mels must be >= 1, got {n_mels}')
    if fmax is None:
        fmax = bin_freqs[-1]
    edges = mel_to_hz(np.linspace(hz_to_mel(fmin), hz_to_mel(fmax),
                                  n_mels + 2))
    fdiff = np.diff(edges)
    ramps = np.subtract.outer(edges, bin_freqs)
    weights = np.zeros((n_mels, bin_freqs.shape[0]))
    for i in range(n_mels):
        lower = -ramps[i] / fdiff[i]
        upper = ramps[i + 2] / fdiff[i + 1]
        weights[i] = np.maximum(0.0, np.minimum(lower, upper))
    empty = np.flatnonzero(weights.sum(axis=1) <= 0)
    if empty.size:
        raise SignalError(
            f'n_mels={n_mels} exceeds the usable FFT bins: '
            f'{empty.size} band(s) catch no bin, first is band {empty[0]}')
    return weights


def mel_spectrogram(s: Spectrogram, n_mels: int = 128) -> np.ndarray:
    """ Mel band energies of the power spectrum, n_mels x T """
    weights = mel_filterbank(s.bin_freqs, n_mels)
    return weights @ (s.magnitudes ** 2)


def mfcc(mel: np.ndarray, n_mfcc: int = 13) -> np.ndarray:
    """ MFCCs as the orthonormal DCT-II of log(mel + 1e-10) over the
        mel axis, first n_mfcc coefficients.

        mel: np.ndarray, n_mels x T non-negative energies

        return: np.ndarray, n_mfcc x T
    """
    mel = np.asarray(mel, dtype=np.float64)
    if mel.ndim != 2:
        raise ShapeError(f'mel must be 2-D, got shape {mel.shape}')
    if n_mfcc > mel.shape[0]:
        raise ShapeError(
            f'n_mfcc={n_mfcc} exceeds {mel.shape[0]} mel bands')
    log_mel = np.log(mel + LOG_FLOOR)
    return scipy.fft.dct(log_mel, type=2, norm='ortho', axis=0)[:n_mfcc]


def delta(seq: np.ndarray) -> np.ndarray:
    """ First-order backward difference along time, zero at frame 0.

        Usage
        -----
        >>> delta(np.array([[0., 1., 2., 3.]]))
        array([[0., 1., 1., 1.]])
    """
    seq = np.asarray(seq, dtype=np.float64)
    if seq.ndim != 2 or seq.shape[1] < 1:
        raise ShapeError(f'delta needs a K x T matrix, got {seq.shape}')
    out = np.zeros_like(seq)
    out[:, 1:] = seq[:, 1:] - seq[:, :-1]
    return out


def _frame_totals(s: Spectrogram):
    total = s.magnitudes.sum(axis=0)
    return total, total > 0


def spectral_centroid(s: Spectrogram) -> np.ndarray:
    """ Magnitude-weighted mean frequency per frame, 0 for silent frames
    """
    total, live = _frame_totals(s)
    weighted = s.bin_freqs @ s.magnitudes
    return np.divide(weighted, total, out=np.zeros_like(total), where=live)


def spectral_bandwidth(s: Spectrogram) -> np.ndarray:
    """ Magnitude-weighted standard deviation of frequency per frame,
        0 for silent frames
    """
    total, live = _frame_totals(s)
    centroid = spectral_centroid(s)
    spread = (np.subtract.outer(s.bin_freqs, centroid) ** 2 * s.magnitudes
              ).sum(axis=0)
    var = np.divide(spread, total, out=np.zeros_like(total), where=live)
    return np.sqrt(var)


def spectral_rolloff(s: Spectrogram, ratio: float = 0.85) -> np.ndarray:
    """ Lowest bin frequency whose cumulative magnitude reaches
        ratio x frame total, 0 for silent frames.
    """
    if not 0 < ratio <= 1:
        raise SignalError(f'roll-off ratio must be in (0, 1], got {ratio}')
    cumulative = np.cumsum(s.magnitudes, axis=0)
    # compare against the last cumulative value so ratio=1 lands exactly
    # on the highest non-zero bin
    total = cumulative[-1]
    reached = cumulative >= ratio * total
    idx = np.argmax(reached, axis=0)
    return np.where(total > 0, s.bin_freqs[idx], 0.0)


def rms(frame) -> float:
    """ Root mean square of one frame

        Usage
        -----
        >>> rms([3, 4])
        3.5355339059327378
    """
    x = np.asarray(frame, dtype=np.float64)
    if x.size == 0:
        raise SignalError('rms of an empty frame')
    return float(np.sqrt(np.mean(x ** 2)))


def zcr(frame) -> float:
    """ Fraction of adjacent sample pairs with a strict sign change

        Usage
        -----
        >>> zcr([1, -2, 3])
        1.0
    """
    x = np.asarray(frame, dtype=np.float64)
    if x.size < 2:
        raise SignalError(f'zcr needs at least 2 samples, got {x.size}')
    return float(np.count_nonzero(x[:-1] * x[1:] < 0) / (x.size - 1))


def frame_rms(w: Waveform, n_fft: int = 2048, hop: int = 512) -> np.ndarray:
    """ rms over the STFT framing of w, one value per frame """
    frames = _frames(w.samples, n_fft, hop)
    return np.sqrt(np.mean(frames ** 2, axis=1))


def frame_zcr(w: Waveform, n_fft: int = 2048, hop: int = 512) -> np.ndarray:
    """ zcr over the STFT framing of w, one value per frame """
    frames = _frames(w.samples, n_fft, hop)
    flips = np.count_nonzero(frames[:, :-1] * frames[:, 1:] < 0, axis=1)
    return flips / (n_fft - 1)


def pitch_class_of(freq, ref_a4: float = 440.0):
    """ Pitch class (C=0 ... B=11) of frequencies in Hz

        Usage
        -----
        >>> PITCH_CLASSES[pitch_class_of(440.0)]
        'A'
    """
    freq = np.asarray(freq, dtype=float)
    midi = np.round(12.0 * np.log2(freq / ref_a4) + 69.0).astype(int)
    return np.mod(midi, 12)


def chromagram(s: Spectrogram, ref_a4: float = 440.0) -> Chromagram:
    """ Sum of STFT magnitudes per pitch class, each frame divided by its
        maximum (silent frames stay zero). Bins below 20 Hz carry no
        pitch and are ignored.

        s: Spectrogram

        ref_a4: float, tuning reference in Hz

        return: Chromagram, 12 x T, normalized
    """
    pitched = s.bin_freqs >= MIN_PITCH_HZ
    classes = pitch_class_of(s.bin_freqs[pitched], ref_a4)
    assign = np.zeros((12, classes.shape[0]))
    assign[classes, np.arange(classes.shape[0])] = 1.0
    energies = assign @ s.magnitudes[pitched]
    peak = energies.max(axis=0, keepdims=True)
    energies = np.divide(energies, peak, out=energies.copy(),
                         where=peak > 0)
    return Chromagram(energies, normalized=True)
