# arionet - self-supervised birdsong representation toolkit
# synth Library
# Copyright(C) 2026 arionet contributors
#
# Released under the MIT License - https://opensource.org/licenses/MIT
#

""" Synthetic birdsong corpus with known species structure.

    Each species owns two pitch classes that no other species uses and a
    motif of 2-4 notes drawn from them in octaves 5-7. A recording repeats
    the motif with slight detuning, separated by silent gaps, over a low
    noise floor, and is written as 16-bit PCM WAV.
"""

import logging
import os

import numpy as np
import pandas as pd

from arionet.binfmt import atomic_write
from arionet.dspcore import Chromagram, Waveform
from arionet.errors import DataError
from arionet.pipeline import FeatureStore, SegmentFeatures, SUMMARY_LEN
from arionet.wavio import write_wav

log = logging.getLogger(__name__)

NOTE_SECONDS = (0.12, 0.25)
GAP_SECONDS = (0.2, 0.4)
RECORDING_SECONDS = (2.5, 3.5)
TONE_AMPLITUDE = 0.5
NOISE_STD = 0.003
FADE_SECONDS = 0.01


def midi_to_hz(midi):
    return 440.0 * 2.0 ** ((np.asarray(midi, dtype=float) - 69.0) / 12.0)


def species_motifs(species: int, rng: np.random.Generator):
    """ Disjoint pitch-class pairs and a note motif per species.

        return: list of (pitch_classes, motif) where motif is a list of
            MIDI note numbers
    """
    if not 1 <= species <= 6:
        raise DataError(f'between 1 and 6 species have disjoint pitch-class '
                        f'pairs, got {species}')
    order = rng.permutation(12)
    out = []
    for s in range(species):
        classes = np.sort(order[2 * s:2 * s + 2])
        length = int(rng.integers(2, 5))
        notes = [int(12 * (rng.integers(5, 8) + 1) + rng.choice(classes))
                 for _ in range(length)]
        notes[0] = 12 * 7 + int(classes[0])  # both classes always sound
        notes[1] = 12 * 7 + int(classes[1])
        out.append((classes, notes))
    return out


def _tone(freq, seconds, sample_rate):
    n = int(round(seconds * sample_rate))
    t = np.arange(n) / sample_rate
    tone = TONE_AMPLITUDE * np.sin(2 * np.pi * freq * t)
    fade = min(int(FADE_SECONDS * sample_rate), n // 2)
    if fade:
        ramp = np.linspace(0.0, 1.0, fade)
        tone[:fade] *= ramp
        tone[-fade:] *= ramp[::-1]
    return tone


def synth_recording(motif, rng: np.random.Generator,
                    sample_rate: int = 22050) -> Waveform:
    """ Motif repetitions with silent gaps until the drawn duration """
    target = rng.uniform(*RECORDING_SECONDS)
    parts = [np.zeros(int(rng.uniform(*GAP_SECONDS) * sample_rate))]
    length = parts[0].size
    while length < target * sample_rate:
        for midi in motif:
            cents = rng.uniform(-10, 10)
            freq = midi_to_hz(midi + cents / 100.0)
            parts.append(_tone(freq, rng.uniform(*NOTE_SECONDS), sample_rate))
        parts.append(np.zeros(int(rng.uniform(*GAP_SECONDS) * sample_rate)))
        length = sum(p.size for p in parts)
    samples = np.concatenate(parts)[:int(target * sample_rate)]
    samples = samples + rng.normal(0.0, NOISE_STD, samples.size)
    return Waveform(np.clip(samples, -1.0, 1.0), sample_rate)


def make_synthetic_dataset(out_dir, species: int = 5,
                           recordings_per: int = 20, seed: int = 7,
                           sample_rate: int = 22050):
    """ Writes WAV files and a `path,species` manifest under out_dir.

        return: str, manifest path

        Usage
        -----
        >>> manifest = make_synthetic_dataset('corpus', species=5, seed=7)
    """
    rng = np.random.default_rng(seed)
    motifs = species_motifs(species, rng)
    rows = []
    for s, (classes, motif) in enumerate(motifs, start=1):
        name = f'sp{s}'
        folder = os.path.join(out_dir, name)
        os.makedirs(folder, exist_ok=True)
        log.info('%s: pitch classes %s, motif %s', name, classes.tolist(),
                 motif)
        for r in range(recordings_per):
            rel = f'{name}/rec{r:03d}.wav'
            write_wav(os.path.join(out_dir, rel),
                      synth_recording(motif, rng, sample_rate))
            rows.append((rel, name))
    manifest = os.path.join(out_dir, 'manifest.csv')
    with atomic_write(manifest, 'w', newline='', encoding='utf-8') as fh:
        pd.DataFrame(rows, columns=['path', 'species']).to_csv(fh,
                                                               index=False)
    return manifest


def periodic_chroma_store(count: int = 60, frames: int = 25,
                          max_period: int = 6, seed: int = 0) -> FeatureStore:
    """ Store of chromagrams that repeat a random column pattern with a
        period of 2..max_period frames, for future-frame experiments.
        Summaries are zero.
    """
    rng = np.random.default_rng(seed)
    records = []
    for i in range(count):
        period = int(rng.integers(2, max_period + 1))
        pattern = rng.random((12, period))
        pattern /= pattern.max(axis=0, keepdims=True)
        offset = int(rng.integers(0, period))
        cols = (np.arange(frames) + offset) % period
        energies = pattern[:, cols].astype(np.float32)
        records.append(SegmentFeatures(
            np.zeros(SUMMARY_LEN, dtype=np.float32),
            Chromagram(energies, normalized=True), 0, i))
    return FeatureStore(['periodic'], records)
