# arionet - self-supervised birdsong representation toolkit
# pipeline Library
# Copyright(C) 2026 arionet contributors
#
# Released under the MIT License - https://opensource.org/licenses/MIT
#

""" pipeline

    Recording to feature store:

        1. decode, resample and energy-mask every recording

        2. window size = shortest masked recording (or the configured
           override)

        3. cut non-overlapping windows, drop windows that give fewer than
           chroma_min_frames chromagram frames, describe the rest

        4. cap windows per species and write the ARIO feature store

    Usage
    -----
    >>> store, summary = extract_dataset(read_manifest('birds.csv'), cfg)
    >>> write_store(store, 'birds.ario')
"""

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
import pandas as pd
from tqdm import tqdm

from arionet import dspcore
from arionet.binfmt import BinaryReader, BinaryWriter, atomic_write
from arionet.dspcore import AudioSegment, Chromagram, Waveform
from arionet.errors import (CorruptRecordError, DataError,
                            UnsupportedVersionError)
from arionet.mlutils import worker_count
from arionet.sortutils import sort_labels
from arionet.wavio import decode_wav

log = logging.getLogger(__name__)

STORE_MAGIC = b'ARIO'
STORE_VERSION = 1
SUMMARY_LEN = 44

SUMMARY_COLUMNS = ([f'mfcc_{i}' for i in range(13)]
                   + [f'delta_{i}' for i in range(13)]
                   + [f'delta2_{i}' for i in range(13)]
                   + ['centroid', 'bandwidth', 'rolloff', 'rms', 'zcr'])


@dataclass(frozen=True, eq=False)
class EnergyMask:
    """ Frames kept by mean-energy thresholding """
    keep: np.ndarray
    threshold: float
    peak: float
    frame_energy: np.ndarray

    @property
    def kept_fraction(self) -> float:
        return float(self.keep.mean()) if self.keep.size else 0.0


def frame_energy_mask(mel: np.ndarray, ratio: float = 0.05) -> EnergyMask:
    """ Keeps frames whose mean band energy reaches ratio x the peak
        frame mean. An all-zero input has peak 0 and keeps every frame.

        mel: np.ndarray, bands x T energies

        ratio: float, fraction of the peak frame mean

        return: EnergyMask

        Usage
        -----
        >>> frame_energy_mask(np.array([[10., 0.4, 5.]])).keep
        array([ True, False,  True])
    """
    mel = np.asarray(mel, dtype=np.float64)
    if mel.ndim != 2 or mel.size == 0:
        raise DataError(f'mel must be a non-empty 2-D matrix, got {mel.shape}')
    energy = mel.mean(axis=0)
    peak = float(energy.max())
    threshold = peak * ratio
    return EnergyMask(energy >= threshold, threshold, peak, energy)


def mask_to_waveform(mask: EnergyMask, hop: int, n_fft: int,
                     w: Waveform) -> Waveform:
    """ Samples covered by at least one kept frame's [start, start+n_fft)
        span, concatenated in order.
    """
    keep = np.zeros(len(w), dtype=bool)
    for frame in np.flatnonzero(mask.keep):
        start = frame * hop
        keep[start:start + n_fft] = True
    return Waveform(w.samples[keep], w.sample_rate)


def filter_silence(w: Waveform, n_fft: int = 2048, hop: int = 512,
                   n_mels: int = 128, ratio: float = 0.05):
    """ Energy-masked copy of w and the mask used

        return: tuple (Waveform, EnergyMask)
    """
    spec = dspcore.stft(w, n_fft, hop)
    mask = frame_energy_mask(dspcore.mel_spectrogram(spec, n_mels), ratio)
    return mask_to_waveform(mask, hop, n_fft, w), mask


def compute_window_size(lengths, override: Optional[int] = None) -> int:
    """ Window size in samples: the configured override or the shortest
        effective recording length.
    """
    if override:
        return int(override)
    lengths = list(lengths)
    if not lengths:
        raise DataError('cannot size windows for an empty dataset')
    return int(min(lengths))


def segment_windows(w: Waveform, window: int,
                    recording_id: int = 0) -> List[AudioSegment]:
    """ floor(len/window) non-overlapping segments, remainder dropped """
    if window <= 0:
        raise DataError(f'window must be positive, got {window}')
    count = len(w) // window
    return [AudioSegment(w.samples[i * window:(i + 1) * window],
                         w.sample_rate, recording_id=recording_id, index=i)
            for i in range(count)]


@dataclass(eq=False)
class SegmentFeatures:
    """ 44-value summary plus the 12 x T chromagram of one segment.
        recording_id is bookkeeping for extraction and is not stored.
    """
    summary: np.ndarray
    chroma: Chromagram
    species_id: int
    segment_id: int
    recording_id: int = field(default=-1, compare=False)

    def __eq__(self, other):
        if not isinstance(other, SegmentFeatures):
            return NotImplemented
        return (self.species_id == other.species_id
                and self.segment_id == other.segment_id
                and np.array_equal(self.summary, other.summary)
                and np.array_equal(self.chroma.energies,
                                   other.chroma.energies))

    def validate(self, species_count: int, min_frames: int = 13):
        if self.summary.shape != (SUMMARY_LEN,):
            raise CorruptRecordError(
                f'segment {self.segment_id}: summary length '
                f'{self.summary.shape[0]}, expected {SUMMARY_LEN}')
        if self.chroma.n_frames < min_frames:
            raise CorruptRecordError(
                f'segment {self.segment_id}: {self.chroma.n_frames} chroma '
                f'frames, need at least {min_frames}')
        if not 0 <= self.species_id < species_count:
            raise CorruptRecordError(
                f'segment {self.segment_id}: species id {self.species_id} '
                f'outside label table of {species_count}')


def extract_segment(seg: AudioSegment, cfg,
                    species_id: int = 0) -> Optional[SegmentFeatures]:
    """ Describes one segment, or returns None when it yields fewer than
        cfg.chroma_min_frames chromagram frames.

        seg: AudioSegment

        cfg: RunConfig, or any object with n_fft, hop, n_mels,
            chroma_min_frames, rolloff_ratio and ref_a4

        return: SegmentFeatures (segment_id 0, set by the caller) or None
    """
    spec = dspcore.stft(seg, cfg.n_fft, cfg.hop)
    chroma = dspcore.chromagram(spec, cfg.ref_a4)
    if chroma.n_frames < cfg.chroma_min_frames:
        return None
    mf = dspcore.MfccMatrix.from_coeffs(
        dspcore.mfcc(dspcore.mel_spectrogram(spec, cfg.n_mels)))
    summary = np.concatenate([
        mf.coeffs.mean(axis=1),
        mf.delta.mean(axis=1),
        mf.delta2.mean(axis=1),
        [dspcore.spectral_centroid(spec).mean(),
         dspcore.spectral_bandwidth(spec).mean(),
         dspcore.spectral_rolloff(spec, cfg.rolloff_ratio).mean(),
         dspcore.frame_rms(seg, cfg.n_fft, cfg.hop).mean(),
         dspcore.frame_zcr(seg, cfg.n_fft, cfg.hop).mean()],
    ]).astype(np.float32)
    chroma = chroma.with_energies(chroma.energies.astype(np.float32))
    return SegmentFeatures(summary, chroma, species_id, 0,
                           recording_id=seg.recording_id)


def cap_windows_per_species(records, cap=None, seed: int = 0,
                            species=None):
    """ Keeps at most cap segments per species. Recordings of each
        species are visited in a seeded shuffle and their segments taken
        in order. Species left without segments are dropped and ids are
        re-densified.

        records: list of SegmentFeatures

        cap: int or None (no cap)

        seed: int

        species: list of str, optional label table to re-densify

        return: list of SegmentFeatures, or (records, species) when a
        label table was given
    """
    rng = np.random.default_rng(seed)
    by_species = {}
    for rec in records:
        by_species.setdefault(rec.species_id, {}).setdefault(
            rec.recording_id, []).append(rec)
    kept = []
    present = sorted(by_species)
    remap = {old: new for new, old in enumerate(present)}
    for sid in present:
        recordings = sorted(by_species[sid])
        order = rng.permutation(len(recordings))
        taken = []
        for i in order:
            taken.extend(by_species[sid][recordings[i]])
            if cap is not None and len(taken) >= cap:
                break
        if cap is not None:
            taken = taken[:cap]
        for rec in taken:
            rec.species_id = remap[sid]
        kept.extend(taken)
    kept.sort(key=lambda r: r.segment_id)
    if species is None:
        return kept
    return kept, [species[sid] for sid in present]


class FeatureStore:
    """ Label table plus segment records, the content of an ARIO file """

    def __init__(self, species, records, version: int = STORE_VERSION):
        self.species = list(species)
        self.records = list(records)
        self.version = version

    def __len__(self):
        return len(self.records)

    def __eq__(self, other):
        if not isinstance(other, FeatureStore):
            return NotImplemented
        return (self.species == other.species
                and self.records == other.records)

    def validate(self, min_frames: int = 13):
        for rec in self.records:
            rec.validate(len(self.species), min_frames)

    def labels(self) -> np.ndarray:
        return np.array([r.species_id for r in self.records], dtype=int)

    def segment_ids(self) -> np.ndarray:
        return np.array([r.segment_id for r in self.records], dtype=int)

    def summaries(self) -> np.ndarray:
        return np.stack([r.summary for r in self.records])

    def chromas(self) -> list:
        return [r.chroma.energies for r in self.records]

    def min_chroma_frames(self) -> int:
        return min(r.chroma.n_frames for r in self.records)

    def subset(self, segment_ids):
        """ Store with only the given segment ids, label table unchanged """
        wanted = set(int(s) for s in segment_ids)
        return FeatureStore(self.species,
                            [r for r in self.records if r.segment_id in wanted],
                            self.version)

    def species_counts(self) -> pd.Series:
        counts = pd.Series(0, index=self.species, name='windows')
        for rec in self.records:
            counts.iloc[rec.species_id] += 1
        return counts

    def summary_frame(self) -> pd.DataFrame:
        """ One row per segment: segment_id, species and the 44 summary
            values under their feature names.
        """
        frame = pd.DataFrame(
            self.summaries() if self.records
            else np.zeros((0, SUMMARY_LEN)), columns=SUMMARY_COLUMNS)
        frame.insert(0, 'species',
                     [self.species[r.species_id] for r in self.records])
        frame.insert(0, 'segment_id', self.segment_ids())
        return frame


def encode_store(store: FeatureStore) -> bytes:
    out = BinaryWriter()
    out.magic(STORE_MAGIC)
    out.u32(store.version)
    out.u32(len(store.species))
    for name in store.species:
        out.text(name)
    out.u64(len(store.records))
    for rec in store.records:
        out.u32(rec.species_id)
        out.u32(rec.segment_id)
        out.u32(rec.summary.shape[0])
        out.f32_array(rec.summary)
        rows, cols = rec.chroma.energies.shape
        out.u32(rows)
        out.u32(cols)
        out.f32_array(rec.chroma.energies)
    return out.getvalue()


def decode_store(data: bytes, source='store') -> FeatureStore:
    src = BinaryReader(data, source)
    src.expect_magic(STORE_MAGIC)
    version = src.u32('version')
    if version != STORE_VERSION:
        raise UnsupportedVersionError(
            f'{source}: feature store version {version} is not supported '
            f'(expected {STORE_VERSION})')
    species = [src.text('species name') for _ in range(src.u32('species count'))]
    records = []
    for i in range(src.u64('record count')):
        sid = src.u32(f'record {i} species id')
        seg = src.u32(f'record {i} segment id')
        summary_len = src.u32(f'record {i} summary length')
        if summary_len != SUMMARY_LEN:
            raise CorruptRecordError(
                f'{source}: record {i} summary length {summary_len}, '
                f'expected {SUMMARY_LEN}')
        summary = src.f32_array(summary_len, f'record {i} summary')
        rows = src.u32(f'record {i} chroma rows')
        cols = src.u32(f'record {i} chroma cols')
        if rows != 12:
            raise CorruptRecordError(
                f'{source}: record {i} has {rows} chroma rows, expected 12')
        energies = src.f32_array(rows * cols, f'record {i} chroma')
        records.append(SegmentFeatures(
            summary, Chromagram(energies.reshape(rows, cols), True),
            sid, seg))
    if src.remaining:
        raise CorruptRecordError(
            f'{source}: {src.remaining} trailing bytes after last record')
    return FeatureStore(species, records, version)


def write_store(store: FeatureStore, path):
    """ Writes an ARIO feature store, replacing path atomically """
    with atomic_write(path) as fh:
        fh.write(encode_store(store))
    log.info('wrote %d records for %d species to %s',
             len(store), len(store.species), path)


def read_store(path, min_frames: int = 13) -> FeatureStore:
    """ Reads and validates an ARIO feature store.

        Raise BadMagicError, UnsupportedVersionError, TruncatedFileError or
        CorruptRecordError for malformed files.
    """
    with open(path, 'rb') as fh:
        store = decode_store(fh.read(), os.fspath(path))
    store.validate(min_frames)
    return store


def read_manifest(path) -> pd.DataFrame:
    """ Reads a `path,species` CSV. Relative paths are resolved against
        the manifest folder.

        return: DataFrame with columns path, species in file order
    """
    frame = pd.read_csv(path, dtype=str, keep_default_na=False,
                        encoding='utf-8')
    missing = {'path', 'species'} - set(frame.columns)
    if missing:
        raise DataError(f'{path}: manifest lacks column(s) {sorted(missing)}')
    base = os.path.dirname(os.path.abspath(path))
    frame = frame[['path', 'species']].copy()
    frame['species'] = frame['species'].str.strip()
    frame['path'] = [p if os.path.isabs(p) else os.path.join(base, p)
                     for p in frame['path']]
    if frame.empty:
        raise DataError(f'{path}: manifest has no rows')
    for row, (audio, name) in enumerate(zip(frame['path'], frame['species']),
                                        start=2):
        if not name:
            raise DataError(f'{path}:{row}: empty species name')
        if not os.path.isfile(audio):
            raise DataError(f'{path}:{row}: audio file not found: {audio}')
    return frame


def _describe_recording(job):
    rec_id, segments, species_id, cfg = job
    out, skipped = [], 0
    for seg in segments:
        feats = extract_segment(seg, cfg, species_id)
        if feats is None:
            skipped += 1
        else:
            out.append(feats)
    return out, skipped


def extract_dataset(manifest: pd.DataFrame, cfg, progress: bool = True):
    """ Runs the whole extraction on a manifest.

        manifest: DataFrame from read_manifest

        cfg: RunConfig

        progress: bool, show tqdm bars

        return: tuple (FeatureStore, per-species summary DataFrame with
            recordings, kept_fraction, windows, skipped, retained)
    """
    species = sort_labels(manifest['species'])
    species_index = {name: i for i, name in enumerate(species)}
    workers = worker_count(getattr(cfg, 'threads', None))

    def prepare(audio):
        w = decode_wav(audio, cfg.sample_rate)
        if len(w) == 0:
            return w, None
        return filter_silence(w, cfg.n_fft, cfg.hop, cfg.n_mels,
                              cfg.energy_ratio)

    paths = list(manifest['path'])
    with ThreadPoolExecutor(max_workers=workers) as pool:
        prepared = list(tqdm(pool.map(prepare, paths), total=len(paths),
                             desc='masking', disable=not progress))

    lengths = []
    for audio, (w, mask) in zip(paths, prepared):
        if len(w) == 0:
            log.warning('%s: no samples, recording ignored', audio)
        else:
            lengths.append(len(w))
    window = compute_window_size(lengths, cfg.window_override)
    log.info('window size %d samples (%.3f s)', window,
             window / cfg.sample_rate)

    jobs = []
    for rec_id, ((w, _), name) in enumerate(zip(prepared,
                                                manifest['species'])):
        segments = segment_windows(w, window, rec_id) if len(w) else []
        jobs.append((rec_id, segments, species_index[name], cfg))
    with ThreadPoolExecutor(max_workers=workers) as pool:
        described = list(tqdm(pool.map(_describe_recording, jobs),
                              total=len(jobs), desc='features',
                              disable=not progress))

    stats = pd.DataFrame(0, index=species,
                         columns=['recordings', 'windows', 'skipped',
                                  'retained'])
    kept_fraction = {name: [] for name in species}
    records = []
    for (rec_id, segments, sid, _), (feats, skipped), (_, mask) in zip(
            jobs, described, prepared):
        name = species[sid]
        stats.loc[name, 'recordings'] += 1
        stats.loc[name, 'windows'] += len(segments)
        stats.loc[name, 'skipped'] += skipped
        if mask is not None:
            kept_fraction[name].append(mask.kept_fraction)
        records.extend(feats)
    for seg_id, rec in enumerate(records):
        rec.segment_id = seg_id

    records, kept_species = cap_windows_per_species(
        records, cfg.cap_per_species, cfg.seed, species)
    for name in species:
        if name not in kept_species:
            log.warning('species %r has no valid windows and is excluded',
                        name)
    store = FeatureStore(kept_species, records)
    counts = store.species_counts()
    for name in species:
        stats.loc[name, 'retained'] = int(counts.get(name, 0))
    stats.insert(1, 'kept_fraction',
                 [float(np.mean(kept_fraction[n])) if kept_fraction[n]
                  else 0.0 for n in species])
    stats.index.name = 'species'
    return store, stats


def print_extract_report(stats: pd.DataFrame, store: FeatureStore):
    """ Prints the per-species extraction counts """
    print('Feature extraction')
    print('------------------')
    for name, row in stats.iterrows():
        print(f'{name:<20} recordings = {int(row.recordings):4d}  '
              f'kept = {row.kept_fraction:6.1%}  '
              f'windows = {int(row.windows):5d}  '
              f'skipped = {int(row.skipped):5d}  '
              f'retained = {int(row.retained):5d}')
    print(f'species = {len(store.species)}, records = {len(store)}')
