import os
import tempfile
import unittest

import numpy as np
import pandas as pd
from numpy.testing import assert_array_equal

from arionet import pipeline
from arionet.dspcore import AudioSegment, Chromagram, Waveform
from arionet.errors import (BadMagicError, CorruptRecordError, DataError,
                            TruncatedFileError, UnsupportedVersionError)
from arionet.pipeline import FeatureStore, SegmentFeatures
from arionet.runconfig import RunConfig
from arionet.synth import make_synthetic_dataset


def record(species_id, segment_id, recording_id=0, frames=13, fill=0.5):
    return SegmentFeatures(
        np.full(pipeline.SUMMARY_LEN, segment_id, dtype=np.float32),
        Chromagram(np.full((12, frames), fill, dtype=np.float32), True),
        species_id, segment_id, recording_id)


def tone(samples, freq=1000.0, sample_rate=22050):
    t = np.arange(samples) / sample_rate
    return AudioSegment(0.5 * np.sin(2 * np.pi * freq * t), sample_rate)


class TestEnergyMask(unittest.TestCase):

    def test_threshold(self):
        mask = pipeline.frame_energy_mask(np.array([[10.0, 0.4, 5.0]]), 0.05)
        assert_array_equal(mask.keep, [True, False, True])
        self.assertAlmostEqual(mask.threshold, 0.5)
        self.assertAlmostEqual(mask.kept_fraction, 2 / 3)

    def test_equal_single_and_silent(self):
        self.assertTrue(pipeline.frame_energy_mask(np.ones((4, 6))).keep.all())
        self.assertTrue(pipeline.frame_energy_mask(np.ones((4, 1))).keep.all())
        self.assertTrue(
            pipeline.frame_energy_mask(np.zeros((4, 5))).keep.all())

    def test_filtering_is_idempotent(self):
        rng = np.random.default_rng(11)
        mel = rng.random((16, 40)) * rng.choice([0.001, 1.0], size=40)
        first = pipeline.frame_energy_mask(mel, 0.05)
        self.assertFalse(first.keep.all())
        second = pipeline.frame_energy_mask(mel[:, first.keep], 0.05)
        self.assertTrue(second.keep.all())
        self.assertEqual(second.peak, first.peak)

    def test_mask_to_waveform(self):
        w = Waveform(np.arange(12, dtype=float), 100)
        energy = np.array([[1.0, 1.0, 1.0]])
        all_kept = pipeline.frame_energy_mask(energy)
        assert_array_equal(
            pipeline.mask_to_waveform(all_kept, 4, 4, w).samples, w.samples)
        first = pipeline.frame_energy_mask(np.array([[1.0, 0.0, 0.0]]), 0.5)
        assert_array_equal(
            pipeline.mask_to_waveform(first, 4, 4, w).samples, [0, 1, 2, 3])
        none = pipeline.EnergyMask(np.zeros(3, dtype=bool), 1.0, 1.0,
                                   np.zeros(3))
        self.assertEqual(len(pipeline.mask_to_waveform(none, 4, 4, w)), 0)

    def test_filter_silence_removes_gap(self):
        sr = 22050
        loud = tone(sr).samples
        w = Waveform(np.concatenate([loud, np.zeros(sr), loud]), sr)
        filtered, mask = pipeline.filter_silence(w)
        self.assertLess(len(filtered), len(w))
        self.assertFalse(mask.keep.all())


class TestWindows(unittest.TestCase):

    def test_window_size(self):
        self.assertEqual(
            pipeline.compute_window_size([44100, 22050, 88200]), 22050)
        self.assertEqual(pipeline.compute_window_size([777]), 777)
        self.assertEqual(
            pipeline.compute_window_size([44100, 22050], 16384), 16384)
        with self.assertRaises(DataError):
            pipeline.compute_window_size([])

    def test_segment_windows(self):
        w = Waveform(np.arange(10, dtype=float), 100)
        segs = pipeline.segment_windows(w, 3, recording_id=4)
        self.assertEqual(len(segs), 3)
        assert_array_equal(segs[2].samples, [6, 7, 8])
        self.assertEqual(segs[1].recording_id, 4)
        self.assertEqual(segs[1].index, 1)
        self.assertEqual(pipeline.segment_windows(w, 11), [])
        assert_array_equal(pipeline.segment_windows(w, 10)[0].samples,
                           w.samples)
        with self.assertRaises(DataError):
            pipeline.segment_windows(w, 0)


class TestExtractSegment(unittest.TestCase):

    cfg = RunConfig()

    def test_too_short_is_skipped(self):
        self.assertIsNone(pipeline.extract_segment(tone(8191), self.cfg))

    def test_summary_layout(self):
        feats = pipeline.extract_segment(tone(8192), self.cfg, species_id=3)
        self.assertEqual(feats.summary.shape, (44,))
        self.assertEqual(feats.summary.dtype, np.float32)
        self.assertEqual(feats.chroma.n_frames, 13)
        self.assertEqual(feats.species_id, 3)

    def test_constant_tone_deltas(self):
        # whole cycles per hop so every frame sees the same phase
        freq = 23 * 22050 / 512
        feats = pipeline.extract_segment(tone(22050, freq), self.cfg)
        deltas = feats.summary[13:39]
        self.assertLess(np.abs(deltas).max(), 1e-3)
        centroid = feats.summary[pipeline.SUMMARY_COLUMNS.index('centroid')]
        self.assertAlmostEqual(centroid / freq, 1.0, delta=0.05)


class TestCap(unittest.TestCase):

    def test_cap_per_species(self):
        recs = [record(0, i, recording_id=i // 10) for i in range(50)]
        recs += [record(1, 50 + i, recording_id=100) for i in range(5)]
        kept = pipeline.cap_windows_per_species(recs, 20, seed=1)
        counts = np.bincount([r.species_id for r in kept])
        assert_array_equal(counts, [20, 5])
        ids = [r.segment_id for r in kept]
        self.assertEqual(ids, sorted(ids))

    def test_no_cap_is_identity(self):
        recs = [record(i % 2, i, recording_id=i) for i in range(6)]
        kept = pipeline.cap_windows_per_species(list(recs), None)
        self.assertEqual([r.segment_id for r in kept], list(range(6)))

    def test_empty_species_dropped(self):
        recs = [record(0, 0), record(2, 1, recording_id=1)]
        kept, species = pipeline.cap_windows_per_species(
            recs, None, species=['a', 'b', 'c'])
        self.assertEqual(species, ['a', 'c'])
        self.assertEqual([r.species_id for r in kept], [0, 1])


class TestFeatureStore(unittest.TestCase):

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)
        self.store = FeatureStore(
            ['sp1', 'sp2'],
            [record(0, 0), record(1, 1, frames=20, fill=0.25),
             record(1, 2)])

    def test_write_read(self):
        path = os.path.join(self.tmp.name, 'birds.ario')
        pipeline.write_store(self.store, path)
        back = pipeline.read_store(path)
        self.assertEqual(back, self.store)
        self.assertEqual(back.min_chroma_frames(), 13)

    def test_accessors(self):
        assert_array_equal(self.store.labels(), [0, 1, 1])
        self.assertEqual(self.store.species_counts().tolist(), [1, 2])
        self.assertEqual(len(self.store.subset([2])), 1)
        frame = self.store.summary_frame()
        self.assertEqual(list(frame.columns[:2]), ['segment_id', 'species'])
        self.assertEqual(frame.shape, (3, 46))

    def test_bad_magic(self):
        data = bytearray(pipeline.encode_store(self.store))
        data[0:4] = b'XXXX'
        with self.assertRaises(BadMagicError):
            pipeline.decode_store(bytes(data))

    def test_unsupported_version(self):
        data = bytearray(pipeline.encode_store(self.store))
        data[4] += 1
        with self.assertRaises(UnsupportedVersionError):
            pipeline.decode_store(bytes(data))

    def test_truncated(self):
        data = pipeline.encode_store(self.store)
        with self.assertRaises(TruncatedFileError):
            pipeline.decode_store(data[:-3])

    def test_trailing_bytes(self):
        data = pipeline.encode_store(self.store)
        with self.assertRaises(CorruptRecordError):
            pipeline.decode_store(data + b'\0')

    def test_short_chroma_rejected_on_read(self):
        store = FeatureStore(['sp1'], [record(0, 0, frames=5)])
        path = os.path.join(self.tmp.name, 'short.ario')
        pipeline.write_store(store, path)
        with self.assertRaises(CorruptRecordError):
            pipeline.read_store(path)


class TestExtractDataset(unittest.TestCase):

    @classmethod
    def setUpClass(cls):
        cls.tmp = tempfile.TemporaryDirectory()
        cls.manifest = make_synthetic_dataset(cls.tmp.name, species=2,
                                              recordings_per=2, seed=3)

    @classmethod
    def tearDownClass(cls):
        cls.tmp.cleanup()

    def test_manifest(self):
        frame = pipeline.read_manifest(self.manifest)
        self.assertEqual(len(frame), 4)
        self.assertTrue(all(os.path.isabs(p) for p in frame.path))

    def test_manifest_missing_audio(self):
        path = os.path.join(self.tmp.name, 'bad.csv')
        pd.DataFrame({'path': ['nope.wav'], 'species': ['x']}).to_csv(
            path, index=False)
        with self.assertRaises(DataError):
            pipeline.read_manifest(path)

    def test_deterministic_store(self):
        cfg = RunConfig(threads=2)
        frame = pipeline.read_manifest(self.manifest)
        store, stats = pipeline.extract_dataset(frame, cfg, progress=False)
        again, _ = pipeline.extract_dataset(frame, cfg, progress=False)
        self.assertEqual(pipeline.encode_store(store),
                         pipeline.encode_store(again))
        self.assertEqual(store.species, ['sp1', 'sp2'])
        self.assertEqual(stats.recordings.tolist(), [2, 2])
        self.assertEqual(int(stats.retained.sum()), len(store))
        self.assertGreaterEqual(store.min_chroma_frames(), 13)


if __name__ == '__main__':
    unittest.main()
