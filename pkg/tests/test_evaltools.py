import math
import os
import tempfile
import unittest

import numpy as np
import openpyxl
import pandas as pd
from numpy.testing import assert_allclose, assert_array_equal

from arionet import evaltools
from arionet.encoder import Encoder, EncoderConfig
from arionet.errors import DataError, FormatError
from arionet.evaltools import ConfusionMatrix
from arionet.synth import periodic_chroma_store


def blobs(seed, count=100):
    rng = np.random.default_rng(seed)
    x = np.vstack([rng.normal(-3.0, 1.0, (count, 2)),
                   rng.normal(3.0, 1.0, (count, 2))])
    y = np.repeat([0, 1], count)
    return x, y


def oracle(counts):
    """ Per-class loops over a confusion matrix; classes with no true and
        no predicted samples stay out of the averages.
    """
    n = counts.shape[0]
    total = counts.sum()
    prec, rec, spec, npv, f1, mcc = [], [], [], [], [], []
    for c in range(n):
        if not counts[c, :].sum() and not counts[:, c].sum():
            continue
        tp = counts[c, c]
        fp = sum(counts[r, c] for r in range(n) if r != c)
        fn = sum(counts[c, p] for p in range(n) if p != c)
        tn = total - tp - fp - fn
        p = tp / (tp + fp) if tp + fp else 0.0
        r = tp / (tp + fn) if tp + fn else 0.0
        prec.append(p)
        rec.append(r)
        spec.append(tn / (tn + fp) if tn + fp else 0.0)
        npv.append(tn / (tn + fn) if tn + fn else 0.0)
        f1.append(2 * p * r / (p + r) if p + r else 0.0)
        den = math.sqrt((tp + fp) * (tp + fn) * (tn + fp) * (tn + fn))
        mcc.append((tp * tn - fp * fn) / den if den else 0.0)
    p_o = sum(counts[i, i] for i in range(n)) / total
    p_e = sum(counts[i, :].sum() * counts[:, i].sum()
              for i in range(n)) / total ** 2
    mae = sum(counts[i, j] * abs(i - j) for i in range(n)
              for j in range(n)) / total
    kappa = (p_o - p_e) / (1 - p_e) if p_e < 1 else float(p_o >= 1)
    return {'accuracy': p_o, 'precision': np.mean(prec),
            'recall': np.mean(rec), 'specificity': np.mean(spec),
            'npv': np.mean(npv), 'f1': np.mean(f1), 'mcc': np.mean(mcc),
            'kappa': kappa, 'label_mae': mae,
            'fpr': 1 - np.mean(spec), 'fdr': 1 - np.mean(prec),
            'fnr': 1 - np.mean(rec)}


class TestClassifiers(unittest.TestCase):

    def test_forest_separable_blobs(self):
        x, y = blobs(0)
        xt, yt = blobs(1)
        model = evaltools.fit_forest(x, y, trees=25, seed=0)
        acc = np.mean(evaltools.forest_predict(model, xt) == yt)
        self.assertGreaterEqual(acc, 0.95)

    def test_forest_memorizes_duplicates(self):
        x = np.repeat(np.array([[0.0, 0.0], [1.0, 1.0], [2.0, 0.0]]), 4,
                      axis=0)
        y = np.repeat([0, 1, 2], 4)
        model = evaltools.fit_forest(x, y, trees=15, seed=1)
        assert_array_equal(evaltools.forest_predict(model, x), y)

    def test_forest_is_seeded(self):
        x, y = blobs(2, 30)
        query = np.random.default_rng(3).normal(0, 3, (40, 2))
        a = evaltools.forest_predict(evaltools.fit_forest(x, y, 10, 7), query)
        b = evaltools.forest_predict(evaltools.fit_forest(x, y, 10, 7), query)
        assert_array_equal(a, b)

    def test_forest_needs_two_classes(self):
        with self.assertRaises(DataError):
            evaltools.fit_forest(np.ones((5, 2)), np.zeros(5))

    def test_vote_ties_to_smallest(self):
        votes = np.array([[2, 0], [1, 0], [1, 2], [2, 2]])
        assert_array_equal(evaltools._vote(votes, np.array([0, 1, 2])),
                           [1, 0])

    def test_knn(self):
        x = np.array([[0.0, 0.0], [1.0, 0.0], [5.0, 5.0]])
        y = np.array([0, 1, 1])
        self.assertEqual(evaltools.knn_predict(x, y, [1.0, 0.0], k=1), 1)
        self.assertEqual(evaltools.knn_predict(x, y, [0.1, 0.0], k=3), 1)
        # two nearest are 0 and 1, a tie resolved toward class 0
        self.assertEqual(evaltools.knn_predict(x, y, [0.4, 0.0], k=2), 0)

    def test_relabeling_permutes_predictions(self):
        rng = np.random.default_rng(8)
        centers = np.array([[0.0, 0.0], [10.0, 0.0], [0.0, 10.0]])
        y = np.repeat([0, 1, 2], 20)
        x = centers[y] + rng.normal(0.0, 0.5, (60, 2))
        query = centers[np.tile([0, 1, 2], 5)] + rng.normal(0.0, 0.5, (15, 2))
        perm = np.array([2, 0, 1])
        forest = evaltools.forest_predict(
            evaltools.fit_forest(x, y, trees=11, seed=3), query)
        relabeled = evaltools.forest_predict(
            evaltools.fit_forest(x, perm[y], trees=11, seed=3), query)
        assert_array_equal(perm[forest], relabeled)
        knn = evaltools.knn_predict(x, y, query, k=5)
        assert_array_equal(perm[knn],
                           evaltools.knn_predict(x, perm[y], query, k=5))

    def test_fit_classifier_and_model_file(self):
        x, y = blobs(4, 20)
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, 'rf.model')
            for kind in ('forest', 'knn'):
                model = evaltools.fit_classifier(x, y, kind, trees=5, k=3,
                                                 species=['a', 'b'],
                                                 test_segments=[1, 2])
                evaltools.save_model(model, path)
                back = evaltools.load_model(path)
                self.assertEqual(back.kind, kind)
                assert_array_equal(back.test_segments, [1, 2])
                assert_array_equal(back.predict(x), model.predict(x))
            with open(path, 'wb') as fh:
                fh.write(b'not a pickle')
            with self.assertRaises(FormatError):
                evaltools.load_model(path)

    def test_stratified_split(self):
        labels = np.repeat([0, 1], 10)
        train, test = evaltools.stratified_split(labels, 0.2, seed=0)
        self.assertEqual(len(test), 4)
        self.assertEqual(np.bincount(labels[test]).tolist(), [2, 2])
        self.assertFalse(set(train) & set(test))


class TestMetrics(unittest.TestCase):

    def test_perfect_diagonal(self):
        report = evaltools.metrics(ConfusionMatrix(np.diag([5, 3, 7])))
        for name in ('accuracy', 'f1', 'mcc', 'kappa', 'precision',
                     'recall'):
            self.assertAlmostEqual(getattr(report, name), 1.0)
        self.assertEqual(report.fpr, 0.0)
        self.assertEqual(report.label_mae, 0.0)

    def test_independent_predictions(self):
        report = evaltools.metrics(ConfusionMatrix([[4, 4], [4, 4]]))
        self.assertAlmostEqual(report.kappa, 0.0)

    def test_missing_class_on_diagonal(self):
        report = evaltools.metrics(ConfusionMatrix(np.diag([5, 0, 7])))
        for name in ('accuracy', 'f1', 'mcc', 'kappa', 'precision',
                     'recall', 'specificity', 'npv'):
            self.assertAlmostEqual(getattr(report, name), 1.0, msg=name)
        self.assertEqual(report.fnr, 0.0)
        self.assertEqual(len(report.per_class), 3)
        self.assertEqual(report.per_class.support.iloc[1], 0)

    def test_random_matrices_match_direct_formulas(self):
        rng = np.random.default_rng(9)
        for _ in range(500):
            n = int(rng.integers(2, 11))
            counts = rng.integers(0, 20, (n, n))
            counts[rng.integers(n), rng.integers(n)] += 1
            report = evaltools.metrics(ConfusionMatrix(counts))
            for name, value in oracle(counts).items():
                self.assertAlmostEqual(getattr(report, name), value,
                                       places=12, msg=f'{name} {counts}')

    def test_shuffled_predictions_average_zero_kappa(self):
        rng = np.random.default_rng(10)
        kappas = []
        for _ in range(100):
            truth = rng.integers(0, 4, 400)
            pred = rng.permutation(truth)
            cm = ConfusionMatrix.from_labels(truth, pred, 4)
            kappas.append(evaltools.metrics(cm).kappa)
        self.assertLess(abs(np.mean(kappas)), 0.05)

    def test_binary_mcc_is_correlation(self):
        rng = np.random.default_rng(11)
        truth = rng.integers(0, 2, 200)
        pred = np.where(rng.random(200) < 0.7, truth, 1 - truth)
        report = evaltools.metrics(ConfusionMatrix.from_labels(truth, pred, 2))
        self.assertAlmostEqual(report.mcc, np.corrcoef(truth, pred)[0, 1],
                               places=12)

    def test_empty_matrix(self):
        with self.assertRaises(DataError):
            evaltools.metrics(ConfusionMatrix(np.zeros((3, 3))))

    def test_from_labels(self):
        cm = ConfusionMatrix.from_labels([0, 1, 1, 2], [0, 1, 2, 2], 4)
        self.assertEqual(cm.n_classes, 4)
        self.assertEqual(cm.counts[1, 2], 1)
        self.assertEqual(cm.total, 4)

    def test_report_files(self):
        report = evaltools.metrics(ConfusionMatrix([[3, 1], [0, 4]]),
                                   ['sp1', 'sp2'])
        with tempfile.TemporaryDirectory() as tmp:
            csv = os.path.join(tmp, 'r.csv')
            report.write_csv(csv)
            frame = pd.read_csv(csv)
            self.assertEqual(frame.metric.tolist(),
                             list(evaltools.METRIC_NAMES))
            xlsx = os.path.join(tmp, 'r.xlsx')
            evaltools.write_report_xlsx(report, xlsx)
            wbook = openpyxl.load_workbook(xlsx)
            self.assertEqual(wbook.sheetnames, ['summary', 'per_class'])
            self.assertEqual(wbook['per_class']['A2'].value, 'sp1')
            png = os.path.join(tmp, 'cm.png')
            evaltools.plot_confusion_matrix(report.confusion, report.labels,
                                            png)
            self.assertGreater(os.path.getsize(png), 0)


class TestFrameStatistics(unittest.TestCase):

    def setUp(self):
        self.orig = np.random.default_rng(6).random((10, 12, 1)) + 0.1

    def test_cosine(self):
        self.assertAlmostEqual(evaltools.cosine_similarity([1, 2], [1, 2]),
                               1.0)
        self.assertEqual(evaltools.cosine_similarity([1, 0], [0, 3]), 0.0)
        self.assertAlmostEqual(evaltools.cosine_similarity([1, 2], [-2, -4]),
                               -1.0)
        self.assertEqual(evaltools.cosine_similarity([0, 0], [1, 1]), 0.0)

    def test_identical_predictions(self):
        fs = evaltools.frame_distribution_stats(self.orig, self.orig)
        self.assertEqual(fs.mean_delta_pct, 0.0)
        self.assertEqual(fs.max_delta_pct, 0.0)

    def test_scaled_predictions(self):
        fs = evaltools.frame_distribution_stats(self.orig, self.orig * 1.01)
        self.assertAlmostEqual(fs.mean_delta_pct, 1.0, places=9)
        self.assertAlmostEqual(fs.max_delta_pct, 1.0, places=9)

    def test_pitch_class_correlation(self):
        o = self.orig[0, :, 0]
        self.assertAlmostEqual(evaltools.pitch_class_correlation(o, o), 1.0)
        self.assertAlmostEqual(
            evaltools.pitch_class_correlation(o, 2.0 - o), -1.0)
        noisy = o + np.random.default_rng(7).normal(0, 0.1, 12)
        a, b = o - o.mean(), noisy - noisy.mean()
        direct = (a @ b) / np.sqrt((a @ a) * (b @ b))
        self.assertAlmostEqual(evaltools.pitch_class_correlation(o, noisy),
                               direct, places=12)
        with self.assertRaises(DataError):
            evaltools.pitch_class_correlation(np.ones(12), o)

    def test_case_studies(self):
        pred = self.orig.copy()
        pred[3] = 0.5
        with self.assertLogs('arionet.evaltools', 'WARNING'):
            cases = evaltools.frame_case_studies(self.orig, pred)
        self.assertEqual(len(cases), 10)
        self.assertTrue(np.isnan(cases.correlation[3]))
        assert_allclose(cases.cosine[0], 1.0)


class TestEmbeddings(unittest.TestCase):

    def test_embed_all_is_repeatable(self):
        store = periodic_chroma_store(count=6, frames=13, seed=3)
        enc = Encoder(EncoderConfig(blocks=1, heads=2, d_model=8,
                                    ffn_dim=16, proj_dim=4), seed=1)
        a = evaltools.embed_all(store, enc, batch_size=4)
        b = evaltools.embed_all(store, enc, batch_size=4)
        assert_array_equal(a.embeddings, b.embeddings)
        self.assertEqual(a.embeddings.shape, (6, 4))
        frame = a.to_frame()
        self.assertEqual(list(frame.columns[:3]),
                         ['segment_id', 'species', 'e0'])


if __name__ == '__main__':
    unittest.main()
