import contextlib
import io
import os
import tempfile
import unittest

import pandas as pd

from arionet import cliapp, pipeline

TINY_CONFIG = """\
# small models so a full run takes seconds
epochs = 1
batch_size = 8
blocks = 1
heads = 2
d_model = 8
ffn_dim = 16
proj_dim = 4
temporal_epochs = 1
temporal_blocks = 1
temporal_heads = 2
temporal_d_model = 8
temporal_ffn_dim = 16
forest_trees = 5
"""


def run(*argv):
    """ main() with stdout captured; returns (exit code, output) """
    out = io.StringIO()
    with contextlib.redirect_stdout(out), \
            contextlib.redirect_stderr(io.StringIO()):
        try:
            code = cliapp.main(list(argv))
        except SystemExit as ex:
            code = ex.code
    return code, out.getvalue()


class TestCommandLine(unittest.TestCase):

    @classmethod
    def setUpClass(cls):
        cls.tmp = tempfile.TemporaryDirectory()
        cls.dir = cls.tmp.name
        cls.cfg = cls.path('run.cfg')
        with open(cls.cfg, 'w', encoding='utf-8') as fh:
            fh.write(TINY_CONFIG)
        cls.store = cls.path('birds.ario')
        code, _ = run('synth', '--out', cls.path('corpus'), '--species', '2',
                      '--recordings', '4', '--seed', '5', '-q')
        assert code == 0, code
        code, cls.extract_out = run(
            'extract', '--manifest', cls.path('corpus', 'manifest.csv'),
            '--out', cls.store, '--features-csv', cls.path('features.csv'),
            '--no-progress', '-q')
        assert code == 0, code

    @classmethod
    def tearDownClass(cls):
        cls.tmp.cleanup()

    @classmethod
    def path(cls, *parts):
        return os.path.join(cls.tmp.name, *parts)

    def common(self):
        return ['--config', self.cfg, '--no-progress', '-q']

    def test_extract_outputs(self):
        self.assertIn('species = 2', self.extract_out)
        store = pipeline.read_store(self.store)
        features = pd.read_csv(self.path('features.csv'))
        self.assertEqual(len(features), len(store))
        self.assertEqual(features.shape[1], 46)

    def test_pretrain_classify_evaluate_embed(self):
        enc = self.path('enc.ck')
        model = self.path('rf.model')
        report = self.path('report.csv')
        code, out = run('pretrain', '--store', self.store, '--out', enc,
                        *self.common())
        self.assertEqual(code, 0)
        self.assertIn('final mean loss', out)
        trace = pd.read_csv(self.path('enc_trace.csv'))
        self.assertEqual(trace.epoch.tolist(), [1])

        code, _ = run('classify', '--store', self.store, '--encoder', enc,
                      '--out', model, *self.common())
        self.assertEqual(code, 0)
        code, out = run('evaluate', '--store', self.store, '--encoder', enc,
                        '--model', model, '--report', report,
                        '--xlsx', self.path('report.xlsx'), *self.common())
        self.assertEqual(code, 0)
        self.assertIn('accuracy', out)
        frame = pd.read_csv(report)
        self.assertEqual(len(frame), 12)
        self.assertTrue(os.path.exists(self.path('report.xlsx')))

        code, _ = run('embed', '--store', self.store, '--encoder', enc,
                      '--out', self.path('emb.csv'), *self.common())
        self.assertEqual(code, 0)
        emb = pd.read_csv(self.path('emb.csv'))
        self.assertEqual(emb.shape[1], 2 + 4)

    def test_repeated_runs_are_byte_identical(self):
        def contents(path):
            with open(path, 'rb') as fh:
                return fh.read()

        outputs = []
        for tag in ('a', 'b'):
            store = self.path(f'{tag}.ario')
            enc = self.path(f'{tag}.ck')
            model = self.path(f'{tag}.model')
            report = self.path(f'{tag}_report.csv')
            steps = [
                ('extract', '--manifest', self.path('corpus', 'manifest.csv'),
                 '--out', store),
                ('pretrain', '--store', store, '--out', enc),
                ('classify', '--store', store, '--encoder', enc,
                 '--out', model),
                ('evaluate', '--store', store, '--encoder', enc,
                 '--model', model, '--report', report),
                ('embed', '--store', store, '--encoder', enc,
                 '--out', self.path(f'{tag}_emb.csv'))]
            for argv in steps:
                code, _ = run(*argv, *self.common())
                self.assertEqual(code, 0, argv[0])
            outputs.append([contents(p) for p in (
                store, enc, report, self.path(f'{tag}_emb.csv'))])
        self.assertEqual(outputs[0], outputs[1])
        self.assertEqual(contents(self.store), outputs[0][0])

    def test_model_shape_mismatch_is_runtime_error(self):
        enc = self.path('enc_small.ck')
        code, _ = run('pretrain', '--store', self.store, '--out', enc,
                      *self.common())
        self.assertEqual(code, 0)
        code, _ = run('embed', '--store', self.store, '--encoder', enc,
                      '--out', self.path('x.csv'), *self.common(),
                      '--set', 'd_model=16')
        self.assertEqual(code, cliapp.EXIT_FAILURE)

    def test_temporal_commands(self):
        ck = self.path('temporal.ck')
        code, out = run('train-temporal', '--store', self.store, '--out', ck,
                        '--trace', self.path('t.csv'), *self.common())
        self.assertEqual(code, 0)
        self.assertIn('best val_mse', out)
        code, out = run('predict-frames', '--store', self.store,
                        '--temporal', ck, '--out', self.path('frames.csv'),
                        *self.common())
        self.assertEqual(code, 0)
        self.assertIn('mean delta', out)
        frames = pd.read_csv(self.path('frames.csv'))
        self.assertIn('correlation', frames.columns)
        self.assertIn('segment_id', frames.columns)

    def test_context_longer_than_store_is_config_error(self):
        code, _ = run('train-temporal', '--store', self.store,
                      '--out', self.path('never.ck'), *self.common(),
                      '--set', 'context_len=2000',
                      '--set', 'chroma_min_frames=2001')
        self.assertEqual(code, cliapp.EXIT_CONFIG)
        self.assertFalse(os.path.exists(self.path('never.ck')))

    def test_sweep(self):
        code, _ = run('sweep', '--store', self.store, '--aspect', 'dropout',
                      '--values', '0.0,0.3', '--out', self.path('sw.csv'),
                      *self.common())
        self.assertEqual(code, 0)
        frame = pd.read_csv(self.path('sw.csv'))
        self.assertEqual(frame.value.tolist(), [0.0, 0.3])
        self.assertEqual(list(frame.columns),
                         ['aspect', 'value', 'final_loss', 'accuracy', 'f1'])

    def test_invalid_config_exit_code(self):
        code, _ = run('pretrain', '--store', self.store, '--out',
                      self.path('bad.ck'), '--set', 'lr=-1', '-q')
        self.assertEqual(code, cliapp.EXIT_CONFIG)
        code, _ = run('pretrain', '--store', self.store, '--out',
                      self.path('bad.ck'), '--set', 'nonsense=1', '-q')
        self.assertEqual(code, cliapp.EXIT_CONFIG)

    def test_missing_input_is_usage_error(self):
        code, _ = run('pretrain', '--store', self.path('absent.ario'),
                      '--out', self.path('x.ck'))
        self.assertEqual(code, cliapp.EXIT_USAGE)
        code, _ = run('pretrain')
        self.assertEqual(code, cliapp.EXIT_USAGE)

    def test_corrupt_store_is_runtime_error(self):
        bad = self.path('corrupt.ario')
        with open(bad, 'wb') as fh:
            fh.write(b'JUNKJUNKJUNK')
        code, _ = run('pretrain', '--store', bad, '--out', self.path('c.ck'),
                      '-q')
        self.assertEqual(code, cliapp.EXIT_FAILURE)


if __name__ == '__main__':
    unittest.main()
