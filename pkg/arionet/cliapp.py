# arionet - self-supervised birdsong representation toolkit
# cliapp Library
# Copyright(C) 2026 arionet contributors
#
# Released under the MIT License - https://opensource.org/licenses/MIT
#

""" Batch command line application.

        arionet synth --out corpus --species 5 --seed 7
        arionet extract --manifest corpus/manifest.csv --out birds.ario
        arionet pretrain --store birds.ario --out encoder.ck
        arionet classify --store birds.ario --encoder encoder.ck --out rf.model
        arionet evaluate --store birds.ario --encoder encoder.ck \\
            --model rf.model --report report.csv
        arionet embed --store birds.ario --encoder encoder.ck --out emb.csv
        arionet train-temporal --store birds.ario --out temporal.ck
        arionet predict-frames --store birds.ario --temporal temporal.ck \\
            --out frames.csv
        arionet ablate --store birds.ario --out ablation.csv
        arionet sweep --store birds.ario --aspect lr --out sweep.csv

    Every tunable is a RunConfig field settable with --config FILE or
    --set KEY=VALUE. Exit codes: 0 success, 1 runtime failure, 2 usage
    error, 3 invalid configuration.
"""

import argparse
import logging
import os
import sys
from dataclasses import replace

import numpy as np
import pandas as pd

from arionet import __version__, evaltools, pipeline, sslcontrastive, temporal
from arionet.binfmt import atomic_write
from arionet.encoder import Encoder
from arionet.errors import ArionetError, ConfigError, DataError
from arionet.runconfig import RunConfig
from arionet.synth import make_synthetic_dataset

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2
EXIT_CONFIG = 3

SWEEP_FIELDS = {
    'lr': 'lr',
    'batch': 'batch_size',
    'temperature': 'temperature',
    'proj_dim': 'proj_dim',
    'dropout': 'dropout',
    'classifier': 'classifier',
}

SWEEP_DEFAULTS = {
    'lr': '1e-4,1e-3,1e-2,1e-1',
    'batch': '16,32,64,128',
    'temperature': '0.1,0.3,0.5,0.7',
    'proj_dim': '128,256,512',
    'dropout': '0.1,0.2,0.4',
    'classifier': 'forest,knn',
}

INPUT_FLAGS = ('manifest', 'store', 'encoder', 'model', 'temporal')


def write_frame(frame: pd.DataFrame, path):
    with atomic_write(path, 'w', newline='', encoding='utf-8') as fh:
        frame.to_csv(fh, index=False)
    log.info('wrote %s', path)


def _sidecar(path, suffix):
    return os.path.splitext(path)[0] + suffix


def cmd_synth(args, cfg):
    manifest = make_synthetic_dataset(args.out, args.species,
                                      args.recordings, cfg.seed,
                                      cfg.sample_rate)
    print(f'manifest = {manifest}')


def cmd_extract(args, cfg):
    manifest = pipeline.read_manifest(args.manifest)
    store, stats = pipeline.extract_dataset(manifest, cfg,
                                            progress=args.progress)
    if not len(store):
        raise DataError('no segment survived extraction')
    pipeline.write_store(store, args.out)
    if args.features_csv:
        write_frame(store.summary_frame(), args.features_csv)
    pipeline.print_extract_report(stats, store)


def _plot_trace(trace, path):
    if path:
        evaltools.plot_trace(trace, path)


def cmd_pretrain(args, cfg):
    store = pipeline.read_store(args.store)
    encoder, trace = sslcontrastive.pretrain(store, cfg,
                                             progress=args.progress)
    encoder.save(args.out)
    write_frame(trace, args.trace or _sidecar(args.out, '_trace.csv'))
    _plot_trace(trace, args.plot)
    if len(trace):
        print(f'final mean loss = {trace.mean_loss.iloc[-1]:.6f}')


def _check_temporal_fit(store, cfg):
    need = cfg.context_len + cfg.horizon
    have = store.min_chroma_frames()
    if need > have:
        raise ConfigError(f'context_len + horizon = {need} exceeds the '
                          f'shortest stored chromagram ({have} frames)')


def cmd_train_temporal(args, cfg):
    store = pipeline.read_store(args.store)
    _check_temporal_fit(store, cfg)
    model, trace = temporal.train_temporal(store, cfg,
                                           progress=args.progress)
    model.save(args.out)
    write_frame(trace, args.trace or _sidecar(args.out, '_trace.csv'))
    _plot_trace(trace, args.plot)
    if len(trace):
        best = trace.loc[trace.val_mse.fillna(trace.train_mse).idxmin()]
        print(f'epochs run      = {len(trace)}')
        print(f'best val_mse    = {best.val_mse:.6f}')
        print(f'best val_cosine = {best.val_cosine:.4f}')


def load_encoder(path, cfg) -> Encoder:
    return Encoder.load(path, cfg.encoder_config())


def classify_table(table, cfg):
    """ Stratified split of an embedding table and a classifier fitted on
        the training part.
    """
    train, test = evaltools.stratified_split(table.labels, cfg.test_fraction,
                                             cfg.seed)
    return evaltools.fit_classifier(
        table.embeddings[train], table.labels[train], cfg.classifier,
        cfg.forest_trees, cfg.knn_k, cfg.seed, table.species,
        table.segment_ids[test])


def score_table(model, table):
    """ EvalReport of model on the table rows named by its held-out ids """
    held = np.isin(table.segment_ids, model.test_segments)
    if not held.any():
        log.warning('no held-out segment found in the store, scoring all')
        held[:] = True
    pred = model.predict(table.embeddings[held])
    cm = evaltools.ConfusionMatrix.from_labels(table.labels[held], pred,
                                               len(table.species))
    return evaltools.metrics(cm, table.species)


def cmd_classify(args, cfg):
    store = pipeline.read_store(args.store)
    table = evaltools.embed_all(store, load_encoder(args.encoder, cfg))
    model = classify_table(table, cfg)
    evaltools.save_model(model, args.out)
    print(f'classifier      = {model.kind}')
    print(f'train segments  = {len(table) - len(model.test_segments)}')
    print(f'held-out        = {len(model.test_segments)}')


def cmd_evaluate(args, cfg):
    store = pipeline.read_store(args.store)
    model = evaltools.load_model(args.model)
    table = evaltools.embed_all(store, load_encoder(args.encoder, cfg))
    if np.unique(table.labels).size < 2:
        raise DataError('evaluation needs at least two species')
    report = score_table(model, table)
    evaltools.print_report(report)
    report.write_csv(args.report)
    if args.xlsx:
        evaltools.write_report_xlsx(report, args.xlsx)
    if args.plot:
        evaltools.plot_confusion_matrix(report.confusion, report.labels,
                                        args.plot)


def cmd_embed(args, cfg):
    store = pipeline.read_store(args.store)
    table = evaltools.embed_all(store, load_encoder(args.encoder, cfg))
    table.write_csv(args.out)
    print(f'embeddings = {len(table)} x {table.embeddings.shape[1]}')


def cmd_predict_frames(args, cfg):
    store = pipeline.read_store(args.store)
    _check_temporal_fit(store, cfg)
    model = temporal.TemporalPredictor.load(args.temporal,
                                            cfg.temporal_config())
    originals, predictions = temporal.predict_store(model, store)
    cases = evaltools.frame_case_studies(originals, predictions)
    cases.insert(1, 'segment_id', store.segment_ids())
    write_frame(cases, args.out)
    evaltools.print_frame_stats(
        evaltools.frame_distribution_stats(originals, predictions))


def cmd_ablate(args, cfg):
    store = pipeline.read_store(args.store)
    frame = sslcontrastive.ablate_augmentations(store, cfg,
                                                progress=args.progress)
    write_frame(frame, args.out)
    print(frame.to_string(index=False))


def run_sweep(store, cfg, aspect: str, values, progress=False):
    """ Pretraining plus held-out classification per swept value.

        return: DataFrame aspect, value, final_loss, accuracy, f1
    """
    key = SWEEP_FIELDS[aspect]
    rows = []
    encoder = trace = None
    for text in values:
        run_cfg = replace(cfg, **{key: RunConfig.coerce(key, text)})
        run_cfg.validate_all()
        if aspect != 'classifier' or encoder is None:
            encoder, trace = sslcontrastive.pretrain(store, run_cfg,
                                                     progress=progress)
        table = evaltools.embed_all(store, encoder)
        report = score_table(classify_table(table, run_cfg), table)
        final = float(trace.mean_loss.iloc[-1]) if len(trace) else np.nan
        rows.append((aspect, text, final, report.accuracy, report.f1))
        log.info('sweep %s=%s loss %.4f accuracy %.4f', aspect, text, final,
                 report.accuracy)
    return pd.DataFrame(rows, columns=['aspect', 'value', 'final_loss',
                                       'accuracy', 'f1'])


def cmd_sweep(args, cfg):
    store = pipeline.read_store(args.store)
    values = [v.strip() for v in (args.values or SWEEP_DEFAULTS[args.aspect])
              .split(',') if v.strip()]
    frame = run_sweep(store, cfg, args.aspect, values, args.progress)
    write_frame(frame, args.out)
    print(frame.to_string(index=False))


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', metavar='FILE',
                        help='key = value configuration file')
    common.add_argument('--set', metavar='KEY=VALUE', action='append',
                        default=[], dest='overrides',
                        help='override one configuration value')
    common.add_argument('--seed', type=int, help='random seed')
    common.add_argument('-v', '--verbose', action='count', default=0,
                        help='-v for info, -vv for debug logging')
    common.add_argument('-q', '--quiet', action='store_true',
                        help='log errors only')
    common.add_argument('--no-progress', dest='progress',
                        action='store_false', help='hide progress bars')

    parser = argparse.ArgumentParser(
        prog='arionet',
        description='Self-supervised birdsong representation toolkit')
    parser.add_argument('--version', action='version',
                        version=f'%(prog)s {__version__}')
    sub = parser.add_subparsers(dest='command', metavar='COMMAND')
    sub.required = True

    def command(name, func, help_text):
        p = sub.add_parser(name, parents=[common], help=help_text)
        p.set_defaults(func=func)
        return p

    p = command('synth', cmd_synth, 'write a synthetic species corpus')
    p.add_argument('--out', required=True, metavar='DIR')
    p.add_argument('--species', type=int, default=5)
    p.add_argument('--recordings', type=int, default=20,
                   help='recordings per species')

    p = command('extract', cmd_extract, 'manifest to feature store')
    p.add_argument('--manifest', required=True, metavar='M')
    p.add_argument('--out', required=True, metavar='S')
    p.add_argument('--features-csv', metavar='PATH',
                   help='also write the 44 summary features as CSV')

    p = command('pretrain', cmd_pretrain, 'contrastive encoder pretraining')
    p.add_argument('--store', required=True, metavar='S')
    p.add_argument('--out', required=True, metavar='CK')
    p.add_argument('--trace', metavar='CSV')
    p.add_argument('--plot', metavar='PNG')

    p = command('train-temporal', cmd_train_temporal,
                'future-frame predictor training')
    p.add_argument('--store', required=True, metavar='S')
    p.add_argument('--out', required=True, metavar='CK')
    p.add_argument('--trace', metavar='CSV')
    p.add_argument('--plot', metavar='PNG')

    p = command('classify', cmd_classify, 'fit the species classifier')
    p.add_argument('--store', required=True, metavar='S')
    p.add_argument('--encoder', required=True, metavar='CK')
    p.add_argument('--out', required=True, metavar='MODEL')

    p = command('evaluate', cmd_evaluate, 'score the held-out segments')
    p.add_argument('--store', required=True, metavar='S')
    p.add_argument('--encoder', required=True, metavar='CK')
    p.add_argument('--model', required=True, metavar='MODEL')
    p.add_argument('--report', required=True, metavar='R.csv')
    p.add_argument('--xlsx', metavar='R.xlsx')
    p.add_argument('--plot', metavar='PNG', help='confusion matrix heatmap')

    p = command('embed', cmd_embed, 'export embeddings as CSV')
    p.add_argument('--store', required=True, metavar='S')
    p.add_argument('--encoder', required=True, metavar='CK')
    p.add_argument('--out', required=True, metavar='E.csv')

    p = command('predict-frames', cmd_predict_frames,
                'future-frame case studies')
    p.add_argument('--store', required=True, metavar='S')
    p.add_argument('--temporal', required=True, metavar='CK')
    p.add_argument('--out', required=True, metavar='P.csv')

    p = command('ablate', cmd_ablate, 'augmentation ablation')
    p.add_argument('--store', required=True, metavar='S')
    p.add_argument('--out', required=True, metavar='A.csv')

    p = command('sweep', cmd_sweep, 'hyperparameter sweep')
    p.add_argument('--store', required=True, metavar='S')
    p.add_argument('--aspect', required=True, choices=sorted(SWEEP_FIELDS))
    p.add_argument('--values', metavar='V1,V2,..')
    p.add_argument('--out', required=True, metavar='SW.csv')
    return parser


def setup_logging(verbose: int, quiet: bool):
    if quiet:
        level = logging.ERROR
    elif verbose >= 2:
        level = logging.DEBUG
    elif verbose == 1:
        level = logging.INFO
    else:
        level = logging.WARNING
    logging.basicConfig(level=level,
                        format='%(levelname)s %(name)s: %(message)s')


def build_config(args) -> RunConfig:
    overrides = {}
    for item in args.overrides:
        key, sep, value = item.partition('=')
        if not sep:
            raise ConfigError(f'--set expects KEY=VALUE, got {item!r}')
        overrides[key.strip()] = value
    if args.seed is not None:
        overrides['seed'] = args.seed
    return RunConfig.from_sources(args.config, overrides).validate_all()


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    setup_logging(args.verbose, args.quiet)
    for flag in INPUT_FLAGS:
        path = getattr(args, flag, None)
        if path is not None and not os.path.exists(path):
            parser.error(f'--{flag}: no such file: {path}')
    if args.config is not None and not os.path.isfile(args.config):
        parser.error(f'--config: no such file: {args.config}')
    try:
        cfg = build_config(args)
    except ConfigError as ex:
        print(f'arionet: {ex}', file=sys.stderr)
        return EXIT_CONFIG
    try:
        args.func(args, cfg)
    except ConfigError as ex:
        print(f'arionet: {ex}', file=sys.stderr)
        return EXIT_CONFIG
    except (ArionetError, OSError) as ex:
        log.debug('command failed', exc_info=True)
        print(f'arionet {args.command}: {ex}', file=sys.stderr)
        return EXIT_FAILURE
    return EXIT_OK


if __name__ == '__main__':
    sys.exit(main())
