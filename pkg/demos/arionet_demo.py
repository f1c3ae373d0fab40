""" A walk through the arionet pipeline on a small synthetic corpus.
    Run from the repository root:

        python demos/arionet_demo.py

    Models are kept tiny so the whole demo finishes in a few minutes.
"""
import os
import tempfile

import matplotlib.pyplot as plt
import seaborn as sns

from arionet import evaltools, pipeline, sslcontrastive, temporal
from arionet.runconfig import RunConfig
from arionet.synth import make_synthetic_dataset, periodic_chroma_store

DEMO_CONFIG = RunConfig(epochs=20, batch_size=16, blocks=2, heads=2,
                        d_model=32, ffn_dim=64, proj_dim=32,
                        temporal_epochs=60, temporal_blocks=1,
                        temporal_heads=2, temporal_d_model=16,
                        temporal_ffn_dim=32, temporal_lr=1e-3,
                        cap_per_species=30, seed=7)


def build_store(work_dir, cfg):
    manifest = make_synthetic_dataset(os.path.join(work_dir, 'corpus'),
                                      species=4, recordings_per=10,
                                      seed=cfg.seed)
    store, stats = pipeline.extract_dataset(pipeline.read_manifest(manifest),
                                            cfg)
    pipeline.print_extract_report(stats, store)
    return store


def display_chroma(store):
    # first segment of every species
    first = {}
    for chroma, label in zip(store.chromas(), store.labels()):
        first.setdefault(label, chroma)
    fig, axes = plt.subplots(1, len(first), figsize=(4 * len(first), 3))
    for ax, (label, chroma) in zip(axes, sorted(first.items())):
        sns.heatmap(chroma, cmap='magma', cbar=False, ax=ax)
        ax.set_title(store.species[label])
        ax.set_xlabel('frame')
    axes[0].set_ylabel('pitch class')
    plt.tight_layout()
    plt.show()


def demo_contrastive(store, cfg):
    encoder, trace = sslcontrastive.pretrain(store, cfg)
    plt.style.use('ggplot')
    plt.figure(figsize=(10, 4))
    plt.plot(trace.epoch, trace.mean_loss, 'k', marker='o', lw=2,
             label='NT-Xent')
    plt.legend()
    plt.title('Contrastive pretraining')
    plt.show()

    table = evaltools.embed_all(store, encoder)
    train, test = evaltools.stratified_split(table.labels, cfg.test_fraction,
                                             cfg.seed)
    for kind in ('forest', 'knn'):
        model = evaltools.fit_classifier(
            table.embeddings[train], table.labels[train], kind,
            cfg.forest_trees, cfg.knn_k, cfg.seed, table.species,
            table.segment_ids[test])
        pred = model.predict(table.embeddings[test])
        cm = evaltools.ConfusionMatrix.from_labels(
            table.labels[test], pred, len(table.species))
        evaltools.print_report(evaltools.metrics(cm, table.species),
                               title=f'EVALUATION REPORT ({kind})')


def demo_temporal(cfg):
    store = periodic_chroma_store(count=40, frames=25, max_period=6,
                                  seed=cfg.seed)
    model, trace = temporal.train_temporal(store, cfg)
    print(trace.tail(3).to_string(index=False))
    originals, predictions = temporal.predict_store(model, store)
    evaltools.print_frame_stats(
        evaltools.frame_distribution_stats(originals, predictions))
    cases = evaltools.frame_case_studies(originals, predictions)
    print(cases.head().to_string(index=False))


if __name__ == '__main__':
    cfg = DEMO_CONFIG.validate_all()
    with tempfile.TemporaryDirectory() as work_dir:
        store = build_store(work_dir, cfg)
        display_chroma(store)
        demo_contrastive(store, cfg)
    demo_temporal(cfg)
