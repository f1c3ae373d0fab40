# arionet - self-supervised birdsong representation toolkit
# evaltools Library
# Copyright(C) 2026 arionet contributors
#
# Released under the MIT License - https://opensource.org/licenses/MIT
#

""" evaltools

    Downstream evaluation of frozen embeddings:

        embed_all                  eval-mode embeddings of a feature store

        fit_forest, forest_predict bootstrap forest of Gini trees

        knn_predict                Euclidean k nearest neighbours

        ConfusionMatrix, metrics   one-vs-rest macro metrics, MCC, kappa

    and of future-frame predictions:

        cosine_similarity, frame_distribution_stats,
        pitch_class_correlation, frame_case_studies

    Reports print as aligned `name = value` lines and save as CSV, xlsx
    and PNG.
"""

import logging
import pickle
from dataclasses import dataclass, field
from typing import List

import numpy as np
import openpyxl
import pandas as pd
import scipy.stats as stats
import seaborn as sns
from matplotlib.figure import Figure
from sklearn.metrics import confusion_matrix
from sklearn.model_selection import train_test_split
from sklearn.neighbors import KNeighborsClassifier
from sklearn.tree import DecisionTreeClassifier

from arionet.binfmt import atomic_write
from arionet.errors import DataError, FormatError, ShapeError
from arionet.mlutils import percent_error

log = logging.getLogger(__name__)

METRIC_NAMES = ('accuracy', 'precision', 'recall', 'f1', 'specificity',
                'npv', 'fpr', 'fdr', 'fnr', 'mcc', 'kappa', 'label_mae')


@dataclass(eq=False)
class EmbeddingTable:
    segment_ids: np.ndarray
    labels: np.ndarray
    species: List[str]
    embeddings: np.ndarray

    def __len__(self):
        return self.embeddings.shape[0]

    def to_frame(self) -> pd.DataFrame:
        """ segment_id, species, e0 .. e{d-1} """
        frame = pd.DataFrame(
            self.embeddings,
            columns=[f'e{i}' for i in range(self.embeddings.shape[1])])
        frame.insert(0, 'species', [self.species[i] for i in self.labels])
        frame.insert(0, 'segment_id', self.segment_ids)
        return frame

    def write_csv(self, path):
        with atomic_write(path, 'w', newline='', encoding='utf-8') as fh:
            self.to_frame().to_csv(fh, index=False)


def embed_all(store, encoder, batch_size: int = 64) -> EmbeddingTable:
    """ Unit-length projections of every stored chromagram, computed in
        eval mode and in store order. Chromagrams of equal length are
        encoded together.
    """
    chromas = store.chromas()
    if not chromas:
        raise DataError('feature store has no records')
    out = [None] * len(chromas)
    by_length = {}
    for i, c in enumerate(chromas):
        by_length.setdefault(c.shape[1], []).append(i)
    for idx in by_length.values():
        for start in range(0, len(idx), batch_size):
            part = idx[start:start + batch_size]
            batch = np.stack([chromas[i] for i in part]).astype(np.float64)
            unit = encoder.encode(batch).u_unit
            for row, i in enumerate(part):
                out[i] = unit[row]
    return EmbeddingTable(store.segment_ids(), store.labels(),
                          list(store.species), np.stack(out))


@dataclass
class ForestModel:
    """ Bootstrap forest of Gini decision trees over class ids """
    trees: list
    classes: np.ndarray
    seeds: np.ndarray = field(default=None)

    def __len__(self):
        return len(self.trees)


def fit_forest(x, y, trees: int = 100, seed: int = 0) -> ForestModel:
    """ Fits `trees` Gini trees, each on a bootstrap sample of size N and
        with sqrt(d) candidate features per split.

        x: np.ndarray, N x d

        y: np.ndarray of int class ids

        Raise DataError when y holds fewer than two classes.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=int)
    classes = np.unique(y)
    if classes.size < 2:
        raise DataError(f'a forest needs at least two classes, got '
                        f'{classes.tolist()}')
    rng = np.random.default_rng(seed)
    seeds = rng.integers(0, 2 ** 31 - 1, size=trees)
    fitted = []
    for tree_seed in seeds:
        boot = np.random.default_rng(tree_seed).integers(0, len(y), len(y))
        tree = DecisionTreeClassifier(criterion='gini', max_features='sqrt',
                                      random_state=int(tree_seed))
        fitted.append(tree.fit(x[boot], y[boot]))
    return ForestModel(fitted, classes, seeds)


def _vote(votes: np.ndarray, classes: np.ndarray) -> np.ndarray:
    """ Majority class per column of a trees x N vote matrix; ties go to
        the smallest class id.
    """
    pos = np.searchsorted(classes, votes)
    counts = np.zeros((classes.size, votes.shape[1]), dtype=int)
    np.add.at(counts, (pos, np.arange(votes.shape[1])[None, :]), 1)
    return classes[np.argmax(counts, axis=0)]


def forest_predict(model: ForestModel, x) -> np.ndarray:
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    votes = np.stack([tree.predict(x) for tree in model.trees]).astype(int)
    return _vote(votes, model.classes)


def knn_predict(x_train, y_train, query, k: int = 5):
    """ Euclidean k-NN majority vote, ties toward the smallest class id.

        query: 1-D point or N x d array; a single label is returned for a
            single point.
    """
    x_train = np.asarray(x_train, dtype=np.float64)
    y_train = np.asarray(y_train, dtype=int)
    query = np.asarray(query, dtype=np.float64)
    single = query.ndim == 1
    if k > len(y_train):
        log.warning('k=%d exceeds %d training points, using %d', k,
                    len(y_train), len(y_train))
        k = len(y_train)
    model = KNeighborsClassifier(n_neighbors=k, algorithm='brute')
    model.fit(x_train, y_train)
    proba = model.predict_proba(np.atleast_2d(query))
    labels = model.classes_[np.argmax(proba, axis=1)]
    return int(labels[0]) if single else labels


def stratified_split(labels, test_fraction: float = 0.2, seed: int = 0):
    """ Seeded train/test split of range(len(labels)) keeping class
        proportions.

        return: tuple of two sorted index arrays (train, test)
    """
    labels = np.asarray(labels, dtype=int)
    idx = np.arange(labels.size)
    try:
        train, test = train_test_split(idx, test_size=test_fraction,
                                       stratify=labels, random_state=seed)
    except ValueError as ex:
        raise DataError(f'cannot split {labels.size} segments: {ex}') from ex
    return np.sort(train), np.sort(test)


@dataclass(eq=False)
class ClassifierModel:
    """ Fitted downstream classifier plus the held-out segment ids it
        must be scored on.
    """
    kind: str
    species: list
    test_segments: np.ndarray
    forest: ForestModel = None
    train_x: np.ndarray = None
    train_y: np.ndarray = None
    k: int = 5

    def predict(self, x) -> np.ndarray:
        if self.kind == 'forest':
            return forest_predict(self.forest, x)
        return np.atleast_1d(knn_predict(self.train_x, self.train_y,
                                         np.atleast_2d(x), self.k))


def fit_classifier(x, y, kind: str = 'forest', trees: int = 100, k: int = 5,
                   seed: int = 0, species=(), test_segments=()):
    """ Random forest or k-NN classifier on embeddings x with labels y.
        Raise DataError when y holds fewer than two classes.
    """
    y = np.asarray(y, dtype=int)
    if np.unique(y).size < 2:
        raise DataError(f'classification needs at least two species, got '
                        f'{np.unique(y).tolist()}')
    model = ClassifierModel(kind, list(species),
                            np.asarray(test_segments, dtype=int), k=k)
    if kind == 'forest':
        model.forest = fit_forest(x, y, trees, seed)
    elif kind == 'knn':
        model.train_x = np.asarray(x, dtype=np.float64)
        model.train_y = y
    else:
        raise DataError(f'unknown classifier {kind!r}')
    return model


def save_model(model: ClassifierModel, path):
    with atomic_write(path) as fh:
        pickle.dump(model, fh, protocol=4)


def load_model(path) -> ClassifierModel:
    with open(path, 'rb') as fh:
        try:
            model = pickle.load(fh)
        except (pickle.UnpicklingError, EOFError, AttributeError) as ex:
            raise FormatError(f'{path}: not a classifier model ({ex})') \
                from ex
    if not isinstance(model, ClassifierModel):
        raise FormatError(f'{path}: not a classifier model')
    return model


@dataclass(eq=False)
class ConfusionMatrix:
    """ C x C counts, rows are true classes and columns predictions """
    counts: np.ndarray

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=np.int64)
        if self.counts.ndim != 2 or \
                self.counts.shape[0] != self.counts.shape[1]:
            raise ShapeError(f'confusion matrix must be square, got '
                             f'{self.counts.shape}')
        if (self.counts < 0).any():
            raise DataError('confusion matrix has negative counts')

    @classmethod
    def from_labels(cls, y_true, y_pred, n_classes: int = None):
        y_true = np.asarray(y_true, dtype=int)
        y_pred = np.asarray(y_pred, dtype=int)
        if n_classes is None:
            n_classes = int(max(y_true.max(initial=-1),
                                y_pred.max(initial=-1))) + 1
        return cls(confusion_matrix(y_true, y_pred,
                                    labels=np.arange(n_classes)))

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def n_classes(self) -> int:
        return self.counts.shape[0]


@dataclass(eq=False)
class EvalReport:
    accuracy: float
    precision: float
    recall: float
    f1: float
    specificity: float
    npv: float
    fpr: float
    fdr: float
    fnr: float
    mcc: float
    kappa: float
    label_mae: float
    per_class: pd.DataFrame
    confusion: ConfusionMatrix
    labels: list = None

    def to_frame(self) -> pd.DataFrame:
        """ One row per metric: metric, value """
        return pd.DataFrame({'metric': METRIC_NAMES,
                             'value': [getattr(self, m)
                                       for m in METRIC_NAMES]})

    def write_csv(self, path):
        with atomic_write(path, 'w', newline='', encoding='utf-8') as fh:
            self.to_frame().to_csv(fh, index=False)


def _ratio(num, den):
    num = np.asarray(num, dtype=np.float64)
    den = np.asarray(den, dtype=np.float64)
    return np.divide(num, den, out=np.zeros_like(num), where=den > 0)


def metrics(cm: ConfusionMatrix, labels=None) -> EvalReport:
    """ Classification metrics of a confusion matrix.

        Rates are computed one-vs-rest per class and averaged without
        weights over the classes that occur, as a true or a predicted
        label; a class absent from both is listed in per_class but left
        out of the averages. A rate with a zero denominator is 0 and its
        complement (FPR, FDR, FNR) is 1 minus that rate. MCC is the macro
        mean of the per-class binary MCC (0 when undefined). Kappa uses
        the full matrix. label_mae is the mean |true id - predicted id|.

        Raise DataError for an empty matrix.
    """
    counts = cm.counts.astype(np.float64)
    total = counts.sum()
    if total <= 0:
        raise DataError('confusion matrix holds no samples')
    tp = np.diag(counts)
    fp = counts.sum(axis=0) - tp
    fn = counts.sum(axis=1) - tp
    tn = total - tp - fp - fn
    precision = _ratio(tp, tp + fp)
    recall = _ratio(tp, tp + fn)
    f1 = _ratio(2 * precision * recall, precision + recall)
    specificity = _ratio(tn, tn + fp)
    npv = _ratio(tn, tn + fn)
    mcc_den = np.sqrt((tp + fp) * (tp + fn) * (tn + fp) * (tn + fn))
    mcc = _ratio(tp * tn - fp * fn, mcc_den)

    p_o = tp.sum() / total
    p_e = (counts.sum(axis=0) * counts.sum(axis=1)).sum() / total ** 2
    if p_e >= 1.0:
        kappa = 1.0 if p_o >= 1.0 else 0.0
    else:
        kappa = (p_o - p_e) / (1.0 - p_e)
    ids = np.arange(cm.n_classes)
    label_mae = (counts * np.abs(np.subtract.outer(ids, ids))).sum() / total

    names = list(labels) if labels is not None else [str(i) for i in ids]
    per_class = pd.DataFrame({
        'support': counts.sum(axis=1).astype(int), 'tp': tp.astype(int),
        'fp': fp.astype(int), 'fn': fn.astype(int), 'tn': tn.astype(int),
        'precision': precision, 'recall': recall, 'f1': f1,
        'specificity': specificity, 'npv': npv, 'mcc': mcc},
        index=pd.Index(names, name='species'))
    present = (counts.sum(axis=0) + counts.sum(axis=1)) > 0

    def macro(rates):
        return float(rates[present].mean())

    return EvalReport(
        accuracy=float(p_o), precision=macro(precision),
        recall=macro(recall), f1=macro(f1),
        specificity=macro(specificity), npv=macro(npv),
        fpr=macro(1.0 - specificity), fdr=macro(1.0 - precision),
        fnr=macro(1.0 - recall), mcc=macro(mcc), kappa=float(kappa),
        label_mae=float(label_mae), per_class=per_class, confusion=cm,
        labels=names)


def print_report(report: EvalReport, title='EVALUATION REPORT'):
    print(title)
    print(f'  samples     = {report.confusion.total}')
    print(f'  classes     = {report.confusion.n_classes}')
    for name in METRIC_NAMES:
        print(f'  {name:<11} = {getattr(report, name):.4f}')
    print('Per-class:')
    print(report.per_class.to_string(float_format=lambda v: f'{v:.4f}'))


def write_report_xlsx(report: EvalReport, path):
    """ Saves the report as a workbook with `summary` and `per_class`
        sheets.
    """
    wbook = openpyxl.Workbook()
    summary = wbook.active
    summary.title = 'summary'
    summary.append(['metric', 'value'])
    for name in METRIC_NAMES:
        summary.append([name, float(getattr(report, name))])
    sheet = wbook.create_sheet('per_class')
    frame = report.per_class.reset_index()
    sheet.append(list(frame.columns))
    for row in frame.itertuples(index=False):
        sheet.append([v.item() if hasattr(v, 'item') else v for v in row])
    with atomic_write(path) as fh:
        wbook.save(fh)


def cosine_similarity(z, z_hat) -> float:
    """ z . z_hat / (|z| |z_hat|), 0 when either vector is zero

        Usage
        -----
        >>> cosine_similarity([1, 0], [0, 2])
        0.0
    """
    z = np.ravel(np.asarray(z, dtype=np.float64))
    z_hat = np.ravel(np.asarray(z_hat, dtype=np.float64))
    norm = np.linalg.norm(z) * np.linalg.norm(z_hat)
    if norm == 0:
        return 0.0
    return float(np.dot(z, z_hat) / norm)


def as_frames(a) -> np.ndarray:
    """ M x 12 frame rows from an N x 12 x k stack or an M x 12 matrix """
    a = np.asarray(a, dtype=np.float64)
    if a.ndim == 3:
        return np.transpose(a, (0, 2, 1)).reshape(-1, a.shape[1])
    if a.ndim == 2:
        return a
    raise ShapeError(f'expected N x 12 x k or M x 12 frames, got {a.shape}')


def frame_distribution_stats(originals, predictions) -> pd.Series:
    """ Mean and max per frame, summarised over all frames as mean and
        standard deviation, for both sets, plus the percentage error of
        the predicted mean and max against the original ones.
    """
    orig = as_frames(originals)
    pred = as_frames(predictions)
    if orig.shape != pred.shape:
        raise ShapeError(f'originals {orig.shape} and predictions '
                         f'{pred.shape} differ')
    out = {}
    for tag, frames in (('orig', orig), ('pred', pred)):
        means, maxes = frames.mean(axis=1), frames.max(axis=1)
        out[f'{tag}_mean'] = means.mean()
        out[f'{tag}_mean_std'] = means.std()
        out[f'{tag}_max'] = maxes.mean()
        out[f'{tag}_max_std'] = maxes.std()
    out['mean_delta_pct'] = percent_error(out['orig_mean'], out['pred_mean'])
    out['max_delta_pct'] = percent_error(out['orig_max'], out['pred_max'])
    return pd.Series(out, name='frame_stats', dtype=float)


def print_frame_stats(fs: pd.Series):
    print('FUTURE FRAME DISTRIBUTION')
    print(f"  original mean  = {fs.orig_mean:.4f} +/- {fs.orig_mean_std:.4f}")
    print(f"  predicted mean = {fs.pred_mean:.4f} +/- {fs.pred_mean_std:.4f}")
    print(f"  mean delta     = {fs.mean_delta_pct:.2f} %")
    print(f"  original max   = {fs.orig_max:.4f} +/- {fs.orig_max_std:.4f}")
    print(f"  predicted max  = {fs.pred_max:.4f} +/- {fs.pred_max_std:.4f}")
    print(f"  max delta      = {fs.max_delta_pct:.2f} %")


def pitch_class_correlation(orig, pred) -> float:
    """ Pearson r between two pitch-class vectors.
        Raise DataError when either vector is constant.
    """
    orig = np.ravel(np.asarray(orig, dtype=np.float64))
    pred = np.ravel(np.asarray(pred, dtype=np.float64))
    if orig.shape != pred.shape or orig.size < 2:
        raise ShapeError(f'cannot correlate shapes {orig.shape} and '
                         f'{pred.shape}')
    if np.ptp(orig) == 0 or np.ptp(pred) == 0:
        raise DataError('correlation is undefined for a constant vector')
    return float(stats.pearsonr(orig, pred)[0])


def frame_case_studies(originals, predictions) -> pd.DataFrame:
    """ Per-example comparison of original and predicted future frames:
        mean, max, Pearson r (NaN when undefined), cosine and MAE.
    """
    originals = np.asarray(originals, dtype=np.float64)
    predictions = np.asarray(predictions, dtype=np.float64)
    rows, undefined = [], 0
    for i, (o, p) in enumerate(zip(originals, predictions)):
        try:
            r = pitch_class_correlation(o, p)
        except DataError:
            r = np.nan
            undefined += 1
        rows.append((i, o.mean(), p.mean(), o.max(), p.max(), r,
                     cosine_similarity(o, p), np.abs(o - p).mean()))
    if undefined:
        log.warning('correlation undefined for %d of %d examples',
                    undefined, len(rows))
    return pd.DataFrame(rows, columns=['example', 'orig_mean', 'pred_mean',
                                       'orig_max', 'pred_max', 'correlation',
                                       'cosine', 'mae'])


def plot_confusion_matrix(cm: ConfusionMatrix, labels, path):
    """ Heatmap of the counts saved as PNG """
    size = max(6, 0.6 * cm.n_classes + 3)
    fig = Figure(figsize=(size, size * 0.85))
    ax = fig.subplots()
    sns.heatmap(cm.counts, annot=True, fmt='d', cmap='Blues', cbar=False,
                xticklabels=labels, yticklabels=labels, ax=ax)
    ax.set_xlabel('Predicted')
    ax.set_ylabel('True')
    ax.set_title('Confusion matrix', fontweight='bold')
    fig.tight_layout()
    with atomic_write(path) as fh:
        fig.savefig(fh, format='png')


def plot_trace(trace: pd.DataFrame, path):
    """ Every non-epoch column of a training trace against epoch, PNG """
    columns = [c for c in trace.columns if c != 'epoch']
    fig = Figure(figsize=(10, 3 * len(columns)))
    axes = np.atleast_1d(fig.subplots(len(columns), 1, sharex=True))
    for ax, col in zip(axes, columns):
        ax.plot(trace['epoch'], trace[col], 'k', marker='o', markersize=3,
                lw=1.5, label=col)
        ax.set_ylabel(col)
        ax.legend()
    axes[-1].set_xlabel('Epoch')
    fig.tight_layout()
    with atomic_write(path) as fh:
        fig.savefig(fh, format='png')
