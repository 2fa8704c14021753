"""Pixel-level scoring of rendered labels against ground-truth images."""

from __future__ import annotations

import csv
import io

import numpy as np

from .camera import VOID, render_labels

COLUMNS = [
    "average_accuracy", "average_recall", "average_fscore", "average_precision",
    "overall_accuracy", "overall_recall", "overall_fscore", "overall_precision",
    "iou",
]


class ConfusionMatrix:
    """``counts[g, p]`` pixels of ground truth ``g`` predicted as ``p``.

    The extra last column counts valid ground-truth pixels whose prediction
    is void (nothing rendered there); they are misses for the true class and
    belong to no predicted class.
    """

    def __init__(self, n_classes: int):
        self.n_classes = n_classes
        self.counts = np.zeros((n_classes, n_classes + 1), dtype=np.int64)

    def accumulate(self, pred, gt):
        pred, gt = np.asarray(pred), np.asarray(gt)
        if pred.shape != gt.shape:
            raise ValueError(f"prediction {pred.shape} and ground truth {gt.shape} differ in size")
        valid = (gt != VOID) & (gt < self.n_classes)
        g = gt[valid].astype(np.int64)
        p = pred[valid].astype(np.int64)
        p = np.where((p == VOID) | (p >= self.n_classes) | (p < 0), self.n_classes, p)
        k = self.n_classes + 1
        self.counts += np.bincount(g * k + p, minlength=self.n_classes * k).reshape(self.n_classes, k)
        return self

    def __iadd__(self, other):
        self.counts += other.counts
        return self

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def square(self):
        return self.counts[:, :self.n_classes]


def accumulate(pred, gt, n_classes, cm=None):
    cm = ConfusionMatrix(n_classes) if cm is None else cm
    return cm.accumulate(pred, gt)


def _div(a, b):
    a, b = np.asarray(a, float), np.asarray(b, float)
    return np.divide(a, b, out=np.zeros_like(a), where=b > 0)


def _f1(p, r):
    return _div(2 * p * r, p + r)


def metrics(cm) -> dict:
    """Per-class and aggregate scores.

    "average" values pool true/false positives over all pixels (micro);
    "overall" values average the per-class scores over classes present in
    the ground truth (macro). Per-class accuracy is one-vs-rest
    (tp + tn) / total. IoU is the macro mean of tp / (tp + fp + fn).
    """
    if isinstance(cm, ConfusionMatrix):
        counts = cm.counts
    else:
        counts = np.asarray(cm)
        if counts.shape[0] == counts.shape[1]:
            counts = np.hstack([counts, np.zeros((len(counts), 1), counts.dtype)])
    n = counts.shape[0]
    total = counts.sum()
    if total == 0:
        raise ValueError("confusion matrix is empty")
    sq = counts[:, :n]
    tp = np.diag(sq).astype(float)
    support = counts.sum(axis=1).astype(float)
    predicted = sq.sum(axis=0).astype(float)
    fn = support - tp
    fp = predicted - tp
    tn = total - tp - fn - fp

    precision = _div(tp, tp + fp)
    recall = _div(tp, support)
    fscore = _f1(precision, recall)
    iou = _div(tp, tp + fp + fn)
    accuracy = (tp + tn) / total

    present = support > 0
    micro_p = tp.sum() / predicted.sum() if predicted.sum() else 0.0
    micro_r = tp.sum() / total
    out = {
        "per_class": {
            "precision": precision.tolist(), "recall": recall.tolist(),
            "fscore": fscore.tolist(), "iou": iou.tolist(), "accuracy": accuracy.tolist(),
            "support": support.astype(int).tolist(),
        },
        "average_accuracy": float(tp.sum() / total),
        "average_recall": float(micro_r),
        "average_precision": float(micro_p),
        "average_fscore": float(_f1(micro_p, micro_r)),
        "overall_accuracy": float(accuracy[present].mean()),
        "overall_recall": float(recall[present].mean()),
        "overall_precision": float(precision[present].mean()),
        "overall_fscore": float(fscore[present].mean()),
        "iou": float(iou[present].mean()),
        "pixels": int(total),
        "missed": int(counts[:, n:].sum()),
    }
    return out


def report_csv(rows) -> str:
    """CSV text for ``[(name, metrics_dict), ...]`` in the fixed column order."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["method"] + COLUMNS)
    for name, m in rows:
        w.writerow([name] + [f"{m[c]:.6f}" for c in COLUMNS])
    return buf.getvalue()


def report_text(rows) -> str:
    heads = ["method"] + COLUMNS
    body = [[name] + [f"{m[c]:.4f}" for c in COLUMNS] for name, m in rows]
    widths = [max(len(r[i]) for r in [heads] + body) for i in range(len(heads))]
    lines = ["  ".join(c.ljust(wd) if i == 0 else c.rjust(wd)
                       for i, (c, wd) in enumerate(zip(r, widths))) for r in [heads] + body]
    return "\n".join(lines) + "\n"


def evaluate_views(mesh, labels, views, gts, n_classes, vis=None):
    """Render ``labels`` into each view and pool one confusion matrix."""
    if len(views) != len(gts):
        raise ValueError(f"{len(views)} views but {len(gts)} ground-truth images")
    cm = ConfusionMatrix(n_classes)
    for i, (view, gt) in enumerate(zip(views, gts)):
        pred = render_labels(mesh, labels, view, None if vis is None else vis[i])
        cm.accumulate(pred, gt)
    return cm
