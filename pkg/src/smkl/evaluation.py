"""Clustering accuracy under the best label matching, and NMI."""
from dataclasses import dataclass

import numpy as np

from .numerics import hungarian


@dataclass(frozen=True)
class MetricReport:
    acc: float
    nmi: float
    confusion: np.ndarray


def _check_pair(pred, truth):
    pred = np.asarray(pred, dtype=int)
    truth = np.asarray(truth, dtype=int)
    if pred.shape != truth.shape:
        raise ValueError(f"length mismatch: {pred.shape} vs {truth.shape}")
    return pred, truth


def contingency(pred, truth):
    """Counts ``C[i, j]`` of samples with pred id i and truth id j (ids compacted)."""
    _, p = np.unique(pred, return_inverse=True)
    _, t = np.unique(truth, return_inverse=True)
    C = np.zeros((p.max() + 1, t.max() + 1), dtype=np.int64)
    np.add.at(C, (p, t), 1)
    return C


def _matched_confusion(pred, truth):
    C = contingency(pred, truth)
    m = max(C.shape)
    padded = np.zeros((m, m), dtype=np.int64)
    padded[:C.shape[0], :C.shape[1]] = C
    assignment = hungarian(-padded)
    # row i of the result is the predicted cluster matched to class i
    inverse = np.argsort(assignment.perm)
    return padded[inverse]


def clustering_accuracy(pred, truth):
    """Fraction correct under the best one-to-one cluster-to-class mapping."""
    pred, truth = _check_pair(pred, truth)
    if pred.size == 0:
        raise ValueError("empty label vectors")
    return float(np.trace(_matched_confusion(pred, truth)) / pred.size)


def _entropy(counts):
    p = counts[counts > 0] / counts.sum()
    return float(-np.sum(p * np.log(p)))


def nmi(pred, truth):
    """Mutual information normalized by ``sqrt(H(pred) H(truth))``, natural logs."""
    pred, truth = _check_pair(pred, truth)
    C = contingency(pred, truth).astype(float)
    n = C.sum()
    h_pred = _entropy(C.sum(axis=1))
    h_truth = _entropy(C.sum(axis=0))
    if h_pred == 0.0 or h_truth == 0.0:
        if h_pred == 0.0 and h_truth == 0.0:
            return 1.0
        # one side constant: it carries no information about the other
        return 0.0
    nz = C > 0
    outer = np.outer(C.sum(axis=1), C.sum(axis=0))
    mi = float(np.sum(C[nz] / n * np.log(C[nz] * n / outer[nz])))
    return float(np.clip(mi / np.sqrt(h_pred * h_truth), 0.0, 1.0))


def evaluate(pred, truth, restrict=None, mode="clustering"):
    """Accuracy and NMI, optionally over a subset of samples.

    In ``mode="ssl"`` accuracy is a plain label match, since class ids are
    fixed by the given labels; otherwise clusters are matched to classes
    first.
    """
    pred, truth = _check_pair(pred, truth)
    if restrict is not None:
        restrict = np.asarray(restrict, dtype=int)
        if restrict.size == 0:
            raise ValueError("empty evaluation index set")
        pred, truth = pred[restrict], truth[restrict]
    if mode == "ssl":
        acc = float(np.mean(pred == truth))
        labels = np.union1d(pred, truth)
        confusion = np.zeros((len(labels), len(labels)), dtype=np.int64)
        np.add.at(confusion, (np.searchsorted(labels, pred), np.searchsorted(labels, truth)), 1)
    else:
        confusion = _matched_confusion(pred, truth)
        acc = float(np.trace(confusion) / pred.size)
    return MetricReport(acc, nmi(pred, truth), confusion)
