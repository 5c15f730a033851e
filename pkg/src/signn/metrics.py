"""Confusion-matrix based classification metrics."""

import numpy as np


def confusion_matrix(y_true, y_pred, num_classes: int) -> np.ndarray:
    """Rows are true classes, columns predicted classes."""
    conf = np.zeros((num_classes, num_classes), dtype=np.int64)
    np.add.at(conf, (np.asarray(y_true), np.asarray(y_pred)), 1)
    return conf


def _counts(conf):
    conf = np.asarray(conf, dtype=np.float64)
    if conf.ndim != 2 or conf.shape[0] != conf.shape[1]:
        raise ValueError(f"confusion matrix must be square, got shape {conf.shape}")
    tp = np.diag(conf)
    fp = conf.sum(axis=0) - tp
    fn = conf.sum(axis=1) - tp
    return tp, fp, fn


def _safe_div(num, den):
    num, den = np.asarray(num, dtype=np.float64), np.asarray(den, dtype=np.float64)
    return np.divide(num, den, out=np.zeros_like(num), where=den > 0)


def precision_recall(conf):
    tp, fp, fn = _counts(conf)
    return _safe_div(tp, tp + fp), _safe_div(tp, tp + fn)


def per_class_f1(conf) -> np.ndarray:
    # 2PR/(P+R) == 2TP/(2TP+FP+FN); zero when the class is never seen nor predicted
    tp, fp, fn = _counts(conf)
    return _safe_div(2 * tp, 2 * tp + fp + fn)


def macro_f1(conf) -> float:
    return float(per_class_f1(conf).mean())


def micro_f1(conf) -> float:
    tp, fp, fn = _counts(conf)
    total = tp.sum() + 0.5 * (fp.sum() + fn.sum())
    return float(tp.sum() / total) if total > 0 else 0.0
