from __future__ import annotations

import numpy as np
from scipy.stats import rankdata

from ..errors import KarError
from ..nn import BCE_EPS


class UndefinedMetricError(KarError):
    pass


def auc(scores, labels):
    """Wilcoxon AUC: (concordant + 0.5 * tied) positive/negative pairs over P*N,
    computed from average ranks."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.shape != labels.shape:
        raise ValueError(f"scores {scores.shape} and labels {labels.shape} differ in shape")
    pos = labels == 1
    P = int(pos.sum())
    N = int(len(labels) - P)
    if P == 0 or N == 0:
        raise UndefinedMetricError("AUC needs at least one positive and one negative label")
    ranks = rankdata(scores, method="average")
    u = ranks[pos].sum() - P * (P + 1) / 2.0
    return float(u / (P * N))


def logloss(preds, labels, eps=BCE_EPS):
    p = np.clip(np.asarray(preds, dtype=np.float64), eps, 1.0 - eps)
    y = np.asarray(labels, dtype=np.float64)
    return float(-np.mean(y * np.log(p) + (1.0 - y) * np.log(1.0 - p)))
