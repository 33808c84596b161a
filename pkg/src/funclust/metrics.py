"""Clustering accuracy metrics against known ground truth."""

from __future__ import annotations

from collections import Counter
from math import comb

import numpy as np

__all__ = ["adjusted_rand_index", "purity", "rmse_theta"]


def _check_labels(a, b):
    a = np.asarray(a).ravel()
    b = np.asarray(b).ravel()
    if a.size != b.size:
        raise ValueError(f"label vector lengths differ: {a.size} != {b.size}")
    if a.size == 0:
        raise ValueError("label vectors are empty")
    return a, b


def adjusted_rand_index(labels_a, labels_b) -> float:
    """Adjusted Rand index via exact integer pair counting.

    Combinatorics run in Python integers, so the result is exact for any n.
    When both partitions are trivial (all singletons or a single cluster) the
    index's denominator vanishes and the partitions are identical; returns 1.
    """
    a, b = _check_labels(labels_a, labels_b)
    n = a.size
    joint = Counter(zip(a.tolist(), b.tolist()))
    rows = Counter(a.tolist())
    cols = Counter(b.tolist())
    sum_ij = sum(comb(c, 2) for c in joint.values())
    sum_a = sum(comb(c, 2) for c in rows.values())
    sum_b = sum(comb(c, 2) for c in cols.values())
    total = comb(n, 2)
    # Work with the index scaled by total to stay in integer arithmetic:
    # ARI = (sum_ij - sum_a sum_b / total) / ((sum_a + sum_b) / 2 - sum_a sum_b / total)
    num = total * sum_ij - sum_a * sum_b
    den = total * (sum_a + sum_b) - 2 * sum_a * sum_b
    if den == 0:
        return 1.0
    return 2.0 * num / den


def purity(labels_pred, labels_true) -> float:
    """Fraction of curves whose predicted cluster's majority truth matches.

    For each predicted cluster take the most common true label; purity is the
    total majority count over n.
    """
    pred, true = _check_labels(labels_pred, labels_true)
    total = 0
    for k in np.unique(pred):
        total += Counter(true[pred == k].tolist()).most_common(1)[0][1]
    return total / pred.size


def rmse_theta(theta_hat, labels_pred, theta_true, labels_true) -> float:
    """Mean per-curve RMSE between fitted and true cluster mean curves.

    For curve i with predicted cluster zhat_i and true cluster z_i the error
    is the root mean square of theta_hat[zhat_i] - theta_true[z_i] over the
    grid; those per-curve values are averaged over all curves.  Labels index
    the rows of the corresponding mean-curve arrays.
    """
    theta_hat = np.atleast_2d(np.asarray(theta_hat, dtype=np.float64))
    theta_true = np.atleast_2d(np.asarray(theta_true, dtype=np.float64))
    pred, true = _check_labels(labels_pred, labels_true)
    if theta_hat.shape[1] != theta_true.shape[1]:
        raise ValueError("fitted and true mean curves live on different grids")
    diff = theta_hat[pred] - theta_true[true]
    return float(np.mean(np.sqrt(np.mean(diff * diff, axis=1))))
