"""numba-compiled kernels; same contracts as the numpy versions."""

import numpy as np
from numba import njit


@njit(cache=True)
def nearest_rows(points, centroids):
    n, dim = points.shape
    k = centroids.shape[0]
    idx = np.empty(n, dtype=np.int64)
    best = np.empty(n)
    for i in range(n):
        bi = 0
        bd = np.inf
        for j in range(k):
            acc = 0.0
            for t in range(dim):
                delta = points[i, t] - centroids[j, t]
                acc += delta * delta
            if acc < bd:
                bd = acc
                bi = j
        idx[i] = bi
        best[i] = bd
    return idx, best


@njit(cache=True)
def cluster_sums(points, assign, k):
    n, dim = points.shape
    sums = np.zeros((k, dim))
    counts = np.zeros(k, dtype=np.int64)
    for i in range(n):
        c = assign[i]
        counts[c] += 1
        for t in range(dim):
            sums[c, t] += points[i, t]
    return sums, counts


@njit(cache=True)
def contrastive_batch(sa, sb, positive, margin):
    n, dim = sa.shape
    loss = np.zeros(n)
    grad_a = np.zeros((n, dim))
    grad_b = np.zeros((n, dim))
    for i in range(n):
        acc = 0.0
        for t in range(dim):
            delta = sa[i, t] - sb[i, t]
            acc += delta * delta
        d = np.sqrt(acc)
        if positive[i]:
            loss[i] = d * d
            coef = 2.0
        elif d < margin:
            gap = margin - d
            loss[i] = gap * gap
            if d == 0.0:
                continue
            coef = -2.0 * gap / d
        else:
            continue
        for t in range(dim):
            g = coef * (sa[i, t] - sb[i, t])
            grad_a[i, t] = g
            grad_b[i, t] = -g
    return loss, grad_a, grad_b
