"""Pure-numpy reference kernels."""

import numpy as np


def nearest_rows(points, centroids):
    """Index of and squared distance to the nearest centroid for every point.

    Ties resolve to the lowest centroid index.
    """
    diff = points[:, None, :] - centroids[None, :, :]
    d2 = np.einsum("ijk,ijk->ij", diff, diff)
    idx = np.argmin(d2, axis=1)
    return idx.astype(np.int64), d2[np.arange(len(points)), idx]


def cluster_sums(points, assign, k):
    sums = np.zeros((k, points.shape[1]))
    np.add.at(sums, assign, points)
    counts = np.bincount(assign, minlength=k).astype(np.int64)
    return sums, counts


def contrastive_batch(sa, sb, positive, margin):
    diff = sa - sb
    d = np.sqrt(np.einsum("ij,ij->i", diff, diff))
    loss = np.where(positive, d * d, 0.0)
    coef = np.where(positive, 2.0, 0.0)

    hinge = (~positive) & (d < margin)
    gap = margin - d[hinge]
    loss[hinge] = gap * gap
    # zero gradient at d == 0 (direction undefined)
    active = hinge & (d > 0.0)
    coef[active] = -2.0 * (margin - d[active]) / d[active]

    grad_a = coef[:, None] * diff
    return loss, grad_a, -grad_a
