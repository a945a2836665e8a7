"""Per-category k-means style index and cluster-mediated robust retrieval."""

import json
import logging
import warnings
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import kernels
from ._util import atomic_write, stage_seed
from .embed import embed
from .errors import EmptyIndexError, OutfitSpecError, ParameterError, ParseError, RetrievalDomainError

logger = logging.getLogger(__name__)

DEFAULT_K = 20
DEFAULT_N = 5

# Handpicked outfit slots; every list names categories that are worn together.
DEFAULT_OUTFITS = [
    ["shirts", "pants", "shoes"],
    ["shirts", "jeans", "shoes"],
    ["tops", "skirts", "shoes"],
    ["coats", "pants", "shoes"],
    ["dresses", "shoes", "bags"],
    ["shirts", "pants", "shoes", "bags"],
]


class KMeansResult(NamedTuple):
    centroids: np.ndarray
    assignments: np.ndarray
    objective_history: list
    iterations: int


def _kmeans_pp(points, k, rng):
    n = len(points)
    chosen = [int(rng.integers(n))]
    d2 = ((points - points[chosen[0]]) ** 2).sum(axis=1)
    for _ in range(1, k):
        total = d2.sum()
        if total > 0:
            nxt = int(rng.choice(n, p=d2 / total))
        else:
            # every point coincides with a chosen centroid
            nxt = next(i for i in range(n) if i not in chosen) if len(chosen) < n else 0
        chosen.append(nxt)
        d2 = np.minimum(d2, ((points - points[nxt]) ** 2).sum(axis=1))
    return points[chosen].copy()


def kmeans(points, k, seed=0, max_iters=100):
    """Lloyd's algorithm with seeded k-means++ initialization.

    Stops once assignments repeat or after ``max_iters`` updates. An empty
    cluster is re-seeded at the point currently farthest from its centroid.
    ``objective_history`` holds the within-cluster sum of squares after each
    assignment step.
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or len(pts) == 0:
        raise ParameterError("kmeans needs a non-empty 2-D array of points")
    if not np.all(np.isfinite(pts)):
        raise ParameterError("points must be finite")
    k = int(k)
    if k <= 0:
        raise ParameterError(f"k must be positive, got {k}")
    if k > len(pts):
        warnings.warn(f"k={k} exceeds {len(pts)} points; clamped", RuntimeWarning, stacklevel=2)
        k = len(pts)

    rng = np.random.default_rng(seed)
    centroids = _kmeans_pp(pts, k, rng)
    assign, d2 = kernels.nearest_rows(pts, centroids)
    history = [float(d2.sum())]
    it = 0
    while it < max_iters:
        it += 1
        sums, counts = kernels.cluster_sums(pts, assign, k)
        new = centroids.copy()
        nonempty = counts > 0
        new[nonempty] = sums[nonempty] / counts[nonempty, None]
        if not nonempty.all():
            far = d2.copy()
            for c in np.flatnonzero(~nonempty):
                j = int(np.argmax(far))
                new[c] = pts[j]
                far[j] = -1.0
        centroids = new
        new_assign, d2 = kernels.nearest_rows(pts, centroids)
        history.append(float(d2.sum()))
        if np.array_equal(new_assign, assign):
            break
        assign = new_assign
    return KMeansResult(centroids, assign, history, it)


def nearest_centroid(s_a, centroids):
    c = np.asarray(centroids, dtype=np.float64)
    if c.size == 0:
        raise EmptyIndexError("no centroids to search")
    q = np.asarray(s_a, dtype=np.float64).reshape(1, -1)
    idx, _ = kernels.nearest_rows(q, c.reshape(len(c), -1))
    return int(idx[0])


@dataclass
class CategoryIndex:
    ids: list
    styles: np.ndarray
    centroids: np.ndarray
    assignments: np.ndarray

    @property
    def k(self):
        return len(self.centroids)


@dataclass
class StyleIndex:
    categories: dict = field(default_factory=dict)

    def __post_init__(self):
        self._where = {}
        for name, entry in self.categories.items():
            for row, item_id in enumerate(entry.ids):
                self._where[item_id] = (name, row)

    def __contains__(self, item_id):
        return item_id in self._where

    def category_of(self, item_id):
        return self._where[item_id][0]

    def style_of(self, item_id):
        name, row = self._where[item_id]
        return self.categories[name].styles[row]

    def entry(self, category):
        entry = self.categories.get(category)
        if entry is None or not entry.ids:
            raise RetrievalDomainError(f"category {category!r} is not indexed or empty")
        return entry


def build_index(styles, categories, k=DEFAULT_K, seed=0, max_iters=100):
    """Cluster every category's style vectors.

    ``styles`` maps id -> K-vector and ``categories`` maps id -> label. Each
    category gets its own k-means seed derived from ``seed`` and its name;
    k is clamped to the category size.
    """
    groups = {}
    for item_id in sorted(styles):
        groups.setdefault(categories[item_id], []).append(item_id)
    out = {}
    for name in sorted(groups):
        ids = groups[name]
        pts = np.stack([np.asarray(styles[i], dtype=np.float64) for i in ids])
        kk = min(int(k), len(ids))
        if kk < k:
            logger.info("index: category %r has %d items; k clamped to %d", name, len(ids), kk)
        res = kmeans(pts, kk, stage_seed(seed, f"kmeans:{name}"), max_iters)
        out[name] = CategoryIndex(ids, pts, res.centroids, res.assignments)
    return StyleIndex(out)


def index_catalog(catalog, model, k=DEFAULT_K, seed=0, ids=None):
    ids = catalog.ids if ids is None else sorted(ids)
    vecs = embed(model, catalog.feature_matrix(ids))
    return build_index(dict(zip(ids, vecs)), {i: catalog.category(i) for i in ids}, k, seed)


def retrieval_candidates(query_style, index, target, n=DEFAULT_N):
    """Nearest target centroid and the ``n`` target items closest to it.

    Returns ``(centroid_index, candidate_rows)``; rows index into the
    category's sorted id list, ordered by distance then id.
    """
    if n < 1:
        raise ParameterError("n must be at least 1")
    entry = index.entry(target)
    q = np.asarray(query_style, dtype=np.float64)
    c_star = nearest_centroid(q, entry.centroids)
    d = ((entry.styles - entry.centroids[c_star]) ** 2).sum(axis=1)
    rows = np.argsort(d, kind="stable")[:min(n, len(d))]
    return c_star, rows


def robust_retrieve(query_style, index, target, n=DEFAULT_N):
    """Route the query through the target's nearest centroid, then pick the best of its ``n`` closest items."""
    _, rows = retrieval_candidates(query_style, index, target, n)
    entry = index.categories[target]
    q = np.asarray(query_style, dtype=np.float64)
    d = ((entry.styles[rows] - q) ** 2).sum(axis=1)
    # rows are id-ordered on equal centroid distance, but ties to the query go to the lowest id
    best = min(range(len(rows)), key=lambda i: (d[i], rows[i]))
    return entry.ids[int(rows[best])]


def nearest_in_category(query_style, index, target):
    """Plain 1-NN within a category label (lowest id on ties)."""
    entry = index.entry(target)
    d = ((entry.styles - np.asarray(query_style, dtype=np.float64)) ** 2).sum(axis=1)
    return entry.ids[int(np.argmin(d))]


@dataclass(frozen=True)
class OutfitSpec:
    categories: tuple

    def __post_init__(self):
        cats = tuple(self.categories)
        object.__setattr__(self, "categories", cats)
        if len(cats) < 2:
            raise OutfitSpecError("an outfit needs at least 2 categories")
        if len(set(cats)) != len(cats):
            raise OutfitSpecError(f"outfit categories must be distinct: {cats}")


@dataclass(frozen=True)
class Outfit:
    query: str
    members: dict


def generate_outfit(query, spec, index, model=None, n=DEFAULT_N, catalog=None):
    """Assemble one item per remaining spec category around ``query``.

    The query's style vector is read from the index when present; otherwise
    it is embedded from ``catalog`` features with ``model``.
    """
    if query in index:
        category = index.category_of(query)
        style = index.style_of(query)
    elif catalog is not None and model is not None and query in catalog.items:
        category = catalog.category(query)
        style = embed(model, catalog.items[query].features)
    else:
        raise RetrievalDomainError(f"query item {query!r} is neither indexed nor embeddable")
    if category not in spec.categories:
        raise OutfitSpecError(f"query category {category!r} not in outfit {list(spec.categories)}")
    members = {}
    for target in spec.categories:
        if target != category:
            members[target] = robust_retrieve(style, index, target, n)
    return Outfit(query, members)


class ClusterPair(NamedTuple):
    cluster_a: int
    cluster_b: int
    distance: float


def cluster_pair_affinity(index, cat_a, cat_b):
    """Closest and farthest centroid pair between two categories.

    Ties go to the lexicographically lowest (i, j).
    """
    ca = index.entry(cat_a).centroids
    cb = index.entry(cat_b).centroids
    d = np.sqrt(((ca[:, None, :] - cb[None, :, :]) ** 2).sum(axis=2))
    lo = np.unravel_index(np.argmin(d), d.shape)
    hi = np.unravel_index(np.argmax(d), d.shape)
    closest = ClusterPair(int(lo[0]), int(lo[1]), float(d[lo]))
    farthest = ClusterPair(int(hi[0]), int(hi[1]), float(d[hi]))
    return closest, farthest


def load_outfit_specs(path):
    with open(path, encoding="utf-8") as fh:
        obj = json.load(fh)
    try:
        return [OutfitSpec(tuple(c)) for c in obj["outfits"]]
    except (KeyError, TypeError) as exc:
        raise ParseError(f"{path}: expected {{\"outfits\": [[category, ...], ...]}}") from exc


def default_outfit_specs():
    return [OutfitSpec(tuple(c)) for c in DEFAULT_OUTFITS]


def save_index(index, path):
    obj = {}
    for name, entry in index.categories.items():
        obj[name] = {
            "k": entry.k,
            "centroids": entry.centroids.tolist(),
            "items": [{"id": i, "style": s.tolist(), "cluster": int(c)}
                      for i, s, c in zip(entry.ids, entry.styles, entry.assignments)],
        }
    with atomic_write(path) as fh:
        json.dump(obj, fh)
        fh.write("\n")


def load_index(path):
    with open(path, encoding="utf-8") as fh:
        obj = json.load(fh)
    cats = {}
    try:
        for name, e in obj.items():
            items = e["items"]
            cats[name] = CategoryIndex(
                [it["id"] for it in items],
                np.array([it["style"] for it in items], dtype=np.float64),
                np.array(e["centroids"], dtype=np.float64),
                np.array([it["cluster"] for it in items], dtype=np.int64),
            )
            if cats[name].k != e["k"]:
                raise ValueError(f"category {name!r}: k={e['k']} but {cats[name].k} centroids")
    except (KeyError, TypeError, ValueError, AttributeError) as exc:
        raise ParseError(f"{path}: malformed index: {exc}") from exc
    return StyleIndex(cats)
