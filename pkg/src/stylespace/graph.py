"""Item catalog, co-occurrence edges, cleaning and stratified item splits."""

import csv
import json
import logging
from dataclasses import dataclass, field

import numpy as np

from ._util import atomic_write
from .errors import (
    DimensionError,
    EmptyInputError,
    ParameterError,
    ParseError,
    ReferentialIntegrityError,
)

logger = logging.getLogger(__name__)

SPLIT_NAMES = ("train", "validation", "test")


@dataclass(frozen=True, eq=False)
class Item:
    id: str
    category: str
    features: np.ndarray
    style: np.ndarray | None = None


def normalize_edge(a, b):
    if a == b:
        raise ParameterError(f"self-loop edge on {a!r}")
    return (a, b) if a < b else (b, a)


class Catalog:
    """Items keyed by id plus an undirected, duplicate-free edge set.

    Items are kept in sorted-id order and edges as sorted ``(a, b)`` tuples
    with ``a < b``; construction validates every invariant.
    """

    def __init__(self, items, edges=(), feature_dim=None):
        by_id = {}
        for item in items:
            if item.id in by_id:
                raise ParameterError(f"duplicate item id {item.id!r}")
            by_id[item.id] = item
        self.items = {k: by_id[k] for k in sorted(by_id)}

        if feature_dim is None:
            feature_dim = len(next(iter(self.items.values())).features) if self.items else 0
        self.feature_dim = int(feature_dim)
        for item in self.items.values():
            if len(item.features) != self.feature_dim:
                raise DimensionError(
                    f"item {item.id!r} has {len(item.features)} features, expected {self.feature_dim}"
                )
        with_style = sum(item.style is not None for item in self.items.values())
        if with_style not in (0, len(self.items)):
            raise ParameterError("planted style must be present on every item or on none")

        norm = set()
        for a, b in edges:
            for end in (a, b):
                if end not in self.items:
                    raise ReferentialIntegrityError(f"edge ({a!r}, {b!r}) references unknown item {end!r}")
            norm.add(normalize_edge(a, b))
        self.edges = tuple(sorted(norm))
        self._edge_set = frozenset(self.edges)

    def __len__(self):
        return len(self.items)

    def __eq__(self, other):
        if not isinstance(other, Catalog):
            return NotImplemented
        if self.feature_dim != other.feature_dim or self.edges != other.edges:
            return False
        if list(self.items) != list(other.items):
            return False
        for a, b in zip(self.items.values(), other.items.values()):
            if a.category != b.category or not np.array_equal(a.features, b.features):
                return False
            if (a.style is None) != (b.style is None):
                return False
            if a.style is not None and not np.array_equal(a.style, b.style):
                return False
        return True

    @property
    def ids(self):
        return list(self.items)

    @property
    def has_style(self):
        return bool(self.items) and next(iter(self.items.values())).style is not None

    def category(self, item_id):
        return self.items[item_id].category

    def categories(self):
        return sorted({item.category for item in self.items.values()})

    def by_category(self):
        groups = {}
        for item in self.items.values():
            groups.setdefault(item.category, []).append(item.id)
        return {c: groups[c] for c in sorted(groups)}

    def has_edge(self, a, b):
        if a == b:
            return False
        return ((a, b) if a < b else (b, a)) in self._edge_set

    def features(self):
        """Mapping id -> feature vector."""
        return {i: item.features for i, item in self.items.items()}

    def feature_matrix(self, ids=None):
        ids = self.ids if ids is None else ids
        if not ids:
            return np.zeros((0, self.feature_dim))
        return np.stack([self.items[i].features for i in ids])

    def subset(self, keep_ids):
        keep = set(keep_ids)
        items = [it for i, it in self.items.items() if i in keep]
        edges = [e for e in self.edges if e[0] in keep and e[1] in keep]
        return Catalog(items, edges, self.feature_dim)


def load_items(items_path):
    """Parse items.jsonl into a list of Item (no edges)."""
    items = []
    seen = set()
    dim = None
    with open(items_path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                if not isinstance(obj, dict):
                    raise ValueError("expected a JSON object")
                item_id = obj["id"]
                if not isinstance(item_id, str):
                    raise ValueError("id must be a string")
                feats = np.asarray(obj["features"], dtype=np.float64)
                if feats.ndim != 1:
                    raise ValueError("features must be a flat list")
                style = obj.get("style")
                if style is not None:
                    style = np.asarray(style, dtype=np.float64)
                category = obj.get("category") or ""
                if not isinstance(category, str):
                    raise ValueError("category must be a string")
            except (ValueError, KeyError, TypeError) as exc:
                raise ParseError(f"{items_path}:{lineno}: {exc}") from exc
            if item_id in seen:
                raise ParseError(f"{items_path}:{lineno}: duplicate item id {item_id!r}")
            if dim is None:
                dim = len(feats)
            elif len(feats) != dim:
                raise DimensionError(f"{items_path}:{lineno}: item {item_id!r} has {len(feats)} features, expected {dim}")
            seen.add(item_id)
            items.append(Item(item_id, category, feats, style))
    return items


def load_catalog(items_path, edges_path=None):
    """Load items.jsonl and (optionally) edges.csv into a validated Catalog."""
    items = load_items(items_path)
    dim = len(items[0].features) if items else 0
    if edges_path is None:
        return Catalog(items, (), dim)
    seen = {it.id for it in items}
    edges = []
    with open(edges_path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        for lineno, row in enumerate(reader, 1):
            if not row or all(not c.strip() for c in row):
                continue
            if lineno == 1 and [c.strip() for c in row] == ["a", "b"]:
                continue
            if len(row) != 2:
                raise ParseError(f"{edges_path}:{lineno}: expected 2 columns, got {len(row)}")
            a, b = row[0].strip(), row[1].strip()
            if a == b:
                raise ParseError(f"{edges_path}:{lineno}: self-loop on {a!r}")
            for end in (a, b):
                if end not in seen:
                    raise ReferentialIntegrityError(f"{edges_path}:{lineno}: unknown item id {end!r}")
            edges.append((a, b))
    return Catalog(items, edges, dim or 0)


def save_catalog(catalog, items_path, edges_path):
    with atomic_write(items_path) as fh:
        for item in catalog.items.values():
            obj = {"id": item.id, "category": item.category, "features": item.features.tolist()}
            if item.style is not None:
                obj["style"] = item.style.tolist()
            fh.write(json.dumps(obj) + "\n")
    with atomic_write(edges_path, newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["a", "b"])
        writer.writerows(catalog.edges)


def clean(catalog):
    """Drop unlabeled items and (features, category) duplicates beyond the smallest id."""
    seen = set()
    keep = []
    for item_id, item in catalog.items.items():
        if not item.category:
            continue
        key = (item.category, item.features.tobytes())
        if key in seen:
            continue
        seen.add(key)
        keep.append(item_id)
    if len(keep) == len(catalog):
        return catalog
    logger.info("clean: removed %d of %d items", len(catalog) - len(keep), len(catalog))
    return catalog.subset(keep)


@dataclass(frozen=True)
class ItemSplit:
    train: frozenset
    validation: frozenset
    test: frozenset
    seed: int = 0
    ratios: tuple = (80.0, 1.0, 19.0)
    warnings: tuple = field(default=(), compare=False)

    def pools(self):
        return {"train": self.train, "validation": self.validation, "test": self.test}


def largest_remainder(n, ratios):
    """Integer counts summing to n, each within 1 of n * r / sum(r)."""
    total = float(sum(ratios))
    quotas = [n * r / total for r in ratios]
    counts = [int(np.floor(q)) for q in quotas]
    rest = n - sum(counts)
    # stable sort keeps earlier splits first on equal remainders
    order = sorted(range(len(ratios)), key=lambda i: -(quotas[i] - counts[i]))
    for i in order[:rest]:
        counts[i] += 1
    return counts


def split_items(catalog, ratios=(80, 1, 19), seed=0):
    """Stratified train/validation/test split of the catalog's item ids."""
    ratios = tuple(float(r) for r in ratios)
    if len(ratios) != 3 or any(r < 0 or not np.isfinite(r) for r in ratios) or sum(ratios) <= 0:
        raise ParameterError(f"ratios must be three nonnegative reals with a positive sum, got {ratios}")
    if len(catalog) == 0:
        raise EmptyInputError("cannot split an empty catalog")

    rng = np.random.default_rng(seed)
    parts = ([], [], [])
    notes = []
    for category, ids in catalog.by_category().items():
        ids = sorted(ids)
        if len(ids) < 3:
            notes.append(f"category {category!r} has {len(ids)} item(s); assigned wholly to train")
            parts[0].extend(ids)
            continue
        counts = largest_remainder(len(ids), ratios)
        order = rng.permutation(len(ids))
        start = 0
        for part, c in zip(parts, counts):
            part.extend(ids[j] for j in order[start:start + c])
            start += c
    for note in notes:
        logger.warning("split_items: %s", note)
    return ItemSplit(frozenset(parts[0]), frozenset(parts[1]), frozenset(parts[2]),
                     int(seed), ratios, tuple(notes))


def save_split(split, path):
    obj = {
        "train": sorted(split.train),
        "validation": sorted(split.validation),
        "test": sorted(split.test),
        "seed": split.seed,
        "ratios": list(split.ratios),
    }
    with atomic_write(path) as fh:
        json.dump(obj, fh)
        fh.write("\n")


def load_split(path):
    with open(path, encoding="utf-8") as fh:
        obj = json.load(fh)
    try:
        return ItemSplit(frozenset(obj["train"]), frozenset(obj["validation"]), frozenset(obj["test"]),
                         int(obj.get("seed", 0)), tuple(float(r) for r in obj.get("ratios", (80, 1, 19))))
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"{path}: malformed splits file: {exc}") from exc
