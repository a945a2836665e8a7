"""Labeled pair datasets under naive, strategic and holdout-category sampling."""

import csv
import logging
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from ._util import atomic_write, stage_seed
from .errors import NoPositiveCandidatesError, ParameterError, ParseError

logger = logging.getLogger(__name__)

POS = "pos"
NEG = "neg"
STRATEGIES = ("naive", "strategic", "holdout")
_SPLIT_TAGS = {"train": "train", "validation": "val", "test": "test"}


class Pair(NamedTuple):
    a: str
    b: str
    label: str

    @property
    def positive(self):
        return self.label == POS


@dataclass(frozen=True)
class SamplerConfig:
    strategy: str = "strategic"
    holdout_category: str | None = None
    negatives_per_positive_train: int = 16
    test_negative_ratio: float = 1.0
    target_positive_count: int = 1000
    seed: int = 0

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ParameterError(f"unknown strategy {self.strategy!r}; expected one of {STRATEGIES}")
        if self.strategy == "holdout" and not self.holdout_category:
            raise ParameterError("holdout strategy requires holdout_category")
        if self.negatives_per_positive_train < 1:
            raise ParameterError("negatives_per_positive_train must be a positive integer")
        if not self.test_negative_ratio > 0:
            raise ParameterError("test_negative_ratio must be positive")
        if self.target_positive_count < 1:
            raise ParameterError("target_positive_count must be a positive integer")


@dataclass
class PairDataset:
    train: list
    validation: list
    test: list
    config: SamplerConfig
    notes: list = field(default_factory=list)

    def splits(self):
        return {"train": self.train, "validation": self.validation, "test": self.test}

    def __eq__(self, other):
        if not isinstance(other, PairDataset):
            return NotImplemented
        return (self.train, self.validation, self.test, self.config) == (
            other.train, other.validation, other.test, other.config)


def _pool_edges(catalog, pool, anchor=None, heterogeneous=False):
    out = []
    for a, b in catalog.edges:
        if a not in pool or b not in pool:
            continue
        if heterogeneous and catalog.category(a) == catalog.category(b):
            continue
        if anchor is not None and a not in anchor and b not in anchor:
            continue
        out.append((a, b))
    return out


def _note(notes, msg):
    logger.info(msg)
    if notes is not None:
        notes.append(msg)


def sample_positives_naive(catalog, pool, count, seed, *, anchor=None, allow_replacement=True, notes=None):
    """Uniformly sampled co-occurrence edges inside ``pool``, no category rule."""
    if count <= 0:
        return []
    candidates = _pool_edges(catalog, set(pool), anchor)
    if not candidates:
        raise NoPositiveCandidatesError("no co-occurrence edges inside the pool")
    rng = np.random.default_rng(seed)
    chosen = []
    while len(chosen) < count:
        if chosen and not allow_replacement:
            break
        order = rng.permutation(len(candidates))
        chosen.extend(candidates[i] for i in order[:count - len(chosen)])
    if len(chosen) < count:
        _note(notes, f"positives: requested {count}, only {len(chosen)} edges available")
    elif count > len(candidates):
        _note(notes, f"positives: {len(candidates)} edges exhausted, sampled {count} with replacement")
    return [Pair(a, b, POS) for a, b in chosen]


def sample_positives_strategic(catalog, pool, count, seed, *, anchor=None, allow_replacement=True, notes=None):
    """Category-balanced heterogeneous-dyad positives inside ``pool``.

    Edges are grouped by their unordered category pair. Groups are visited
    round-robin in ascending order of available edges (ties by name), each
    visit taking the next edge of that group's seeded permutation, so group
    counts stay within one of each other until small groups run dry. Once
    every group is exhausted a fresh permutation starts (with replacement).
    """
    if count <= 0:
        return []
    candidates = _pool_edges(catalog, set(pool), anchor, heterogeneous=True)
    if not candidates:
        raise NoPositiveCandidatesError("no heterogeneous co-occurrence edges inside the pool")

    groups = {}
    for a, b in candidates:
        key = tuple(sorted((catalog.category(a), catalog.category(b))))
        groups.setdefault(key, []).append((a, b))
    keys = sorted(groups, key=lambda k: (len(groups[k]), k))
    rng = np.random.default_rng(seed)

    chosen = []
    passes = 0
    while len(chosen) < count:
        if passes and not allow_replacement:
            break
        queues = [[groups[k][i] for i in rng.permutation(len(groups[k]))] for k in keys]
        depth = max(len(q) for q in queues)
        for r in range(depth):
            for q in queues:
                if r < len(q):
                    chosen.append(q[r])
                    if len(chosen) == count:
                        break
            if len(chosen) == count:
                break
        passes += 1
    if len(chosen) < count:
        _note(notes, f"positives: requested {count}, only {len(chosen)} heterogeneous edges available")
    elif count > len(candidates):
        _note(notes, f"positives: {len(candidates)} heterogeneous edges exhausted, sampled {count} with replacement")
    return [Pair(a, b, POS) for a, b in chosen]


def sample_negatives(catalog, pool, count, seed, *, anchor=None, notes=None):
    """Distinct unordered non-edge pairs drawn uniformly from ``pool``.

    With ``anchor`` given, only pairs touching at least one anchor item are
    eligible. If fewer than ``count`` eligible pairs exist, all of them are
    returned and the shortfall is noted.
    """
    members = sorted(pool)
    m = len(members)
    if m < 2:
        raise ParameterError("negative sampling needs a pool of at least 2 items")
    if count <= 0:
        return []
    pos = {item_id: i for i, item_id in enumerate(members)}
    is_anchor = np.ones(m, dtype=bool) if anchor is None else np.array([x in anchor for x in members])

    edge_codes = []
    for a, b in catalog.edges:
        if a in pos and b in pos and (is_anchor[pos[a]] or is_anchor[pos[b]]):
            edge_codes.append(pos[a] * m + pos[b])
    edge_codes = np.asarray(edge_codes, dtype=np.int64)

    n_anchor = int(is_anchor.sum())
    n_free = m - n_anchor
    eligible = m * (m - 1) // 2 - n_free * (n_free - 1) // 2 - len(edge_codes)

    rng = np.random.default_rng(seed)
    if count >= eligible or count > eligible // 2:
        i, j = np.triu_indices(m, k=1)
        keep = is_anchor[i] | is_anchor[j]
        codes = (i * m + j)[keep]
        codes = codes[~np.isin(codes, edge_codes)]
        codes = codes[rng.permutation(len(codes))][:count]
        if count > eligible:
            _note(notes, f"negatives: requested {count}, only {eligible} non-edge pairs available")
    else:
        picked = []
        seen = set(edge_codes.tolist())
        while len(picked) < count:
            batch = max(64, 2 * (count - len(picked)))
            u = rng.integers(0, m, size=batch)
            v = rng.integers(0, m, size=batch)
            lo, hi = np.minimum(u, v), np.maximum(u, v)
            ok = (lo != hi) & (is_anchor[lo] | is_anchor[hi])
            for c in (lo[ok] * m + hi[ok]).tolist():
                if c not in seen:
                    seen.add(c)
                    picked.append(c)
                    if len(picked) == count:
                        break
        codes = np.asarray(picked, dtype=np.int64)
    return [Pair(members[c // m], members[c % m], NEG) for c in codes.tolist()]


def build_pair_dataset(catalog, split, config):
    """Sample train/validation/test pairs for one strategy.

    Validation and test positives always follow the heterogeneous-dyad rule
    and are drawn without replacement, so every strategy is scored on the
    same kind of link. Their target size is the train target scaled by pool
    size. Sub-seeds depend on the config seed and split name only, so two
    strategies sharing a seed share their evaluation sets (except holdout,
    whose evaluation pools differ).
    """
    categories = set(catalog.categories())
    holdout = None
    if config.strategy == "holdout":
        if config.holdout_category not in categories:
            raise ParameterError(f"holdout category {config.holdout_category!r} not in catalog")
        holdout = {i for i, it in catalog.items.items() if it.category == config.holdout_category}

    notes = []
    train_pool = set(split.train) - (holdout or set())
    pos_fn = sample_positives_naive if config.strategy == "naive" else sample_positives_strategic

    train_notes = []
    train_pos = pos_fn(catalog, train_pool, config.target_positive_count,
                       stage_seed(config.seed, "train-pos"), notes=train_notes)
    n_neg = len(train_pos) * config.negatives_per_positive_train
    train_neg = sample_negatives(catalog, train_pool, n_neg, stage_seed(config.seed, "train-neg"), notes=train_notes)
    notes.extend(f"train {n}" for n in train_notes)

    out = {"train": train_pos + train_neg}
    for name in ("validation", "test"):
        pool = set(getattr(split, name))
        target = int(round(config.target_positive_count * len(pool) / max(len(train_pool), 1)))
        if target < 1 or len(pool) < 2:
            out[name] = []
            continue
        split_notes = []
        try:
            pos = sample_positives_strategic(catalog, pool, target, stage_seed(config.seed, f"{name}-pos"),
                                             anchor=holdout, allow_replacement=False, notes=split_notes)
        except NoPositiveCandidatesError:
            split_notes.append("no eligible positive edges; split left empty")
            pos = []
        neg = []
        if pos:
            neg = sample_negatives(catalog, pool, int(round(len(pos) * config.test_negative_ratio)),
                                   stage_seed(config.seed, f"{name}-neg"), anchor=holdout, notes=split_notes)
        notes.extend(f"{name} {n}" for n in split_notes)
        out[name] = pos + neg

    for n in notes:
        logger.info("build_pair_dataset: %s", n)
    return PairDataset(out["train"], out["validation"], out["test"], config, notes)


def save_pairs(dataset, path):
    with atomic_write(path, newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["a", "b", "label", "split"])
        for name, pairs in dataset.splits().items():
            tag = _SPLIT_TAGS[name]
            for p in pairs:
                writer.writerow([p.a, p.b, p.label, tag])


def load_pairs(path):
    """Read pairs.csv into a mapping split name -> list of Pair."""
    tags = {v: k for k, v in _SPLIT_TAGS.items()}
    out = {"train": [], "validation": [], "test": []}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [c.strip() for c in header] != ["a", "b", "label", "split"]:
            raise ParseError(f"{path}:1: expected header a,b,label,split")
        for lineno, row in enumerate(reader, 2):
            if not row:
                continue
            if len(row) != 4 or row[2] not in (POS, NEG) or row[3] not in tags:
                raise ParseError(f"{path}:{lineno}: malformed pair row {row!r}")
            if row[0] == row[1]:
                raise ParseError(f"{path}:{lineno}: pair endpoints must differ")
            out[tags[row[3]]].append(Pair(row[0], row[1], row[2]))
    return out
