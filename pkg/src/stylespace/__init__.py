"""Learn a cross-category style space from item co-occurrences and retrieve compatible items."""

from .embed import ProjectionModel, TrainConfig, contrastive_loss, embed, gradient_check, init_model, train
from .evaluation import auc, evaluate, histogram, pair_distances, roc_curve, transfer_ratio
from .graph import Catalog, Item, ItemSplit, clean, load_catalog, split_items
from .retrieve import (
    OutfitSpec,
    StyleIndex,
    build_index,
    cluster_pair_affinity,
    generate_outfit,
    index_catalog,
    kmeans,
    nearest_centroid,
    robust_retrieve,
)
from .sampler import Pair, PairDataset, SamplerConfig, build_pair_dataset
from .synth import SynthConfig, generate_catalog, synthesize

__version__ = "0.1.0"

__all__ = [
    "auc",
    "build_index",
    "build_pair_dataset",
    "Catalog",
    "clean",
    "cluster_pair_affinity",
    "contrastive_loss",
    "embed",
    "evaluate",
    "generate_catalog",
    "generate_outfit",
    "gradient_check",
    "histogram",
    "index_catalog",
    "init_model",
    "Item",
    "ItemSplit",
    "kmeans",
    "load_catalog",
    "nearest_centroid",
    "OutfitSpec",
    "Pair",
    "pair_distances",
    "PairDataset",
    "ProjectionModel",
    "robust_retrieve",
    "roc_curve",
    "SamplerConfig",
    "split_items",
    "StyleIndex",
    "SynthConfig",
    "synthesize",
    "train",
    "TrainConfig",
    "transfer_ratio",
]
