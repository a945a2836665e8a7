"""Synthetic catalogs with planted latent styles and style-driven co-occurrence."""

from dataclasses import dataclass

import numpy as np

from .errors import CalibrationError, ParameterError
from .graph import Catalog, Item

CATEGORY_NAMES = ("shirts", "pants", "shoes", "coats", "bags", "jeans", "dresses", "skirts", "tops", "hats")


@dataclass(frozen=True)
class SynthConfig:
    num_categories: int = 5
    items_per_category: int = 400
    latent_dim: int = 2
    feature_dim: int = 16
    feature_noise: float = 0.1
    edge_bandwidth: float = 0.1
    edges_per_item: float = 10.0
    label_noise_rate: float = 0.0
    seed: int = 0
    # scale of the one-hot category code before lifting
    category_scale: float = 1.0
    # extra style-independent same-category edges, as a fraction of the cross-category edge target
    within_category_edge_fraction: float = 0.0
    lift: str = "random"

    def __post_init__(self):
        if self.num_categories < 2:
            raise ParameterError("num_categories must be >= 2")
        if self.items_per_category < 2:
            raise ParameterError("items_per_category must be >= 2")
        if self.latent_dim < 1 or self.feature_dim < self.latent_dim:
            raise ParameterError("need 1 <= latent_dim <= feature_dim")
        if self.feature_noise < 0 or not self.edge_bandwidth > 0 or self.edges_per_item < 0:
            raise ParameterError("feature_noise >= 0, edge_bandwidth > 0, edges_per_item >= 0 required")
        if not 0 <= self.label_noise_rate <= 1 or self.within_category_edge_fraction < 0:
            raise ParameterError("label_noise_rate must lie in [0, 1]; within fraction >= 0")
        if self.lift not in ("random", "identity"):
            raise ParameterError("lift must be 'random' or 'identity'")
        if self.lift == "identity" and self.feature_dim != self.latent_dim + self.num_categories:
            raise ParameterError("identity lift needs feature_dim == latent_dim + num_categories")


@dataclass
class Synthetic:
    catalog: Catalog
    true_category: dict
    cross_edges: list
    within_edges: list


def category_names(n):
    return [CATEGORY_NAMES[i] if i < len(CATEGORY_NAMES) else f"cat{i}" for i in range(n)]


def _calibrate(weights, target, tol=1e-9):
    """Scale lam with sum(min(1, lam * w)) == target."""
    positive = weights[weights > 0]
    if target == 0:
        return 0.0
    if target > len(positive):
        raise CalibrationError(f"target of {target:.1f} edges exceeds {len(positive)} candidate pairs")
    if target == len(positive):
        return float(1.0 / positive.min())
    lo, hi = 0.0, 1.0
    while np.minimum(1.0, hi * positive).sum() < target:
        hi *= 2.0
        if not np.isfinite(hi):
            raise CalibrationError("edge probability calibration failed to bracket the target")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if np.minimum(1.0, mid * positive).sum() < target:
            lo = mid
        else:
            hi = mid
        if hi - lo <= tol * hi:
            break
    return hi


def synthesize(config):
    """Generate a catalog plus its generation-time ground truth."""
    rng = np.random.default_rng(config.seed)
    c, per = config.num_categories, config.items_per_category
    n = c * per
    names = category_names(c)
    width = len(str(n - 1))
    ids = [f"i{j:0{width}d}" for j in range(n)]
    gen_cat = np.repeat(np.arange(c), per)

    style = rng.uniform(0.0, 1.0, size=(n, config.latent_dim))
    code = np.zeros((n, c))
    code[np.arange(n), gen_cat] = config.category_scale
    z = np.hstack([style, code])
    if config.lift == "identity":
        lift_w, lift_b = np.eye(z.shape[1]), np.zeros(z.shape[1])
    else:
        lift_w = rng.normal(0.0, 1.0 / np.sqrt(z.shape[1]), size=(config.feature_dim, z.shape[1]))
        lift_b = rng.normal(0.0, 0.1, size=config.feature_dim)
    features = z @ lift_w.T + lift_b
    if config.feature_noise > 0:
        features = features + rng.normal(0.0, config.feature_noise, size=features.shape)

    iu, ju = np.triu_indices(n, k=1)
    cross = gen_cat[iu] != gen_cat[ju]
    ci, cj = iu[cross], ju[cross]
    d2 = ((style[ci] - style[cj]) ** 2).sum(axis=1)
    w = np.exp(-d2 / config.edge_bandwidth ** 2)
    lam = _calibrate(w, config.edges_per_item * n / 2.0)
    hit = rng.random(len(w)) < np.minimum(1.0, lam * w)
    cross_edges = list(zip(ci[hit].tolist(), cj[hit].tolist()))

    within_edges = []
    n_within = int(round(config.within_category_edge_fraction * config.edges_per_item * n / 2.0))
    if n_within:
        wi, wj = iu[~cross], ju[~cross]
        if n_within > len(wi):
            raise CalibrationError(f"{n_within} within-category edges requested, {len(wi)} pairs exist")
        pick = rng.choice(len(wi), size=n_within, replace=False)
        within_edges = list(zip(wi[pick].tolist(), wj[pick].tolist()))

    labels = gen_cat.copy()
    n_noisy = int(round(config.label_noise_rate * n))
    if n_noisy:
        noisy = rng.choice(n, size=n_noisy, replace=False)
        shift = rng.integers(1, c, size=n_noisy)
        labels[noisy] = (gen_cat[noisy] + shift) % c

    items = [Item(ids[j], names[labels[j]], features[j].copy(), style[j].copy()) for j in range(n)]
    edges = [(ids[a], ids[b]) for a, b in cross_edges + within_edges]
    catalog = Catalog(items, edges, config.feature_dim)
    truth = {ids[j]: names[gen_cat[j]] for j in range(n)}
    return Synthetic(catalog, truth,
                     [(ids[a], ids[b]) for a, b in cross_edges],
                     [(ids[a], ids[b]) for a, b in within_edges])


def generate_catalog(config):
    return synthesize(config).catalog
