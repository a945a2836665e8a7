import numpy as np
import pytest

from stylespace.graph import Catalog, Item
from stylespace.synth import SynthConfig, synthesize


def make_catalog(categories, edges=(), dim=2, seed=0, features=None):
    """Catalog from {id: category}; features random unless given."""
    rng = np.random.default_rng(seed)
    items = []
    for item_id, cat in categories.items():
        f = features[item_id] if features is not None else rng.normal(size=dim)
        items.append(Item(item_id, cat, np.asarray(f, dtype=float)))
    return Catalog(items, edges, dim)


@pytest.fixture(scope="session")
def small_synth():
    return synthesize(SynthConfig(num_categories=3, items_per_category=60, feature_dim=8,
                                  edges_per_item=6, seed=11))


ACCEPTANCE_RESULTS = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for cid, name, ok, detail in sorted(ACCEPTANCE_RESULTS):
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} {cid} {name}: {detail}")
