import itertools
import json
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stylespace.embed import ProjectionModel
from stylespace.errors import EmptyIndexError, OutfitSpecError, ParameterError, RetrievalDomainError
from stylespace.retrieve import (
    CategoryIndex,
    OutfitSpec,
    StyleIndex,
    build_index,
    cluster_pair_affinity,
    generate_outfit,
    kmeans,
    load_index,
    load_outfit_specs,
    nearest_centroid,
    nearest_in_category,
    retrieval_candidates,
    robust_retrieve,
    save_index,
)


def sse(points, centroids, assign):
    return float(((points - centroids[assign]) ** 2).sum())


def brute_robust(query, ids, styles, centroids, n):
    """Eqs. 1-3 by explicit linear scans with lowest-index tie breaks."""
    best_c, best_d = 0, None
    for i, c in enumerate(centroids):
        d = sum((q - x) ** 2 for q, x in zip(query, c))
        if best_d is None or d < best_d:
            best_c, best_d = i, d
    c = centroids[best_c]
    dist_c = [(sum((s - x) ** 2 for s, x in zip(styles[r], c)), ids[r], r) for r in range(len(ids))]
    cands = sorted(dist_c)[:n]
    best = min(cands, key=lambda t: (sum((s - q) ** 2 for s, q in zip(styles[t[2]], query)), t[1]))
    return best[1], {t[1] for t in cands}


def test_kmeans_k_equals_n_recovers_points():
    pts = np.random.default_rng(0).normal(size=(7, 3))
    res = kmeans(pts, 7, seed=1)
    assert res.objective_history[-1] == 0.0
    assert sorted(map(tuple, res.centroids)) == sorted(map(tuple, pts))


def test_kmeans_identical_points():
    pts = np.tile([[1.5, -2.0]], (6, 1))
    res = kmeans(pts, 3, seed=0)
    np.testing.assert_array_equal(res.centroids, np.tile([[1.5, -2.0]], (3, 1)))


@pytest.mark.parametrize("seed", range(10))
def test_kmeans_two_separated_pairs_matches_exhaustive_partition(seed):
    pts = np.array([[0.0, 0.0], [0.0, 1.0], [10.0, 0.0], [10.0, 1.0]])
    best = None
    for labels in itertools.product([0, 1], repeat=4):
        if len(set(labels)) < 2:
            continue
        lab = np.array(labels)
        cents = np.array([pts[lab == j].mean(axis=0) for j in (0, 1)])
        val = sse(pts, cents, lab)
        if best is None or val < best[0]:
            best = (val, cents)
    res = kmeans(pts, 2, seed=seed)
    assert sorted(map(tuple, res.centroids)) == sorted(map(tuple, best[1]))
    assert res.objective_history[-1] == pytest.approx(best[0])


def test_kmeans_clamps_k_with_warning():
    with pytest.warns(RuntimeWarning):
        res = kmeans(np.eye(3), 5)
    assert len(res.centroids) == 3


def test_kmeans_rejects_nonpositive_k():
    with pytest.raises(ParameterError):
        kmeans(np.eye(3), 0)


@given(st.integers(2, 60), st.integers(1, 8), st.integers(1, 4), st.integers(0, 10**6))
@settings(max_examples=60, deadline=None)
def test_kmeans_monotone_and_consistent(n, k, dim, seed):
    rng = np.random.default_rng(seed)
    pts = np.round(rng.normal(size=(n, dim)), 1)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        res = kmeans(pts, k, seed=seed)
    h = res.objective_history
    assert all(b <= a * (1 + 1e-12) + 1e-12 for a, b in zip(h, h[1:]))
    d = ((pts[:, None, :] - res.centroids[None]) ** 2).sum(axis=2)
    assert np.array_equal(res.assignments, np.argmin(d, axis=1))


def test_nearest_centroid_single_and_tie():
    assert nearest_centroid([3.0, 3.0], [[0.0, 0.0]]) == 0
    assert nearest_centroid([0.0, 0.0], [[1.0, 0.0], [-1.0, 0.0]]) == 0


def test_nearest_centroid_matches_scan():
    rng = np.random.default_rng(4)
    for _ in range(20):
        cents, q = rng.normal(size=(20, 5)), rng.normal(size=5)
        scan = min(range(20), key=lambda i: (float(np.sum((q - cents[i]) ** 2)), i))
        assert nearest_centroid(q, cents) == scan


def test_nearest_centroid_empty():
    with pytest.raises(EmptyIndexError):
        nearest_centroid([1.0], np.zeros((0, 1)))


def tiny_index():
    styles = {"s1": [0.0, 0.0], "s2": [1.0, 0.0], "p1": [5.0, 5.0], "p2": [5.5, 5.0], "p3": [6.0, 5.0],
              "h1": [9.0, 9.0]}
    cats = {"s1": "shirts", "s2": "shirts", "p1": "pants", "p2": "pants", "p3": "pants", "h1": "hats"}
    return build_index(styles, cats, k=2, seed=0)


def test_single_item_category():
    idx = tiny_index()
    assert robust_retrieve([0.0, 0.0], idx, "hats", n=5) == "h1"


def test_full_n_equals_plain_nearest_neighbor():
    rng = np.random.default_rng(2)
    styles = {f"i{j:03d}": rng.normal(size=3) for j in range(120)}
    cats = {i: ("a" if j % 2 else "b") for j, i in enumerate(styles)}
    idx = build_index(styles, cats, k=6, seed=1)
    for _ in range(30):
        q = rng.normal(size=3)
        assert robust_retrieve(q, idx, "a", n=60) == nearest_in_category(q, idx, "a")


def test_mislabeled_outlier_is_skipped():
    rng = np.random.default_rng(0)
    styles, cats = {}, {}
    for j in range(40):
        styles[f"shoe{j:02d}"] = rng.normal([10.0, 0.0], 0.3)
        cats[f"shoe{j:02d}"] = "shoes"
    for j in range(10):
        styles[f"shirt{j:02d}"] = rng.normal([0.0, 0.0], 0.3)
        cats[f"shirt{j:02d}"] = "shirts"
    # a shirt carrying the shoes label, right next to the query
    styles["zz-mislabel"] = np.array([0.1, 0.0])
    cats["zz-mislabel"] = "shoes"
    # one centroid per category, so the outlier cannot own a cluster
    idx = build_index(styles, cats, k=1, seed=3)
    q = np.array([0.0, 0.0])
    assert nearest_in_category(q, idx, "shoes") == "zz-mislabel"
    got = robust_retrieve(q, idx, "shoes", n=5)
    e = idx.categories["shoes"]
    oracle, cands = brute_robust(q, e.ids, e.styles, e.centroids, 5)
    assert got == oracle and got != "zz-mislabel"
    assert "zz-mislabel" not in cands


def test_robust_matches_brute_force_and_eq3_optimality():
    rng = np.random.default_rng(9)
    styles = {f"i{j:03d}": rng.normal(size=2) for j in range(200)}
    cats = {i: "abc"[j % 3] for j, i in enumerate(styles)}
    idx = build_index(styles, cats, k=5, seed=0)
    for _ in range(50):
        q = rng.normal(size=2)
        for target in "abc":
            e = idx.categories[target]
            got = robust_retrieve(q, idx, target, n=5)
            oracle, cands = brute_robust(q, e.ids, e.styles, e.centroids, 5)
            assert got == oracle
            assert cats[got] == target
            _, rows = retrieval_candidates(q, idx, target, 5)
            dq = {e.ids[r]: float(np.sum((e.styles[r] - q) ** 2)) for r in rows}
            assert dq[got] == min(dq.values())


def test_retrieve_unknown_category():
    with pytest.raises(RetrievalDomainError):
        robust_retrieve([0.0, 0.0], tiny_index(), "bags")


def test_outfit_two_categories():
    out = generate_outfit("s1", OutfitSpec(("shirts", "pants")), tiny_index())
    assert set(out.members) == {"pants"} and out.members["pants"].startswith("p")


def test_outfit_with_missing_category_names_it():
    with pytest.raises(RetrievalDomainError, match="bags"):
        generate_outfit("s1", OutfitSpec(("shirts", "bags")), tiny_index())


def test_outfit_query_category_not_in_spec():
    with pytest.raises(OutfitSpecError):
        generate_outfit("s1", OutfitSpec(("pants", "hats")), tiny_index())


def test_outfit_spec_validation():
    with pytest.raises(OutfitSpecError):
        OutfitSpec(("shirts",))
    with pytest.raises(OutfitSpecError):
        OutfitSpec(("shirts", "shirts"))


def test_outfit_on_synthetic_matches_oracle(small_synth):
    cat = small_synth.catalog
    ident = ProjectionModel.from_layers([(np.eye(cat.feature_dim), np.zeros(cat.feature_dim))])
    styles = {i: it.style for i, it in cat.items.items()}
    idx = build_index(styles, {i: cat.category(i) for i in styles}, k=20, seed=2)
    spec = OutfitSpec(("shirts", "pants", "shoes"))
    for q in cat.ids[::17]:
        out = generate_outfit(q, spec, idx, ident, n=5)
        for target, got in out.members.items():
            e = idx.categories[target]
            assert got == brute_robust(styles[q], e.ids, e.styles, e.centroids, 5)[0]
            assert cat.category(got) == target


def test_outfit_embeds_unindexed_query(small_synth):
    cat = small_synth.catalog
    ident = ProjectionModel.from_layers([(np.eye(cat.feature_dim), np.zeros(cat.feature_dim))])
    shirts = [i for i in cat.ids if cat.category(i) == "shirts"]
    others = [i for i in cat.ids if cat.category(i) != "shirts"]
    idx = build_index({i: cat.items[i].features for i in others}, {i: cat.category(i) for i in others}, k=4)
    out = generate_outfit(shirts[0], OutfitSpec(("shirts", "shoes")), idx, ident, catalog=cat)
    assert cat.category(out.members["shoes"]) == "shoes"


def test_affinity_single_cluster_each():
    idx = StyleIndex({
        "a": CategoryIndex(["x"], np.array([[0.0, 0.0]]), np.array([[0.0, 0.0]]), np.array([0])),
        "b": CategoryIndex(["y"], np.array([[3.0, 4.0]]), np.array([[3.0, 4.0]]), np.array([0])),
    })
    closest, farthest = cluster_pair_affinity(idx, "a", "b")
    assert closest == farthest == (0, 0, 5.0)


def test_affinity_identical_centroid_sets():
    c = np.array([[0.0, 1.0], [2.0, 2.0]])
    entry = lambda: CategoryIndex(["p", "q"], c.copy(), c.copy(), np.array([0, 1]))
    idx = StyleIndex({"a": entry(), "b": entry()})
    closest, _ = cluster_pair_affinity(idx, "a", "b")
    assert closest.distance == 0.0 and (closest.cluster_a, closest.cluster_b) == (0, 0)


def test_affinity_matches_nine_pair_scan():
    rng = np.random.default_rng(1)
    for _ in range(10):
        ca, cb = rng.normal(size=(3, 2)), rng.normal(size=(3, 2))
        idx = StyleIndex({"a": CategoryIndex(["1", "2", "3"], ca, ca, np.arange(3)),
                          "b": CategoryIndex(["4", "5", "6"], cb, cb, np.arange(3))})
        scan = [(float(np.linalg.norm(ca[i] - cb[j])), i, j) for i in range(3) for j in range(3)]
        lo = min(scan)
        hi = max(scan, key=lambda t: (t[0], -t[1], -t[2]))
        closest, farthest = cluster_pair_affinity(idx, "a", "b")
        assert (closest.cluster_a, closest.cluster_b) == lo[1:] and closest.distance == pytest.approx(lo[0])
        assert (farthest.cluster_a, farthest.cluster_b) == hi[1:] and farthest.distance == pytest.approx(hi[0])


def test_affinity_missing_category():
    with pytest.raises(RetrievalDomainError):
        cluster_pair_affinity(tiny_index(), "shirts", "bags")


def test_index_json_roundtrip(tmp_path):
    idx = tiny_index()
    save_index(idx, tmp_path / "index.json")
    obj = json.loads((tmp_path / "index.json").read_text())
    assert set(obj["pants"]) == {"k", "centroids", "items"}
    assert set(obj["pants"]["items"][0]) == {"id", "style", "cluster"}
    back = load_index(tmp_path / "index.json")
    for name, e in idx.categories.items():
        b = back.categories[name]
        assert b.ids == e.ids and np.array_equal(b.styles, e.styles)
        assert np.array_equal(b.centroids, e.centroids) and np.array_equal(b.assignments, e.assignments)


def test_index_determinism():
    a, b = tiny_index(), tiny_index()
    for name in a.categories:
        assert np.array_equal(a.categories[name].centroids, b.categories[name].centroids)


def test_outfit_spec_file(tmp_path):
    p = tmp_path / "outfits.json"
    p.write_text(json.dumps({"outfits": [["shirts", "pants", "shoes"], ["dresses", "bags"]]}))
    specs = load_outfit_specs(p)
    assert specs[1].categories == ("dresses", "bags")
