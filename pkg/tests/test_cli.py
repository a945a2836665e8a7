import json

import numpy as np
import pytest

from stylespace._util import stage_seed
from stylespace.cli import main
from stylespace.embed import ProjectionModel, init_model, load_model, save_model
from stylespace.graph import save_catalog
from stylespace.synth import SynthConfig, synthesize

from conftest import make_catalog


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    fields = {}
    if out.out.strip():
        fields = dict(kv.split("=", 1) for kv in out.out.strip().splitlines()[-1].split())
    return code, fields, out.err


@pytest.fixture
def workdir(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    return tmp_path


def test_split_80_1_19_ratios(workdir, capsys):
    cat = make_catalog({f"i{j:03d}": "shirts" for j in range(100)})
    save_catalog(cat, "items.jsonl", "edges.csv")
    code, f, _ = run(capsys, "split", "--items", "items.jsonl", "--edges", "edges.csv", "--splits", "splits.json",
                     "--ratios", "80:1:19", "--seed", 7)
    assert code == 0 and f["stage"] == "split"
    obj = json.loads((workdir / "splits.json").read_text())
    assert (len(obj["train"]), len(obj["validation"]), len(obj["test"])) == (80, 1, 19)
    assert obj["seed"] == 7 and obj["ratios"] == [80.0, 1.0, 19.0]


def _pipeline(capsys, seed=1, items=40):
    steps = [
        ("synth", "--items", "items.jsonl", "--edges", "edges.csv", "--categories", 3, "--per-category", items,
         "--feature-dim", 8, "--degree", 6, "--label-noise", 0.05),
        ("clean", "--items", "items.jsonl", "--edges", "edges.csv"),
        ("split", "--items", "items.jsonl", "--edges", "edges.csv", "--splits", "splits.json", "--ratios", "60:10:30"),
        ("sample", "--items", "items.jsonl", "--edges", "edges.csv", "--splits", "splits.json", "--pairs", "pairs.csv",
         "--positives", 100),
        ("train", "--items", "items.jsonl", "--pairs", "pairs.csv", "--model", "model.json", "--output-dim", 4,
         "--epochs", 5),
        ("eval", "--items", "items.jsonl", "--pairs", "pairs.csv", "--model", "model.json", "--report", "report.json"),
    ]
    out = {}
    for step in steps:
        code, fields, err = run(capsys, *step, "--seed", seed)
        assert code == 0, err
        assert fields["stage"] == step[0]
        out[step[0]] = fields
    return out


def test_full_pipeline_and_query_commands(workdir, capsys):
    out = _pipeline(capsys)
    assert 0.0 <= float(out["eval"]["auc"]) <= 1.0
    for name in ("roc.csv", "hist.csv", "report.json", "model.json", "pairs.csv"):
        assert (workdir / name).exists()

    code, f, _ = run(capsys, "index", "--items", "items.jsonl", "--model", "model.json", "--index", "index.json", "--k", 4)
    assert code == 0 and f["categories"] == "3"
    index = json.loads((workdir / "index.json").read_text())
    query = index["shirts"]["items"][0]["id"]

    code, f, _ = run(capsys, "retrieve", "--index", "index.json", "--query", query, "--target", "shoes", "--n", 3)
    assert code == 0 and any(it["id"] == f["item"] for it in index["shoes"]["items"])

    spec = workdir / "outfits.json"
    spec.write_text(json.dumps({"outfits": [["shirts", "pants", "shoes"]]}))
    code, f, _ = run(capsys, "outfit", "--index", "index.json", "--query", query, "--outfit-spec", spec,
                     "--out", "outfit.json")
    assert code == 0 and set(json.loads((workdir / "outfit.json").read_text())["members"]) == {"pants", "shoes"}

    code, f, _ = run(capsys, "affinity", "--index", "index.json", "--cat-a", "shirts", "--cat-b", "pants")
    assert code == 0 and float(f["closest_distance"]) <= float(f["farthest_distance"])

    code, f, _ = run(capsys, "gradcheck", "--items", "items.jsonl", "--pairs", "pairs.csv", "--model", "model.json")
    assert code == 0 and float(f["max_rel_error"]) < 1e-4


def test_pipeline_is_byte_reproducible(workdir, capsys):
    _pipeline(capsys, seed=4)
    first = {n: (workdir / n).read_bytes() for n in ("model.json", "report.json", "pairs.csv")}
    _pipeline(capsys, seed=4)
    for n, data in first.items():
        assert (workdir / n).read_bytes() == data


def test_train_zero_epochs_writes_initialization(workdir, capsys):
    _pipeline(capsys, seed=2)
    code, _, _ = run(capsys, "train", "--items", "items.jsonl", "--pairs", "pairs.csv", "--model", "m0.json",
                     "--output-dim", 4, "--epochs", 0, "--seed", 2)
    assert code == 0
    init = init_model(8, 4, seed=stage_seed(2, "init"))
    assert load_model(workdir / "m0.json") == init


def test_eval_perfectly_separated_model(workdir, capsys):
    cfg = SynthConfig(num_categories=3, items_per_category=40, latent_dim=2, feature_dim=5, lift="identity",
                      feature_noise=0.0, edges_per_item=4, seed=0)
    cat = synthesize(cfg).catalog
    save_catalog(cat, "items.jsonl", "edges.csv")
    style = {i: it.style for i, it in cat.items.items()}
    dist = lambda a, b: float(np.linalg.norm(style[a] - style[b]))
    pos = [(a, b) for a, b in cat.edges if dist(a, b) < 0.1][:30]
    rng = np.random.default_rng(0)
    ids = cat.ids
    neg = []
    while len(neg) < 30:
        a, b = sorted(rng.choice(ids, 2, replace=False))
        if not cat.has_edge(a, b) and dist(a, b) > 0.3:
            neg.append((a, b))
    with open("pairs.csv", "w") as fh:
        fh.write("a,b,label,split\n")
        fh.writelines(f"{a},{b},pos,test\n" for a, b in pos)
        fh.writelines(f"{a},{b},neg,test\n" for a, b in neg)
    select = np.zeros((2, 5))
    select[0, 0] = select[1, 1] = 1.0
    save_model(ProjectionModel.from_layers([(select, np.zeros(2))]), "model.json")
    code, f, _ = run(capsys, "eval", "--items", "items.jsonl", "--pairs", "pairs.csv", "--model", "model.json",
                     "--report", "report.json")
    assert code == 0
    assert json.loads((workdir / "report.json").read_text())["auc"] == 1.0


def test_unknown_subcommand_and_flag_exit_2(capsys):
    with pytest.raises(SystemExit) as e:
        main(["frobnicate"])
    assert e.value.code == 2
    with pytest.raises(SystemExit) as e:
        main(["split", "--bogus"])
    assert e.value.code == 2


def test_module_error_exit_1_names_stage(workdir, capsys):
    save_catalog(make_catalog({"a": "x", "b": "y"}), "items.jsonl", "edges.csv")
    (workdir / "bad.csv").write_text("a,b\na,zzz\n")
    code, _, err = run(capsys, "split", "--items", "items.jsonl", "--edges", "bad.csv", "--splits", "s.json")
    assert code == 1 and "stage=split" in err and "zzz" in err
    code, _, err = run(capsys, "sample", "--items", "items.jsonl", "--edges", "edges.csv", "--splits", "missing.json",
                       "--pairs", "p.csv")
    assert code == 1 and "stage=sample" in err
