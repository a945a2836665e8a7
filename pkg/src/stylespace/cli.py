"""Command-line pipeline: synth, clean, split, sample, train, eval, index, retrieve, outfit, affinity, gradcheck.

Every subcommand prints a single ``key=value`` summary line on success.
``--seed`` is a global seed; each stage mixes it with its own name.
"""

import argparse
import json
import logging
import os
import sys

import numpy as np

from . import graph, kernels, retrieve, sampler
from ._util import atomic_write, stage_seed
from .embed import TrainConfig, gradient_check, init_model, load_model, pair_arrays, save_model, train
from .errors import StyleSpaceError
from .evaluation import evaluate, write_report
from .synth import SynthConfig, generate_catalog

logger = logging.getLogger("stylespace")


def _summary(stage, **kv):
    parts = [f"stage={stage}"]
    for k, v in kv.items():
        if isinstance(v, (float, np.floating)):
            v = repr(float(v))
        elif isinstance(v, np.bool_):
            v = bool(v)
        parts.append(f"{k}={v}")
    print(" ".join(parts))


def _ratios(text):
    try:
        vals = tuple(float(x) for x in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad ratios {text!r}; expected e.g. 80:1:19")
    if len(vals) != 3:
        raise argparse.ArgumentTypeError("ratios need three parts, e.g. 80:1:19")
    return vals


def _dims(text):
    text = text.strip()
    if not text:
        return ()
    try:
        return tuple(int(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad dimension list {text!r}")


def _require(*paths):
    for p in paths:
        if not os.path.exists(p):
            raise FileNotFoundError(f"input file not found: {p}")


def cmd_synth(args):
    cfg = SynthConfig(
        num_categories=args.categories, items_per_category=args.per_category, latent_dim=args.latent_dim,
        feature_dim=args.feature_dim, feature_noise=args.noise, edge_bandwidth=args.bandwidth,
        edges_per_item=args.degree, label_noise_rate=args.label_noise, seed=stage_seed(args.seed, "synth"),
        category_scale=args.category_scale, within_category_edge_fraction=args.within_fraction,
    )
    cat = generate_catalog(cfg)
    graph.save_catalog(cat, args.items, args.edges)
    _summary("synth", items=len(cat), edges=len(cat.edges), categories=len(cat.categories()),
             feature_dim=cat.feature_dim, items_path=args.items, edges_path=args.edges)


def cmd_clean(args):
    _require(args.items, args.edges)
    cat = graph.load_catalog(args.items, args.edges)
    cleaned = graph.clean(cat)
    graph.save_catalog(cleaned, args.out_items or args.items, args.out_edges or args.edges)
    _summary("clean", items_in=len(cat), items_out=len(cleaned), edges_in=len(cat.edges),
             edges_out=len(cleaned.edges))


def cmd_split(args):
    _require(args.items, args.edges)
    cat = graph.load_catalog(args.items, args.edges)
    split = graph.split_items(cat, args.ratios, stage_seed(args.seed, "split"))
    split = graph.ItemSplit(split.train, split.validation, split.test, args.seed, split.ratios, split.warnings)
    graph.save_split(split, args.splits)
    _summary("split", train=len(split.train), validation=len(split.validation), test=len(split.test),
             warnings=len(split.warnings), path=args.splits)


def cmd_sample(args):
    _require(args.items, args.edges, args.splits)
    cat = graph.load_catalog(args.items, args.edges)
    split = graph.load_split(args.splits)
    cfg = sampler.SamplerConfig(
        strategy=args.strategy, holdout_category=args.holdout_category,
        negatives_per_positive_train=args.neg_ratio, test_negative_ratio=args.test_neg_ratio,
        target_positive_count=args.positives, seed=stage_seed(args.seed, "sample"),
    )
    ds = sampler.build_pair_dataset(cat, split, cfg)
    sampler.save_pairs(ds, args.pairs)
    for note in ds.notes:
        logger.warning("sample: %s", note)
    _summary("sample", strategy=args.strategy, train=len(ds.train), validation=len(ds.validation),
             test=len(ds.test), notes=len(ds.notes), path=args.pairs)


class _Pairs:
    def __init__(self, splits):
        self.train = splits["train"]
        self.validation = splits["validation"]
        self.test = splits["test"]


def cmd_train(args):
    _require(args.items, args.pairs)
    cat = graph.load_catalog(args.items, args.edges)
    pairs = _Pairs(sampler.load_pairs(args.pairs))
    model = init_model(cat.feature_dim, args.output_dim, args.hidden, seed=stage_seed(args.seed, "init"),
                       margin=args.margin)
    cfg = TrainConfig(margin=args.margin, learning_rate=args.lr, momentum=args.momentum, epochs=args.epochs,
                      batch_size=args.batch, seed=stage_seed(args.seed, "train"), hidden_dims=args.hidden)
    trained, trace = train(model, cat.features(), pairs, cfg)
    save_model(trained, args.model)
    first = trace.per_epoch_mean_loss[0] if trace.per_epoch_mean_loss else float("nan")
    _summary("train", epochs=args.epochs, first_epoch_loss=first, final_train_loss=trace.final_train_loss,
             final_val_loss=trace.final_val_loss, backend=kernels.BACKEND, path=args.model)


def cmd_eval(args):
    _require(args.items, args.pairs, args.model)
    cat = graph.load_catalog(args.items)
    pairs = sampler.load_pairs(args.pairs)[args.split]
    model = load_model(args.model)
    report = evaluate(model, cat.features(), pairs, bins=args.bins)
    folder = os.path.dirname(os.path.abspath(args.report))
    roc_csv = args.roc_csv or os.path.join(folder, "roc.csv")
    hist_csv = args.hist_csv or os.path.join(folder, "hist.csv")
    write_report(report, args.report, roc_csv, hist_csv)
    _summary("eval", split=args.split, auc=report.auc, positives=report.positives, negatives=report.negatives,
             mean_pos_distance=report.mean_pos_distance, mean_neg_distance=report.mean_neg_distance,
             path=args.report)


def cmd_index(args):
    _require(args.items, args.model)
    cat = graph.load_catalog(args.items)
    model = load_model(args.model)
    ids = None
    if args.splits:
        ids = getattr(graph.load_split(args.splits), args.split)
    index = retrieve.index_catalog(cat, model, k=args.k, seed=stage_seed(args.seed, "index"), ids=ids)
    retrieve.save_index(index, args.index)
    _summary("index", categories=len(index.categories),
             items=sum(len(e.ids) for e in index.categories.values()), k=args.k, path=args.index)


def cmd_retrieve(args):
    _require(args.index)
    index = retrieve.load_index(args.index)
    if args.query not in index:
        raise StyleSpaceError(f"query {args.query!r} is not in the index")
    style = index.style_of(args.query)
    if args.plain:
        found = retrieve.nearest_in_category(style, index, args.target)
    else:
        found = retrieve.robust_retrieve(style, index, args.target, args.n)
    dist = float(np.linalg.norm(index.style_of(found) - style))
    _summary("retrieve", query=args.query, target=args.target, item=found, distance=dist,
             method="plain" if args.plain else "robust")


def cmd_outfit(args):
    _require(args.index)
    index = retrieve.load_index(args.index)
    if args.query not in index:
        raise StyleSpaceError(f"query {args.query!r} is not in the index")
    category = index.category_of(args.query)
    specs = retrieve.load_outfit_specs(args.outfit_spec) if args.outfit_spec else retrieve.default_outfit_specs()
    spec = next((s for s in specs if category in s.categories), None)
    if spec is None:
        raise StyleSpaceError(f"no outfit spec contains the query category {category!r}")
    outfit = retrieve.generate_outfit(args.query, spec, index, n=args.n)
    if args.out:
        with atomic_write(args.out) as fh:
            json.dump({"query": outfit.query, "category": category, "members": outfit.members}, fh)
            fh.write("\n")
    _summary("outfit", query=args.query, category=category,
             **{f"member_{c}": i for c, i in outfit.members.items()})


def cmd_affinity(args):
    _require(args.index)
    index = retrieve.load_index(args.index)
    closest, farthest = retrieve.cluster_pair_affinity(index, args.cat_a, args.cat_b)
    _summary("affinity", cat_a=args.cat_a, cat_b=args.cat_b,
             closest=f"{closest.cluster_a}:{closest.cluster_b}", closest_distance=closest.distance,
             farthest=f"{farthest.cluster_a}:{farthest.cluster_b}", farthest_distance=farthest.distance)


def cmd_gradcheck(args):
    rng = np.random.default_rng(stage_seed(args.seed, "gradcheck"))
    if args.items and args.pairs:
        _require(args.items, args.pairs)
        cat = graph.load_catalog(args.items)
        pairs = sampler.load_pairs(args.pairs)["train"]
        if not pairs:
            raise StyleSpaceError("no training pairs to check")
        pick = rng.choice(len(pairs), size=min(args.samples, len(pairs)), replace=False)
        xa, xb, pos = pair_arrays(cat.features(), [pairs[i] for i in sorted(pick)])
        dim = cat.feature_dim
    else:
        dim = args.input_dim
        xa, xb = rng.normal(size=(args.samples, dim)), rng.normal(size=(args.samples, dim))
        pos = rng.random(args.samples) < 0.5
    if args.model:
        model = load_model(args.model)
    else:
        model = init_model(dim, args.output_dim, args.hidden, seed=stage_seed(args.seed, "init"))
    err = gradient_check(model, xa, xb, pos, margin=args.margin, epsilon=args.eps)
    _summary("gradcheck", max_rel_error=err, params=model.params.size, pairs=len(xa), ok=err < 1e-4)


def build_parser():
    p = argparse.ArgumentParser(prog="stylespace", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, fn, *flags):
        sp = sub.add_parser(name)
        sp.set_defaults(func=fn)
        sp.add_argument("--seed", type=int, default=0)
        for f in flags:
            f(sp)
        return sp

    items = lambda sp, req=True: sp.add_argument("--items", required=req)
    edges = lambda sp, req=True: sp.add_argument("--edges", required=req)

    s = add("synth", cmd_synth, items, edges)
    s.add_argument("--categories", type=int, default=5)
    s.add_argument("--per-category", type=int, default=400)
    s.add_argument("--latent-dim", type=int, default=2)
    s.add_argument("--feature-dim", type=int, default=16)
    s.add_argument("--noise", type=float, default=0.1)
    s.add_argument("--bandwidth", type=float, default=0.1)
    s.add_argument("--degree", type=float, default=10.0)
    s.add_argument("--label-noise", type=float, default=0.0)
    s.add_argument("--within-fraction", type=float, default=0.0)
    s.add_argument("--category-scale", type=float, default=1.0)

    s = add("clean", cmd_clean, items, edges)
    s.add_argument("--out-items")
    s.add_argument("--out-edges")

    s = add("split", cmd_split, items, edges)
    s.add_argument("--splits", required=True)
    s.add_argument("--ratios", type=_ratios, default=(80.0, 1.0, 19.0))

    s = add("sample", cmd_sample, items, edges)
    s.add_argument("--splits", required=True)
    s.add_argument("--pairs", required=True)
    s.add_argument("--strategy", choices=sampler.STRATEGIES, default="strategic")
    s.add_argument("--holdout-category")
    s.add_argument("--neg-ratio", type=int, default=16)
    s.add_argument("--test-neg-ratio", type=float, default=1.0)
    s.add_argument("--positives", type=int, default=1000)

    s = add("train", cmd_train, items, lambda sp: edges(sp, False))
    s.add_argument("--pairs", required=True)
    s.add_argument("--model", required=True)
    s.add_argument("--margin", type=float, default=1.0)
    s.add_argument("--lr", type=float, default=0.01)
    s.add_argument("--momentum", type=float, default=0.9)
    s.add_argument("--epochs", type=int, default=20)
    s.add_argument("--batch", type=int, default=128)
    s.add_argument("--output-dim", type=int, default=256)
    s.add_argument("--hidden", type=_dims, default=())

    s = add("eval", cmd_eval, items)
    s.add_argument("--pairs", required=True)
    s.add_argument("--model", required=True)
    s.add_argument("--report", required=True)
    s.add_argument("--split", choices=("train", "validation", "test"), default="test")
    s.add_argument("--bins", type=int, default=50)
    s.add_argument("--roc-csv")
    s.add_argument("--hist-csv")

    s = add("index", cmd_index, items)
    s.add_argument("--model", required=True)
    s.add_argument("--index", required=True)
    s.add_argument("--k", type=int, default=retrieve.DEFAULT_K)
    s.add_argument("--splits")
    s.add_argument("--split", choices=("train", "validation", "test"), default="test")

    s = add("retrieve", cmd_retrieve)
    s.add_argument("--index", required=True)
    s.add_argument("--query", required=True)
    s.add_argument("--target", required=True)
    s.add_argument("--n", type=int, default=retrieve.DEFAULT_N)
    s.add_argument("--plain", action="store_true", help="plain within-label 1-NN instead of robust retrieval")

    s = add("outfit", cmd_outfit)
    s.add_argument("--index", required=True)
    s.add_argument("--query", required=True)
    s.add_argument("--outfit-spec")
    s.add_argument("--n", type=int, default=retrieve.DEFAULT_N)
    s.add_argument("--out")

    s = add("affinity", cmd_affinity)
    s.add_argument("--index", required=True)
    s.add_argument("--cat-a", required=True)
    s.add_argument("--cat-b", required=True)

    s = add("gradcheck", cmd_gradcheck, lambda sp: items(sp, False))
    s.add_argument("--pairs")
    s.add_argument("--model")
    s.add_argument("--margin", type=float, default=1.0)
    s.add_argument("--eps", type=float, default=1e-5)
    s.add_argument("--samples", type=int, default=8)
    s.add_argument("--input-dim", type=int, default=8)
    s.add_argument("--output-dim", type=int, default=4)
    s.add_argument("--hidden", type=_dims, default=())
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    if getattr(args, "k", 1) < 1 or getattr(args, "n", 1) < 1:
        parser.error("--k and --n must be >= 1")
    try:
        args.func(args)
    except (StyleSpaceError, OSError, ValueError, json.JSONDecodeError) as exc:
        print(f"error: stage={args.command}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
