"""Time the numba kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--repeat 20]

Both backends are imported directly, so STYLESPACE_NUMBA has no effect here.
The first numba call (compilation or cache load) is excluded from timing.
"""

import argparse
import timeit

import numpy as np

from stylespace.kernels import _numba, _numpy


def workloads(rng):
    # shapes match one k-means step on a 400-item category and one 128-pair batch
    pts = rng.normal(size=(2000, 256))
    cents = rng.normal(size=(20, 256))
    assign = rng.integers(0, 20, size=2000)
    sa, sb = rng.normal(size=(128, 256)), rng.normal(size=(128, 256))
    pos = rng.random(128) < 1 / 17
    return {
        "nearest_rows": lambda m: m.nearest_rows(pts, cents),
        "cluster_sums": lambda m: m.cluster_sums(pts, assign, 20),
        "contrastive_batch": lambda m: m.contrastive_batch(sa, sb, pos, 16.0),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args(argv)
    rng = np.random.default_rng(0)
    print(f"{'kernel':<18} {'numpy ms':>10} {'numba ms':>10} {'speedup':>8}")
    for name, call in workloads(rng).items():
        call(_numba)
        t_np = min(timeit.repeat(lambda: call(_numpy), number=1, repeat=args.repeat)) * 1e3
        t_nb = min(timeit.repeat(lambda: call(_numba), number=1, repeat=args.repeat)) * 1e3
        print(f"{name:<18} {t_np:>10.3f} {t_nb:>10.3f} {t_np / t_nb:>7.1f}x")


if __name__ == "__main__":
    main()
