"""Time the numba kernels against their numpy counterparts.

    python benchmarks/bench_kernels.py [--repeat 200]

Shapes mirror the desk experiment: ~20-sample client shards, 20 features,
10 classes, 2 local epochs of batch 16; validation predicts on small shards
and LOF works on 14 points in 20 dimensions.
"""
import argparse
import time

import numpy as np

from bafflesim import kernels


def bench(fn, repeat):
    fn()  # warm-up (triggers numba compilation)
    t0 = time.perf_counter()
    for _ in range(repeat):
        fn()
    return (time.perf_counter() - t0) / repeat


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=200)
    args = ap.parse_args()
    rng = np.random.default_rng(0)

    cases = []
    for hidden, n in ((0, 20), (0, 2000), (32, 20), (32, 2000)):
        d, c = 20, 10
        nparams = d * c + c if hidden == 0 else d * hidden + hidden + hidden * c + c
        params = rng.uniform(-0.1, 0.1, nparams)
        X = rng.standard_normal((n, d))
        y = rng.integers(0, c, n)
        order = rng.permutation(n)

        def sgd(impl, p=params, X=X, y=y, order=order, h=hidden):
            return lambda: impl(p.copy(), X, y, order, 16, 0.1, h, 10)

        def pred(impl, p=params, X=X, h=hidden):
            return lambda: impl(p, X, h, 10)

        cases.append((f"sgd_epoch    H={hidden:<3} n={n}", sgd(kernels.sgd_epoch_jit),
                      sgd(kernels.sgd_epoch_numpy)))
        cases.append((f"predict      H={hidden:<3} n={n}", pred(kernels.predict_labels_jit),
                      pred(kernels.predict_labels_numpy)))

    true = rng.integers(0, 10, 200)
    pr = rng.integers(0, 10, 200)
    cases.append(("confusion    n=200", lambda: kernels.confusion_counts_jit(true, pr, 10),
                  lambda: kernels.confusion_counts_numpy(true, pr, 10)))
    pts = rng.standard_normal((14, 20))
    cases.append(("pairwise     14x14x20", lambda: kernels.pairwise_distances_jit(pts, pts),
                  lambda: kernels.pairwise_distances_numpy(pts, pts)))

    print(f"{'kernel':<28}{'numba [us]':>12}{'numpy [us]':>12}{'speedup':>10}")
    for name, jit_fn, np_fn in cases:
        tj = bench(jit_fn, args.repeat) * 1e6
        tn = bench(np_fn, args.repeat) * 1e6
        print(f"{name:<28}{tj:>12.1f}{tn:>12.1f}{tn / tj:>9.1f}x")


if __name__ == "__main__":
    main()
