"""Time the numba kernels against their numpy counterparts.

    python benchmarks/bench_backends.py [--repeats 5]

Both variants are imported directly, so the SUGARSPEC_NUMBA flag does not
matter here. The first numba call (compilation or cache load) is excluded.
"""

import argparse
import time

import numpy as np

from sugarspec import _kernels as K
from sugarspec._backend import HAVE_NUMBA


def best_of(fn, repeats):
    fn()
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def cases(rng):
    X = rng.normal(size=(270, 400))
    X -= X.mean(axis=0)
    y = X[:, :20].sum(axis=1) + rng.normal(size=270)
    y -= y.mean()
    yield "nipals 270x400, 15 comps", (K.nipals_pls1_np, K.nipals_pls1_nb), (X, y, 15, 1e-12)

    # GA fitness: 10 training folds over a 100-column subset
    Xf = rng.normal(size=(300, 400))
    yf = Xf[:, :30].sum(axis=1) + rng.normal(size=300)
    cols = np.sort(rng.choice(400, 100, replace=False))
    val = np.array_split(rng.permutation(300), 10)
    G, c, Xv, yv, offsets = [], [], [], [], [0]
    for v in val:
        t = np.setdiff1d(np.arange(300), v)
        Xt = Xf[t] - Xf[t].mean(axis=0)
        yt = yf[t] - yf[t].mean()
        G.append(Xt.T @ Xt)
        c.append(Xt.T @ yt)
        Xv.append(Xf[v] - Xf[t].mean(axis=0))
        yv.append(yf[v] - yf[t].mean())
        offsets.append(offsets[-1] + len(v))
    args = (np.stack(G), np.stack(c), np.vstack(Xv), np.concatenate(yv), np.array(offsets, dtype=np.int64),
            cols.astype(np.int64), 15, 1e-12)
    yield "gram PLS curve, 10 folds, 100 cols", (K.gram_pls_sse_np, K.gram_pls_sse_nb), args

    for ci, co in ((1, 64), (64, 64), (64, 128), (128, 128)):
        x = rng.normal(size=(240, 16, 16, ci))
        k = rng.normal(size=(3, 1, ci, co)) * 0.1
        b = np.zeros(co)
        g = rng.normal(size=(240, 16, 16, co))
        yield f"conv fwd 240x16x16 {ci}->{co}", (K.conv_same_forward_np, K.conv_same_forward_nb), (x, k, b)
        yield f"conv bwd 240x16x16 {ci}->{co}", (K.conv_same_backward_np, K.conv_same_backward_nb), (x, k, g)


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()
    if not HAVE_NUMBA:
        print("numba is not installed; nothing to compare")
        return
    rng = np.random.default_rng(0)
    print(f"{'kernel':<36} {'numpy ms':>10} {'numba ms':>10} {'speedup':>8}")
    for name, (np_fn, nb_fn), fargs in cases(rng):
        t_np = best_of(lambda: np_fn(*fargs), args.repeats)
        t_nb = best_of(lambda: nb_fn(*fargs), args.repeats)
        print(f"{name:<36} {1e3 * t_np:>10.2f} {1e3 * t_nb:>10.2f} {t_np / t_nb:>7.2f}x")


if __name__ == "__main__":
    main()
