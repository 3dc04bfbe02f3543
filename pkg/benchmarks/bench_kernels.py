"""Time the compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--repeat N]

Shapes follow one default training step (batch 128, width 256) and one
evaluation pass (400 x 400 test split).
"""
import argparse
import timeit

import numpy as np

from xmmr import _kernels_py

try:
    from xmmr import _kernels
except ImportError:
    _kernels = None


def cases(rng):
    F = rng.random((128, 256))
    G = rng.random((128, 256))
    img, txt = rng.integers(0, 128, 512), rng.integers(0, 128, 512)
    sim = rng.random(512) < 0.5
    quads = rng.integers(0, 128, size=(64, 4))
    dist = np.ascontiguousarray(rng.random((400, 400)))
    rel = rng.random((400, 400)) < 0.1
    knn = np.ascontiguousarray(rng.random((64, 64)))
    E = np.ascontiguousarray((rng.random((64, 64)) < 0.2).astype(np.uint8))
    u = rng.random((64, 2))
    return {
        "pair_loss_grad": lambda k: k.pair_loss_grad(F, G, img, txt, sim, 1.0),
        "quad_loss_grad": lambda k: k.quad_loss_grad(F, G, quads, 1.0),
        "knn_indices": lambda k: k.knn_indices(knn, 5),
        "ap_rows (all)": lambda k: k.ap_rows(dist, rel, -1, False),
        "ap_rows (top50)": lambda k: k.ap_rows(dist, rel, 50, False),
        "pick_partners": lambda k: k.pick_partners(E, u),
    }


def best_of(fn, repeat):
    number = max(1, int(0.05 / max(timeit.timeit(fn, number=1), 1e-7)))
    return min(timeit.repeat(fn, number=number, repeat=repeat)) / number


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if _kernels is None:
        print("compiled extension not built; nothing to compare")
        return
    print(f"{'kernel':<18}{'numpy (ms)':>12}{'cython (ms)':>13}{'speedup':>9}")
    for name, call in cases(np.random.default_rng(0)).items():
        t_py = best_of(lambda: call(_kernels_py), args.repeat) * 1e3
        t_cy = best_of(lambda: call(_kernels), args.repeat) * 1e3
        print(f"{name:<18}{t_py:>12.3f}{t_cy:>13.3f}{t_py / t_cy:>8.1f}x")


if __name__ == "__main__":
    main()
