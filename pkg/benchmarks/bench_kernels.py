"""Time every fused kernel on the compiled and numpy backends.

Usage: python3 benchmarks/bench_kernels.py [--repeat N] [--rows R]

Each kernel runs on shapes typical of a training minibatch (200 rows,
1500-wide hidden layers, 70 latent dims, 39 x 7 windowed inputs). Outputs
of the two backends are compared before timing.
"""

import argparse
import timeit

import numpy as np

from mvlatent import kernels


def cases(rows, rng):
    p, g, m = (rng.standard_normal(1500 * 1500) for _ in range(3))
    v = np.abs(rng.standard_normal(1500 * 1500))
    mq, lq, mp, lp = (rng.standard_normal((rows, 70)) for _ in range(4))
    gr = rng.standard_normal(rows)
    x, mean = rng.standard_normal((rows, 273)), rng.standard_normal((rows, 273))
    pre, gh = rng.standard_normal((rows, 1500)), rng.standard_normal((rows, 1500))
    mask = (rng.random((rows, 1500)) > 0.2).astype(np.float64)
    frames = rng.standard_normal((rows * 5, 39))
    return {
        "adam_update (2.25M params)": ("adam_update", (p, g, m, v, 1e-4, 0.9, 0.999, 1e-8, 10)),
        "diag_kl_rows": ("diag_kl_rows", (mq, lq, mp, lp)),
        "diag_kl_grads": ("diag_kl_grads", (gr, mq, lq, mp, lp)),
        "iso_logpdf_rows": ("iso_logpdf_rows", (x, mean, 1.0)),
        "iso_logpdf_grad_mean": ("iso_logpdf_grad_mean", (gr, x, mean, 1.0)),
        "relu_dropout": ("relu_dropout", (pre, mask, 1.25)),
        "relu_dropout_grad": ("relu_dropout_grad", (gh, pre, mask, 1.25)),
        "window_frames (W=7)": ("window_frames", (frames, 7)),
    }


def _same(a, b):
    if isinstance(a, tuple):
        return all(_same(x, y) for x, y in zip(a, b))
    return np.allclose(a, b, rtol=1e-12, atol=1e-14)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=20)
    ap.add_argument("--rows", type=int, default=200)
    args = ap.parse_args()

    backends = kernels.available_backends()
    if "cython" not in backends:
        print("compiled extension not built; only the numpy backend is available")
    names = sorted(backends)
    print(f"{'kernel':30s}" + "".join(f"{n + ' ms':>14s}" for n in names) + f"{'speedup':>10s}")
    for label, (fn, fargs) in cases(args.rows, np.random.default_rng(0)).items():
        outs = {n: getattr(backends[n], fn)(*fargs) for n in names}
        if len(names) == 2 and not _same(outs["cython"], outs["python"]):
            raise SystemExit(f"{label}: backends disagree")
        ms = {n: 1e3 * min(timeit.repeat(lambda: getattr(backends[n], fn)(*fargs), number=1, repeat=args.repeat))
              for n in names}
        speed = f"{ms['python'] / ms['cython']:9.2f}x" if "cython" in ms else ""
        print(f"{label:30s}" + "".join(f"{ms[n]:14.3f}" for n in names) + f"{speed:>10s}")


if __name__ == "__main__":
    main()
