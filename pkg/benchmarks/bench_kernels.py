"""Compare the compiled and numpy kernel backends.

Times each hot kernel on MovieLens-sized inputs, then one full solver
iteration per backend on a synthetic problem of the same shape::

    python benchmarks/bench_kernels.py [--repeat 20]
"""
import argparse
import timeit

import numpy as np

from discmc import Alphabet, IndexSet, ObservedMatrix, SolverConfig, SyntheticSpec, kernels, run, synth_discrete_lowrank
from discmc.data import SplitSpec, split


def kernel_cases(rng, m=943, n=1682, nnz=80_000):
    flat = rng.choice(m * n, size=nnz, replace=False)
    S = IndexSet.from_mask(np.isin(np.arange(m * n), flat).reshape(m, n))
    O = ObservedMatrix((m, n), S.rows, S.cols, rng.integers(1, 6, size=len(S)).astype(float))
    X = rng.normal(3, 1, size=(m, n))
    y = rng.normal(3, 2, size=nnz)
    alpha = np.arange(1.0, 6.0)
    W = rng.normal(size=(n, 18))
    sigma = np.sort(rng.exponential(20, size=200))[::-1]
    rows, cols = kernels._index(O.rows), kernels._index(O.cols)
    indptr = kernels._index(O.indptr)
    return {
        "shifted_soft_threshold": ("shifted_soft_threshold", (y, 3.0, 0.05)),
        "prox_discrete_vec": ("prox_discrete_vec", (y, alpha, 0.05)),
        "discrete_penalty_vec": ("discrete_penalty_vec", (y, alpha)),
        "gather": ("gather", (X, rows, cols)),
        "masked_sq_residual": ("masked_sq_residual", (X, rows, cols, O.values)),
        "lsp_prox": ("lsp_prox", (sigma, 5.0, 1.0)),
        "csr_matmat (18 cols)": ("csr_matmat", (indptr, cols, O.values, W)),
    }


def time_kernels(repeat):
    rng = np.random.default_rng(0)
    cases = kernel_cases(rng)
    names = sorted(kernels.BACKENDS)
    print(f"{'kernel':<24}" + "".join(f"{b + ' (ms)':>16}" for b in names) + f"{'speedup':>10}")
    for label, (fn, args) in cases.items():
        ms = {}
        for b in names:
            f = getattr(kernels.BACKENDS[b], fn)
            ms[b] = 1e3 * min(timeit.repeat(lambda: f(*args), number=1, repeat=repeat))
        speed = ms["python"] / ms["cython"] if "cython" in ms else float("nan")
        print(f"{label:<24}" + "".join(f"{ms[b]:>16.3f}" for b in names) + f"{speed:>10.1f}")


def time_solver(iters):
    _, ds = synth_discrete_lowrank(SyntheticSpec(943, 1682, 10, Alphabet.integers(1, 5), seed=0))
    train, _ = split(ds, SplitSpec(0.05, 0))
    print(f"\n{iters} solver iterations, 943x1682, {len(train)} observed")
    for algo in ("apg", "discrete_apg"):
        cfg = SolverConfig.make(algo, alphabet=Alphabet.integers(1, 5), max_iter=iters, rel_tol=1e-300)
        for b in sorted(kernels.BACKENDS):
            kernels.use_backend(b)
            secs = min(timeit.repeat(lambda: run(cfg, train), number=1, repeat=2))
            print(f"  {algo:<14}{b:<8}{secs:8.2f}s")
    kernels.use_backend("cython" if "cython" in kernels.BACKENDS else "python")


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=20)
    p.add_argument("--iters", type=int, default=10)
    args = p.parse_args()
    print(f"backends: {sorted(kernels.BACKENDS)} (default {kernels.BACKEND})\n")
    time_kernels(args.repeat)
    time_solver(args.iters)


if __name__ == "__main__":
    main()
