"""Compare the compiled and numpy kernel backends.

    python benchmarks/bench_kernels.py [--repeat 5]

Prints the best-of-``repeat`` wall time for each kernel and problem size,
plus one full quasi-likelihood fit per backend.  Both backends are checked
for agreement before timing.
"""

import argparse
import importlib
import os
import sys
import timeit

import numpy as np

from compql import _pykernels
from compql.solver import _per_object_weights

try:
    from compql import _ckernels
except ImportError:
    _ckernels = None


def problem(N, D, p, seed=0):
    rng = np.random.default_rng(seed)
    X = np.column_stack([np.ones(N), rng.normal(size=(N, p))])
    B = rng.normal(scale=0.5, size=(D, p + 1))
    P = rng.dirichlet(np.ones(D) * 5, size=N)
    return P, X, B


def cases(N, D, p):
    P, X, B = problem(N, D, p)
    Pi, R, _ = _pykernels.score_terms(P, X, B)
    G = _per_object_weights(Pi)
    n_pairs = min(N, 2000)
    return {
        "softmax_rows": (X @ B.T,),
        "score_terms": (P, X, B),
        "info_sum": (G, X),
        "meat_sum": (R, X),
        "pairwise_quadform": (np.ascontiguousarray(R[:n_pairs]), np.eye(D)),
    }


def best_time(fn, args, repeat):
    return min(timeit.repeat(lambda: fn(*args), number=1, repeat=repeat))


def fit_time(backend, N, D, p, repeat):
    env = dict(os.environ)
    if backend == "python":
        os.environ["COMPQL_PURE_PYTHON"] = "1"
    else:
        os.environ.pop("COMPQL_PURE_PYTHON", None)
    try:
        import compql.kernels as k

        importlib.reload(k)
        import compql.solver as s

        importlib.reload(s)
        from compql.model import CompositionalDataset

        P, X, B = problem(N, D, p)
        data = CompositionalDataset(P, X[:, 1:])
        return best_time(s.fit_gamma_trick, (data,), repeat)
    finally:
        os.environ.clear()
        os.environ.update(env)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    if _ckernels is None:
        print("compiled extension not built; run `pip install -e . --no-build-isolation`")
        return 1
    sizes = [(200, 3, 2), (5000, 3, 2), (20000, 5, 3)]
    print(f"{'kernel':<18}{'N,D,p':>14}{'python (ms)':>14}{'cython (ms)':>14}{'speedup':>10}")
    for N, D, p in sizes:
        for name, call_args in cases(N, D, p).items():
            py = getattr(_pykernels, name)
            cy = getattr(_ckernels, name)
            a, b = py(*call_args), cy(*call_args)
            for u, v in zip(a if isinstance(a, tuple) else (a,), b if isinstance(b, tuple) else (b,)):
                assert np.allclose(u, v, rtol=1e-10, atol=1e-12), name
            tp = best_time(py, call_args, args.repeat) * 1e3
            tc = best_time(cy, call_args, args.repeat) * 1e3
            print(f"{name:<18}{f'{N},{D},{p}':>14}{tp:>14.3f}{tc:>14.3f}{tp / tc:>10.1f}")
    for N, D, p in sizes:
        tp = fit_time("python", N, D, p, args.repeat) * 1e3
        tc = fit_time("cython", N, D, p, args.repeat) * 1e3
        print(f"{'fit_gamma_trick':<18}{f'{N},{D},{p}':>14}{tp:>14.3f}{tc:>14.3f}{tp / tc:>10.1f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
