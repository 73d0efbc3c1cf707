"""Compiled kernels against the numpy fallback.

Usage: python benchmarks/bench_kernels.py [--repeat N]

Times each kernel on its own, then whole operations (soft coherence with
gradient, circular variant, one BPDN solve) with the package switched to
each backend in turn.
"""

import argparse
import contextlib
import timeit

import numpy as np

from cosep import _kernels
from cosep._kernels import _pykernels
from cosep.basis import build_dct2_basis
from cosep.coherence import Shift, _all_shifts, _gram_blocks, _rolled, _tables, evaluate
from cosep.optimizer import random_mask
from cosep.recovery import Factorization, SolverConfig, bpdn_solve, effective_matrix

try:
    from cosep._kernels import _ckernels
except ImportError:
    _ckernels = None

NAMES = ("soft_max_value", "soft_max_grad_terms", "max_abs_term", "admm_iterations")


@contextlib.contextmanager
def backend(impl):
    saved = {n: getattr(_kernels, n) for n in NAMES}
    for n in NAMES:
        setattr(_kernels, n, getattr(impl, n))
    try:
        yield
    finally:
        for n, f in saved.items():
            setattr(_kernels, n, f)


def best_of(fn, repeat):
    number = max(1, int(0.2 / max(timeit.timeit(fn, number=1), 1e-7)))
    return min(timeit.repeat(fn, number=number, repeat=repeat)) / number


def cases():
    D8 = build_dct2_basis(8)
    mask = random_mask(8, 2, seed=0)
    plain = _gram_blocks(_rolled(mask.values, [Shift(0, 0)]), _tables(D8))
    circ = _gram_blocks(_rolled(mask.values, _all_shifts(8)), _tables(D8))

    A = effective_matrix(mask.values, D8)
    fac = Factorization(A)
    rng = np.random.default_rng(0)
    alpha = np.zeros(128)
    alpha[rng.choice(128, 20, replace=False)] = rng.standard_normal(20)
    y = A @ alpha

    def admm(impl):
        state = [np.zeros(128), np.zeros(128), np.zeros(64), np.zeros(128), np.zeros(64)]
        return lambda: impl.admm_iterations(fac.A, fac.R, y, 1e-8, 0.5, 100, *state)

    kernels = {
        "soft_max_value (8x8, T=2)": lambda k: lambda: k.soft_max_value(*plain, 1000.0),
        "soft_max_grad_terms (8x8, T=2, 64 shifts)":
            lambda k: lambda: k.soft_max_grad_terms(*circ, 1000.0),
        "max_abs_term (8x8, T=2, 64 shifts)": lambda k: lambda: k.max_abs_term(*circ),
        "admm_iterations (100 its, 64x128)": admm,
    }
    whole = {
        "soft coherence + gradient (8x8, T=2)":
            lambda: evaluate(mask.values, D8, 1000.0).gradient(),
        "circular soft coherence + gradient (8x8, T=2)":
            lambda: evaluate(mask.values, D8, 1000.0, circular=True).gradient(),
        "bpdn_solve (64x128, 20-sparse)": lambda: bpdn_solve(A, y, SolverConfig(), fac),
    }
    return kernels, whole


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()
    if _ckernels is None:
        print("compiled extension not built; only the numpy fallback is available")
        return
    kernels, whole = cases()
    print(f"{'case':48s} {'compiled':>12s} {'numpy':>12s} {'speedup':>8s}")
    for name, make in kernels.items():
        tc = best_of(make(_ckernels), args.repeat)
        tp = best_of(make(_pykernels), args.repeat)
        print(f"{name:48s} {tc * 1e3:10.3f}ms {tp * 1e3:10.3f}ms {tp / tc:7.1f}x")
    for name, fn in whole.items():
        with backend(_ckernels):
            tc = best_of(fn, args.repeat)
        with backend(_pykernels):
            tp = best_of(fn, args.repeat)
        print(f"{name:48s} {tc * 1e3:10.3f}ms {tp * 1e3:10.3f}ms {tp / tc:7.1f}x")


if __name__ == "__main__":
    main()
