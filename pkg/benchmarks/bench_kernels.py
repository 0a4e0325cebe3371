"""Timing comparison of the accelerated kernels vs their numpy fallbacks.

Runs both implementations of each hot kernel (alignment matrix fill,
sparse feature matvec / transposed matvec) on identical inputs, checks
they agree, and prints a small table. The compiled variants need numba;
without it only the numpy rows appear.

Usage: python3 benchmarks/bench_kernels.py [--repeat N]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from textdiar._kernels import (HAS_NUMBA, csr_matvec_numpy, csr_rmatvec_numpy,
                               nw_fill_numpy)

if HAS_NUMBA:
    from textdiar._kernels import (csr_matvec_numba, csr_rmatvec_numba,
                                   nw_fill_numba)


def _time(fn, args, repeat: int) -> float:
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def bench_nw(rng: np.random.Generator, n: int, m: int, repeat: int):
    ref = rng.integers(0, 50, size=n).astype(np.int64)
    hyp = rng.integers(0, 50, size=m).astype(np.int64)
    args = (ref, hyp, 2.0, -1.0, -1.0)
    rows = [("nw_fill/numpy", _time(nw_fill_numpy, args, repeat))]
    if HAS_NUMBA:
        nw_fill_numba(*args)  # compile outside the timed region
        rows.append(("nw_fill/numba", _time(nw_fill_numba, args, repeat)))
        s0, t0 = nw_fill_numpy(*args)
        s1, t1 = nw_fill_numba(*args)
        assert np.array_equal(s0, s1) and np.array_equal(t0, t1)
    return f"alignment fill {n}x{m}", rows


def bench_csr(rng: np.random.Generator, n_rows: int, dim: int, nnz_per_row: int,
              repeat: int):
    indices = rng.integers(0, dim, size=n_rows * nnz_per_row).astype(np.int64)
    values = rng.normal(size=n_rows * nnz_per_row)
    indptr = (np.arange(n_rows + 1) * nnz_per_row).astype(np.int64)
    w = rng.normal(size=dim)
    r = rng.normal(size=n_rows)
    fwd = (indptr, indices, values, w)
    bwd = (indptr, indices, values, r, dim)
    rows = [
        ("csr_matvec/numpy", _time(csr_matvec_numpy, fwd, repeat)),
        ("csr_rmatvec/numpy", _time(csr_rmatvec_numpy, bwd, repeat)),
    ]
    if HAS_NUMBA:
        csr_matvec_numba(*fwd)
        csr_rmatvec_numba(*bwd)
        rows.append(("csr_matvec/numba", _time(csr_matvec_numba, fwd, repeat)))
        rows.append(("csr_rmatvec/numba", _time(csr_rmatvec_numba, bwd, repeat)))
        assert np.allclose(csr_matvec_numpy(*fwd), csr_matvec_numba(*fwd))
        assert np.allclose(csr_rmatvec_numpy(*bwd), csr_rmatvec_numba(*bwd))
    return f"sparse matvec {n_rows}x{dim} ({nnz_per_row} nnz/row)", rows


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeat", type=int, default=5,
                        help="timing repetitions (best-of)")
    args = parser.parse_args()
    rng = np.random.default_rng(0)

    if not HAS_NUMBA:
        print("numba not importable; numpy fallbacks only\n")

    sections = [
        bench_nw(rng, 800, 800, args.repeat),
        bench_nw(rng, 3000, 3000, max(1, args.repeat // 2)),
        bench_csr(rng, 20000, 1 << 18, 30, args.repeat),
    ]
    for title, rows in sections:
        print(title)
        for name, t in rows:
            speedup = ""
            ref_name = name.rsplit("/", 1)[0] + "/numpy"
            ref_t = dict(rows).get(ref_name)
            if ref_t is not None and not name.endswith("/numpy"):
                speedup = f"  ({ref_t / t:5.1f}x vs numpy)"
            print(f"  {name:<20} {t * 1e3:9.3f} ms{speedup}")
        print()


if __name__ == "__main__":
    main()
