"""Hot numeric kernels with numba-compiled and pure-numpy implementations.

Two kernel families live here:

* ``nw_fill``: score/traceback fill for global word alignment (the
  O(ref*hyp) inner loop of the alignment module).
* ``csr_matvec`` / ``csr_rmatvec``: sparse feature-matrix products that
  dominate baseline-predictor training.

The numba path is used when available; set ``TEXTDIAR_NUMBA=0`` to force
the pure-numpy fallback. Both paths compute identical values (same
operations, same order), which ``tests/test_kernels.py`` asserts and
``benchmarks/bench_kernels.py`` times against each other.

Traceback codes: 0 = diagonal (match/substitution), 1 = up (consume a
reference word against a hypothesis gap), 2 = left (consume a hypothesis
word against a reference gap). Ties prefer diagonal, then up, then left.
"""

from __future__ import annotations

import os

import numpy as np

TB_DIAG = 0
TB_UP = 1
TB_LEFT = 2


def _numba_requested() -> bool:
    flag = os.environ.get("TEXTDIAR_NUMBA", "1").strip().lower()
    return flag not in ("0", "false", "off", "no")


try:
    from numba import njit

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAS_NUMBA = False

NUMBA_ENABLED = HAS_NUMBA and _numba_requested()


# ---------------------------------------------------------------------------
# Pure-numpy implementations
# ---------------------------------------------------------------------------

def nw_fill_numpy(ref_ids, hyp_ids, match, sub, gap):
    """Fill the alignment score and traceback matrices, vectorized per
    anti-diagonal (cells on one anti-diagonal have no mutual dependency)."""
    n = ref_ids.shape[0]
    m = hyp_ids.shape[0]
    score = np.empty((n + 1, m + 1), dtype=np.float64)
    tb = np.empty((n + 1, m + 1), dtype=np.uint8)
    score[0, :] = gap * np.arange(m + 1)
    score[1:, 0] = gap * np.arange(1, n + 1)
    tb[0, :] = TB_LEFT
    tb[1:, 0] = TB_UP

    for d in range(2, n + m + 1):
        lo = max(1, d - m)
        hi = min(n, d - 1)
        if lo > hi:
            continue
        i = np.arange(lo, hi + 1)
        j = d - i
        pair = np.where(ref_ids[i - 1] == hyp_ids[j - 1], match, sub)
        c_diag = score[i - 1, j - 1] + pair
        c_up = score[i - 1, j] + gap
        c_left = score[i, j - 1] + gap
        best = np.maximum(np.maximum(c_diag, c_up), c_left)
        ptr = np.where(c_diag == best, TB_DIAG,
                       np.where(c_up == best, TB_UP, TB_LEFT)).astype(np.uint8)
        score[i, j] = best
        tb[i, j] = ptr
    return score, tb


def csr_matvec_numpy(indptr, indices, values, w):
    """Row scores of a CSR matrix against a dense weight vector."""
    n_rows = indptr.shape[0] - 1
    rows = np.repeat(np.arange(n_rows), np.diff(indptr))
    return np.bincount(rows, weights=values * w[indices], minlength=n_rows)


def csr_rmatvec_numpy(indptr, indices, values, r, dim):
    """Transpose product: accumulate per-row residuals into feature space."""
    n_rows = indptr.shape[0] - 1
    rows = np.repeat(np.arange(n_rows), np.diff(indptr))
    return np.bincount(indices, weights=values * r[rows], minlength=dim)


# ---------------------------------------------------------------------------
# Numba implementations (same arithmetic, loop form)
# ---------------------------------------------------------------------------

if HAS_NUMBA:

    @njit(cache=True)
    def _nw_fill_loop(ref_ids, hyp_ids, match, sub, gap):
        n = ref_ids.shape[0]
        m = hyp_ids.shape[0]
        score = np.empty((n + 1, m + 1), dtype=np.float64)
        tb = np.empty((n + 1, m + 1), dtype=np.uint8)
        for j in range(m + 1):
            score[0, j] = gap * j
            tb[0, j] = TB_LEFT
        for i in range(1, n + 1):
            score[i, 0] = gap * i
            tb[i, 0] = TB_UP
        for i in range(1, n + 1):
            for j in range(1, m + 1):
                pair = match if ref_ids[i - 1] == hyp_ids[j - 1] else sub
                c_diag = score[i - 1, j - 1] + pair
                c_up = score[i - 1, j] + gap
                c_left = score[i, j - 1] + gap
                best = c_diag
                if c_up > best:
                    best = c_up
                if c_left > best:
                    best = c_left
                if c_diag == best:
                    tb[i, j] = TB_DIAG
                elif c_up == best:
                    tb[i, j] = TB_UP
                else:
                    tb[i, j] = TB_LEFT
                score[i, j] = best
        return score, tb

    @njit(cache=True)
    def _csr_matvec_loop(indptr, indices, values, w):
        n_rows = indptr.shape[0] - 1
        out = np.zeros(n_rows, dtype=np.float64)
        for i in range(n_rows):
            acc = 0.0
            for k in range(indptr[i], indptr[i + 1]):
                acc += values[k] * w[indices[k]]
            out[i] = acc
        return out

    @njit(cache=True)
    def _csr_rmatvec_loop(indptr, indices, values, r, dim):
        n_rows = indptr.shape[0] - 1
        out = np.zeros(dim, dtype=np.float64)
        for i in range(n_rows):
            ri = r[i]
            for k in range(indptr[i], indptr[i + 1]):
                out[indices[k]] += values[k] * ri
        return out

    def nw_fill_numba(ref_ids, hyp_ids, match, sub, gap):
        return _nw_fill_loop(ref_ids, hyp_ids, float(match), float(sub), float(gap))

    def csr_matvec_numba(indptr, indices, values, w):
        return _csr_matvec_loop(indptr, indices, values, w)

    def csr_rmatvec_numba(indptr, indices, values, r, dim):
        return _csr_rmatvec_loop(indptr, indices, values, r, dim)


if NUMBA_ENABLED:
    nw_fill = nw_fill_numba
    csr_matvec = csr_matvec_numba
    csr_rmatvec = csr_rmatvec_numba
else:
    nw_fill = nw_fill_numpy
    csr_matvec = csr_matvec_numpy
    csr_rmatvec = csr_rmatvec_numpy
